"""Reference integration and trajectory datasets.

The integrator is the classic Dormand-Prince 5(4) embedded pair (seven
stages, FSAL) with a PI step-size controller and 4th-order accurate cubic
Hermite dense output over each accepted step.  Defaults are tight
(rtol 1e-10, atol 1e-12) because the solutions serve as ground truth for
the learned models.  A fixed-step mode bypasses the controller for
convergence-order studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, IntegrationError
from .systems import HamiltonianSystem
from .validation import as_box, as_float_array

__all__ = [
    "DenseSolution",
    "TrajectoryDataset",
    "integrate",
    "sample_states",
    "generate_dataset",
]

# Dormand-Prince 5(4) tableau.  The propagated solution is 5th order; B4
# gives the embedded 4th-order result used for the error estimate.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array(
    [
        [0, 0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    ]
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


@dataclass
class DenseSolution:
    """Accepted step endpoints plus Hermite interpolation between them."""

    ts: np.ndarray  # (n+1,) increasing
    ys: np.ndarray  # (n+1, dim)
    fs: np.ndarray  # (n+1, dim) vector field at the endpoints
    n_steps: int = 0
    n_rejected: int = 0

    def __call__(self, t):
        """Evaluate the solution at times t (scalar or array) within range."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.ts[0], self.ts[-1]
        if np.any(t_arr < lo - 1e-12) or np.any(t_arr > hi + 1e-12):
            raise DimensionError(
                f"interpolation time outside [{lo}, {hi}]"
            )
        t_arr = np.clip(t_arr, lo, hi)
        idx = np.clip(np.searchsorted(self.ts, t_arr, side="right") - 1, 0, len(self.ts) - 2)
        h = self.ts[idx + 1] - self.ts[idx]
        s = (t_arr - self.ts[idx]) / h
        y0, y1 = self.ys[idx], self.ys[idx + 1]
        f0, f1 = self.fs[idx], self.fs[idx + 1]
        s = s[:, None]
        h = h[:, None]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


def _as_field(sys_or_f):
    if isinstance(sys_or_f, HamiltonianSystem):
        return lambda t, y: sys_or_f.vector_field(y)
    return sys_or_f


def _initial_step(f, t0, y0, f0, rtol, atol):
    """Hairer's starting-step heuristic for a 5th-order method."""
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def integrate(
    sys_or_f,
    x0,
    t_end: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    fixed_step: float | None = None,
    max_steps: int = 10_000_000,
) -> DenseSolution:
    """Integrate dx/dt = f(t, x) from 0 to t_end with dense output.

    ``sys_or_f`` is a benchmark system (its vector field is used) or a
    callable ``f(t, y)``.  Raises :class:`IntegrationError` when the adaptive
    step size underflows below 1e-14 of the time span.
    """
    if t_end <= 0:
        raise DimensionError(f"t_end must be positive, got {t_end}")
    if fixed_step is None and (rtol <= 0 or atol <= 0):
        raise DimensionError("tolerances must be positive")
    f = _as_field(sys_or_f)
    y = as_float_array(x0, "x0").copy()
    t = 0.0
    k7 = f(t, y)
    ts, ys, fs = [t], [y.copy()], [k7.copy()]
    n_steps = n_rejected = 0

    if fixed_step is not None:
        h = float(fixed_step)
        if h <= 0:
            raise DimensionError("fixed_step must be positive")
    else:
        h = min(_initial_step(f, t, y, k7, rtol, atol), t_end)

    err_prev = 1.0
    K = np.empty((7, y.size))
    while t < t_end:
        if fixed_step is None and h < 1e-14 * t_end:
            raise IntegrationError(
                f"step size underflow at t={t:.6g} (h={h:.3g}); problem too stiff"
            )
        h = min(h, t_end - t)
        K[0] = k7  # FSAL: last stage of the accepted step
        for i in range(1, 6):
            K[i] = f(t + _C[i] * h, y + h * (_A[i, :i] @ K[:i]))
        y_new = y + h * (_B5[:6] @ K[:6])
        K[6] = f(t + h, y_new)

        if fixed_step is None:
            err_vec = h * (_E @ K)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((err_vec / scale) ** 2))
            if err > 1.0:  # reject and retry with a smaller step
                n_rejected += 1
                h *= max(0.2, min(1.0, 0.9 * err ** (-0.2)))
                continue
            fac = 0.9 * (err + 1e-16) ** (-0.7 / 5.0) * (err_prev + 1e-16) ** (0.4 / 5.0)
            err_prev = max(err, 1e-16)
            h_next = h * min(5.0, max(0.2, fac))
        else:
            h_next = h

        t = t + h
        y = y_new
        k7 = K[6]
        ts.append(t)
        ys.append(y.copy())
        fs.append(k7.copy())
        n_steps += 1
        if n_steps > max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps at t={t:.6g}")
        h = h_next

    return DenseSolution(
        np.array(ts), np.array(ys), np.array(fs), n_steps, n_rejected
    )


def sample_states(sys_or_f, x0, times, rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """States at the requested times (any order); one integration pass."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise DimensionError("sample times must be nonnegative")
    t_max = float(times.max())
    x0 = as_float_array(x0, "x0")
    if t_max == 0.0:
        return np.broadcast_to(x0, (times.size, x0.size)).copy()
    sol = integrate(sys_or_f, x0, t_max, rtol=rtol, atol=atol)
    out = np.empty((times.size, x0.size))
    zero = times == 0.0
    out[zero] = x0
    if np.any(~zero):
        out[~zero] = sol(times[~zero])
    return out


@dataclass
class TrajectoryDataset:
    """Sampled trajectories: exact initial conditions plus noisy observations.

    ``ics[n]`` is the exact initial condition of trajectory n; observation m
    of trajectory n is ``(sample_traj[i], sample_t[i], sample_y[i])`` rows
    with ``sample_traj`` indexing into ``ics``.
    """

    ics: np.ndarray  # (N, 2d)
    sample_traj: np.ndarray  # (S,) int
    sample_t: np.ndarray  # (S,)
    sample_y: np.ndarray  # (S, 2d)
    delta_t: float
    noise_std: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        self.ics = np.asarray(self.ics, dtype=float)
        self.sample_traj = np.asarray(self.sample_traj, dtype=int)
        self.sample_t = np.asarray(self.sample_t, dtype=float)
        self.sample_y = np.asarray(self.sample_y, dtype=float)
        if self.n_samples and (
            self.sample_traj.min() < 0 or self.sample_traj.max() >= len(self.ics)
        ):
            raise DimensionError("sample trajectory ids must index the initial conditions")
        if np.any(self.sample_t < 0) or np.any(self.sample_t > self.delta_t + 1e-12):
            raise DimensionError("sample times must lie in [0, delta_t]")

    @property
    def n_trajectories(self) -> int:
        return len(self.ics)

    @property
    def n_samples(self) -> int:
        return len(self.sample_t)

    @property
    def x0_per_sample(self) -> np.ndarray:
        return self.ics[self.sample_traj]


def generate_dataset(
    sys,
    omega,
    n_trajectories: int,
    m_samples: int,
    delta_t: float,
    noise_std: float = 0.0,
    seed: int = 0,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> TrajectoryDataset:
    """Sample initial conditions uniformly in the box and observe them.

    Sampling times are uniform in [0, delta_t] independently per trajectory;
    observations come from the reference integrator plus i.i.d. Gaussian
    noise per component.  Fully reproducible from the seed.
    """
    if n_trajectories < 1 or m_samples < 1:
        raise DimensionError("need at least one trajectory and one sample")
    if delta_t <= 0:
        raise DimensionError("delta_t must be positive")
    box = as_box(omega, 2 * sys.d)
    rng = np.random.default_rng(seed)
    ics = rng.uniform(box[:, 0], box[:, 1], size=(n_trajectories, 2 * sys.d))
    times = rng.uniform(0.0, delta_t, size=(n_trajectories, m_samples))
    noise = (
        rng.normal(0.0, noise_std, size=(n_trajectories, m_samples, 2 * sys.d))
        if noise_std > 0
        else np.zeros((n_trajectories, m_samples, 2 * sys.d))
    )
    traj_ids = np.repeat(np.arange(n_trajectories), m_samples)
    ys = np.empty((n_trajectories, m_samples, 2 * sys.d))
    for n in range(n_trajectories):
        ys[n] = sample_states(sys, ics[n], times[n], rtol=rtol, atol=atol) + noise[n]
    return TrajectoryDataset(
        ics=ics,
        sample_traj=traj_ids,
        sample_t=times.reshape(-1),
        sample_y=ys.reshape(-1, 2 * sys.d),
        delta_t=float(delta_t),
        noise_std=float(noise_std),
        seed=seed,
    )
