"""Long-time rollout and evaluation metrics.

A model trained on the window [0, delta_t] extends to arbitrary horizons by
composing its time-delta_t map: floor(t / delta_t) full windows followed by
the remainder map.  The metrics compare such rollouts against the reference
integrator: average relative state error and average relative energy
variation over sampled initial conditions, energy-drift series along single
trajectories, a log-log drift-growth slope, and Poincare sections for the
chaotic benchmark.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import mlp as mlpmod
from . import model as sfm
from .errors import DimensionError
from .integrate import integrate
from .systems import HamiltonianSystem
from .validation import as_box, as_float_array

__all__ = [
    "RolloutSpec",
    "MetricReport",
    "rollout",
    "rollout_path",
    "avg_relative_error",
    "avg_energy_variation",
    "energy_drift_series",
    "drift_slope",
    "poincare_section",
    "poincare_crossings",
    "evaluate_model",
]

log = logging.getLogger(__name__)


def _forward_b(model_obj, t, x):
    if isinstance(model_obj, sfm.SympFlowModel):
        return sfm._forward_b(model_obj, t, x)
    return mlpmod._forward_b(model_obj, t, x)


@dataclass(frozen=True)
class RolloutSpec:
    delta_t: float
    horizon: float
    step: float
    x0: np.ndarray

    def __post_init__(self):
        if not 0 < self.step <= self.delta_t <= self.horizon:
            raise DimensionError(
                "rollout needs 0 < step <= delta_t <= horizon, got "
                f"step={self.step}, delta_t={self.delta_t}, horizon={self.horizon}"
            )


@dataclass
class MetricReport:
    n_samples: int
    relative_errors: dict = field(default_factory=dict)
    energy_variations: dict = field(default_factory=dict)
    skipped_error: dict = field(default_factory=dict)
    skipped_energy: dict = field(default_factory=dict)
    drift_times: np.ndarray | None = None
    drift_values: np.ndarray | None = None
    drift_slope: float = float("nan")


def rollout(model_obj, delta_t: float, t: float, x0, project=None):
    """Extended flow: floor(t/delta_t) window maps, then the remainder map.

    ``project`` (optional) is applied after every window application, for
    models operating on the augmented dissipative phase space.
    """
    if delta_t <= 0:
        raise DimensionError(f"delta_t must be positive, got {delta_t}")
    t = float(t)
    if t < 0:
        raise DimensionError(f"t must be nonnegative, got {t}")
    x = as_float_array(x0, "x0").copy()
    k = int(np.floor(t / delta_t))
    rem = t - delta_t * k
    for _ in range(k):
        x = _forward_b(model_obj, delta_t, x[None, :])[0]
        if project is not None:
            x = project(x)
    if rem > 0.0:
        x = _forward_b(model_obj, rem, x[None, :])[0]
        if project is not None:
            x = project(x)
    return x


def rollout_path(model_obj, spec: RolloutSpec, project=None):
    """Sampled rollout at t = 0, step, 2 step, ..., horizon.

    Within each window the remainder evaluations run as one batch from the
    current base point; every sample agrees with an individual ``rollout``
    call at that time.  Returns ``(times, states)``.
    """
    n = int(np.floor(spec.horizon / spec.step + 1e-9))
    times = np.arange(n + 1) * spec.step
    base = as_float_array(spec.x0, "x0").copy()
    window = np.floor(times / spec.delta_t).astype(int)
    out = np.empty((times.size, base.size))
    for k in range(window.max() + 1):
        sel = window == k
        if np.any(sel):
            rem = times[sel] - spec.delta_t * k
            states = np.broadcast_to(base, (int(sel.sum()), base.size)).copy()
            pos = rem > 0
            if np.any(pos):
                mapped = _forward_b(model_obj, rem[pos], states[pos])
                if project is not None:
                    mapped = project(mapped)
                states[pos] = mapped
            out[sel] = states
        if k < window.max():
            base = _forward_b(model_obj, spec.delta_t, base[None, :])[0]
            if project is not None:
                base = project(base)
    return times, out


def avg_relative_error(
    model_obj,
    sys: HamiltonianSystem,
    omega,
    n_samples: int,
    k: int,
    delta_t: float,
    seed: int = 0,
    project=None,
    ref_states=None,
    ics=None,
) -> float:
    """Mean of |psi(k dt, x_i) - ref(k dt, x_i)| / |ref(k dt, x_i)| over the box.

    Samples with reference norm below 1e-12 are skipped (and logged).
    ``ref_states``/``ics`` allow reuse of precomputed references.
    """
    if n_samples < 1 or k < 1:
        raise DimensionError("need n_samples >= 1 and k >= 1")
    ics, ref = _references(sys, omega, n_samples, [k], delta_t, seed, ics, ref_states)
    vals, skipped = _relative_error_at(model_obj, sys, ics, ref[k], k, delta_t, project)
    if skipped:
        log.warning("avg_relative_error: skipped %d near-zero references", skipped)
    return vals


def avg_energy_variation(
    model_obj,
    sys: HamiltonianSystem,
    omega,
    n_samples: int,
    k: int,
    delta_t: float,
    seed: int = 0,
    project=None,
    ics=None,
) -> float:
    """Mean of |H(psi(k dt, x_i)) - H(x_i)| / |H(x_i)| over sampled x_i."""
    if n_samples < 1 or k < 1:
        raise DimensionError("need n_samples >= 1 and k >= 1")
    if ics is None:
        ics = _draw_ics(sys, omega, n_samples, seed)
    val, skipped = _energy_variation_at(model_obj, sys, ics, k, delta_t, project)
    if skipped:
        log.warning("avg_energy_variation: skipped %d near-zero energies", skipped)
    return val


def _draw_ics(sys, omega, n_samples, seed):
    box = as_box(omega, 2 * sys.d)
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1], size=(n_samples, 2 * sys.d))


def _references(sys, omega, n_samples, ks, delta_t, seed, ics=None, ref_states=None):
    """Reference states at the requested multiples of delta_t per sample."""
    if ics is None:
        ics = _draw_ics(sys, omega, n_samples, seed)
    if ref_states is None:
        t_max = max(ks) * delta_t
        ref_states = {k: np.empty_like(ics) for k in ks}
        for i, x0 in enumerate(ics):
            sol = integrate(sys, x0, t_max)
            for k in ks:
                ref_states[k][i] = sol(k * delta_t)
    return ics, ref_states


def _relative_error_at(model_obj, sys, ics, refs, k, delta_t, project):
    num = []
    skipped = 0
    for x0, ref in zip(ics, refs):
        norm = np.linalg.norm(ref)
        if norm < 1e-12:
            skipped += 1
            continue
        pred = rollout(model_obj, delta_t, k * delta_t, x0, project=project)
        num.append(np.linalg.norm(pred - ref) / norm)
    if not num:
        raise DimensionError("all reference states were near zero")
    return float(np.mean(num)), skipped


def _energy_variation_at(model_obj, sys, ics, k, delta_t, project):
    vals = []
    skipped = 0
    h0 = sys.hamiltonian(ics)
    for x0, e0 in zip(ics, np.atleast_1d(h0)):
        if abs(e0) < 1e-12:
            skipped += 1
            continue
        pred = rollout(model_obj, delta_t, k * delta_t, x0, project=project)
        vals.append(abs(sys.hamiltonian(pred) - e0) / abs(e0))
    if not vals:
        raise DimensionError("all initial energies were near zero")
    return float(np.mean(vals)), skipped


def energy_drift_series(
    model_obj,
    sys: HamiltonianSystem,
    x0,
    horizon: float,
    step: float,
    delta_t: float,
    project=None,
):
    """(t, H(psi_t(x0)) - H(x0)) along the rollout; first entry is zero."""
    spec = RolloutSpec(delta_t=delta_t, horizon=horizon, step=step, x0=np.asarray(x0, float))
    times, states = rollout_path(model_obj, spec, project=project)
    h0 = sys.hamiltonian(np.asarray(x0, dtype=float))
    return times, sys.hamiltonian(states) - h0


def drift_slope(series) -> float:
    """Least-squares slope of log|drift| vs log t over t in [10, T].

    Entries with |drift| below 1e-14 are ignored.
    """
    times, values = series
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (times >= 10.0) & (np.abs(values) >= 1e-14)
    if mask.sum() < 2:
        raise DimensionError("not enough usable points for a slope estimate")
    return float(np.polyfit(np.log(times[mask]), np.log(np.abs(values[mask])), 1)[0])


def poincare_crossings(path):
    """Crossings of q_x = 0 with p_x > 0, linearly refined between samples.

    ``path`` is ``(times, states)`` with 4-dimensional states ordered
    (q_x, q_y, p_x, p_y).  Returns ``(t_cross, states_cross)`` with the
    crossing coordinate exactly zeroed.
    """
    times, states = path
    states = np.asarray(states, dtype=float)
    times = np.asarray(times, dtype=float)
    if states.ndim != 2 or states.shape[1] != 4:
        raise DimensionError("Poincare sections need 4-dimensional states")
    qx = states[:, 0]
    sign_change = qx[:-1] * qx[1:] < 0.0
    idx = np.nonzero(sign_change)[0]
    if idx.size == 0:
        return np.empty(0), np.empty((0, 4))
    theta = qx[idx] / (qx[idx] - qx[idx + 1])
    crossed = states[idx] + theta[:, None] * (states[idx + 1] - states[idx])
    t_cross = times[idx] + theta * (times[idx + 1] - times[idx])
    keep = crossed[:, 2] > 0.0
    crossed = crossed[keep]
    crossed[:, 0] = 0.0
    return t_cross[keep], crossed


def poincare_section(path) -> np.ndarray:
    """Recorded (q_y, p_y) pairs at the refined crossings."""
    _, crossed = poincare_crossings(path)
    return crossed[:, [1, 3]]


def evaluate_model(
    model_obj,
    sys: HamiltonianSystem,
    omega,
    delta_t: float,
    n_samples: int = 100,
    ks=(1, 10, 100),
    seed: int = 0,
    drift_x0=None,
    drift_horizon: float | None = None,
    drift_step: float = 0.1,
    project=None,
) -> MetricReport:
    """Metric bundle: per-k errors and energy variations, drift series, slope."""
    ks = sorted(int(k) for k in ks)
    ics, refs = _references(sys, omega, n_samples, ks, delta_t, seed)
    report = MetricReport(n_samples=n_samples)
    for k in ks:
        err, sk_e = _relative_error_at(model_obj, sys, ics, refs[k], k, delta_t, project)
        var, sk_h = _energy_variation_at(model_obj, sys, ics, k, delta_t, project)
        report.relative_errors[k] = err
        report.energy_variations[k] = var
        report.skipped_error[k] = sk_e
        report.skipped_energy[k] = sk_h
    if drift_x0 is not None and drift_horizon is not None:
        times, vals = energy_drift_series(
            model_obj, sys, drift_x0, drift_horizon, drift_step, delta_t, project=project
        )
        report.drift_times = times
        report.drift_values = vals
        try:
            report.drift_slope = drift_slope((times, vals))
        except DimensionError:
            report.drift_slope = float("nan")
    return report
