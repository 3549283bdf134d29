"""Losses, their exact parameter gradients, Adam, and the training regimes.

Four objectives are supported:

* supervised mean squared error between the flow map and observed samples,
* the residual of the governing equations d/dt psi = J grad H(psi) at
  collocation points,
* Hamiltonian matching: the model's extracted Hamiltonian against the target
  energy (flow models with shear layers only),
* energy regularisation for the baseline MLP: conservation of the target
  energy along the map.

Gradients are assembled by hand from the layer-level pullbacks; every term
is validated against central finite differences in the test suite.  The
regimes are: ``residual_only`` (residual loss), ``regularized`` (residual
plus matching/energy term), ``mixed`` (regularized phase then a residual
fine-tune), and ``supervised``.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import extraction, mlp, model as sfm, potential as pot
from .errors import ConfigError, DimensionError, TrainingDivergedError
from .integrate import TrajectoryDataset
from .model import SympFlowModel
from .mlp import MlpFlowModel
from .systems import HamiltonianSystem
from .validation import as_box

__all__ = [
    "TrainConfig",
    "TrainReport",
    "AdamState",
    "adam_step",
    "sample_collocation",
    "loss_supervised",
    "loss_residual",
    "loss_ham_match",
    "loss_energy_reg",
    "total_loss",
    "train",
    "build_model",
]

REGIMES = ("residual_only", "regularized", "mixed", "supervised")
MODEL_KINDS = ("sympflow", "mlp")


@dataclass
class TrainConfig:
    model_kind: str = "sympflow"
    regime: str = "regularized"
    epochs: int = 5000
    fine_tune_epochs: int = 0
    learning_rate: float = 1e-3
    batch_collocation: int = 1024
    batch_matching: int = 1024
    delta_t: float = 1.0
    omega: tuple = (-1.2, 1.2)
    seed: int = 0
    derivative_mode: str = "exact"
    layers: int = 3
    hidden: int = 10
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"model_kind must be one of {MODEL_KINDS}")
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}")
        if self.epochs < 0 or self.fine_tune_epochs < 0:
            raise ConfigError("epoch counts must be nonnegative")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.delta_t <= 0:
            raise ConfigError("delta_t must be positive")
        if self.derivative_mode not in ("exact", "fd"):
            raise ConfigError("derivative_mode must be 'exact' or 'fd'")
        if self.layers < 1 or self.hidden < 1:
            raise ConfigError("layers and hidden must be positive")


@dataclass
class TrainReport:
    loss_history: dict = field(default_factory=dict)
    epochs_run: int = 0
    wall_clock_s: float = 0.0
    seed: int = 0
    final_loss: float = float("nan")

    def record(self, **components):
        for key, val in components.items():
            self.loss_history.setdefault(key, []).append(float(val))


def build_model(config: TrainConfig, d: int):
    """Seeded model construction matching the configured kind and size."""
    rng = np.random.default_rng(config.seed)
    if config.model_kind == "sympflow":
        return sfm.random_sympflow(d, config.layers, rng, h=config.hidden)
    return mlp.random_mlp_flow(d, config.layers, rng, hidden=config.hidden)


# ---------------------------------------------------------------------------
# Collocation sampling.
# ---------------------------------------------------------------------------


def _draw_collocation(rng, box, delta_t, n):
    t = rng.uniform(0.0, delta_t, size=n)
    x = rng.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0]))
    return t, x


def sample_collocation(omega, delta_t: float, n: int, seed: int, dim: int | None = None):
    """Uniform i.i.d. (t, x) pairs in [0, delta_t] x box, reproducible from seed."""
    if n < 1:
        raise DimensionError("need at least one collocation point")
    if delta_t <= 0:
        raise DimensionError("delta_t must be positive")
    omega = np.asarray(omega, dtype=float)
    if dim is None:
        dim = omega.shape[0] if omega.ndim == 2 else 2
    box = as_box(omega, dim)
    return _draw_collocation(np.random.default_rng(seed), box, delta_t, n)


# ---------------------------------------------------------------------------
# Adam.
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """Textbook Adam update with bias correction; returns (params, state)."""
    if params.shape != grads.shape:
        raise DimensionError("params and grads must have matching shapes")
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


# ---------------------------------------------------------------------------
# Loss values.
# ---------------------------------------------------------------------------


def _forward_any(model_obj, t, x):
    if isinstance(model_obj, SympFlowModel):
        return sfm._forward_b(model_obj, t, x)
    return mlp._forward_b(model_obj, t, x)


def _time_derivative_any(model_obj, t, x, mode):
    fn = sfm if isinstance(model_obj, SympFlowModel) else mlp
    if mode == "exact":
        return fn._time_derivative_b(model_obj, t, x)
    h = 1e-4
    return (fn._forward_b(model_obj, t + h, x) - fn._forward_b(model_obj, t - h, x)) / (2 * h)


def loss_supervised(model_obj, dataset: TrajectoryDataset) -> float:
    """Mean squared error of the flow map against the observed samples."""
    if dataset.n_samples == 0:
        raise DimensionError("dataset is empty")
    pred = _forward_any(model_obj, dataset.sample_t, dataset.x0_per_sample)
    return float(np.mean(np.sum((pred - dataset.sample_y) ** 2, axis=1)))


def loss_residual(model_obj, points, sys: HamiltonianSystem, mode: str = "exact") -> float:
    """Mean squared residual of d/dt psi - J grad H(psi) over (t_i, x_i)."""
    t, x = points
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if t.size == 0:
        raise DimensionError("empty collocation batch")
    v = _time_derivative_any(model_obj, t, x, mode)
    rhs = sys.vector_field(_forward_any(model_obj, t, x))
    return float(np.mean(np.sum((v - rhs) ** 2, axis=1)))


def loss_ham_match(model_obj, points, sys: HamiltonianSystem) -> float:
    """Mean squared mismatch between the extracted Hamiltonian and H."""
    if not isinstance(model_obj, SympFlowModel):
        raise ConfigError("Hamiltonian matching is defined only for sympflow models")
    t, x = points
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if t.size == 0:
        raise DimensionError("empty matching batch")
    vals = extraction._extract_b(model_obj, t, x)
    return float(np.mean((vals - sys.hamiltonian(x)) ** 2))


def loss_energy_reg(model_obj, points, sys: HamiltonianSystem) -> float:
    """Mean squared drift of the target energy along the map (MLP term)."""
    t, x = points
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if t.size == 0:
        raise DimensionError("empty matching batch")
    pred = _forward_any(model_obj, t, x)
    return float(np.mean((sys.hamiltonian(pred) - sys.hamiltonian(x)) ** 2))


def total_loss(
    model_obj,
    regime: str,
    sys: HamiltonianSystem | None = None,
    dataset: TrajectoryDataset | None = None,
    residual_batch=None,
    matching_batch=None,
    mode: str = "exact",
) -> float:
    """Dispatch the configured regime to its constituent terms."""
    if regime == "supervised":
        return loss_supervised(model_obj, dataset)
    value = loss_residual(model_obj, residual_batch, sys, mode)
    if regime in ("regularized", "mixed"):
        batch = matching_batch if matching_batch is not None else residual_batch
        if isinstance(model_obj, SympFlowModel):
            value += loss_ham_match(model_obj, batch, sys)
        else:
            value += loss_energy_reg(model_obj, batch, sys)
    return value


# ---------------------------------------------------------------------------
# Gradients: shear-layer model.
# ---------------------------------------------------------------------------


def _sf_zero_grads(model_obj):
    return [np.zeros(n.n_params) for vq, vp in model_obj.layers for n in (vq, vp)]


def _sf_flat(grads):
    return np.concatenate(grads)


def _sf_forward_states(model_obj, t, x):
    """Forward pass retaining the input of every shear layer."""
    d = model_obj.d
    states = []
    for vq, vp in model_obj.layers:
        states.append(x)
        q, p = x[:, :d], x[:, d:]
        x = np.concatenate([q, p - sfm._shear_delta(vq, t, q)], axis=1)
        states.append(x)
        q, p = x[:, :d], x[:, d:]
        x = np.concatenate([q + sfm._shear_delta(vp, t, p), p], axis=1)
    return x, states


def _sf_forward_vjp(model_obj, t, x, W):
    """Pullback of cotangents W through the full layer chain.

    Returns ``(gx, gtheta_flat)``.
    """
    d = model_obj.d
    _, states = _sf_forward_states(model_obj, t, x)
    grads = _sf_zero_grads(model_obj)
    w = W
    for i in range(model_obj.n_layers - 1, -1, -1):
        vq, vp = model_obj.layers[i]
        x_mid = states[2 * i + 1]
        x_in = states[2 * i]
        wq, wp = w[:, :d], w[:, d:]
        # momentum shear: q' = q + (grad Vp(t,p) - grad Vp(0,p))
        gin_t, gA = pot.grad_input_vjp(vp, t, x_mid[:, d:], wq)
        gin_0, gB = pot.grad_input_vjp(vp, 0.0, x_mid[:, d:], wq)
        grads[2 * i + 1] += gA - gB
        wp = wp + (gin_t[:, :d] - gin_0[:, :d])
        # position shear: p' = p - (grad Vq(t,q) - grad Vq(0,q))
        gin_t, gA = pot.grad_input_vjp(vq, t, x_in[:, :d], wp)
        gin_0, gB = pot.grad_input_vjp(vq, 0.0, x_in[:, :d], wp)
        grads[2 * i] += -(gA - gB)
        wq = wq - (gin_t[:, :d] - gin_0[:, :d])
        w = np.concatenate([wq, wp], axis=1)
    return w, _sf_flat(grads)


def _sf_velocity_states(model_obj, t, x):
    """Forward x- and v-chains with the per-layer inputs retained."""
    d = model_obj.d
    v = np.zeros_like(x)
    xs, vs = [], []
    for vq, vp in model_obj.layers:
        xs.append(x)
        vs.append(v)
        q, p = x[:, :d], x[:, d:]
        dg = pot.mixed_b(vq, t, q)
        hv = pot.hvp_b(vq, t, q, v[:, :d]) - pot.hvp_b(vq, 0.0, q, v[:, :d])
        v = np.concatenate([v[:, :d], v[:, d:] - dg - hv], axis=1)
        x = np.concatenate([q, p - sfm._shear_delta(vq, t, q)], axis=1)
        xs.append(x)
        vs.append(v)
        q, p = x[:, :d], x[:, d:]
        dg = pot.mixed_b(vp, t, p)
        hv = pot.hvp_b(vp, t, p, v[:, d:]) - pot.hvp_b(vp, 0.0, p, v[:, d:])
        v = np.concatenate([v[:, :d] + dg + hv, v[:, d:]], axis=1)
        x = np.concatenate([q + sfm._shear_delta(vp, t, p), p], axis=1)
    return x, v, xs, vs


def _sf_velocity_vjp(model_obj, t, x, Wx, Wv):
    """Joint pullback of cotangents on (forward, time_derivative).

    The velocity chain reads the state chain, so cotangents on it feed the
    state cotangent through third-order contractions of the potentials.
    Returns ``(gx, gtheta_flat)``.
    """
    d = model_obj.d
    _, _, xs, vs = _sf_velocity_states(model_obj, t, x)
    grads = _sf_zero_grads(model_obj)
    wx, wv = Wx, Wv
    for i in range(model_obj.n_layers - 1, -1, -1):
        vq, vp = model_obj.layers[i]
        x_mid, v_mid = xs[2 * i + 1], vs[2 * i + 1]
        x_in, v_in = xs[2 * i], vs[2 * i]

        # momentum shear backward
        p_mid = x_mid[:, d:]
        vp_mid = v_mid[:, d:]
        wq, wp = wx[:, :d], wx[:, d:]
        wvq, wvp = wv[:, :d], wv[:, d:]
        gin_t, gA = pot.grad_input_vjp(vp, t, p_mid, wq)
        gin_0, gB = pot.grad_input_vjp(vp, 0.0, p_mid, wq)
        gm, gC = pot.mixed_vjp(vp, t, p_mid, wvq)
        gq_t, gv_t, gD = pot.hvp_vjp(vp, t, p_mid, vp_mid, wvq)
        gq_0, gv_0, gE = pot.hvp_vjp(vp, 0.0, p_mid, vp_mid, wvq)
        grads[2 * i + 1] += (gA - gB) + gC + (gD - gE)
        wp = (
            wp
            + (gin_t[:, :d] - gin_0[:, :d])
            + gm[:, :d]
            + (gq_t - gq_0)
        )
        wvp = wvp + (gv_t - gv_0)
        wx = np.concatenate([wq, wp], axis=1)
        wv = np.concatenate([wvq, wvp], axis=1)

        # position shear backward
        q_in = x_in[:, :d]
        vq_in = v_in[:, :d]
        wq, wp = wx[:, :d], wx[:, d:]
        wvq, wvp = wv[:, :d], wv[:, d:]
        gin_t, gA = pot.grad_input_vjp(vq, t, q_in, wp)
        gin_0, gB = pot.grad_input_vjp(vq, 0.0, q_in, wp)
        gm, gC = pot.mixed_vjp(vq, t, q_in, wvp)
        gq_t, gv_t, gD = pot.hvp_vjp(vq, t, q_in, vq_in, wvp)
        gq_0, gv_0, gE = pot.hvp_vjp(vq, 0.0, q_in, vq_in, wvp)
        grads[2 * i] += -(gA - gB) - gC - (gD - gE)
        wq = (
            wq
            - (gin_t[:, :d] - gin_0[:, :d])
            - gm[:, :d]
            - (gq_t - gq_0)
        )
        wvq = wvq - (gv_t - gv_0)
        wx = np.concatenate([wq, wp], axis=1)
        wv = np.concatenate([wvq, wvp], axis=1)
    return wx, _sf_flat(grads)


# ---------------------------------------------------------------------------
# Loss gradients (value, flat gradient) per term.
# ---------------------------------------------------------------------------


def _grad_supervised(model_obj, dataset: TrajectoryDataset):
    t = dataset.sample_t
    x0 = dataset.x0_per_sample
    pred = _forward_any(model_obj, t, x0)
    resid = pred - dataset.sample_y
    value = float(np.mean(np.sum(resid**2, axis=1)))
    W = (2.0 / len(t)) * resid
    if isinstance(model_obj, SympFlowModel):
        _, g = _sf_forward_vjp(model_obj, t, x0, W)
    else:
        _, g = mlp.forward_vjp(model_obj, t, x0, W)
    return value, g


def _grad_residual(model_obj, points, sys, mode):
    t, x = points
    B = len(t)
    is_sf = isinstance(model_obj, SympFlowModel)
    if is_sf:
        x_out, v_out, _, _ = _sf_velocity_states(model_obj, t, x)
        if mode == "fd":
            h = 1e-4
            v_out = (sfm._forward_b(model_obj, t + h, x) - sfm._forward_b(model_obj, t - h, x)) / (2 * h)
    else:
        x_out = mlp._forward_b(model_obj, t, x)
        v_out = _time_derivative_any(model_obj, t, x, mode)
    rhs = sys.vector_field(x_out)
    resid = v_out - rhs
    value = float(np.mean(np.sum(resid**2, axis=1)))
    Wv = (2.0 / B) * resid
    # x_out enters through -J grad H(x_out)
    jac = sys.vector_field_jacobian(x_out)
    Wx = -np.einsum("bij,bi->bj", jac, Wv)
    if is_sf:
        if mode == "exact":
            _, g = _sf_velocity_vjp(model_obj, t, x, Wx, Wv)
        else:
            h = 1e-4
            _, g_plus = _sf_forward_vjp(model_obj, t + h, x, Wv)
            _, g_minus = _sf_forward_vjp(model_obj, t - h, x, Wv)
            _, g_x = _sf_forward_vjp(model_obj, t, x, Wx)
            g = (g_plus - g_minus) / (2 * h) + g_x
    else:
        if mode == "exact":
            _, g_v = mlp.time_derivative_vjp(model_obj, t, x, Wv)
        else:
            h = 1e-4
            _, g_plus = mlp.forward_vjp(model_obj, t + h, x, Wv)
            _, g_minus = mlp.forward_vjp(model_obj, t - h, x, Wv)
            g_v = (g_plus - g_minus) / (2 * h)
        _, g_x = mlp.forward_vjp(model_obj, t, x, Wx)
        g = g_v + g_x
    return value, g


def _grad_ham_match(model_obj, points, sys):
    t, x = points
    vals = extraction._extract_b(model_obj, t, x)
    err = vals - sys.hamiltonian(x)
    value = float(np.mean(err**2))
    _, g = extraction.extract_vjp(model_obj, t, x, (2.0 / len(t)) * err)
    return value, g


def _grad_energy_reg(model_obj, points, sys):
    t, x = points
    pred = mlp._forward_b(model_obj, t, x)
    err = sys.hamiltonian(pred) - sys.hamiltonian(x)
    value = float(np.mean(err**2))
    W = (2.0 / len(t)) * err[:, None] * sys.gradient(pred)
    _, g = mlp.forward_vjp(model_obj, t, x, W)
    return value, g


def loss_and_grad(
    model_obj,
    regime: str,
    sys=None,
    dataset=None,
    residual_batch=None,
    matching_batch=None,
    mode: str = "exact",
):
    """Total loss with its exact parameter gradient; returns (value, grad, parts)."""
    if regime == "supervised":
        value, g = _grad_supervised(model_obj, dataset)
        return value, g, {"supervised": value}
    value, g = _grad_residual(model_obj, residual_batch, sys, mode)
    parts = {"residual": value}
    if regime in ("regularized", "mixed"):
        batch = matching_batch if matching_batch is not None else residual_batch
        if isinstance(model_obj, SympFlowModel):
            v2, g2 = _grad_ham_match(model_obj, batch, sys)
            parts["matching"] = v2
        else:
            v2, g2 = _grad_energy_reg(model_obj, batch, sys)
            parts["energy_reg"] = v2
        value += v2
        g = g + g2
    return value, g, parts


# ---------------------------------------------------------------------------
# Training loop.
# ---------------------------------------------------------------------------


def _params_of(model_obj):
    if isinstance(model_obj, SympFlowModel):
        return sfm.params_to_vector(model_obj)
    return mlp.params_to_vector(model_obj)


def _with_params(model_obj, vec):
    if isinstance(model_obj, SympFlowModel):
        return sfm.model_with_params(model_obj, vec)
    return mlp.model_with_params(model_obj, vec)


def train(
    model_obj,
    config: TrainConfig,
    sys: HamiltonianSystem | None = None,
    dataset: TrajectoryDataset | None = None,
    checkpoint_fn=None,
):
    """Run the configured regime; returns (trained model, report).

    Unsupervised regimes draw fresh collocation batches every epoch from the
    configured box; the supervised regime draws uniform minibatches of size
    ``batch_collocation`` (full batch when the dataset is smaller).  The
    mixed regime runs ``epochs`` with the matching term, then
    ``fine_tune_epochs`` with the residual term alone.  Deterministic under
    the config seed.  Raises :class:`TrainingDivergedError` on a non-finite
    loss.
    """
    if config.regime == "supervised":
        if dataset is None:
            raise ConfigError("supervised training needs a dataset")
    elif sys is None:
        raise ConfigError("unsupervised training needs a system")

    rng = np.random.default_rng(config.seed)
    report = TrainReport(seed=config.seed)
    start = _time.perf_counter()
    params = _params_of(model_obj)
    state = AdamState.zeros(params.size)
    d = model_obj.d
    box = as_box(config.omega, 2 * d) if sys is not None else None

    phases = [(config.regime, config.epochs)]
    if config.regime == "mixed":
        phases.append(("residual_only", config.fine_tune_epochs))

    for phase_regime, n_epochs in phases:
        for _ in range(n_epochs):
            current = _with_params(model_obj, params)
            if phase_regime == "supervised":
                n = dataset.n_samples
                b = min(config.batch_collocation, n)
                if b < n:
                    idx = rng.integers(0, n, size=b)
                    batch = TrajectoryDataset(
                        ics=dataset.ics,
                        sample_traj=dataset.sample_traj[idx],
                        sample_t=dataset.sample_t[idx],
                        sample_y=dataset.sample_y[idx],
                        delta_t=dataset.delta_t,
                        noise_std=dataset.noise_std,
                        seed=dataset.seed,
                    )
                else:
                    batch = dataset
                value, grad, parts = loss_and_grad(current, "supervised", dataset=batch)
            else:
                residual_batch = _draw_collocation(
                    rng, box, config.delta_t, config.batch_collocation
                )
                matching_batch = None
                if phase_regime in ("regularized", "mixed"):
                    matching_batch = _draw_collocation(
                        rng, box, config.delta_t, config.batch_matching
                    )
                value, grad, parts = loss_and_grad(
                    current,
                    phase_regime,
                    sys=sys,
                    residual_batch=residual_batch,
                    matching_batch=matching_batch,
                    mode=config.derivative_mode,
                )
            if not np.isfinite(value) or not np.all(np.isfinite(grad)):
                report.wall_clock_s = _time.perf_counter() - start
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {report.epochs_run}", report
                )
            report.record(total=value, **parts)
            params, state = adam_step(params, grad, state, lr=config.learning_rate)
            report.epochs_run += 1
            if (
                checkpoint_fn is not None
                and config.checkpoint_every > 0
                and report.epochs_run % config.checkpoint_every == 0
            ):
                checkpoint_fn(report.epochs_run, _with_params(model_obj, params))

    trained = _with_params(model_obj, params)
    report.wall_clock_s = _time.perf_counter() - start
    if report.loss_history.get("total"):
        report.final_loss = report.loss_history["total"][-1]
    return trained, report
