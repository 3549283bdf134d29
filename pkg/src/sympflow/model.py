"""The symplectic flow map: shear layers, composition, inverses, derivatives.

A model with L layer pairs applies, in order for i = 1..L,

    position shear   (q, p) -> (q, p - (grad_q Vq_i(t, q) - grad_q Vq_i(0, q)))
    momentum shear   (q, p) -> (q + (grad_p Vp_i(t, p) - grad_p Vp_i(0, p)), p)

Each shear is the exact flow of a Hamiltonian depending on only one half of
the phase space, so the composition is symplectic for every t and reduces to
the identity at t = 0 (the parenthesised differences vanish bitwise).
Inverses flip the sign of the update and are exact because the coordinate
the update depends on is untouched.

All operations accept a single point of shape ``(2d,)`` or a batch
``(B, 2d)`` and are pure; ``t`` may be a scalar or a length-B array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import potential as pot
from .errors import DimensionError
from .potential import PotentialNet
from .validation import as_phase_points, check_finite_scalar

__all__ = [
    "SympFlowModel",
    "random_sympflow",
    "zero_sympflow",
    "apply_q_layer",
    "apply_p_layer",
    "invert_q_layer",
    "invert_p_layer",
    "forward",
    "time_derivative",
    "jacobian",
    "param_count",
    "params_to_vector",
    "model_with_params",
    "symplectic_matrix",
]


@dataclass(frozen=True)
class SympFlowModel:
    """L ordered pairs of potential nets (position net, momentum net)."""

    d: int
    layers: tuple[tuple[PotentialNet, PotentialNet], ...]

    def __post_init__(self):
        if len(self.layers) < 1:
            raise DimensionError("model needs at least one layer pair")
        for vq, vp in self.layers:
            if vq.d != self.d or vp.d != self.d:
                raise DimensionError("all potential nets must share the model dimension")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def h(self) -> int:
        return self.layers[0][0].h


def random_sympflow(d: int, n_layers: int, rng: np.random.Generator, h: int = 10) -> SympFlowModel:
    layers = tuple(
        (pot.random_potential_net(d, rng, h), pot.random_potential_net(d, rng, h))
        for _ in range(n_layers)
    )
    return SympFlowModel(d, layers)


def zero_sympflow(d: int, n_layers: int, h: int = 10) -> SympFlowModel:
    layers = tuple(
        (pot.zero_potential_net(d, h), pot.zero_potential_net(d, h))
        for _ in range(n_layers)
    )
    return SympFlowModel(d, layers)


def param_count(model: SympFlowModel) -> int:
    return sum(vq.n_params + vp.n_params for vq, vp in model.layers)


def params_to_vector(model: SympFlowModel) -> np.ndarray:
    pieces = []
    for vq, vp in model.layers:
        pieces.append(pot.params_to_vector(vq))
        pieces.append(pot.params_to_vector(vp))
    return np.concatenate(pieces)


def model_with_params(model: SympFlowModel, vec: np.ndarray) -> SympFlowModel:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (param_count(model),):
        raise DimensionError(
            f"parameter vector must have length {param_count(model)}, got {vec.shape}"
        )
    layers = []
    ofs = 0
    for vq, vp in model.layers:
        layers.append(
            (
                pot.net_with_params(vq, vec[ofs : ofs + vq.n_params]),
                pot.net_with_params(vp, vec[ofs + vq.n_params : ofs + vq.n_params + vp.n_params]),
            )
        )
        ofs += vq.n_params + vp.n_params
    return SympFlowModel(model.d, tuple(layers))


def symplectic_matrix(d: int) -> np.ndarray:
    """Canonical structure matrix [[0, I], [-I, 0]]."""
    J = np.zeros((2 * d, 2 * d))
    J[:d, d:] = np.eye(d)
    J[d:, :d] = -np.eye(d)
    return J


# ---------------------------------------------------------------------------
# Shear layers.  Batched kernels take x (B, 2d); t scalar or (B,).
# ---------------------------------------------------------------------------


def _shear_delta(net: PotentialNet, t, y: np.ndarray) -> np.ndarray:
    """grad V(t, y) - grad V(0, y) for the half-state y the net reads."""
    g_t, _ = pot.grad_time_b(net, t, y)
    g_0, _ = pot.grad_time_b(net, 0.0, y)
    return g_t - g_0


def _q_layer_b(net, t, x, sign=1.0):
    d = net.d
    q, p = x[:, :d], x[:, d:]
    return np.concatenate([q, p - sign * _shear_delta(net, t, q)], axis=1)


def _p_layer_b(net, t, x, sign=1.0):
    d = net.d
    q, p = x[:, :d], x[:, d:]
    return np.concatenate([q + sign * _shear_delta(net, t, p), p], axis=1)


def _layer_op(net, t, x, kernel):
    xb, single = as_phase_points(x, 2 * net.d)
    t = _check_time(t, xb.shape[0])
    out = kernel(net, t, xb)
    return out[0] if single else out


def _check_time(t, batch):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DimensionError("t must be finite")
    if t.ndim == 0:
        return float(t)
    if t.shape != (batch,):
        raise DimensionError(f"t must be scalar or shape ({batch},), got {t.shape}")
    return t


def apply_q_layer(net: PotentialNet, t, x):
    """Position shear: update p from the q-potential, q untouched."""
    return _layer_op(net, t, x, _q_layer_b)


def apply_p_layer(net: PotentialNet, t, x):
    """Momentum shear: update q from the p-potential, p untouched."""
    return _layer_op(net, t, x, _p_layer_b)


def invert_q_layer(net: PotentialNet, t, x):
    """Exact inverse of the position shear (sign-flipped update)."""
    return _layer_op(net, t, x, lambda n, tt, xx: _q_layer_b(n, tt, xx, sign=-1.0))


def invert_p_layer(net: PotentialNet, t, x):
    """Exact inverse of the momentum shear."""
    return _layer_op(net, t, x, lambda n, tt, xx: _p_layer_b(n, tt, xx, sign=-1.0))


# ---------------------------------------------------------------------------
# Full map.
# ---------------------------------------------------------------------------


def _forward_b(model: SympFlowModel, t, x: np.ndarray) -> np.ndarray:
    for vq, vp in model.layers:
        x = _q_layer_b(vq, t, x)
        x = _p_layer_b(vp, t, x)
    return x


def forward(model: SympFlowModel, t, x):
    """Apply the full layer composition at time t; identity at t = 0."""
    xb, single = as_phase_points(x, 2 * model.d)
    t = _check_time(t, xb.shape[0])
    out = _forward_b(model, t, xb)
    return out[0] if single else out


def _time_derivative_b(model: SympFlowModel, t, x: np.ndarray) -> np.ndarray:
    """Exact d/dt of the composition via tangent propagation through layers."""
    d = model.d
    v = np.zeros_like(x)
    for vq, vp in model.layers:
        q, p = x[:, :d], x[:, d:]
        # position shear: explicit time partial plus Hessian difference acting
        # on the incoming q-velocity
        dg = pot.mixed_b(vq, t, q)
        hv = pot.hvp_b(vq, t, q, v[:, :d]) - pot.hvp_b(vq, 0.0, q, v[:, :d])
        v = np.concatenate([v[:, :d], v[:, d:] - dg - hv], axis=1)
        x = np.concatenate([q, p - _shear_delta(vq, t, q)], axis=1)
        q, p = x[:, :d], x[:, d:]
        dg = pot.mixed_b(vp, t, p)
        hv = pot.hvp_b(vp, t, p, v[:, d:]) - pot.hvp_b(vp, 0.0, p, v[:, d:])
        v = np.concatenate([v[:, :d] + dg + hv, v[:, d:]], axis=1)
        x = np.concatenate([q + _shear_delta(vp, t, p), p], axis=1)
    return v


def time_derivative(model: SympFlowModel, t, x, mode: str = "exact", fd_step: float = 1e-4):
    """d/dt of the flow at fixed x; exact by default, central FD when mode='fd'."""
    xb, single = as_phase_points(x, 2 * model.d)
    t = _check_time(t, xb.shape[0])
    if mode == "exact":
        out = _time_derivative_b(model, t, xb)
    elif mode == "fd":
        out = (_forward_b(model, t + fd_step, xb) - _forward_b(model, t - fd_step, xb)) / (
            2.0 * fd_step
        )
    else:
        raise ValueError(f"unknown derivative mode {mode!r}")
    return out[0] if single else out


def _tangents_b(model: SympFlowModel, t, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Push tangent vectors v through the layer chain at fixed t."""
    d = model.d
    for vq, vp in model.layers:
        q, p = x[:, :d], x[:, d:]
        hv = pot.hvp_b(vq, t, q, v[:, :d]) - pot.hvp_b(vq, 0.0, q, v[:, :d])
        v = np.concatenate([v[:, :d], v[:, d:] - hv], axis=1)
        x = np.concatenate([q, p - _shear_delta(vq, t, q)], axis=1)
        q, p = x[:, :d], x[:, d:]
        hv = pot.hvp_b(vp, t, p, v[:, d:]) - pot.hvp_b(vp, 0.0, p, v[:, d:])
        v = np.concatenate([v[:, :d] + hv, v[:, d:]], axis=1)
        x = np.concatenate([q + _shear_delta(vp, t, p), p], axis=1)
    return v


def jacobian(model: SympFlowModel, t, x) -> np.ndarray:
    """Exact Jacobian of x -> forward(model, t, x), assembled column by column.

    The 2d basis tangents are propagated through the layer chain as one batch
    of Hessian-vector products.
    """
    xb, single = as_phase_points(x, 2 * model.d)
    if not single:
        raise DimensionError("jacobian expects a single phase point")
    t = check_finite_scalar(t, "t")
    n = 2 * model.d
    pts = np.repeat(xb, n, axis=0)
    tangents = np.eye(n)
    cols = _tangents_b(model, t, pts, tangents)
    return cols.T.copy()
