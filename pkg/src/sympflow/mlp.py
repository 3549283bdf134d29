"""Unconstrained baseline flow: x + tanh(t) * MLP([x; t]).

The multiplicative tanh(t) factor enforces the identity at t = 0 for any
weights.  Layer widths are 2d+1 -> hidden -> ... -> hidden -> 2d with tanh
between affine maps and none after the last.  The baseline is generally not
symplectic; it exists as the comparison model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jet import Jet, chain_backward, chain_forward
from .errors import DimensionError
from .validation import as_phase_points

__all__ = [
    "MlpFlowModel",
    "random_mlp_flow",
    "zero_mlp_flow",
    "forward",
    "time_derivative",
    "param_count",
    "params_to_vector",
    "model_with_params",
]


@dataclass(frozen=True)
class MlpFlowModel:
    d: int
    weights: tuple[tuple[np.ndarray, np.ndarray], ...]  # (A_k, b_k) per affine map
    hidden: int = 10

    def __post_init__(self):
        widths = self._widths()
        for (A, b), (n_out, n_in) in zip(self.weights, widths):
            if A.shape != (n_out, n_in) or b.shape != (n_out,):
                raise DimensionError(
                    f"layer expects A {(n_out, n_in)} / b {(n_out,)}, "
                    f"got {A.shape} / {b.shape}"
                )
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
                raise DimensionError("weights contain non-finite entries")

    def _widths(self):
        dims = [2 * self.d + 1] + [self.hidden] * (len(self.weights) - 1) + [2 * self.d]
        return [(dims[k + 1], dims[k]) for k in range(len(self.weights))]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return param_count(self)


def param_count(model: MlpFlowModel) -> int:
    return sum(A.size + b.size for A, b in model.weights)


def random_mlp_flow(d: int, n_layers: int, rng: np.random.Generator, hidden: int = 10) -> MlpFlowModel:
    if n_layers < 1:
        raise DimensionError("MLP needs at least one affine layer")
    dims = [2 * d + 1] + [hidden] * (n_layers - 1) + [2 * d]
    weights = []
    for k in range(n_layers):
        s = np.sqrt(1.0 / dims[k])
        weights.append(
            (
                rng.uniform(-s, s, size=(dims[k + 1], dims[k])),
                rng.uniform(-s, s, size=(dims[k + 1],)),
            )
        )
    return MlpFlowModel(d, tuple(weights), hidden)


def zero_mlp_flow(d: int, n_layers: int, hidden: int = 10) -> MlpFlowModel:
    dims = [2 * d + 1] + [hidden] * (n_layers - 1) + [2 * d]
    weights = tuple(
        (np.zeros((dims[k + 1], dims[k])), np.zeros(dims[k + 1]))
        for k in range(n_layers)
    )
    return MlpFlowModel(d, weights, hidden)


def params_to_vector(model: MlpFlowModel) -> np.ndarray:
    pieces = []
    for A, b in model.weights:
        pieces.append(A.ravel())
        pieces.append(b)
    return np.concatenate(pieces)


def model_with_params(model: MlpFlowModel, vec: np.ndarray) -> MlpFlowModel:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (param_count(model),):
        raise DimensionError(
            f"parameter vector must have length {param_count(model)}, got {vec.shape}"
        )
    weights = []
    ofs = 0
    for A, b in model.weights:
        wA = vec[ofs : ofs + A.size].reshape(A.shape)
        ofs += A.size
        wb = vec[ofs : ofs + b.size].copy()
        ofs += b.size
        weights.append((wA, wb))
    return MlpFlowModel(model.d, tuple(weights), model.hidden)


def _u_jet(model, t, x, with_time_tangent=False):
    B = x.shape[0]
    tcol = np.broadcast_to(np.asarray(t, dtype=float), (B,))
    u0 = np.concatenate([x, tcol[:, None]], axis=1)
    xa = None
    if with_time_tangent:
        xa = np.zeros_like(u0)
        xa[:, -1] = 1.0
    return Jet(u0, xa)


def _forward_b(model: MlpFlowModel, t, x: np.ndarray) -> np.ndarray:
    jets = chain_forward(model.weights, _u_jet(model, t, x))
    tcol = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
    return x + np.tanh(tcol)[:, None] * jets[-1].x0


def forward(model: MlpFlowModel, t, x):
    """x + tanh(t) * net([x; t]); exact identity at t = 0."""
    xb, single = as_phase_points(x, 2 * model.d)
    out = _forward_b(model, t, xb)
    return out[0] if single else out


def _time_derivative_b(model: MlpFlowModel, t, x: np.ndarray) -> np.ndarray:
    jets = chain_forward(model.weights, _u_jet(model, t, x, with_time_tangent=True))
    tcol = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
    th = np.tanh(tcol)[:, None]
    return (1.0 - th * th) * jets[-1].x0 + th * jets[-1].xa


def time_derivative(model: MlpFlowModel, t, x, mode: str = "exact", fd_step: float = 1e-4):
    """Exact d/dt (sech^2(t) net + tanh(t) d_t net) or central FD."""
    xb, single = as_phase_points(x, 2 * model.d)
    if mode == "exact":
        out = _time_derivative_b(model, t, xb)
    elif mode == "fd":
        out = (_forward_b(model, t + fd_step, xb) - _forward_b(model, t - fd_step, xb)) / (
            2.0 * fd_step
        )
    else:
        raise ValueError(f"unknown derivative mode {mode!r}")
    return out[0] if single else out


def flatten_param_grads(g_params) -> np.ndarray:
    pieces = []
    for gA, gb in g_params:
        pieces.append(gA.ravel())
        pieces.append(gb)
    return np.concatenate(pieces)


def forward_vjp(model: MlpFlowModel, t, x: np.ndarray, W: np.ndarray):
    """Pullback of per-point cotangents W through the flow map.

    Returns ``(gx (B, 2d), gtheta flat)``; the identity part contributes W to
    gx and the tanh(t) factor scales the cotangent entering the net.
    """
    jets = chain_forward(model.weights, _u_jet(model, t, x))
    tcol = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
    th = np.tanh(tcol)[:, None]
    gin, gp = chain_backward(model.weights, jets, Jet(x0=th * W))
    return W + gin.x0[:, :-1], flatten_param_grads(gp)


def time_derivative_vjp(model: MlpFlowModel, t, x: np.ndarray, W: np.ndarray):
    """Pullback of cotangents on the exact time derivative."""
    jets = chain_forward(model.weights, _u_jet(model, t, x, with_time_tangent=True))
    tcol = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
    th = np.tanh(tcol)[:, None]
    gout = Jet(x0=(1.0 - th * th) * W, xa=th * W)
    gin, gp = chain_backward(model.weights, jets, gout)
    return gin.x0[:, :-1], flatten_param_grads(gp)
