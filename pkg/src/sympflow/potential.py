"""Scalar potential networks and their exact derivative quantities.

A :class:`PotentialNet` is a fixed two-hidden-layer tanh network mapping
``(t, q)`` to a scalar,

    V(t, q) = A3 tanh(A2 tanh(A1 [q; t] + b1) + b2) + b3,

with input dimension ``d`` and hidden width ``h``.  The shear layers of the
flow model need its value, its time partial, its input gradient, the mixed
time/input gradient, and Hessian-vector products, as well as exact parameter
gradients of each of those quantities.  All of them are computed analytically
through the shared jet sweeps in :mod:`sympflow._jet`; nothing here uses
finite differences.

Parameter vectors use a fixed canonical order (A1 row-major, b1, A2
row-major, b2, A3, b3) so checkpoints are bit-stable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._jet import Jet, chain_backward, chain_forward
from .errors import DimensionError
from .validation import as_float_array, as_vector, check_finite_scalar

__all__ = [
    "PotentialNet",
    "QuantityKind",
    "random_potential_net",
    "zero_potential_net",
    "value",
    "time_partial",
    "grad_input",
    "mixed_time_input_gradient",
    "hessian_vector_product",
    "param_grad",
    "param_count",
    "params_to_vector",
    "net_with_params",
]


class QuantityKind(enum.Enum):
    """Derivative quantities for which parameter gradients are exported."""

    VALUE = "value"
    TIME_PARTIAL = "time_partial"
    INPUT_GRADIENT = "input_gradient"
    MIXED_TIME_INPUT_GRADIENT = "mixed_time_input_gradient"


@dataclass(frozen=True)
class PotentialNet:
    """Weights of one scalar potential; treated as immutable during evaluation."""

    d: int
    h: int
    A1: np.ndarray  # (h, d+1); last column multiplies the time input
    b1: np.ndarray  # (h,)
    A2: np.ndarray  # (h, h)
    b2: np.ndarray  # (h,)
    A3: np.ndarray  # (1, h)
    b3: np.ndarray  # (1,)

    def __post_init__(self):
        if self.d < 1 or self.h < 1:
            raise DimensionError("d and h must be positive")
        shapes = {
            "A1": (self.h, self.d + 1),
            "b1": (self.h,),
            "A2": (self.h, self.h),
            "b2": (self.h,),
            "A3": (1, self.h),
            "b3": (1,),
        }
        for name, want in shapes.items():
            arr = getattr(self, name)
            if arr.shape != want:
                raise DimensionError(f"{name} must have shape {want}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise DimensionError(f"{name} contains non-finite entries")

    @property
    def weights(self):
        return ((self.A1, self.b1), (self.A2, self.b2), (self.A3, self.b3))

    @property
    def n_params(self) -> int:
        return param_count(self)


def param_count(net: PotentialNet) -> int:
    h, d = net.h, net.d
    return h * (d + 1) + h + h * h + h + h + 1


def random_potential_net(d: int, rng: np.random.Generator, h: int = 10) -> PotentialNet:
    """Seeded init, uniform on +-sqrt(1/fan_in) per layer (biases included)."""

    def layer(n_out, n_in):
        s = np.sqrt(1.0 / n_in)
        return (
            rng.uniform(-s, s, size=(n_out, n_in)),
            rng.uniform(-s, s, size=(n_out,)),
        )

    A1, b1 = layer(h, d + 1)
    A2, b2 = layer(h, h)
    A3, b3 = layer(1, h)
    return PotentialNet(d, h, A1, b1, A2, b2, A3, b3)


def zero_potential_net(d: int, h: int = 10) -> PotentialNet:
    return PotentialNet(
        d,
        h,
        np.zeros((h, d + 1)),
        np.zeros(h),
        np.zeros((h, h)),
        np.zeros(h),
        np.zeros((1, h)),
        np.zeros(1),
    )


def params_to_vector(net: PotentialNet) -> np.ndarray:
    return np.concatenate(
        [net.A1.ravel(), net.b1, net.A2.ravel(), net.b2, net.A3.ravel(), net.b3]
    )


def net_with_params(net: PotentialNet, vec: np.ndarray) -> PotentialNet:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (param_count(net),):
        raise DimensionError(
            f"parameter vector must have length {param_count(net)}, got {vec.shape}"
        )
    h, d = net.h, net.d
    parts = np.split(
        vec,
        np.cumsum([h * (d + 1), h, h * h, h, h]),
    )
    return PotentialNet(
        d,
        h,
        parts[0].reshape(h, d + 1),
        parts[1].copy(),
        parts[2].reshape(h, h),
        parts[3].copy(),
        parts[4].reshape(1, h),
        parts[5].copy(),
    )


def flatten_param_grads(g_params) -> np.ndarray:
    """Concatenate per-layer (gA, gb) pairs in the canonical parameter order."""
    pieces = []
    for gA, gb in g_params:
        pieces.append(gA.ravel())
        pieces.append(gb)
    return np.concatenate(pieces)


# ---------------------------------------------------------------------------
# Batched kernels.  t is a scalar or (B,), q is (B, d); directions are pairs
# (dq, dt) with dq of shape (B, d) or None and dt a scalar or None.
# ---------------------------------------------------------------------------


def _u_jet(net: PotentialNet, t, q: np.ndarray, da=None, db=None) -> Jet:
    B, d = q.shape
    if d != net.d:
        raise DimensionError(f"q must have {net.d} columns, got {d}")
    tcol = np.broadcast_to(np.asarray(t, dtype=float), (B,))
    u0 = np.concatenate([q, tcol[:, None]], axis=1)

    def direction(dirpair):
        if dirpair is None:
            return None
        dq, dt = dirpair
        dq = np.zeros((B, d)) if dq is None else np.asarray(dq, dtype=float)
        dtc = (
            np.zeros((B, 1))
            if dt is None
            else np.broadcast_to(np.asarray(dt, dtype=float), (B,))[:, None]
        )
        return np.concatenate([dq, dtc], axis=1)

    return Jet(u0, direction(da), direction(db))


def _forward(net, t, q, da=None, db=None):
    return chain_forward(net.weights, _u_jet(net, t, q, da, db))


def _ones(B):
    return np.ones((B, 1))


def value_b(net: PotentialNet, t, q: np.ndarray) -> np.ndarray:
    return _forward(net, t, q)[-1].x0[:, 0]


def grad_time_b(net: PotentialNet, t, q: np.ndarray):
    """Input gradient and time partial in one reverse sweep: (g (B,d), vt (B,))."""
    jets = _forward(net, t, q)
    gin, _ = chain_backward(net.weights, jets, Jet(x0=_ones(q.shape[0])), with_params=False)
    return gin.x0[:, : net.d].copy(), gin.x0[:, net.d].copy()


def hvp_b(net: PotentialNet, t, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    jets = _forward(net, t, q, da=(v, None))
    gin, _ = chain_backward(net.weights, jets, Jet(xa=_ones(q.shape[0])), with_params=False)
    return gin.x0[:, : net.d].copy()


def mixed_b(net: PotentialNet, t, q: np.ndarray) -> np.ndarray:
    """d/dt of the input gradient, shape (B, d)."""
    jets = _forward(net, t, q, da=(None, 1.0))
    gin, _ = chain_backward(net.weights, jets, Jet(xa=_ones(q.shape[0])), with_params=False)
    return gin.x0[:, : net.d].copy()


def hvp_time_b(net: PotentialNet, t, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """d/dt of the Hessian-vector product (d_t Hess) v, shape (B, d)."""
    jets = _forward(net, t, q, da=(v, None), db=(None, 1.0))
    gin, _ = chain_backward(net.weights, jets, Jet(xab=_ones(q.shape[0])), with_params=False)
    return gin.x0[:, : net.d].copy()


def third_contraction_b(net: PotentialNet, t, q, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Third-derivative contraction T[v, w]_k = sum_ij d^3 V/dq_k dq_i dq_j v_i w_j."""
    jets = _forward(net, t, q, da=(v, None), db=(w, None))
    gin, _ = chain_backward(net.weights, jets, Jet(xab=_ones(q.shape[0])), with_params=False)
    return gin.x0[:, : net.d].copy()


def value_vjp(net: PotentialNet, t, q: np.ndarray, cot: np.ndarray):
    """Pullback of per-point cotangents on V. Returns ((B, d+1) input grads, flat theta grad)."""
    jets = _forward(net, t, q)
    gin, gp = chain_backward(net.weights, jets, Jet(x0=cot[:, None]))
    return gin.x0, flatten_param_grads(gp)


def time_partial_vjp(net: PotentialNet, t, q: np.ndarray, cot: np.ndarray):
    jets = _forward(net, t, q, da=(None, 1.0))
    gin, gp = chain_backward(net.weights, jets, Jet(xa=cot[:, None]))
    return gin.x0, flatten_param_grads(gp)


def grad_input_vjp(net: PotentialNet, t, q: np.ndarray, W: np.ndarray):
    """Pullback of <W_i, grad_q V_i> summed over the batch.

    The per-point weight vector W doubles as the tangent direction, so the
    returned input gradients are ``[Hess(t,q) W, <m, W>]`` per point and the
    flat vector is the exact parameter gradient of the weighted sum.
    """
    jets = _forward(net, t, q, da=(W, None))
    gin, gp = chain_backward(net.weights, jets, Jet(xa=_ones(q.shape[0])))
    return gin.x0, flatten_param_grads(gp)


def mixed_vjp(net: PotentialNet, t, q: np.ndarray, W: np.ndarray):
    """Pullback of <W_i, d_t grad_q V_i>; input grads are [(d_t Hess) W, ...]."""
    jets = _forward(net, t, q, da=(None, 1.0), db=(W, None))
    gin, gp = chain_backward(net.weights, jets, Jet(xab=_ones(q.shape[0])))
    return gin.x0, flatten_param_grads(gp)


def hvp_vjp(net: PotentialNet, t, q: np.ndarray, v: np.ndarray, W: np.ndarray):
    """Pullback of <W_i, Hess(t, q_i) v_i>.

    Returns ``(gq, gv, gtheta)``: the third-order contraction T[v, W] per
    point, the gradient Hess W with respect to the contracted vector v, and
    the flat parameter gradient.
    """
    jets = _forward(net, t, q, da=(v, None), db=(W, None))
    gin, gp = chain_backward(net.weights, jets, Jet(xab=_ones(q.shape[0])))
    gq = gin.x0[:, : net.d]
    gv = gin.xa[:, : net.d]
    return gq, gv, flatten_param_grads(gp)


# ---------------------------------------------------------------------------
# Single-point public operations.
# ---------------------------------------------------------------------------


def _point(net, t, q):
    q = as_vector(q, net.d, "q")
    t = check_finite_scalar(t, "t")
    return t, q[None, :]


def value(net: PotentialNet, t, q) -> float:
    """Evaluate V(t, q)."""
    t, qb = _point(net, t, q)
    return float(value_b(net, t, qb)[0])


def time_partial(net: PotentialNet, t, q) -> float:
    """Exact dV/dt at (t, q)."""
    t, qb = _point(net, t, q)
    jets = _forward(net, t, qb)
    gin, _ = chain_backward(net.weights, jets, Jet(x0=_ones(1)), with_params=False)
    return float(gin.x0[0, net.d])


def grad_input(net: PotentialNet, t, q) -> np.ndarray:
    """Exact gradient of V with respect to q."""
    t, qb = _point(net, t, q)
    g, _ = grad_time_b(net, t, qb)
    return g[0]


def mixed_time_input_gradient(net: PotentialNet, t, q) -> np.ndarray:
    """Exact d/dt of the q-gradient."""
    t, qb = _point(net, t, q)
    return mixed_b(net, t, qb)[0]


def hessian_vector_product(net: PotentialNet, t, q, v) -> np.ndarray:
    """Exact (Hess_q V) v."""
    t, qb = _point(net, t, q)
    v = as_vector(v, net.d, "v")
    return hvp_b(net, t, qb, v[None, :])[0]


def param_grad(net: PotentialNet, kind: QuantityKind, t, q, cotangent) -> np.ndarray:
    """Exact parameter gradient of <cotangent, quantity(net, t, q)>.

    The cotangent must be a scalar for VALUE and TIME_PARTIAL, and a vector
    of length d for the gradient-valued quantities.
    """
    t, qb = _point(net, t, q)
    kind = QuantityKind(kind)
    if kind in (QuantityKind.VALUE, QuantityKind.TIME_PARTIAL):
        cot = np.asarray(cotangent, dtype=float)
        if cot.shape not in ((), (1,)):
            raise DimensionError(f"cotangent for {kind.value} must be a scalar")
        cot = np.broadcast_to(cot, (1,)).astype(float)
        if kind is QuantityKind.VALUE:
            _, g = value_vjp(net, t, qb, cot)
        else:
            _, g = time_partial_vjp(net, t, qb, cot)
        return g
    W = as_vector(cotangent, net.d, "cotangent")[None, :]
    if kind is QuantityKind.INPUT_GRADIENT:
        _, g = grad_input_vjp(net, t, qb, W)
    else:
        _, g = mixed_vjp(net, t, qb, W)
    return g
