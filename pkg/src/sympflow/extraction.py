"""Exact generating Hamiltonian of a trained flow model.

Because every layer pair is the exact flow of a known time-dependent
Hamiltonian, the composed map is itself a Hamiltonian flow.  The pair
(position shear then momentum shear) with potentials Vq, Vp generates

    H_pair(t, q, p) = d_t Vp(t, p) + d_t Vq(t, q - (grad Vp(t, p) - grad Vp(0, p))),

and the full model's Hamiltonian aggregates the pairs from the last layer to
the first, each evaluated at the point pulled back through the inverses of
the later pairs.  ``extract`` evaluates the closed-form sum; its gradient is
assembled by one reverse sweep over the inverse chain.

The extracted Hamiltonian is defined up to an additive function of time
alone; this module fixes the representative produced by the recursion, with
no extra time-only offset.
"""

from __future__ import annotations

import numpy as np

from . import potential as pot
from .errors import DimensionError
from .model import SympFlowModel, _p_layer_b, _q_layer_b
from .validation import as_phase_points, check_finite_scalar

__all__ = [
    "pair_hamiltonian",
    "tail_inverse",
    "extract",
    "extract_gradient",
    "piecewise_hamiltonian",
]


def _check_pair_index(model: SympFlowModel, i: int, allow_plus_one: bool = False):
    top = model.n_layers + 1 if allow_plus_one else model.n_layers
    if not isinstance(i, (int, np.integer)) or not 1 <= i <= top:
        raise DimensionError(f"layer index must be in [1, {top}], got {i}")


def _pair_ham_b(vq, vp, t, x: np.ndarray) -> np.ndarray:
    d = vq.d
    q, p = x[:, :d], x[:, d:]
    gp_t, vtp = pot.grad_time_b(vp, t, p)
    gp_0, _ = pot.grad_time_b(vp, 0.0, p)
    q_shift = q - (gp_t - gp_0)
    _, vtq = pot.grad_time_b(vq, t, q_shift)
    return vtp + vtq


def _tail_inverse_b(model: SympFlowModel, i: int, t, x: np.ndarray) -> np.ndarray:
    """Inverse of the composition of layer pairs i..L (1-based, i = L+1 is identity)."""
    for j in range(model.n_layers - 1, i - 2, -1):
        vq, vp = model.layers[j]
        x = _p_layer_b(vp, t, x, sign=-1.0)
        x = _q_layer_b(vq, t, x, sign=-1.0)
    return x


def _extract_b(model: SympFlowModel, t, x: np.ndarray) -> np.ndarray:
    total = np.zeros(x.shape[0])
    y = x
    for i in range(model.n_layers, 0, -1):
        vq, vp = model.layers[i - 1]
        total += _pair_ham_b(vq, vp, t, y)
        if i > 1:
            y = _q_layer_b(vq, t, _p_layer_b(vp, t, y, sign=-1.0), sign=-1.0)
    return total


def pair_hamiltonian(model: SympFlowModel, i: int, t, x) -> float:
    """Hamiltonian generating layer pair i (1-based) at (t, x)."""
    _check_pair_index(model, i)
    xb, _ = as_phase_points(np.asarray(x, dtype=float), 2 * model.d)
    t = check_finite_scalar(t, "t")
    vq, vp = model.layers[i - 1]
    return float(_pair_ham_b(vq, vp, t, xb)[0])


def tail_inverse(model: SympFlowModel, i: int, t, x):
    """Invert the pairs i..L at time t; i = L+1 returns x unchanged."""
    _check_pair_index(model, i, allow_plus_one=True)
    xb, single = as_phase_points(x, 2 * model.d)
    t = check_finite_scalar(t, "t")
    out = _tail_inverse_b(model, i, t, xb)
    return out[0] if single else out


def extract(model: SympFlowModel, t, x) -> float:
    """The model's generating Hamiltonian at (t, x) (closed-form pair sum)."""
    xb, single = as_phase_points(x, 2 * model.d)
    t = check_finite_scalar(t, "t")
    vals = _extract_b(model, t, xb)
    return float(vals[0]) if single else vals


def _pair_ham_vjp(vq, vp, t, y: np.ndarray, c: np.ndarray):
    """Pullback of per-point weights c on the pair Hamiltonian.

    Returns ``(gy, gtheta_q, gtheta_p)``.
    """
    d = vq.d
    q, p = y[:, :d], y[:, d:]
    gp_t, _ = pot.grad_time_b(vp, t, p)
    gp_0, _ = pot.grad_time_b(vp, 0.0, p)
    q_shift = q - (gp_t - gp_0)

    gin_q, gth_q = pot.time_partial_vjp(vq, t, q_shift, c)
    weighted_mq = gin_q[:, :d]  # c * d_t grad Vq at the shifted point
    gin_p, gth_p = pot.time_partial_vjp(vp, t, p, c)

    # The shifted point depends on p through the momentum shear update.
    gin_t, gA = pot.grad_input_vjp(vp, t, p, weighted_mq)
    gin_0, gB = pot.grad_input_vjp(vp, 0.0, p, weighted_mq)

    gq = weighted_mq
    gp = gin_p[:, :d] - (gin_t[:, :d] - gin_0[:, :d])
    return np.concatenate([gq, gp], axis=1), gth_q, gth_p - (gA - gB)


def _inv_pair_vjp(vq, vp, t, y_in: np.ndarray, w: np.ndarray):
    """Pullback through one inverse pair z = inv_q(inv_p(y_in)).

    Returns ``(w_in, gtheta_q, gtheta_p)`` given the cotangent w on z.
    """
    d = vq.d
    mid = _p_layer_b(vp, t, y_in, sign=-1.0)  # state between the two inverses
    wq, wp = w[:, :d], w[:, d:]

    # inv_q: z_p = mid_p + (grad Vq(t, mid_q) - grad Vq(0, mid_q))
    gin_t, gA = pot.grad_input_vjp(vq, t, mid[:, :d], wp)
    gin_0, gB = pot.grad_input_vjp(vq, 0.0, mid[:, :d], wp)
    wq_mid = wq + (gin_t[:, :d] - gin_0[:, :d])
    gth_q = gA - gB

    # inv_p: mid_q = y_q - (grad Vp(t, y_p) - grad Vp(0, y_p))
    gin_t, gA = pot.grad_input_vjp(vp, t, y_in[:, d:], wq_mid)
    gin_0, gB = pot.grad_input_vjp(vp, 0.0, y_in[:, d:], wq_mid)
    wp_in = wp - (gin_t[:, :d] - gin_0[:, :d])
    gth_p = -(gA - gB)
    return np.concatenate([wq_mid, wp_in], axis=1), gth_q, gth_p


def extract_vjp(model: SympFlowModel, t, x: np.ndarray, c: np.ndarray):
    """Gradient of sum_i c_i * extract(model, t, x_i) in x and in the parameters.

    One reverse sweep over the inverse chain; returns ``(gx (B, 2d), gtheta)``
    with gtheta flattened in the model's canonical parameter order.
    """
    L = model.n_layers
    # Forward sweep: y[L + 1] = x, y[i] = pair_i^{-1}(y[i + 1]).
    ys = {L + 1: x}
    for i in range(L, 1, -1):
        vq, vp = model.layers[i - 1]
        ys[i] = _q_layer_b(vq, t, _p_layer_b(vp, t, ys[i + 1], sign=-1.0), sign=-1.0)

    gth = {}

    def add(key, val):
        gth[key] = gth.get(key, 0) + val

    # Deepest tap: pair 1 reads y[2].
    vq, vp = model.layers[0]
    w, gq1, gp1 = _pair_ham_vjp(vq, vp, t, ys[2], c)
    add((0, "q"), gq1)
    add((0, "p"), gp1)
    # Walk back up: push through pair_j^{-1}, then add the tap at y[j + 1].
    for j in range(2, L + 1):
        vq, vp = model.layers[j - 1]
        w, gq_inv, gp_inv = _inv_pair_vjp(vq, vp, t, ys[j + 1], w)
        add((j - 1, "q"), gq_inv)
        add((j - 1, "p"), gp_inv)
        gy, gq_tap, gp_tap = _pair_ham_vjp(vq, vp, t, ys[j + 1], c)
        w = w + gy
        add((j - 1, "q"), gq_tap)
        add((j - 1, "p"), gp_tap)

    pieces = []
    for idx, (nq, np_) in enumerate(model.layers):
        pieces.append(np.asarray(gth.get((idx, "q"), np.zeros(nq.n_params))))
        pieces.append(np.asarray(gth.get((idx, "p"), np.zeros(np_.n_params))))
    return w, np.concatenate(pieces)


def extract_gradient(model: SympFlowModel, t, x, mode: str = "exact", fd_step: float = 1e-5):
    """Phase-space gradient of the extracted Hamiltonian at (t, x)."""
    xb, single = as_phase_points(x, 2 * model.d)
    t = check_finite_scalar(t, "t")
    if mode == "exact":
        gx, _ = extract_vjp(model, t, xb, np.ones(xb.shape[0]))
    elif mode == "fd":
        gx = np.zeros_like(xb)
        for k in range(xb.shape[1]):
            e = np.zeros_like(xb)
            e[:, k] = fd_step
            gx[:, k] = (_extract_b(model, t, xb + e) - _extract_b(model, t, xb - e)) / (
                2.0 * fd_step
            )
    else:
        raise ValueError(f"unknown gradient mode {mode!r}")
    return gx[0] if single else gx


def piecewise_hamiltonian(model: SympFlowModel, delta_t: float, t: float, x) -> float:
    """Extracted Hamiltonian of the periodic long-time extension.

    Evaluates at the within-window time t - delta_t * floor(t / delta_t).
    """
    delta_t = float(delta_t)
    if delta_t <= 0:
        raise DimensionError(f"delta_t must be positive, got {delta_t}")
    t = check_finite_scalar(t, "t")
    if t < 0:
        raise DimensionError(f"t must be nonnegative, got {t}")
    remainder = t - delta_t * np.floor(t / delta_t)
    return extract(model, remainder, x)
