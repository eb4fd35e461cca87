"""Masked Bi-GRU and additive attention pooling, forward and backward.

All functions work on batches: sequences are ``(N, T, D)`` arrays with a
boolean ``(N, T)`` mask. A masked step copies the previous hidden state,
so padding never changes the recurrence and receives no gradient.
Single sequences ``(T, D)`` are accepted by the public wrappers.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

_corrupt = False


@contextmanager
def corrupted_backward():
    """Debug negative control: GRU backward drops the reset-gate path to the previous state."""
    global _corrupt
    _corrupt, saved = True, _corrupt
    try:
        yield
    finally:
        _corrupt = saved


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class GruCell:
    """One direction of a GRU: update (z), reset (r) and candidate (h) weights."""

    Wz: np.ndarray
    Uz: np.ndarray
    bz: np.ndarray
    Wr: np.ndarray
    Ur: np.ndarray
    br: np.ndarray
    Wh: np.ndarray
    Uh: np.ndarray
    bh: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.Wz.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.Wz.shape[0]

    def check(self):
        h, d = self.hidden_dim, self.input_dim
        for gate in "zrh":
            shapes = (getattr(self, "W" + gate).shape, getattr(self, "U" + gate).shape,
                      getattr(self, "b" + gate).shape)
            if shapes != ((h, d), (h, h), (h,)):
                raise ValueError(f"inconsistent GRU gate {gate!r} shapes {shapes} for ({d}, {h})")

    @staticmethod
    def shapes(input_dim: int, hidden_dim: int) -> dict[str, tuple[int, ...]]:
        out = {}
        for gate in "zrh":
            out["W" + gate] = (hidden_dim, input_dim)
            out["U" + gate] = (hidden_dim, hidden_dim)
            out["b" + gate] = (hidden_dim,)
        return out


@dataclass
class GruParams:
    forward: GruCell
    backward: GruCell

    @property
    def input_dim(self) -> int:
        return self.forward.input_dim

    @property
    def hidden_dim(self) -> int:
        return self.forward.hidden_dim


@dataclass
class AttentionParams:
    W: np.ndarray
    b: np.ndarray
    context: np.ndarray

    def check(self):
        a, d = self.W.shape
        if self.b.shape != (a,) or self.context.shape != (a,):
            raise ValueError(f"inconsistent attention shapes W{self.W.shape} b{self.b.shape} "
                             f"context{self.context.shape}")

    @staticmethod
    def shapes(in_dim: int, attn_dim: int) -> dict[str, tuple[int, ...]]:
        return {"W": (attn_dim, in_dim), "b": (attn_dim,), "context": (attn_dim,)}


def _as_batch(x, mask):
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    single = x.ndim == 2
    if single:
        x, mask = x[None], mask[None]
    if x.ndim != 3 or mask.shape != x.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match inputs {x.shape}")
    return x, mask, single


# --- GRU --------------------------------------------------------------------

def gru_forward(x, mask, cell: GruCell):
    """Run one GRU direction left to right. Returns ``(states (N,T,H), cache)``."""
    n, steps, d = x.shape
    if d != cell.input_dim:
        raise ValueError(f"input width {d} != GRU input_dim {cell.input_dim}")
    hid = cell.hidden_dim
    xz = x @ cell.Wz.T + cell.bz
    xr = x @ cell.Wr.T + cell.br
    xh = x @ cell.Wh.T + cell.bh
    h = np.zeros((n, hid))
    out = np.empty((n, steps, hid))
    prev, zs, rs, cands = (np.empty((n, steps, hid)) for _ in range(4))
    for t in range(steps):
        z = sigmoid(xz[:, t] + h @ cell.Uz.T)
        r = sigmoid(xr[:, t] + h @ cell.Ur.T)
        cand = np.tanh(xh[:, t] + (r * h) @ cell.Uh.T)
        prev[:, t], zs[:, t], rs[:, t], cands[:, t] = h, z, r, cand
        h = np.where(mask[:, t, None], (1.0 - z) * h + z * cand, h)
        out[:, t] = h
    return out, (x, mask, prev, zs, rs, cands)


def gru_backward(dout, cache, cell: GruCell):
    """Gradients of one GRU direction. Returns ``(dx, grads)`` with grads keyed like :class:`GruCell`."""
    x, mask, prev, zs, rs, cands = cache
    n, steps, hid = dout.shape
    dxz, dxr, dxh = (np.zeros((n, steps, hid)) for _ in range(3))
    dUz, dUr, dUh = (np.zeros((hid, hid)) for _ in range(3))
    dh = np.zeros((n, hid))
    for t in reversed(range(steps)):
        dh = dh + dout[:, t]
        m = mask[:, t, None]
        dnew = np.where(m, dh, 0.0)
        hp, z, r, cand = prev[:, t], zs[:, t], rs[:, t], cands[:, t]

        da_h = dnew * z * (1.0 - cand * cand)
        d_rh = da_h @ cell.Uh
        da_z = dnew * (cand - hp) * z * (1.0 - z)
        da_r = d_rh * hp * r * (1.0 - r)

        dUh += da_h.T @ (r * hp)
        dUz += da_z.T @ hp
        dUr += da_r.T @ hp
        dxz[:, t], dxr[:, t], dxh[:, t] = da_z, da_r, da_h

        dprev = dnew * (1.0 - z) + da_z @ cell.Uz + da_r @ cell.Ur
        if not _corrupt:
            dprev += d_rh * r
        dh = np.where(m, dprev, dh)

    flat_x = x.reshape(-1, x.shape[2])
    grads = {}
    for gate, dpre, dU in (("z", dxz, dUz), ("r", dxr, dUr), ("h", dxh, dUh)):
        flat = dpre.reshape(-1, hid)
        grads["W" + gate] = flat.T @ flat_x
        grads["U" + gate] = dU
        grads["b" + gate] = flat.sum(axis=0)
    dx = dxz @ cell.Wz + dxr @ cell.Wr + dxh @ cell.Wh
    return dx, grads


def bigru_forward(inputs, mask, params: GruParams):
    """Bidirectional GRU; row ``t`` of the output is ``fwd_t`` concatenated with ``bwd_t``.

    The backward direction is the same recurrence over the reversed
    sequence (masked steps are skipped either way), re-reversed.

    Accepts ``(T, D)`` or ``(N, T, D)`` inputs. Returns ``(outputs, cache)``.
    """
    x, mask, single = _as_batch(inputs, mask)
    params.forward.check()
    params.backward.check()
    fwd, fcache = gru_forward(x, mask, params.forward)
    bwd, bcache = gru_forward(x[:, ::-1], mask[:, ::-1], params.backward)
    out = np.concatenate([fwd, bwd[:, ::-1]], axis=2)
    return (out[0] if single else out), (fcache, bcache, single)


def bigru_backward(dout, cache, params: GruParams):
    fcache, bcache, single = cache
    dout = dout[None] if single else dout
    hid = params.hidden_dim
    dx_f, g_f = gru_backward(dout[:, :, :hid], fcache, params.forward)
    dx_b, g_b = gru_backward(dout[:, ::-1, hid:], bcache, params.backward)
    dx = dx_f + dx_b[:, ::-1]
    return (dx[0] if single else dx), {"forward": g_f, "backward": g_b}


# --- attention --------------------------------------------------------------

def masked_softmax(scores, mask):
    """Softmax along the last axis over unmasked entries; masked weights are exactly 0.

    A row with no unmasked entries gets all-zero weights.
    """
    shifted = np.where(mask, scores, -np.inf)
    top = shifted.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.where(mask, np.exp(np.where(mask, scores, 0.0) - top), 0.0)
    total = e.sum(axis=-1, keepdims=True)
    return e / np.where(total > 0, total, 1.0)


def attention_pool(states, mask, params: AttentionParams):
    """Score each state against the context vector and take the weighted sum.

    ``u_t = tanh(W h_t + b)``, ``score_t = u_t . context``, weights are the
    masked softmax of the scores. Returns ``(weights, pooled, cache)``.
    """
    h, mask, single = _as_batch(states, mask)
    params.check()
    if h.shape[2] != params.W.shape[1]:
        raise ValueError(f"state width {h.shape[2]} != attention in_dim {params.W.shape[1]}")
    u = np.tanh(h @ params.W.T + params.b)
    weights = masked_softmax(u @ params.context, mask)
    pooled = np.einsum("nt,ntd->nd", weights, h)
    cache = (h, u, weights, single)
    if single:
        return weights[0], pooled[0], cache
    return weights, pooled, cache


def attention_backward(dpooled, cache, params: AttentionParams):
    h, u, weights, single = cache
    dpooled = dpooled[None] if single else dpooled
    dweights = np.einsum("ntd,nd->nt", h, dpooled)
    dh = weights[:, :, None] * dpooled[:, None, :]
    # softmax jacobian; masked entries have zero weight so they drop out
    dscores = weights * (dweights - (weights * dweights).sum(axis=1, keepdims=True))
    dcontext = np.einsum("nt,nta->a", dscores, u)
    da = dscores[:, :, None] * params.context * (1.0 - u * u)
    flat_a = da.reshape(-1, da.shape[2])
    grads = {
        "W": flat_a.T @ h.reshape(-1, h.shape[2]),
        "b": flat_a.sum(axis=0),
        "context": dcontext,
    }
    dh = dh + da @ params.W
    return (dh[0] if single else dh), grads
