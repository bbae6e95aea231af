"""Layers built on the tape: affine maps, the context convolution and LSTMs."""

import numpy as np

from .autograd import Tensor, _node, add, as_tensor, concat, matmul, reshape, take_flat, take_rows, transpose


def linear(x, W, b=None):
    """``x @ W.T + b`` for ``W`` of shape ``(m, n)``; ``x`` is ``(..., n)``."""
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[1]:
        raise ValueError(f"linear: input width {x.shape[-1]} != weight columns {W.shape[1]}")
    if b is not None and as_tensor(b).shape != (W.shape[0],):
        raise ValueError("linear: bias shape mismatch")
    y = matmul(x, transpose(W))
    return y if b is None else add(y, b)


def embedding(table, ids):
    return take_rows(table, ids)


def conv_combine(ctx, filt):
    """Valid single-channel convolution of a ``(2h+1, d)`` window stack.

    The ``(2h+1, 2h+1)`` filter spans the full window height and slides along
    the embedding axis with stride 1, giving ``d - 2h`` outputs. Leading batch
    axes are allowed.
    """
    ctx, filt = as_tensor(ctx), as_tensor(filt)
    width = filt.shape[0]
    if filt.shape != (width, width) or ctx.shape[-2] != width:
        raise ValueError("conv_combine: filter must be (2h+1, 2h+1) matching the window height")
    d = ctx.shape[-1]
    L = d - width + 1
    if L < 1:
        raise ValueError("conv_combine: embedding width must exceed 2h")
    x, F = ctx.value, filt.value
    out = np.zeros(x.shape[:-2] + (L,))
    for c in range(width):
        out += np.einsum("...rk,r->...k", x[..., :, c:c + L], F[:, c])

    def back(g):
        gx = np.zeros_like(x)
        gF = np.zeros_like(F)
        for c in range(width):
            gx[..., :, c:c + L] += g[..., None, :] * F[:, c][:, None]
            win = x[..., :, c:c + L].reshape(-1, width, L)
            gF[:, c] = np.einsum("nk,nrk->r", g.reshape(-1, L), win)
        return gx, gF

    return _node(out, (ctx, filt), back)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm(x, lengths, W, U, b):
    """Unidirectional LSTM over padded sequences.

    ``x`` is ``(B, T, d)`` with valid steps ``t < lengths[b]``. Gates are
    ordered input, forget, candidate, output. Returns every hidden state as
    ``(B, T, u)``; padded steps are zero.
    """
    x, W, U, b = (as_tensor(t) for t in (x, W, U, b))
    X = x.value
    B, T, _ = X.shape
    u = U.shape[1]
    lengths = np.asarray(lengths)
    Wv, Uv, bv = W.value, U.value, b.value
    h = np.zeros((B, u))
    c = np.zeros((B, u))
    H = np.zeros((B, T, u))
    cache = []
    xw = X @ Wv.T + bv  # (B, T, 4u)
    for t in range(T):
        act = (t < lengths)[:, None]
        z = xw[:, t] + h @ Uv.T
        i, f, g, o = (
            _sigmoid(z[:, :u]),
            _sigmoid(z[:, u:2 * u]),
            np.tanh(z[:, 2 * u:3 * u]),
            _sigmoid(z[:, 3 * u:]),
        )
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache.append((act, i, f, g, o, c, tc, h))
        c = np.where(act, c_new, c)
        h = np.where(act, h_new, h)
        H[:, t] = np.where(act, h_new, 0.0)

    def back(gH):
        gX = np.zeros_like(X)
        gW = np.zeros_like(Wv)
        gU = np.zeros_like(Uv)
        gb = np.zeros_like(bv)
        dh_next = np.zeros((B, u))
        dc_next = np.zeros((B, u))
        for t in range(T - 1, -1, -1):
            act, i, f, g, o, c_prev, tc, h_prev = cache[t]
            dh = dh_next + np.where(act, gH[:, t], 0.0)
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = np.concatenate(
                [dc * g * i * (1.0 - i), dc * c_prev * f * (1.0 - f), dc * i * (1.0 - g * g), dh * tc * o * (1.0 - o)],
                axis=1,
            )
            dz = np.where(act, dz, 0.0)
            gW += dz.T @ X[:, t]
            gU += dz.T @ h_prev
            gb += dz.sum(axis=0)
            gX[:, t] = dz @ Wv
            dh_next = np.where(act, dz @ Uv, dh)
            dc_next = np.where(act, dc * f, dc_next)
        return gX, gW, gU, gb

    return _node(H, (x, W, U, b), back)


def _reverse_index(lengths, T):
    lengths = np.asarray(lengths)
    t = np.arange(T)[None, :]
    rev = np.where(t < lengths[:, None], lengths[:, None] - 1 - t, t)
    return rev + (np.arange(len(lengths)) * T)[:, None]


def _flatten(x):
    B, T, d = x.shape
    return reshape(x, (B * T, d))


def bilstm_states(x, lengths, fwd, bwd):
    """Per-step ``[forward, backward]`` states, ``(B, T, 2u)``.

    ``fwd``/``bwd`` are ``(W, U, b)`` triples.
    """
    x = as_tensor(x)
    B, T, _ = x.shape
    rev = _reverse_index(lengths, T)
    hf = lstm(x, lengths, *fwd)
    hb_rev = lstm(take_rows(_flatten(x), rev), lengths, *bwd)
    hb = take_rows(_flatten(hb_rev), rev)
    return concat([hf, hb], axis=-1)


def bilstm_encode(x, lengths, fwd, bwd):
    """Final forward state concatenated with the final backward state, ``(B, 2u)``.

    ``x`` may also be a single ``(L, d)`` sequence, giving a ``(2u,)`` vector.
    """
    x = as_tensor(x)
    single = x.value.ndim == 2
    if single:
        if x.shape[0] == 0:
            raise ValueError("bilstm_encode: empty sequence")
        x = reshape(x, (1,) + x.shape)
        lengths = [x.shape[1]]
    lengths = np.asarray(lengths, dtype=np.int64)
    if np.any(lengths < 1):
        raise ValueError("bilstm_encode: empty sequence")
    B, T, _ = x.shape
    rev = _reverse_index(lengths, T)
    hf = lstm(x, lengths, *fwd)
    hb_rev = lstm(take_rows(_flatten(x), rev), lengths, *bwd)
    u = hf.shape[-1]
    rows = np.arange(B) * T + lengths - 1
    last_f = take_rows(_flatten(hf), rows)
    last_b = take_rows(_flatten(hb_rev), rows)
    out = concat([last_f, last_b], axis=-1)
    if single:
        out = reshape(out, (2 * u,))
    return out


__all__ = [
    "Tensor",
    "linear",
    "embedding",
    "conv_combine",
    "lstm",
    "bilstm_states",
    "bilstm_encode",
    "take_flat",
]
