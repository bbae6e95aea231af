"""Pure numpy implementations of the HMM kernels.

Every function here has a Cython twin in ``_ckernels.pyx`` with the same
signature and semantics. State layout for a target sentence of length ``I``:
states ``0..I-1`` are the real positions ``1..I`` and ``I..2I-1`` are their
null copies.
"""

import numpy as np


class ZeroLikelihood(ValueError):
    """Raised when every path through a sentence has probability zero."""


def bucket_of(delta, K):
    """Map a jump width to its bucket: 0 is ``< -K``, 2K+2 is ``> +K``."""
    delta = np.asarray(delta)
    return np.clip(delta, -K - 1, K + 1) + K + 1


def _row_weights(I, frm, buckets, K):
    # jump weights from position ``frm`` (1-based, 0 = virtual start) to 1..I
    delta = np.arange(1, I + 1) - frm
    b = bucket_of(delta, K)
    w = buckets[b].astype(np.float64)
    n_low = np.count_nonzero(delta < -K)
    n_high = np.count_nonzero(delta > K)
    if n_low:
        w[delta < -K] /= n_low
    if n_high:
        w[delta > K] /= n_high
    z = w.sum()
    if z <= 0.0:
        return np.full(I, 1.0 / I)
    return w / z


def build_transition(I, buckets, p0, K):
    """Transition matrix over the ``2I`` states.

    ``buckets`` has shape ``(I, 2K+3)``: one jump distribution per
    remembered position.
    """
    T = np.zeros((2 * I, 2 * I))
    for i in range(1, I + 1):
        row = _row_weights(I, i, buckets[i - 1], K) * (1.0 - p0)
        T[i - 1, :I] = row
        T[i - 1, I + i - 1] = p0
        T[I + i - 1] = T[i - 1]
    return T


def build_initial(I, buckets, p0, K):
    init = np.zeros(2 * I)
    init[:I] = _row_weights(I, 0, buckets, K) * (1.0 - p0)
    init[I] = p0
    return init


def forward_backward(emit, init, trans, xi_out):
    """Scaled forward-backward.

    ``trans`` is ``(T, S, S)`` with ``T`` either 1 (homogeneous) or ``J-1``.
    Pairwise posteriors are *added* into ``xi_out`` which is ``(X, S, S)``
    with ``X`` either 1 (summed over positions) or ``J-1``.
    Returns ``(gamma, loglik)``.
    """
    J, S = emit.shape
    alpha = np.empty((J, S))
    beta = np.empty((J, S))
    scale = np.empty(J)

    def A(j):
        return trans[j - 1] if trans.shape[0] > 1 else trans[0]

    a = init * emit[0]
    scale[0] = a.sum()
    if not scale[0] > 0.0:
        raise ZeroLikelihood("zero-probability sentence")
    alpha[0] = a / scale[0]
    for j in range(1, J):
        a = (alpha[j - 1] @ A(j)) * emit[j]
        scale[j] = a.sum()
        if not scale[j] > 0.0:
            raise ZeroLikelihood("zero-probability sentence")
        alpha[j] = a / scale[j]

    beta[J - 1] = 1.0
    for j in range(J - 2, -1, -1):
        beta[j] = A(j + 1) @ (emit[j + 1] * beta[j + 1]) / scale[j + 1]

    gamma = alpha * beta
    X = xi_out.shape[0]
    for j in range(1, J):
        xi = alpha[j - 1][:, None] * A(j) * (emit[j] * beta[j])[None, :] / scale[j]
        xi_out[j - 1 if X > 1 else 0] += xi
    return gamma, float(np.log(scale).sum())


def viterbi(log_emit, log_init, log_trans):
    """Max-product decode. Ties go to the lower state index."""
    J, S = log_emit.shape
    back = np.zeros((J, S), dtype=np.int64)
    delta = log_init + log_emit[0]
    for j in range(1, J):
        LA = log_trans[j - 1] if log_trans.shape[0] > 1 else log_trans[0]
        cand = delta[:, None] + LA
        back[j] = np.argmax(cand, axis=0)
        delta = cand[back[j], np.arange(S)] + log_emit[j]
    last = int(np.argmax(delta))
    best = float(delta[last])
    if best == -np.inf:
        raise ZeroLikelihood("all paths have zero probability")
    path = np.empty(J, dtype=np.int64)
    path[J - 1] = last
    for j in range(J - 1, 0, -1):
        path[j - 1] = back[j, path[j]]
    return path, best


def jump_counts(xi, I, K):
    """Fold pairwise posteriors ``(S, S)`` into per-position jump counts.

    Returns ``(buckets (I, 2K+3), nulls (I,))``; a from-state and its null
    copy share their remembered position.
    """
    pos = np.tile(np.arange(1, I + 1), 2)
    folded = xi[:I] + xi[I:]  # rows by remembered position
    real = folded[:, :I]
    delta = pos[None, :I] - np.arange(1, I + 1)[:, None]
    b = bucket_of(delta, K)
    counts = np.zeros((I, 2 * K + 3))
    rows = np.repeat(np.arange(I), I)
    np.add.at(counts, (rows, b.ravel()), real.ravel())
    nulls = folded[:, I:].sum(axis=1)
    return counts, nulls
