# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled HMM kernels. Semantics mirror ``_pykernels`` exactly."""

import numpy as np
from libc.math cimport log, INFINITY

from ._pykernels import ZeroLikelihood


cdef inline Py_ssize_t _bucket(Py_ssize_t delta, Py_ssize_t K) noexcept nogil:
    if delta < -K:
        return 0
    if delta > K:
        return 2 * K + 2
    return delta + K + 1


cdef void _row(Py_ssize_t I, Py_ssize_t frm, const double[:] w, Py_ssize_t K,
               double scale, double[:] out) noexcept nogil:
    # jump weights from position ``frm`` to 1..I, normalised to ``scale``
    cdef Py_ssize_t i2, delta, n_low = 0, n_high = 0
    cdef double z = 0.0, v
    for i2 in range(1, I + 1):
        delta = i2 - frm
        if delta < -K:
            n_low += 1
        elif delta > K:
            n_high += 1
    for i2 in range(1, I + 1):
        delta = i2 - frm
        v = w[_bucket(delta, K)]
        if delta < -K:
            v = v / n_low
        elif delta > K:
            v = v / n_high
        out[i2 - 1] = v
        z += v
    if z <= 0.0:
        for i2 in range(I):
            out[i2] = scale / I
    else:
        for i2 in range(I):
            out[i2] = out[i2] / z * scale


def build_transition(Py_ssize_t I, const double[:, :] buckets, double p0, Py_ssize_t K):
    cdef double[:, ::1] T = np.zeros((2 * I, 2 * I))
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(1, I + 1):
            _row(I, i, buckets[i - 1], K, 1.0 - p0, T[i - 1, :I])
            T[i - 1, I + i - 1] = p0
            for k in range(2 * I):
                T[I + i - 1, k] = T[i - 1, k]
    return np.asarray(T)


def build_initial(Py_ssize_t I, const double[:] buckets, double p0, Py_ssize_t K):
    cdef double[::1] init = np.zeros(2 * I)
    with nogil:
        _row(I, 0, buckets, K, 1.0 - p0, init[:I])
        init[I] = p0
    return np.asarray(init)


def forward_backward(const double[:, :] emit, const double[:] init,
                     const double[:, :, :] trans, double[:, :, :] xi_out):
    cdef Py_ssize_t J = emit.shape[0], S = emit.shape[1]
    cdef Py_ssize_t T = trans.shape[0], X = xi_out.shape[0]
    cdef double[:, ::1] alpha = np.empty((J, S))
    cdef double[:, ::1] beta = np.empty((J, S))
    cdef double[::1] scale = np.empty(J)
    cdef double[::1] tmp = np.empty(S)
    cdef double[:, ::1] gamma = np.empty((J, S))
    cdef Py_ssize_t j, s, s2, t, x
    cdef double a, c, acc, ll = 0.0
    cdef bint bad = False

    with nogil:
        c = 0.0
        for s in range(S):
            alpha[0, s] = init[s] * emit[0, s]
            c += alpha[0, s]
        scale[0] = c
        if not c > 0.0:
            bad = True
        else:
            for s in range(S):
                alpha[0, s] /= c
            for j in range(1, J):
                t = j - 1 if T > 1 else 0
                for s2 in range(S):
                    tmp[s2] = 0.0
                for s in range(S):
                    a = alpha[j - 1, s]
                    if a != 0.0:
                        for s2 in range(S):
                            tmp[s2] += a * trans[t, s, s2]
                c = 0.0
                for s2 in range(S):
                    tmp[s2] *= emit[j, s2]
                    c += tmp[s2]
                scale[j] = c
                if not c > 0.0:
                    bad = True
                    break
                for s2 in range(S):
                    alpha[j, s2] = tmp[s2] / c

        if not bad:
            for s in range(S):
                beta[J - 1, s] = 1.0
            for j in range(J - 2, -1, -1):
                t = j if T > 1 else 0
                for s2 in range(S):
                    tmp[s2] = emit[j + 1, s2] * beta[j + 1, s2]
                for s in range(S):
                    acc = 0.0
                    for s2 in range(S):
                        acc += trans[t, s, s2] * tmp[s2]
                    beta[j, s] = acc / scale[j + 1]
            for j in range(J):
                ll += log(scale[j])
                for s in range(S):
                    gamma[j, s] = alpha[j, s] * beta[j, s]
            for j in range(1, J):
                t = j - 1 if T > 1 else 0
                x = j - 1 if X > 1 else 0
                for s2 in range(S):
                    tmp[s2] = emit[j, s2] * beta[j, s2] / scale[j]
                for s in range(S):
                    a = alpha[j - 1, s]
                    if a != 0.0:
                        for s2 in range(S):
                            xi_out[x, s, s2] += a * trans[t, s, s2] * tmp[s2]
    if bad:
        raise ZeroLikelihood("zero-probability sentence")
    return np.asarray(gamma), ll


def viterbi(const double[:, :] log_emit, const double[:] log_init, const double[:, :, :] log_trans):
    cdef Py_ssize_t J = log_emit.shape[0], S = log_emit.shape[1], T = log_trans.shape[0]
    cdef long[:, ::1] back = np.zeros((J, S), dtype=np.int64)
    cdef double[::1] delta = np.empty(S)
    cdef double[::1] nxt = np.empty(S)
    cdef long[::1] path = np.empty(J, dtype=np.int64)
    cdef Py_ssize_t j, s, s2, t, arg
    cdef double best, v
    with nogil:
        for s in range(S):
            delta[s] = log_init[s] + log_emit[0, s]
        for j in range(1, J):
            t = j - 1 if T > 1 else 0
            for s2 in range(S):
                best = -INFINITY
                arg = 0
                for s in range(S):
                    v = delta[s] + log_trans[t, s, s2]
                    if v > best:
                        best = v
                        arg = s
                back[j, s2] = arg
                nxt[s2] = best + log_emit[j, s2]
            for s2 in range(S):
                delta[s2] = nxt[s2]
        best = -INFINITY
        arg = 0
        for s in range(S):
            if delta[s] > best:
                best = delta[s]
                arg = s
        path[J - 1] = arg
        for j in range(J - 1, 0, -1):
            path[j - 1] = back[j, path[j]]
    if best == -INFINITY:
        raise ZeroLikelihood("all paths have zero probability")
    return np.asarray(path), best


def jump_counts(const double[:, :] xi, Py_ssize_t I, Py_ssize_t K):
    cdef double[:, ::1] counts = np.zeros((I, 2 * K + 3))
    cdef double[::1] nulls = np.zeros(I)
    cdef Py_ssize_t s, s2, i
    with nogil:
        for s in range(2 * I):
            i = s if s < I else s - I
            for s2 in range(I):
                counts[i, _bucket(s2 - i, K)] += xi[s, s2]
            for s2 in range(I, 2 * I):
                nulls[i] += xi[s, s2]
    return np.asarray(counts), np.asarray(nulls)
