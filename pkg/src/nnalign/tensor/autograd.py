"""Reverse-mode differentiation over dense float64 arrays.

A :class:`Tensor` records the op that produced it; calling ``backward`` on a
scalar walks the tape in reverse topological order. Graphs are built per
batch and dropped afterwards.
"""

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, seed=None):
        order, seen = [], set()

        def visit(t):
            # iterative DFS; graphs can be deep (LSTM steps are fused, but be safe)
            stack = [(t, False)]
            while stack:
                node, done = stack.pop()
                if done:
                    order.append(node)
                    continue
                if id(node) in seen:
                    continue
                seen.add(id(node))
                stack.append((node, True))
                for p in node._parents:
                    if p.requires_grad and id(p) not in seen:
                        stack.append((p, False))

        visit(self)
        grads = {id(self): np.ones_like(self.value) if seed is None else np.asarray(seed, float)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, backward):
    req = any(p.requires_grad for p in parents)
    return Tensor(value, req, parents if req else (), backward if req else None)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def matmul(a, b):
    """2-D (or batched N-D by 2-D) matrix product."""
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        ga = g @ b.value.T
        gb = a.value.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return _node(a.value @ b.value, (a, b), back)


def total(a):
    a = as_tensor(a)
    return _node(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape),))


def weighted_sum(a, w):
    """``sum(a * w)`` for a constant weight array; entries with ``w == 0`` are skipped
    so that ``-inf`` values there do not poison the result."""
    a = as_tensor(a)
    w = np.asarray(w, dtype=np.float64)
    nz = w != 0
    val = float((a.value[nz] * w[nz]).sum())
    return _node(val, (a,), lambda g: (g * w,))


def reshape(a, shape):
    a = as_tensor(a)
    return _node(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a):
    a = as_tensor(a)
    return _node(a.value.T, (a,), lambda g: (g.T,))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return _node(
        np.concatenate([t.value for t in tensors], axis=axis),
        tuple(tensors),
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def take_rows(table, idx):
    """Gather rows ``table[idx]`` (embedding lookup); ``idx`` may be any int array."""
    table = as_tensor(table)
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        out = np.zeros_like(table.value)
        np.add.at(out, idx.ravel(), g.reshape(-1, *table.shape[1:]))
        return (out,)

    return _node(table.value[idx], (table,), back)


def take_flat(a, idx):
    """Gather ``a.ravel()[idx]``."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        out = np.zeros(a.value.size)
        np.add.at(out, idx.ravel(), np.ravel(g))
        return (out.reshape(a.shape),)

    return _node(a.value.ravel()[idx], (a,), back)


def htanh(x):
    """Hard tanh; subgradient 1 strictly inside (-1, 1), 0 elsewhere."""
    x = as_tensor(x)
    inside = (x.value > -1.0) & (x.value < 1.0)
    return _node(np.clip(x.value, -1.0, 1.0), (x,), lambda g: (g * inside,))


def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.value)
    return _node(y, (x,), lambda g: (g * (1.0 - y * y),))


def log_softmax(x, support=None):
    """Row-wise log-softmax over the last axis.

    With ``support`` (an index array) the distribution covers those columns
    only and every other column is ``-inf``.
    """
    x = as_tensor(x)
    if support is not None:
        support = np.asarray(support, dtype=np.int64)
        if support.size == 0:
            raise ValueError("log_softmax support is empty")
        mask = np.zeros(x.shape[-1], dtype=bool)
        mask[support] = True
    else:
        mask = None
    v = x.value if mask is None else np.where(mask, x.value, -np.inf)
    m = v.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(v - m).sum(axis=-1, keepdims=True))
    out = v - lse
    p = np.exp(out)

    def back(g):
        gm = g if mask is None else np.where(mask, g, 0.0)
        return (gm - p * gm.sum(axis=-1, keepdims=True),)

    return _node(out, (x,), back)


def logsumexp_masked(x, mask):
    """Row-wise ``log(sum(exp(x) * mask))`` with a constant 0/1 mask."""
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    v = np.where(mask, x.value, -np.inf)
    m = v.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(v - m)
    s = e.sum(axis=-1, keepdims=True)
    out = (m + np.log(s))[..., 0]
    p = e / s

    return _node(out, (x,), lambda g: (g[..., None] * p,))


def dropout(x, rate, training, rng):
    """Inverted dropout; identity in evaluation mode or at rate 0."""
    x = as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _node(x.value * keep, (x,), lambda g: (g * keep,))


def no_grad_value(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
