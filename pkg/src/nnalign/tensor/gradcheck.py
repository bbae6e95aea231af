"""Finite-difference verification of analytic gradients."""

import numpy as np


def relative_error(analytic, numeric, floor=1e-6):
    """Per-coordinate ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


# central-difference stencils: (offset in units of eps, weight), divisor
STENCILS = {
    3: ([(1, 1.0), (-1, -1.0)], 2.0),
    5: ([(2, -1.0), (1, 8.0), (-1, -8.0), (-2, 1.0)], 12.0),
}


def numeric_grad(fn, t, eps=1e-5, stencil=3):
    """Central differences of the scalar ``fn()`` with respect to tensor ``t``.

    ``stencil=5`` uses the fourth-order five-point rule, which tolerates a
    larger ``eps`` and so loses less to rounding on small gradients.
    """
    taps, div = STENCILS[stencil]
    g = np.zeros_like(t.value)
    flat = t.value.reshape(-1)
    gflat = g.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        acc = 0.0
        for off, w in taps:
            flat[k] = old + off * eps
            f = float(fn().value)
            if not np.isfinite(f):
                flat[k] = old
                raise ValueError("non-finite loss during gradient check")
            acc += w * f
        flat[k] = old
        gflat[k] = acc / (div * eps)
    return g


def grad_check(fn, params, eps=1e-5, floor=1e-6, stencil=3):
    """Worst relative error between backprop and central differences.

    ``fn`` rebuilds the graph from the current parameter values and returns a
    scalar tensor; ``params`` is a list of leaf tensors or a name->tensor map.
    """
    if isinstance(params, dict):
        params = list(params.values())
    for p in params:
        p.grad = None
    loss = fn()
    if not np.isfinite(loss.value):
        raise ValueError("non-finite loss during gradient check")
    loss.backward()
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.value)
        numeric = numeric_grad(fn, p, eps, stencil)
        if analytic.size:
            worst = max(worst, float(relative_error(analytic, numeric, floor).max()))
    return worst
