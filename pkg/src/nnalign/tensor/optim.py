"""Named parameters with Adam state."""

from collections import OrderedDict

import numpy as np

from .autograd import Tensor

BETA1, BETA2, EPS = 0.9, 0.999, 1e-8
INIT_SCALE = 0.1


class ParameterStore:
    """Ordered named parameters plus Adam first/second moments and step count."""

    def __init__(self):
        self.params = OrderedDict()
        self.m = {}
        self.v = {}
        self.step = 0

    def add(self, name, shape, rng=None, init="uniform"):
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        if isinstance(init, str) and init == "uniform":
            value = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        elif isinstance(init, str) and init == "zeros":
            value = np.zeros(shape)
        else:
            value = np.asarray(init, dtype=np.float64).reshape(shape)
        t = Tensor(value, requires_grad=True)
        self.params[name] = t
        self.m[name] = np.zeros(shape)
        self.v[name] = np.zeros(shape)
        return t

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def items(self):
        return self.params.items()

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def values_dict(self):
        return {k: t.value for k, t in self.params.items()}

    def load_values(self, values):
        for k, v in values.items():
            if k not in self.params:
                continue
            if self.params[k].shape != v.shape:
                raise ValueError(f"shape mismatch for {k}: {self.params[k].shape} vs {v.shape}")
            self.params[k].value = np.array(v, dtype=np.float64)

    def reset_optimizer(self):
        for k in self.params:
            self.m[k] = np.zeros_like(self.m[k])
            self.v[k] = np.zeros_like(self.v[k])
        self.step = 0


def adam_step(store, lr, grads=None):
    """One bias-corrected Adam update that *descends* the gradients.

    ``grads`` defaults to the ``.grad`` buffers of the parameters; parameters
    without a gradient are treated as having a zero gradient.
    """
    if grads is None:
        grads = {k: t.grad for k, t in store.items()}
    for k in grads:
        if k not in store:
            raise KeyError(f"gradient for unknown parameter {k!r}")
    store.step += 1
    c1 = 1.0 - BETA1 ** store.step
    c2 = 1.0 - BETA2 ** store.step
    for k, t in store.items():
        g = grads.get(k)
        if g is None:
            g = np.zeros_like(t.value)
        elif g.shape != t.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {t.shape} for {k}")
        store.m[k] = BETA1 * store.m[k] + (1.0 - BETA1) * g
        store.v[k] = BETA2 * store.v[k] + (1.0 - BETA2) * g * g
        if lr != 0.0:
            t.value = t.value - lr * (store.m[k] / c1) / (np.sqrt(store.v[k] / c2) + EPS)
    return store
