"""Time the compiled HMM kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--lengths 10 25 50] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from nnalign.kernels import _pykernels

try:
    from nnalign.kernels import _ckernels
except ImportError:
    _ckernels = None


def instance(rng, I, J, K=5):
    S = 2 * I
    buckets = rng.dirichlet(np.ones(2 * K + 3), size=I)
    trans = _pykernels.build_transition(I, buckets, 0.2, K)
    init = _pykernels.build_initial(I, buckets[0], 0.2, K)
    emit = rng.random((J, S))
    return buckets, trans, init, emit


def cases(impl, I, J, inst, K=5):
    buckets, trans, init, emit = inst
    S = 2 * I
    with np.errstate(divide="ignore"):
        lt, li, le = np.log(trans)[None], np.log(init), np.log(emit)
    xi_sum = np.zeros((1, S, S))
    return {
        "build_transition": lambda: impl.build_transition(I, buckets, 0.2, K),
        "forward_backward": lambda: impl.forward_backward(emit, init, trans[None], xi_sum),
        "viterbi": lambda: impl.viterbi(le, li, lt),
        "jump_counts": lambda: impl.jump_counts(trans, I, K),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lengths", type=int, nargs="+", default=[10, 25, 50])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the fallback can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'I=J':>5}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for n in args.lengths:
        inst = instance(rng, n, n)
        py = cases(_pykernels, n, n, inst)
        cy = cases(_ckernels, n, n, inst) if _ckernels else {}
        for name, fn in py.items():
            number = max(1, 200 // n)
            t_py = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number * 1e3
            if name in cy:
                t_cy = min(timeit.repeat(cy[name], number=number, repeat=args.repeat)) / number * 1e3
                print(f"{name:<18}{n:>5}{t_py:>12.3f}{t_cy:>12.3f}{t_py / t_cy:>9.1f}x")
            else:
                print(f"{name:<18}{n:>5}{t_py:>12.3f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
