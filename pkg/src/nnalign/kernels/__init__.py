"""HMM inner loops, compiled when available.

The Cython extension ``_ckernels`` is used when it was built; otherwise the
numpy twins in ``_pykernels`` are used. Setting ``NNALIGN_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _pykernels
from ._pykernels import ZeroLikelihood, bucket_of

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("NNALIGN_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

build_transition = _impl.build_transition
build_initial = _impl.build_initial
forward_backward = _impl.forward_backward
viterbi = _impl.viterbi
jump_counts = _impl.jump_counts

__all__ = [
    "BACKEND",
    "ZeroLikelihood",
    "bucket_of",
    "build_transition",
    "build_initial",
    "forward_backward",
    "viterbi",
    "jump_counts",
]
