"""Jump-width alignment models over real and per-position null states."""

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .kernels import bucket_of

logger = logging.getLogger(__name__)

DEFAULT_K = 5
DEFAULT_P0 = 0.2
P0_MIN, P0_MAX = 1e-4, 1.0 - 1e-4


def bucket_labels(K):
    return [f"<-{K}"] + [f"{d:+d}" if d else "0" for d in range(-K, K + 1)] + [f">+{K}"]


@dataclass
class JumpTable:
    """Multinomial over ``2K+3`` jump buckets plus the null probability ``p0``.

    Bucket 0 collects jumps below ``-K``, bucket ``2K+2`` jumps above ``+K``
    and bucket ``d + K + 1`` the jump ``d`` itself.
    """

    K: int
    buckets: np.ndarray
    p0: float

    def __post_init__(self):
        self.buckets = np.asarray(self.buckets, dtype=np.float64)
        if self.K < 1 or self.buckets.shape != (2 * self.K + 3,):
            raise ValueError("jump table needs K >= 1 and 2K+3 buckets")
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie strictly between 0 and 1")

    @classmethod
    def uniform(cls, K=DEFAULT_K, p0=DEFAULT_P0):
        return cls(K, np.full(2 * K + 3, 1.0 / (2 * K + 3)), p0)

    def transition(self, I):
        return transition_matrix(I, self.buckets, self.p0, self.K)

    def initial(self, I):
        return initial_distribution(I, self.buckets, self.p0, self.K)

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"K\t{self.K}\n")
            fh.write(f"p0\t{float(self.p0)!r}\n")
            for label, v in zip(bucket_labels(self.K), self.buckets):
                fh.write(f"{label}\t{float(v)!r}\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
        K = int(rows[0][1])
        p0 = float(rows[1][1])
        return cls(K, [float(r[1]) for r in rows[2:]], p0)


@dataclass
class JumpCounts:
    """Expected jump statistics accumulated during an E-step."""

    buckets: np.ndarray
    null: float = 0.0
    total: float = 0.0

    @classmethod
    def zeros(cls, K):
        return cls(np.zeros(2 * K + 3))

    def add(self, other):
        self.buckets = self.buckets + other.buckets
        self.null += other.null
        self.total += other.total


def transition_matrix(I, buckets, p0, K=DEFAULT_K):
    """``2I x 2I`` transition matrix.

    ``buckets`` is one jump distribution shared by every position, or an
    ``(I, 2K+3)`` array giving one distribution per remembered position.
    Real state ``i`` and its null copy ``i'`` share an outgoing row: ``p0``
    to ``i'`` and ``1 - p0`` spread over real states by jump width, with
    out-of-window jumps splitting their bucket evenly among valid offsets.
    """
    if I < 1:
        raise ValueError("target length must be >= 1")
    b = np.asarray(buckets, dtype=np.float64)
    if b.ndim == 1:
        b = np.broadcast_to(b, (I, b.size))
    return kernels.build_transition(I, np.ascontiguousarray(b), float(p0), K)


def initial_distribution(I, buckets, p0, K=DEFAULT_K):
    """Start distribution, treated as a jump from virtual position 0."""
    if I < 1:
        raise ValueError("target length must be >= 1")
    return kernels.build_initial(I, np.ascontiguousarray(buckets, dtype=np.float64), float(p0), K)


def valid_bucket_mask(I, K):
    """``(I, 2K+3)`` mask: bucket reachable from each position by some valid jump."""
    delta = np.arange(1, I + 1)[None, :] - np.arange(1, I + 1)[:, None]
    mask = np.zeros((I, 2 * K + 3), dtype=bool)
    np.put_along_axis(mask, bucket_of(delta, K), True, axis=1)
    return mask


def overflow_counts(I, K):
    """``(I, 2K+3)`` number of valid offsets per bucket (1 inside the window)."""
    delta = np.arange(1, I + 1)[None, :] - np.arange(1, I + 1)[:, None]
    counts = np.zeros((I, 2 * K + 3))
    rows = np.repeat(np.arange(I), I)
    np.add.at(counts, (rows, bucket_of(delta, K).ravel()), 1.0)
    return counts


def jump_m_step(bucket_counts, null_count, total):
    """Re-estimate a :class:`JumpTable` from expected counts."""
    bucket_counts = np.asarray(bucket_counts, dtype=np.float64)
    if np.any(bucket_counts < 0) or null_count < 0 or total < 0:
        raise ValueError("jump counts must be non-negative")
    K = (bucket_counts.size - 3) // 2
    s = bucket_counts.sum()
    if s > 0:
        buckets = bucket_counts / s
    else:
        logger.warning("no jump mass collected; falling back to uniform jumps")
        buckets = np.full(bucket_counts.size, 1.0 / bucket_counts.size)
    p0 = null_count / total if total > 0 else 0.0
    return JumpTable(K, buckets, float(np.clip(p0, P0_MIN, P0_MAX)))


def collect_jump_counts(gamma, xi, I, K):
    """Bucket, null and total counts for one sentence.

    ``xi`` is the ``(S, S)`` pairwise posterior summed over positions; the
    first position contributes a jump from virtual position 0.
    """
    per_pos, nulls = kernels.jump_counts(np.ascontiguousarray(xi), I, K)
    b = per_pos.sum(axis=0)
    np.add.at(b, bucket_of(np.arange(1, I + 1), K), gamma[0, :I])
    null = float(nulls.sum() + gamma[0, I:].sum())
    total = float(b.sum() + null)
    return JumpCounts(b, null, total)
