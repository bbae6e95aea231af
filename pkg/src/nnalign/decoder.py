"""Asymmetric decoding, symmetrization and Pharaoh-format I/O.

Alignments are frozensets of 1-based ``(j, i)`` links: ``j`` indexes the
source sentence and ``i`` the target sentence. Source words aligned to a
null state carry no link.
"""

import numpy as np

from . import kernels
from .corpus import DataError

NEIGHBORS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def path_to_links(path, I):
    return frozenset((j + 1, int(s) + 1) for j, s in enumerate(path) if s < I)


def ibm1_decode(log_emit):
    """Independent argmax per source word over the ``2I`` states.

    Ties go to the smallest real index, and real states beat null copies.
    """
    log_emit = np.asarray(log_emit)
    I = log_emit.shape[1] // 2
    return path_to_links(np.argmax(log_emit, axis=1), I)


def viterbi(log_emit, log_trans, log_init):
    """Best state path as links. ``log_trans`` is ``(S, S)`` or ``(J-1, S, S)``."""
    log_emit = np.ascontiguousarray(log_emit, dtype=np.float64)
    log_trans = np.asarray(log_trans, dtype=np.float64)
    if log_trans.ndim == 2:
        log_trans = log_trans[None]
    path, _ = kernels.viterbi(log_emit, np.ascontiguousarray(log_init, dtype=np.float64), log_trans)
    return path_to_links(path, log_emit.shape[1] // 2)


def grow_diag_final(forward, reverse, src_len=None, tgt_len=None, final_and=False):
    """Symmetrize two directional alignments (both oriented as ``(j, i)``).

    Starts from the intersection, grows through diagonal neighbours present
    in the union while either endpoint is unaligned, then adds remaining
    links of the forward and then the reverse alignment whose source or
    target word is still unaligned (both, with ``final_and``).
    """
    forward, reverse = set(forward), set(reverse)
    union = forward | reverse
    J = src_len if src_len is not None else max((j for j, _ in union), default=0)
    I = tgt_len if tgt_len is not None else max((i for _, i in union), default=0)
    for j, i in union:
        if not (1 <= j <= J and 1 <= i <= I):
            raise ValueError(f"link ({j}, {i}) outside a {J}x{I} sentence pair")
    out = forward & reverse
    src_done = {j for j, _ in out}
    tgt_done = {i for _, i in out}

    def add(j, i):
        out.add((j, i))
        src_done.add(j)
        tgt_done.add(i)

    grew = True
    while grew:
        grew = False
        for i in range(1, I + 1):
            for j in range(1, J + 1):
                if (j, i) not in out:
                    continue
                for di, dj in NEIGHBORS:
                    nj, ni = j + dj, i + di
                    if (nj, ni) in union and (nj, ni) not in out and (
                        nj not in src_done or ni not in tgt_done
                    ):
                        add(nj, ni)
                        grew = True
    for side in (forward, reverse):
        for i in range(1, I + 1):
            for j in range(1, J + 1):
                if (j, i) not in side or (j, i) in out:
                    continue
                free_j, free_i = j not in src_done, i not in tgt_done
                if (free_j and free_i) if final_and else (free_j or free_i):
                    add(j, i)
    return frozenset(out)


def write_pharaoh(alignments, path):
    with open(path, "w", encoding="utf-8") as fh:
        for links in alignments:
            fh.write(" ".join(f"{j - 1}-{i - 1}" for j, i in sorted(links)) + "\n")


def read_pharaoh(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            links = set()
            for tok in line.split():
                a, sep, b = tok.partition("-")
                if not sep or not a.isdigit() or not b.isdigit():
                    raise DataError(f"{path}:{lineno}: malformed link {tok!r}")
                links.add((int(a) + 1, int(b) + 1))
            out.append(frozenset(links))
    return out


def transpose(links):
    return frozenset((i, j) for j, i in links)
