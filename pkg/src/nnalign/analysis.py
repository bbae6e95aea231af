"""Alignment error rate and error breakdowns.

Predicted alignments are lists (one entry per sentence) of ``(j, i)`` link
sets; gold alignments are matching lists of
:class:`~nnalign.corpus.GoldAlignment`. A predicted link is *correct* when
it is a possible link.
"""

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .alignment import bucket_labels
from .corpus import EMPTY_GOLD
from .kernels import bucket_of

logger = logging.getLogger(__name__)

CONTENT_POS = frozenset({"NOUN", "VERB", "ADJ", "ADV"})


@dataclass(frozen=True)
class AerReport:
    aer: float
    precision: float
    recall: float
    predicted: int
    sure: int
    hits_sure: int
    hits_possible: int

    def as_text(self):
        rows = [
            ("AER", f"{self.aer:.4f}"),
            ("precision", f"{self.precision:.4f}"),
            ("recall", f"{self.recall:.4f}"),
            ("predicted_links", str(self.predicted)),
            ("sure_links", str(self.sure)),
            ("predicted_in_sure", str(self.hits_sure)),
            ("predicted_in_possible", str(self.hits_possible)),
        ]
        return "".join(f"{k}\t{v}\n" for k, v in rows)


def _as_lists(A, S, P):
    if isinstance(A, (set, frozenset)):
        return [A], [S], [P]
    return list(A), list(S), list(P)


def aer(A, S, P):
    """``1 - (|A&S| + |A&P|) / (|A| + |S|)`` summed over the corpus.

    Arguments are single link sets or per-sentence lists of them.
    """
    A, S, P = _as_lists(A, S, P)
    n_a = n_s = a_s = a_p = 0
    for a, s, p in zip(A, S, P, strict=True):
        a, s = set(a), set(s)
        p = set(p) | s
        n_a += len(a)
        n_s += len(s)
        a_s += len(a & s)
        a_p += len(a & p)
    if n_a + n_s == 0:
        logger.warning("AER of empty prediction against empty reference defined as 0")
        score = 0.0
    else:
        score = 1.0 - (a_s + a_p) / (n_a + n_s)
    return AerReport(
        aer=score,
        precision=a_p / n_a if n_a else 0.0,
        recall=a_s / n_s if n_s else 0.0,
        predicted=n_a,
        sure=n_s,
        hits_sure=a_s,
        hits_possible=a_p,
    )


def score_corpus(predicted, gold, n_sentences=None):
    """AER of per-sentence predictions against a ``{snt_id: GoldAlignment}`` map
    (sentence ids are 1-based line numbers)."""
    n = len(predicted) if n_sentences is None else n_sentences
    golds = [gold.get(k + 1, EMPTY_GOLD) for k in range(n)]
    return aer(predicted, [g.sure for g in golds], [g.possible for g in golds])


@dataclass
class AccuracyCounts:
    null_correct: int = 0
    null_incorrect: int = 0
    link_correct: int = 0
    link_incorrect: int = 0

    @property
    def total(self):
        return self.null_correct + self.null_incorrect + self.link_correct + self.link_incorrect


def _links_by_source(links):
    out = {}
    for j, i in links:
        out.setdefault(j, []).append(i)
    return out


def accuracy_breakdown(predicted, gold, src_lengths):
    """Classify every source-word decision of an asymmetric alignment."""
    counts = AccuracyCounts()
    for links, g, J in zip(predicted, gold, src_lengths, strict=True):
        by_src = _links_by_source(links)
        gold_aligned = {j for j, _ in g.possible | g.sure}
        possible = g.possible | g.sure
        for j in range(1, J + 1):
            targets = by_src.get(j)
            if not targets:
                if j in gold_aligned:
                    counts.null_incorrect += 1
                else:
                    counts.null_correct += 1
                continue
            if len(targets) > 1:
                raise ValueError(f"source word {j} has {len(targets)} links; expected an asymmetric alignment")
            if (j, targets[0]) in possible:
                counts.link_correct += 1
            else:
                counts.link_incorrect += 1
    return counts


def known_unknown_groups(tgt_sentences, known):
    """Group key per target token: ``"known"`` or ``"unknown"``."""
    return [["known" if w in known else "unknown" for w in sent] for sent in tgt_sentences]


def pos_groups(tag_sentences):
    """Group key per target token from UPOS tags: ``"content"`` or ``"function"``."""
    return [["content" if t in CONTENT_POS else "function" for t in tags] for tags in tag_sentences]


def recall_breakdown(predicted, gold, groups):
    """Recall errors per target-word group.

    ``"null"`` counts predicted links from source words that gold leaves
    unaligned, filed under the target word they were linked to;
    ``"non-null"`` counts sure gold links missing from the prediction, filed
    under their target word. ``groups[k][i-1]`` is the group of target ``i``
    in sentence ``k``.
    """
    table = {}
    for links, g, grp in zip(predicted, gold, groups, strict=True):
        gold_aligned = {j for j, _ in g.possible | g.sure}
        for j, i in links:
            if j not in gold_aligned:
                table.setdefault(grp[i - 1], Counter())["null"] += 1
        for j, i in g.sure:
            if (j, i) not in links:
                table.setdefault(grp[i - 1], Counter())["non-null"] += 1
    return {k: {"null": c["null"], "non-null": c["non-null"]} for k, c in sorted(table.items())}


def median_location(locations):
    """Median of target positions, rounded down to an integer position."""
    loc = sorted(locations)
    n = len(loc)
    if n % 2:
        return loc[n // 2]
    return (loc[n // 2 - 1] + loc[n // 2]) // 2


def jump_confusion(predicted, gold, src_lengths, K=5):
    """``(2K+3, 2K+3)`` counts; rows are reference jumps, columns predicted.

    A source position contributes only when its predecessor's predicted
    target equals that predecessor's reference location and both positions
    have a reference location and a predicted link.
    """
    M = np.zeros((2 * K + 3, 2 * K + 3), dtype=np.int64)
    for links, g, J in zip(predicted, gold, src_lengths, strict=True):
        pred = {j: i for j, i in links}
        ref_sets = _links_by_source(g.possible | g.sure)
        ref = {j: median_location(v) for j, v in ref_sets.items()}
        for j in range(2, J + 1):
            if j not in ref or j - 1 not in ref or j not in pred:
                continue
            if pred.get(j - 1) != ref[j - 1]:
                continue
            M[bucket_of(ref[j] - ref[j - 1], K), bucket_of(pred[j] - ref[j - 1], K)] += 1
    return M


@dataclass(frozen=True)
class FrequencyBuckets:
    """Training-frequency groups for the garbage-collector analysis."""

    frequent_src: frozenset  # most frequent words covering 90% of source tokens
    seen_src: frozenset
    rare_tgt: frozenset  # least frequent words covering 1% of target tokens
    seen_tgt: frozenset

    SOURCE_ROWS = ("90%", "10%", "0%")
    TARGET_COLS = ("1%", "0%")

    @staticmethod
    def _prefix(counts, share, descending):
        total = sum(counts.values())
        order = sorted(counts.items(), key=lambda kv: ((-kv[1] if descending else kv[1]), kv[0]))
        picked, acc = set(), 0
        for w, c in order:
            if acc >= share * total:
                break
            picked.add(w)
            acc += c
        return frozenset(picked)

    @classmethod
    def from_counts(cls, src_counts, tgt_counts):
        return cls(
            cls._prefix(src_counts, 0.9, True),
            frozenset(src_counts),
            cls._prefix(tgt_counts, 0.01, False),
            frozenset(tgt_counts),
        )

    def source_row(self, word):
        if word in self.frequent_src:
            return 0
        return 1 if word in self.seen_src else 2

    def target_col(self, word):
        if word not in self.seen_tgt:
            return 1
        return 0 if word in self.rare_tgt else None


def garbage_table(predicted, gold, src_sentences, tgt_sentences, buckets):
    """3x2 counts of incorrect non-null links into rare or unseen target words.

    Rows are source groups (90%, 10%, 0%) and columns target groups (1%, 0%).
    """
    table = np.zeros((3, 2), dtype=np.int64)
    for links, g, src, tgt in zip(predicted, gold, src_sentences, tgt_sentences, strict=True):
        possible = g.possible | g.sure
        for j, i in links:
            if (j, i) in possible:
                continue
            col = buckets.target_col(tgt[i - 1])
            if col is not None:
                table[buckets.source_row(src[j - 1]), col] += 1
    return table


def emit_heatmap(matrix, path, row_labels=None, col_labels=None, corner="ref\\pred"):
    """Write a labelled TSV grid for external plotting."""
    M = np.asarray(matrix)
    if M.size == 0:
        M = M.reshape(0, 0)
    rows = row_labels if row_labels is not None else [str(k) for k in range(M.shape[0])]
    cols = col_labels if col_labels is not None else [str(k) for k in range(M.shape[1])]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join([corner] + list(cols)) + "\n")
        for label, row in zip(rows, M):
            fh.write("\t".join([label] + [str(v) for v in row.tolist()]) + "\n")


def confusion_labels(K):
    return bucket_labels(K)
