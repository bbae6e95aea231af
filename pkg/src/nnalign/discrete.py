"""Count-based IBM-1 and HMM aligners trained with exact EM."""

import numpy as np

from . import kernels
from .alignment import JumpCounts, JumpTable, collect_jump_counts, jump_m_step
from .corpus import NULL, NULL_WORD


class CooccurrenceIndex:
    """Sparse support of a translation table: every observed ``(e, f)`` pair.

    NULL co-occurs with every source word. Per-sentence ``(J, I+1)`` index
    matrices into the parameter vector are cached; the last column is NULL.
    """

    def __init__(self, pairs=()):
        self.key = {}
        for p in pairs:
            for e in list(p.tgt) + [NULL]:
                for f in p.src:
                    self.key.setdefault((int(e), int(f)), len(self.key))
        self._finish()

    @classmethod
    def from_keys(cls, keys):
        index = cls()
        index.key = {(int(e), int(f)): k for k, (e, f) in enumerate(keys)}
        index._finish()
        return index

    def _finish(self):
        n = len(self.key)
        self.e_of = np.empty(n, dtype=np.int64)
        self.f_of = np.empty(n, dtype=np.int64)
        for (e, f), k in self.key.items():
            self.e_of[k] = e
            self.f_of[k] = f
        self._cache = {}

    def __len__(self):
        return len(self.key)

    def sentence_index(self, pair):
        ck = (tuple(pair.src), tuple(pair.tgt))
        idx = self._cache.get(ck)
        if idx is None:
            cols = list(pair.tgt) + [NULL]
            idx = np.array(
                [[self.key.get((int(e), int(f)), -1) for e in cols] for f in pair.src],
                dtype=np.int64,
            )
            self._cache[ck] = idx
        return idx


class TranslationTable:
    """``t(f | e)`` over the co-occurrence support; rows sum to one."""

    def __init__(self, index, probs):
        self.index = index
        self.probs = np.asarray(probs, dtype=np.float64)

    @classmethod
    def uniform(cls, pairs, index=None):
        index = index or CooccurrenceIndex(pairs)
        per_e = np.bincount(index.e_of)
        return cls(index, 1.0 / per_e[index.e_of])

    @classmethod
    def from_counts(cls, index, counts):
        """Normalise expected counts per target word; empty rows become uniform."""
        row = np.bincount(index.e_of, weights=counts, minlength=index.e_of.max() + 1)
        n = np.bincount(index.e_of, minlength=row.size)
        denom = row[index.e_of]
        probs = np.where(denom > 0, counts / np.where(denom > 0, denom, 1.0), 1.0 / n[index.e_of])
        return cls(index, probs)

    def prob(self, e, f):
        k = self.index.key.get((int(e), int(f)))
        return 0.0 if k is None else float(self.probs[k])

    def row_sums(self):
        return np.bincount(self.index.e_of, weights=self.probs)

    def pair_probs(self, pair):
        """``(J, I+1)`` probabilities; the last column is NULL."""
        idx = self.index.sentence_index(pair)
        return np.where(idx >= 0, self.probs[np.maximum(idx, 0)], 0.0)

    def emission(self, pair):
        """``(J, 2I)`` state emissions; null copies share the NULL column."""
        t = self.pair_probs(pair)
        return np.concatenate([t[:, :-1], np.repeat(t[:, -1:], pair.I, axis=1)], axis=1)

    def dump(self, path, src_vocab, tgt_vocab):
        rows = sorted(
            (tgt_vocab.decode(e), src_vocab.decode(f), p)
            for e, f, p in zip(self.index.e_of, self.index.f_of, self.probs)
        )
        with open(path, "w", encoding="utf-8") as fh:
            for e, f, p in rows:
                fh.write(f"{e}\t{f}\t{float(p)!r}\n")

    @classmethod
    def load(cls, path, src_vocab, tgt_vocab):
        keys, probs = [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                e, f, p = line.rstrip("\n").split("\t")
                keys.append((_lookup(tgt_vocab, e), _lookup(src_vocab, f)))
                probs.append(float(p))
        return cls(CooccurrenceIndex.from_keys(keys), probs)


def _lookup(vocab, word):
    if word == NULL_WORD:
        return NULL
    return vocab.encode(word)


def ibm1_em_step(pairs, table):
    """One exact EM iteration of IBM-1 with a uniform ``1/(2I)`` prior.

    Returns the new table and the log-likelihood under the *input* table.
    """
    counts = np.zeros(len(table.probs))
    ll = 0.0
    for p in pairs:
        idx = table.index.sentence_index(p)
        t = table.probs[idx]
        I = p.I
        z = t[:, :I].sum(axis=1) + I * t[:, I]
        ll += float(np.log(z / (2 * I)).sum())
        np.add.at(counts, idx[:, :I], t[:, :I] / z[:, None])
        np.add.at(counts, idx[:, I], I * t[:, I] / z)
    return TranslationTable.from_counts(table.index, counts), ll


def hmm_em_step(pairs, table, jump):
    """One exact E-step plus translation M-step for the discrete HMM.

    Returns ``(new_table, jump_counts, loglik)``; fold the counts with
    :func:`~nnalign.alignment.jump_m_step` to update the jump table.
    """
    counts = np.zeros(len(table.probs))
    jc = JumpCounts.zeros(jump.K)
    ll = 0.0
    for p in pairs:
        I = p.I
        S = 2 * I
        xi = np.zeros((1, S, S))
        gamma, lp = kernels.forward_backward(
            table.emission(p), jump.initial(I), jump.transition(I)[None], xi
        )
        ll += lp
        idx = table.index.sentence_index(p)
        np.add.at(counts, idx[:, :I], gamma[:, :I])
        np.add.at(counts, idx[:, I], gamma[:, I:].sum(axis=1))
        jc.add(collect_jump_counts(gamma, xi[0], I, jump.K))
    return TranslationTable.from_counts(table.index, counts), jc, ll


def train_ibm1(pairs, iterations=5, table=None):
    table = table or TranslationTable.uniform(pairs)
    history = []
    for _ in range(iterations):
        table, ll = ibm1_em_step(pairs, table)
        history.append(ll)
    return table, history


def train_hmm(pairs, iterations=5, table=None, jump=None):
    table = table or TranslationTable.uniform(pairs)
    jump = jump or JumpTable.uniform()
    history = []
    for _ in range(iterations):
        table, jc, ll = hmm_em_step(pairs, table, jump)
        jump = jump_m_step(jc.buckets, jc.null, jc.total)
        history.append(ll)
    return table, jump, history
