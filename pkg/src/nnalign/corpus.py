"""Parallel corpus ingestion, vocabularies, batching and gold alignments."""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

logger = logging.getLogger(__name__)

UNK = 0
NULL = 1
UNK_WORD = "<unk>"
NULL_WORD = "<null>"
DEFAULT_MAX_LEN = 50
MAX_WORD_CHARS = 30


class DataError(Exception):
    """Malformed or inconsistent input data."""


class Vocabulary:
    """Word to id map with training counts.

    Ids 0 and 1 are reserved for UNK and NULL; corpus words occupy
    ``2..size-1`` in decreasing frequency order.
    """

    def __init__(self, words=(), counts=()):
        self.id2word = [UNK_WORD, NULL_WORD] + list(words)
        self.counts = np.zeros(len(self.id2word), dtype=np.int64)
        self.counts[2:] = list(counts) if len(words) else []
        # reserved entries are deliberately absent from the lookup table
        self.word2id = {w: k + 2 for k, w in enumerate(words)}

    def __len__(self):
        return len(self.id2word)

    def __contains__(self, word):
        return word in self.word2id

    def encode(self, word):
        return self.word2id.get(word, UNK)

    def encode_all(self, words):
        return np.array([self.word2id.get(w, UNK) for w in words], dtype=np.int64)

    def decode(self, idx):
        return self.id2word[idx]

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for k, w in enumerate(self.id2word):
                fh.write(f"{k}\t{w}\t{self.counts[k]}\n")

    @classmethod
    def load(cls, path):
        words, counts = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or int(parts[0]) != lineno - 1:
                    raise DataError(f"{path}:{lineno}: malformed vocabulary line")
                if lineno > 2:
                    words.append(parts[1])
                    counts.append(int(parts[2]))
        return cls(words, counts)


class CharVocabulary:
    """Character ids: 0 padding, 1 unknown character, 2 the NULL word symbol."""

    PAD, UNK_CHAR, NULL_SYMBOL = 0, 1, 2

    def __init__(self, chars=()):
        self.id2char = ["<pad>", "<unk>", "<null>"] + list(chars)
        self.char2id = {c: k + 3 for k, c in enumerate(chars)}

    def __len__(self):
        return len(self.id2char)

    def encode_word(self, word):
        if word == NULL_WORD:
            return (self.NULL_SYMBOL,)
        return tuple(self.char2id.get(c, self.UNK_CHAR) for c in word[:MAX_WORD_CHARS])

    @classmethod
    def from_words(cls, words):
        seen = {}
        for w in words:
            for c in w:
                seen.setdefault(c, None)
        return cls(list(seen))

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for c in self.id2char[3:]:
                fh.write(f"{ord(c)}\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls([chr(int(line)) for line in fh if line.strip()])


@dataclass(frozen=True)
class SentencePair:
    src_words: tuple
    tgt_words: tuple
    index: int = 0  # 0-based line number in the unfiltered files
    src: np.ndarray = field(default=None, compare=False, repr=False)
    tgt: np.ndarray = field(default=None, compare=False, repr=False)

    @property
    def J(self):
        return len(self.src_words)

    @property
    def I(self):
        return len(self.tgt_words)

    def swapped(self):
        return SentencePair(self.tgt_words, self.src_words, self.index, self.tgt, self.src)


@dataclass(frozen=True)
class GoldAlignment:
    """Sure and possible links as 1-based ``(j, i)`` pairs; ``sure <= possible``."""

    sure: frozenset
    possible: frozenset

    def transposed(self):
        return GoldAlignment(
            frozenset((i, j) for j, i in self.sure),
            frozenset((i, j) for j, i in self.possible),
        )


EMPTY_GOLD = GoldAlignment(frozenset(), frozenset())


@dataclass(frozen=True)
class Batch:
    pairs: tuple
    vocab: frozenset  # distinct source ids in the batch


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def filter_pairs(pairs, max_len=DEFAULT_MAX_LEN):
    """Keep pairs whose both sides are non-empty and shorter than ``max_len``."""
    if max_len is None:
        return [p for p in pairs if p.J and p.I]
    return [p for p in pairs if 0 < p.J < max_len and 0 < p.I < max_len]


def load_parallel(src_path, tgt_path, max_len=DEFAULT_MAX_LEN):
    """Read two aligned token files into a list of :class:`SentencePair`.

    ``max_len=None`` disables the length filter, as used for test sets.
    """
    src_lines = _read_lines(src_path)
    tgt_lines = _read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise DataError(
            f"line count mismatch: {src_path} has {len(src_lines)}, "
            f"{tgt_path} has {len(tgt_lines)}"
        )
    pairs = []
    for k, (s, t) in enumerate(zip(src_lines, tgt_lines)):
        sw, tw = tuple(s.split()), tuple(t.split())
        if not sw or not tw:
            logger.warning("line %d: empty sentence, pair dropped", k + 1)
            continue
        pairs.append(SentencePair(sw, tw, k))
    return filter_pairs(pairs, max_len)


def build_vocab(pairs, side, cap=50000):
    """Keep the ``cap`` most frequent words of one side (``"src"``/``"tgt"``).

    Ties at the cut break by first occurrence. ``cap=None`` keeps every word.
    """
    if cap is not None and cap < 1:
        raise ValueError("vocabulary cap must be >= 1")
    counts = Counter()
    for p in pairs:
        counts.update(p.src_words if side == "src" else p.tgt_words)
    # Counter preserves insertion (first occurrence) order; sort is stable
    ranked = sorted(counts.items(), key=lambda kv: -kv[1])
    if cap is not None:
        ranked = ranked[:cap]
    return Vocabulary([w for w, _ in ranked], [c for _, c in ranked])


def encode_pairs(pairs, src_vocab, tgt_vocab):
    return [
        replace(p, src=src_vocab.encode_all(p.src_words), tgt=tgt_vocab.encode_all(p.tgt_words))
        for p in pairs
    ]


def make_batches(pairs, size, shuffle=False, seed=0):
    if size < 1:
        raise ValueError("batch size must be >= 1")
    order = np.arange(len(pairs))
    if shuffle:
        np.random.default_rng(seed).shuffle(order)
    batches = []
    for start in range(0, len(order), size):
        chunk = tuple(pairs[k] for k in order[start:start + size])
        ids = frozenset(int(x) for p in chunk if p.src is not None for x in p.src)
        batches.append(Batch(chunk, ids))
    return batches


def batch_vocab(batch, full_vocab, size):
    """Batch source ids plus UNK, padded with the most frequent other ids."""
    keep = set(batch.vocab) | {UNK}
    if size < len(keep):
        raise ValueError(
            f"batch vocabulary size {size} smaller than the {len(keep)} ids in the batch"
        )
    # ids >= 2 are already in decreasing frequency order; NULL is the last resort
    for k in list(range(2, len(full_vocab))) + [NULL]:
        if len(keep) >= size:
            break
        keep.add(k)
    return np.array(sorted(keep), dtype=np.int64)


def load_gold(path, lengths=None):
    """Parse ``snt_id j i flag`` lines into ``{snt_id: GoldAlignment}``.

    ``lengths`` optionally maps ``snt_id`` to ``(J, I)`` for range checks.
    """
    sure, possible = {}, {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4 or parts[3] not in ("S", "P"):
                raise DataError(f"{path}:{lineno}: expected 'snt_id j i S|P'")
            try:
                snt, j, i = (int(x) for x in parts[:3])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer field") from None
            if snt < 1 or j < 1 or i < 1:
                raise DataError(f"{path}:{lineno}: indices are 1-based")
            if lengths is not None:
                if snt not in lengths:
                    raise DataError(f"{path}:{lineno}: unknown sentence {snt}")
                J, I = lengths[snt]
                if j > J or i > I:
                    raise DataError(f"{path}:{lineno}: link ({j}, {i}) out of range")
            possible.setdefault(snt, set()).add((j, i))
            if parts[3] == "S":
                sure.setdefault(snt, set()).add((j, i))
    return {
        k: GoldAlignment(frozenset(sure.get(k, ())), frozenset(possible[k]))
        for k in sorted(possible)
    }


def write_gold(gold, path):
    with open(path, "w", encoding="utf-8") as fh:
        for snt in sorted(gold):
            g = gold[snt]
            for j, i in sorted(g.possible | g.sure):
                fh.write(f"{snt} {j} {i} {'S' if (j, i) in g.sure else 'P'}\n")
