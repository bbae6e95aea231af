"""Generated bitexts with known gold alignments."""

import numpy as np

from .corpus import GoldAlignment, SentencePair


def dictionary_corpus(n_pairs=500, n_types=20, min_len=3, max_len=8, monotone=False, seed=0):
    """One-to-one dictionary bitext.

    Source words ``s0..s{n-1}`` translate to ``t{perm}``; a sentence samples
    distinct words so every link is identifiable. Target order is the source
    order when ``monotone`` and a random permutation otherwise. Returns the
    pairs and ``{snt_id: GoldAlignment}`` with 1-based sentence ids.
    """
    rng = np.random.default_rng(seed)
    lexicon = rng.permutation(n_types)
    pairs, gold = [], {}
    for k in range(n_pairs):
        J = int(rng.integers(min_len, max_len + 1))
        src = rng.choice(n_types, size=J, replace=False)
        order = np.arange(J) if monotone else rng.permutation(J)
        tgt = [f"t{lexicon[src[o]]}" for o in order]
        links = frozenset((int(o) + 1, pos + 1) for pos, o in enumerate(order))
        pairs.append(SentencePair(tuple(f"s{w}" for w in src), tuple(tgt), k))
        gold[k + 1] = GoldAlignment(links, links)
    return pairs, gold


def noisy_corpus(n_pairs=1000, n_types=150, seed=0):
    """Zipfian bitext with local reordering, unaligned words and synonyms.

    Intended for exercising EM rather than for convergence checks.
    """
    rng = np.random.default_rng(seed)
    zipf = 1.0 / np.arange(1, n_types + 1)
    zipf /= zipf.sum()
    lexicon = rng.permutation(n_types)
    pairs, gold = [], {}
    for k in range(n_pairs):
        J = int(rng.integers(2, 16))
        src = rng.choice(n_types, size=J, p=zipf)
        tgt, links = [], set()
        for j, w in enumerate(src):
            if rng.random() < 0.08:
                continue  # source word left unaligned
            word = f"t{lexicon[w]}" if rng.random() > 0.1 else f"t{lexicon[w]}b"
            tgt.append((j, word))
        for _ in range(int(rng.integers(0, 3))):
            tgt.insert(int(rng.integers(0, len(tgt) + 1)), (None, f"n{rng.integers(0, 5)}"))
        for a in range(len(tgt) - 1):  # local swaps
            if rng.random() < 0.15:
                tgt[a], tgt[a + 1] = tgt[a + 1], tgt[a]
        if not tgt:
            tgt = [(None, "n0")]
        for pos, (j, _) in enumerate(tgt):
            if j is not None:
                links.add((j + 1, pos + 1))
        pairs.append(SentencePair(tuple(f"s{w}" for w in src), tuple(w for _, w in tgt), k))
        gold[k + 1] = GoldAlignment(frozenset(links), frozenset(links))
    return pairs, gold
