"""Character-level word encoders and sentence-level BiLSTMs."""

import numpy as np

from .tensor import bilstm_encode, bilstm_states, concat, take_rows
from .tensor.autograd import Tensor, reshape


def add_lstm(store, prefix, d_in, hidden, rng):
    """Register one LSTM direction. Gate biases start at zero."""
    return (
        store.add(f"{prefix}.W", (4 * hidden, d_in), rng),
        store.add(f"{prefix}.U", (4 * hidden, hidden), rng),
        store.add(f"{prefix}.b", (4 * hidden,), init="zeros"),
    )


def _lstm_params(store, prefix):
    return tuple(store[f"{prefix}.{k}"] for k in "WUb")


class CharEncoder:
    """Embeds characters and runs a BiLSTM; a word becomes ``[h_fwd, h_bwd]``."""

    def __init__(self, store, prefix, char_vocab, char_dim, hidden, rng):
        self.store = store
        self.prefix = prefix
        self.char_vocab = char_vocab
        self.hidden = hidden
        store.add(f"{prefix}.emb", (len(char_vocab), char_dim), rng)
        add_lstm(store, f"{prefix}.fwd", char_dim, hidden, rng)
        add_lstm(store, f"{prefix}.bwd", char_dim, hidden, rng)
        self._ids = {}

    @property
    def width(self):
        return 2 * self.hidden

    def char_ids(self, word):
        ids = self._ids.get(word)
        if ids is None:
            ids = self.char_vocab.encode_word(word) or (self.char_vocab.UNK_CHAR,)
            self._ids[word] = ids
        return ids

    def encode(self, words):
        """``(len(words), 2*hidden)``; each distinct surface form is encoded once."""
        uniq, inverse = np.unique(np.array(words, dtype=object), return_inverse=True)
        seqs = [self.char_ids(w) for w in uniq]
        lengths = np.array([len(s) for s in seqs])
        ids = np.zeros((len(seqs), lengths.max()), dtype=np.int64)
        for k, s in enumerate(seqs):
            ids[k, : len(s)] = s
        x = take_rows(self.store[f"{self.prefix}.emb"], ids)
        enc = bilstm_encode(
            x,
            lengths,
            _lstm_params(self.store, f"{self.prefix}.fwd"),
            _lstm_params(self.store, f"{self.prefix}.bwd"),
        )
        return take_rows(enc, inverse.ravel())


class SentenceEncoder:
    """BiLSTM over a sentence of word vectors; one ``2*hidden`` state per word."""

    def __init__(self, store, prefix, d_in, hidden, rng):
        self.store = store
        self.prefix = prefix
        self.hidden = hidden
        add_lstm(store, f"{prefix}.fwd", d_in, hidden, rng)
        add_lstm(store, f"{prefix}.bwd", d_in, hidden, rng)

    @property
    def width(self):
        return 2 * self.hidden

    def encode(self, word_vecs, lengths):
        """``word_vecs`` is ``(sum(lengths), d)`` stacked sentence by sentence.

        Returns ``(sum(lengths), 2*hidden)`` in the same order.
        """
        lengths = np.asarray(lengths, dtype=np.int64)
        B, T = len(lengths), int(lengths.max())
        d = word_vecs.shape[1]
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        total = int(lengths.sum())
        # padded slots point at an appended zero row
        gather = np.full((B, T), total, dtype=np.int64)
        for k in range(B):
            gather[k, : lengths[k]] = starts[k] + np.arange(lengths[k])
        padded = take_rows(concat([word_vecs, Tensor(np.zeros((1, d)))], axis=0), gather)
        states = bilstm_states(
            padded,
            lengths,
            _lstm_params(self.store, f"{self.prefix}.fwd"),
            _lstm_params(self.store, f"{self.prefix}.bwd"),
        )
        flat = np.concatenate([k * T + np.arange(lengths[k]) for k in range(B)])
        return take_rows(reshape(states, (B * T, 2 * self.hidden)), flat)
