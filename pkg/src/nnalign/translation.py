"""Neural translation models ``p(f | target state)``.

Every variant maps a target-side state (a real target position or the NULL
word) to a hidden vector through one htanh layer and dropout, then scores
source words with an output layer restricted to a *support*: the batch
vocabulary during training, the full or open vocabulary at test time.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .corpus import NULL, NULL_WORD, batch_vocab
from .encoders import CharEncoder
from .tensor import (
    ParameterStore,
    concat,
    conv_combine,
    dropout,
    htanh,
    linear,
    log_softmax,
    take_rows,
)
from .tensor.autograd import reshape

VARIANTS = ("NN", "CtxCc", "CtxCnn", "NNCharTgt", "NNCharWord", "NNCharBoth")
CHAR_VARIANTS = ("NNCharTgt", "NNCharWord", "NNCharBoth")


@dataclass
class TranslationConfig:
    variant: str = "NN"
    emb_dim: int = 64
    hidden_dim: int = 64
    context: int = 1
    char_dim: int = 64
    char_hidden: int = 64
    dropout: float = 0.1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown translation variant {self.variant!r}; choose from {VARIANTS}")
        if min(self.emb_dim, self.hidden_dim, self.char_dim, self.char_hidden) < 1 or self.context < 0:
            raise ValueError("dimensions must be positive and context >= 0")
        if self.variant == "CtxCnn" and self.emb_dim <= 2 * self.context:
            raise ValueError("CtxCnn needs emb_dim > 2 * context")


class Support:
    """Ordered output columns. Keys are source ids, or surface forms for
    character-level output layers."""

    def __init__(self, keys):
        self.keys = list(keys)
        if not self.keys:
            raise ValueError("empty support")
        self.col = {k: c for c, k in enumerate(self.keys)}

    def __len__(self):
        return len(self.keys)

    def columns(self, keys):
        return np.array([self.col[k] for k in keys], dtype=np.int64)


class NeuralTranslationModel:
    def __init__(self, config, src_vocab, tgt_vocab, char_vocab=None, seed=0):
        self.config = config
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.char_vocab = char_vocab
        self.store = ParameterStore()
        rng = np.random.default_rng(seed)
        c, v = config, config.variant
        if v in CHAR_VARIANTS and char_vocab is None:
            raise ValueError(f"{v} needs a character vocabulary")
        # one extra embedding row pads context windows at sentence edges
        self.boundary = len(tgt_vocab)
        if v in ("NN", "CtxCc", "CtxCnn", "NNCharWord"):
            self.store.add("tgt.emb", (len(tgt_vocab) + 1, c.emb_dim), rng)
        if v in CHAR_VARIANTS:
            self.tgt_chars = CharEncoder(self.store, "tgt.char", char_vocab, c.char_dim, c.char_hidden, rng)
        width = {
            "NN": c.emb_dim,
            "CtxCc": (2 * c.context + 1) * c.emb_dim,
            "CtxCnn": c.emb_dim - 2 * c.context,
            "NNCharTgt": 2 * c.char_hidden,
            "NNCharWord": 2 * c.char_hidden + c.emb_dim,
            "NNCharBoth": 2 * c.char_hidden,
        }[v]
        if v == "CtxCnn":
            k = 2 * c.context + 1
            self.store.add("ctx.filter", (k, k), rng)
        self.store.add("hid.W", (c.hidden_dim, width), rng)
        self.store.add("hid.b", (c.hidden_dim,), init="zeros")
        if v == "NNCharBoth":
            self.src_chars = CharEncoder(self.store, "src.char", char_vocab, c.char_dim, c.char_hidden, rng)
            self.store.add("out.proj", (c.hidden_dim, 2 * c.char_hidden), rng)
        else:
            self.store.add("out.W", (len(src_vocab), c.hidden_dim), rng)
            self.store.add("out.b", (len(src_vocab),), init="zeros")

    @property
    def variant(self):
        return self.config.variant

    @property
    def open_vocabulary(self):
        return self.variant == "NNCharBoth"

    def hyperparameters(self):
        return asdict(self.config)

    # supports -----------------------------------------------------------
    def source_keys(self, pair):
        return list(pair.src_words) if self.open_vocabulary else [int(x) for x in pair.src]

    def training_support(self, batch, size):
        if not self.open_vocabulary:
            return Support(batch_vocab(batch, self.src_vocab, min(size, len(self.src_vocab))).tolist())
        # surface forms of the batch, then frequent training words as filler
        keys = dict.fromkeys(w for p in batch.pairs for w in p.src_words)
        for w in self.src_vocab.id2word[2:]:
            if len(keys) >= size:
                break
            keys.setdefault(w, None)
        return Support(keys)

    def full_support(self, pairs=()):
        if not self.open_vocabulary:
            return Support(range(len(self.src_vocab)))
        keys = dict.fromkeys(self.src_vocab.id2word[2:])
        for p in pairs:
            keys.update(dict.fromkeys(p.src_words))
        return Support(keys)

    # forward --------------------------------------------------------------
    def _state_tokens(self, pairs):
        ids, words = [], []
        for p in pairs:
            ids.extend(int(x) for x in p.tgt)
            ids.append(NULL)
            words.extend(p.tgt_words)
            words.append(NULL_WORD)
        return np.array(ids, dtype=np.int64), words

    def _windows(self, pairs):
        h = self.config.context
        rows = []
        for p in pairs:
            padded = [self.boundary] * h + [int(x) for x in p.tgt] + [self.boundary] * h
            for i in range(p.I):
                rows.append(padded[i:i + 2 * h + 1])
            rows.append([NULL] * (2 * h + 1))
        return np.array(rows, dtype=np.int64)

    def state_reps(self, pairs, training=False, rng=None):
        """Hidden vectors for every state: per pair ``I`` real rows then NULL."""
        v, s = self.variant, self.store
        ids, words = self._state_tokens(pairs)
        if v == "NN":
            x = take_rows(s["tgt.emb"], ids)
        elif v == "CtxCc":
            win = take_rows(s["tgt.emb"], self._windows(pairs))
            x = reshape(win, (win.shape[0], -1))
        elif v == "CtxCnn":
            win = take_rows(s["tgt.emb"], self._windows(pairs))
            x = conv_combine(win, s["ctx.filter"])
        elif v == "NNCharWord":
            x = concat([self.tgt_chars.encode(words), take_rows(s["tgt.emb"], ids)], axis=-1)
        else:
            x = self.tgt_chars.encode(words)
        hid = htanh(linear(x, s["hid.W"], s["hid.b"]))
        return dropout(hid, self.config.dropout, training, rng)

    def output_layer(self, support):
        if self.open_vocabulary:
            enc = self.src_chars.encode(support.keys)
            return linear(enc, self.store["out.proj"]), None
        ids = np.asarray(support.keys, dtype=np.int64)
        return take_rows(self.store["out.W"], ids), take_rows(self.store["out.b"], ids)

    def logprobs(self, pairs, support, training=False, rng=None):
        """``(sum(I+1), |support|)`` log-probabilities, one row per state."""
        hid = self.state_reps(pairs, training, rng)
        W, b = self.output_layer(support)
        logits = linear(hid, W, b)
        return log_softmax(logits)

    def emission_index(self, pairs, support):
        """Flat indices into :meth:`logprobs` giving each pair's ``(J, 2I)``
        state-emission matrix (null copies share the NULL row)."""
        out, start = [], 0
        width = len(support)
        for p in pairs:
            cols = support.columns(self.source_keys(p))
            rows = np.concatenate([start + np.arange(p.I), np.full(p.I, start + p.I)])
            out.append(rows[None, :] * width + cols[:, None])
            start += p.I + 1
        return out


def translation_logprobs(model, pair, support):
    """``(I+1, |support|)`` log-probabilities for one pair in evaluation mode."""
    return model.logprobs([pair], support).value


def open_pair_score(model, e_surface, f_surface, support=None):
    """``log p(f | e)`` from character encodings on both sides.

    The softmax runs over ``support`` (a list of surface forms, default the
    training source vocabulary) extended with ``f_surface``.
    """
    if not model.open_vocabulary:
        raise ValueError("open_pair_score needs the NNCharBoth variant")
    if not e_surface or not f_surface:
        raise ValueError("empty surface form")
    keys = dict.fromkeys(support if support is not None else model.src_vocab.id2word[2:])
    keys.setdefault(f_surface, None)
    sup = Support(keys)
    hid = htanh(linear(model.tgt_chars.encode([e_surface]), model.store["hid.W"], model.store["hid.b"]))
    W, _ = model.output_layer(sup)
    row = log_softmax(linear(hid, W)).value[0]
    return float(row[sup.col[f_surface]])
