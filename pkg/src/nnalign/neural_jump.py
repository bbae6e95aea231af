"""Neural jump-width distributions conditioned on contextual word encodings."""

from dataclasses import asdict, dataclass

import numpy as np

from .alignment import overflow_counts, valid_bucket_mask
from .corpus import CharVocabulary
from .encoders import CharEncoder, SentenceEncoder
from .kernels import bucket_of
from .tensor import ParameterStore, concat, htanh, linear, log_softmax, logsumexp_masked, take_flat, take_rows
from .tensor.autograd import Tensor, add, reshape

JUMP_VARIANTS = ("NNJumpTgt", "NNJumpBoth")


@dataclass
class JumpConfig:
    variant: str = "NNJumpTgt"
    K: int = 5
    char_dim: int = 64
    char_hidden: int = 64
    sent_hidden: int = 64
    mlp_hidden: int = 80

    def __post_init__(self):
        if self.variant not in JUMP_VARIANTS:
            raise ValueError(f"unknown jump variant {self.variant!r}; choose from {JUMP_VARIANTS}")
        if self.K < 1:
            raise ValueError("K must be >= 1")


class NeuralJumpModel:
    """MLP over BiLSTM context encodings producing ``2K+3`` jump logits.

    ``NNJumpTgt`` conditions on the target word the previous source word
    aligned to; ``NNJumpBoth`` also on the previous source word itself.
    """

    def __init__(self, config, char_vocab, seed=0):
        if not isinstance(char_vocab, CharVocabulary):
            raise TypeError("char_vocab must be a CharVocabulary")
        self.config = config
        self.char_vocab = char_vocab
        self.store = ParameterStore()
        rng = np.random.default_rng(seed)
        c = config
        self.tgt_chars = CharEncoder(self.store, "jtgt.char", char_vocab, c.char_dim, c.char_hidden, rng)
        self.tgt_sent = SentenceEncoder(self.store, "jtgt.sent", self.tgt_chars.width, c.sent_hidden, rng)
        width = self.tgt_sent.width
        self.store.add("mlp.W1", (c.mlp_hidden, width), rng)
        if c.variant == "NNJumpBoth":
            self.src_chars = CharEncoder(self.store, "jsrc.char", char_vocab, c.char_dim, c.char_hidden, rng)
            self.src_sent = SentenceEncoder(self.store, "jsrc.sent", self.src_chars.width, c.sent_hidden, rng)
            self.store.add("mlp.W1s", (c.mlp_hidden, self.src_sent.width), rng)
        self.store.add("mlp.b1", (c.mlp_hidden,), init="zeros")
        self.store.add("mlp.W2", (2 * c.K + 3, c.mlp_hidden), rng)
        self.store.add("mlp.b2", (2 * c.K + 3,), init="zeros")

    @property
    def variant(self):
        return self.config.variant

    @property
    def K(self):
        return self.config.K

    def hyperparameters(self):
        return asdict(self.config)

    def _contexts(self, pairs, side):
        chars, sent = (self.tgt_chars, self.tgt_sent) if side == "tgt" else (self.src_chars, self.src_sent)
        words = [w for p in pairs for w in (p.tgt_words if side == "tgt" else p.src_words)]
        lengths = [p.I if side == "tgt" else p.J for p in pairs]
        return sent.encode(chars.encode(words), lengths)

    def bucket_logprobs(self, pairs):
        """Per pair: ``(I, 2K+3)`` for NNJumpTgt, ``(J-1, I, 2K+3)`` for NNJumpBoth
        (``None`` when ``J == 1``)."""
        s = self.store
        H = self._contexts(pairs, "tgt")
        A = linear(H, s["mlp.W1"])
        out, start, sstart = [], 0, 0
        if self.variant == "NNJumpTgt":
            logits = linear(htanh(add(A, s["mlp.b1"])), s["mlp.W2"], s["mlp.b2"])
            lw = log_softmax(logits)
            for p in pairs:
                out.append(take_rows(lw, np.arange(start, start + p.I)))
                start += p.I
            return out
        Bv = linear(self._contexts(pairs, "src"), s["mlp.W1s"])
        for p in pairs:
            if p.J == 1:
                out.append(None)
            else:
                a = reshape(take_rows(A, np.arange(start, start + p.I)), (1, p.I, -1))
                b = reshape(take_rows(Bv, np.arange(sstart, sstart + p.J - 1)), (p.J - 1, 1, -1))
                hid = htanh(add(add(a, b), s["mlp.b1"]))
                out.append(log_softmax(linear(hid, s["mlp.W2"], s["mlp.b2"])))
            start += p.I
            sstart += p.J
        return out


def neural_jump_buckets(model, pair, from_position, prev_source=None):
    """Jump distribution (probabilities) from a 1-based target position.

    ``NNJumpBoth`` also needs ``prev_source``, the 1-based index ``j-1`` of
    the previous source word.
    """
    lw = model.bucket_logprobs([pair])[0]
    if model.variant == "NNJumpBoth":
        if prev_source is None:
            raise ValueError("NNJumpBoth needs the previous source index")
        return np.exp(lw.value[prev_source - 1, from_position - 1])
    return np.exp(lw.value[from_position - 1])


def log_transition_tensor(logw, I, p0, K):
    """Differentiable log transition matrix ``(..., 2I, 2I)``.

    ``logw`` holds per-position bucket log-probabilities ``(..., I, 2K+3)``.
    Entries mirror :func:`nnalign.alignment.transition_matrix`.
    """
    B = 2 * K + 3
    lead = logw.shape[:-2]
    n_lead = int(np.prod(lead)) if lead else 1
    mask = np.broadcast_to(valid_bucket_mask(I, K), logw.shape)
    logZ = logsumexp_masked(logw, mask)  # (..., I)
    frm = np.arange(I)[:, None]
    to = np.arange(I)[None, :]
    b = bucket_of(to - frm, K)  # (I, I)
    cnt = overflow_counts(I, K)[frm, b]
    base_w = (frm * B + b)[None] + (np.arange(n_lead) * I * B)[:, None, None]
    base_z = np.broadcast_to(frm, (I, I))[None] + (np.arange(n_lead) * I)[:, None, None]
    shape = lead + (I, I)
    real = add(
        add(reshape(take_flat(logw, base_w), shape), reshape(take_flat(logZ, base_z), shape) * -1.0),
        np.broadcast_to(np.log1p(-p0) - np.log(cnt), shape),
    )
    null = np.full((I, I), -np.inf)
    np.fill_diagonal(null, np.log(p0))
    block = concat([real, Tensor(np.broadcast_to(null, shape))], axis=-1)
    return concat([block, block], axis=-2)
