"""A trained alignment model bundle: vocabularies, translation and jump parts.

Checkpoints are directories holding ``manifest.txt`` plus one file per part.
Nothing time-dependent is written, so identical training runs produce
byte-identical directories.
"""

import logging
import os
from dataclasses import fields

import numpy as np

from . import decoder, kernels
from .alignment import JumpTable, transition_matrix
from .corpus import CharVocabulary, DataError, Vocabulary, encode_pairs
from .discrete import TranslationTable
from .neural_jump import JumpConfig, NeuralJumpModel
from .tensor import load_tensors, save_tensors
from .translation import CHAR_VARIANTS, NeuralTranslationModel, TranslationConfig

logger = logging.getLogger(__name__)

FORMAT = "nnalign-checkpoint-1"
FAMILIES = ("ibm1", "hmm")
EMISSION_FLOOR = 1e-10  # unseen (e, f) pairs of count-based tables at decode time
MAX_SCORE_CELLS = 4_000_000  # states x vocabulary per scoring chunk


class CheckpointError(DataError):
    pass


class Aligner:
    """Everything needed to score and decode one alignment direction.

    ``translation`` is a :class:`TranslationTable` or a
    :class:`NeuralTranslationModel`; HMM bundles also carry a count-based
    :class:`JumpTable` (initial distribution and ``p0``) and optionally a
    :class:`NeuralJumpModel` for the transitions.
    """

    def __init__(self, family, src_vocab, tgt_vocab, translation, jump_table=None,
                 jump_model=None, char_vocab=None, seed=0):
        if family not in FAMILIES:
            raise ValueError(f"unknown model family {family!r}")
        if family == "hmm" and jump_table is None:
            raise ValueError("HMM bundles need a jump table")
        self.family = family
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.char_vocab = char_vocab
        self.translation = translation
        self.jump_table = jump_table
        self.jump_model = jump_model
        self.seed = seed

    @property
    def neural(self):
        return isinstance(self.translation, NeuralTranslationModel)

    @property
    def translation_name(self):
        return self.translation.variant if self.neural else "discrete"

    @property
    def jump_name(self):
        if self.family == "ibm1":
            return "none"
        return self.jump_model.variant if self.jump_model is not None else "count"

    @property
    def K(self):
        return self.jump_table.K

    def encode(self, pairs):
        return encode_pairs(pairs, self.src_vocab, self.tgt_vocab)

    # scoring ----------------------------------------------------------------
    def log_emissions(self, pairs, support=None):
        """Per pair ``(J, 2I)`` log emissions in evaluation mode."""
        if not self.neural:
            out = []
            for p in pairs:
                e = self.translation.emission(p)
                out.append(np.log(np.maximum(e, EMISSION_FLOOR)))
            return out
        model = self.translation
        if support is None:
            support = model.full_support(pairs)
        out, chunk = [], []
        budget = max(1, MAX_SCORE_CELLS // len(support))

        def flush():
            if chunk:
                lp = model.logprobs(chunk, support).value.ravel()
                out.extend(lp[idx] for idx in model.emission_index(chunk, support))
                chunk.clear()

        states = 0
        for p in pairs:
            if chunk and states + p.I + 1 > budget:
                flush()
                states = 0
            chunk.append(p)
            states += p.I + 1
        flush()
        return out

    def transitions(self, pairs):
        """Per pair ``(init, trans)`` probabilities; ``trans`` is ``(T, 2I, 2I)``."""
        if self.family != "hmm":
            raise ValueError("transitions exist only for HMM bundles")
        table = self.jump_table
        out = []
        if self.jump_model is None:
            for p in pairs:
                out.append((table.initial(p.I), table.transition(p.I)[None]))
            return out
        logw = self.jump_model.bucket_logprobs(pairs)
        for p, lw in zip(pairs, logw):
            init = table.initial(p.I)
            if lw is None:  # single source word: no transition is taken
                out.append((init, table.transition(p.I)[None]))
                continue
            w = np.exp(lw.value)
            if w.ndim == 2:
                trans = transition_matrix(p.I, w, table.p0, table.K)[None]
            else:
                trans = np.stack([transition_matrix(p.I, wj, table.p0, table.K) for wj in w])
            out.append((init, trans))
        return out

    def align(self, pairs, encoded=False):
        """Asymmetric decode of raw (or already encoded) sentence pairs."""
        pairs = pairs if encoded else self.encode(pairs)
        emits = self.log_emissions(pairs)
        if self.family == "ibm1":
            return [decoder.ibm1_decode(e) for e in emits]
        out = []
        for p, e, (init, trans) in zip(pairs, emits, self.transitions(pairs)):
            with np.errstate(divide="ignore"):
                try:
                    out.append(decoder.viterbi(e, np.log(trans), np.log(init)))
                except kernels.ZeroLikelihood:
                    raise DataError(f"sentence {p.index + 1}: no alignment path has non-zero probability") from None
        return out

    # persistence --------------------------------------------------------------
    def save(self, path):
        os.makedirs(path, exist_ok=True)
        meta = [
            ("format", FORMAT),
            ("family", self.family),
            ("translation", self.translation_name),
            ("jump", self.jump_name),
            ("seed", str(self.seed)),
        ]
        self.src_vocab.dump(os.path.join(path, "src.vocab"))
        self.tgt_vocab.dump(os.path.join(path, "tgt.vocab"))
        if self.char_vocab is not None:
            self.char_vocab.dump(os.path.join(path, "chars.txt"))
        if self.neural:
            meta += [(f"translation.{k}", str(v)) for k, v in self.translation.hyperparameters().items()]
            save_tensors(
                os.path.join(path, "translation.bin"),
                self.translation.store.values_dict(),
                os.path.join(path, "translation.manifest"),
            )
        else:
            self.translation.dump(os.path.join(path, "table.txt"), self.src_vocab, self.tgt_vocab)
        if self.jump_table is not None:
            self.jump_table.dump(os.path.join(path, "jump.txt"))
        if self.jump_model is not None:
            meta += [(f"jump.{k}", str(v)) for k, v in self.jump_model.hyperparameters().items()]
            save_tensors(
                os.path.join(path, "jump.bin"),
                self.jump_model.store.values_dict(),
                os.path.join(path, "jump.manifest"),
            )
        with open(os.path.join(path, "manifest.txt"), "w", encoding="utf-8") as fh:
            fh.writelines(f"{k}\t{v}\n" for k, v in meta)

    @classmethod
    def load(cls, path):
        mpath = os.path.join(path, "manifest.txt")
        if not os.path.exists(mpath):
            raise CheckpointError(f"{path}: not a checkpoint directory (no manifest.txt)")
        with open(mpath, encoding="utf-8") as fh:
            meta = dict(line.rstrip("\n").split("\t", 1) for line in fh if line.strip())
        if meta.get("format") != FORMAT:
            raise CheckpointError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
        src_vocab = Vocabulary.load(os.path.join(path, "src.vocab"))
        tgt_vocab = Vocabulary.load(os.path.join(path, "tgt.vocab"))
        chars_path = os.path.join(path, "chars.txt")
        char_vocab = CharVocabulary.load(chars_path) if os.path.exists(chars_path) else None
        seed = int(meta.get("seed", 0))
        if meta["translation"] == "discrete":
            translation = TranslationTable.load(os.path.join(path, "table.txt"), src_vocab, tgt_vocab)
        else:
            config = _read_config(TranslationConfig, meta, "translation.")
            if config.variant in CHAR_VARIANTS and char_vocab is None:
                raise CheckpointError(f"{path}: character vocabulary missing")
            translation = NeuralTranslationModel(config, src_vocab, tgt_vocab, char_vocab, seed)
            _load_store(translation.store, os.path.join(path, "translation.bin"))
        jump_table = jump_model = None
        if meta["family"] == "hmm":
            jump_table = JumpTable.load(os.path.join(path, "jump.txt"))
            if meta["jump"] != "count":
                config = _read_config(JumpConfig, meta, "jump.")
                jump_model = NeuralJumpModel(config, char_vocab, seed + 1)
                _load_store(jump_model.store, os.path.join(path, "jump.bin"))
        return cls(meta["family"], src_vocab, tgt_vocab, translation, jump_table, jump_model, char_vocab, seed)


def _read_config(cls, meta, prefix):
    kwargs = {}
    for f in fields(cls):
        raw = meta.get(prefix + f.name)
        if raw is None:
            raise CheckpointError(f"checkpoint manifest lacks {prefix + f.name}")
        kwargs[f.name] = type(f.default)(raw)
    return cls(**kwargs)


def _load_store(store, path):
    values = load_tensors(path)
    missing = set(store.params) - set(values)
    extra = set(values) - set(store.params)
    if missing or extra:
        raise CheckpointError(f"{path}: parameter mismatch (missing {sorted(missing)}, unexpected {sorted(extra)})")
    store.load_values(values)
