"""EM training: exact posteriors per batch, then one Adam step on the EM
auxiliary function for the neural parameters.

Count-based jump tables are re-estimated from accumulated expected counts
every ``refresh_batches`` batches (one epoch by default). HMM runs start
their translation model from a finished IBM-1 run.
"""

import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernels
from .aligner import Aligner
from .alignment import JumpCounts, JumpTable, collect_jump_counts, jump_m_step
from .analysis import score_corpus
from .corpus import (
    DEFAULT_MAX_LEN,
    CharVocabulary,
    DataError,
    build_vocab,
    encode_pairs,
    load_gold,
    load_parallel,
    make_batches,
)
from .discrete import TranslationTable, train_hmm, train_ibm1
from .neural_jump import JUMP_VARIANTS, JumpConfig, NeuralJumpModel, log_transition_tensor
from .tensor import adam_step, take_flat, weighted_sum
from .tensor.autograd import Tensor
from .translation import CHAR_VARIANTS, VARIANTS, NeuralTranslationModel, TranslationConfig

logger = logging.getLogger(__name__)

CACHE_ENV = "NNALIGN_CACHE_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    src: str = ""
    tgt: str = ""
    output: str = ""
    log: str = ""
    dev_src: str = ""
    dev_tgt: str = ""
    dev_gold: str = ""
    init_checkpoint: str = ""
    model: str = "ibm1"
    translation: str = "NN"
    jump: str = "count"
    epochs: int = 10
    ibm1_epochs: int = 10
    batch_size: int = 100
    lr: float = 0.001
    refresh_batches: int = 0  # 0 means once per epoch
    seed: int = 1
    shuffle: bool = True
    max_len: int = DEFAULT_MAX_LEN
    vocab_size: int = 50000
    batch_vocab_size: int = 5000
    emb_dim: int = 64
    hidden_dim: int = 64
    context: int = 1
    char_dim: int = 64
    char_hidden: int = 64
    dropout: float = 0.1
    jump_char_dim: int = 64
    jump_char_hidden: int = 64
    jump_sent_hidden: int = 64
    jump_mlp_hidden: int = 80
    K: int = 5
    p0: float = 0.2
    threads: int = 1

    def __post_init__(self):
        self.model = self.model.lower()
        if self.model not in ("ibm1", "hmm"):
            raise ConfigError(f"model must be ibm1 or hmm, not {self.model!r}")
        if self.translation != "discrete" and self.translation not in VARIANTS:
            raise ConfigError(f"unknown translation variant {self.translation!r}")
        if self.jump != "count" and self.jump not in JUMP_VARIANTS:
            raise ConfigError(f"unknown jump variant {self.jump!r}")
        if self.jump != "count" and (self.model != "hmm" or self.translation == "discrete"):
            raise ConfigError("neural jump models need model = hmm and a neural translation model")
        if self.epochs < 1 or self.ibm1_epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.refresh_batches < 0 or self.batch_size < 1 or self.threads < 1:
            raise ConfigError("batch_size and threads must be >= 1, refresh_batches >= 0")
        if self.lr < 0:
            raise ConfigError("learning rate must be non-negative")
        if not 0.0 < self.p0 < 1.0:
            raise ConfigError("p0 must lie strictly between 0 and 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    @property
    def neural(self):
        return self.translation != "discrete"

    def translation_config(self):
        return TranslationConfig(
            self.translation, self.emb_dim, self.hidden_dim, self.context,
            self.char_dim, self.char_hidden, self.dropout,
        )

    def jump_config(self):
        return JumpConfig(
            self.jump, self.K, self.jump_char_dim, self.jump_char_hidden,
            self.jump_sent_hidden, self.jump_mlp_hidden,
        )

    @classmethod
    def from_file(cls, path):
        """Parse a flat ``key = value`` file; relative paths resolve against
        the file's directory."""
        types = {f.name: type(f.default) for f in fields(cls)}
        values = {}
        base = os.path.dirname(os.path.abspath(path))
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if not sep or not key:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                if key not in types:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _convert(types[key], val, f"{path}:{lineno}")
        for key in ("src", "tgt", "output", "log", "dev_src", "dev_tgt", "dev_gold", "init_checkpoint"):
            if values.get(key):
                values[key] = os.path.join(base, values[key])
        return cls(**values)


def _convert(kind, val, where):
    try:
        if kind is bool:
            low = val.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return low in ("true", "1", "yes")
        return kind(val)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {val!r} as {kind.__name__}") from None


@dataclass
class Posteriors:
    """State posteriors ``gamma (J, S)``, pairwise posteriors ``xi`` (``None``
    for IBM-1, ``(S, S)`` summed over positions or ``(J-1, S, S)``) and the
    sentence log-likelihood."""

    gamma: np.ndarray
    xi: np.ndarray | None
    loglik: float


def ibm1_posteriors(log_emit):
    """Posteriors under the uniform ``1/(2I)`` prior."""
    log_emit = np.asarray(log_emit, dtype=np.float64)
    S = log_emit.shape[1]
    m = log_emit.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise kernels.ZeroLikelihood("zero-probability sentence")
    w = np.exp(log_emit - m)
    z = w.sum(axis=1, keepdims=True)
    ll = float((np.log(z) + m).sum() - log_emit.shape[0] * np.log(S))
    return Posteriors(w / z, None, ll)


def forward_backward(log_emit, trans, init, per_position=False):
    """Scaled forward-backward over ``2I`` states.

    ``trans`` is ``(S, S)`` or ``(J-1, S, S)`` in probability space. With
    ``per_position`` the pairwise posteriors are kept for every transition.
    """
    log_emit = np.asarray(log_emit, dtype=np.float64)
    J, S = log_emit.shape
    trans = np.asarray(trans, dtype=np.float64)
    if trans.ndim == 2:
        trans = trans[None]
    if trans.shape[0] == 0:
        trans = np.zeros((1, S, S))
    m = log_emit.max(axis=1)
    if not np.all(np.isfinite(m)):
        raise kernels.ZeroLikelihood("zero-probability sentence")
    emit = np.exp(log_emit - m[:, None])
    xi = np.zeros((max(J - 1, 1) if per_position else 1, S, S))
    gamma, ll = kernels.forward_backward(
        emit, np.ascontiguousarray(init, dtype=np.float64), np.ascontiguousarray(trans), xi
    )
    return Posteriors(gamma, xi if per_position else xi[0], float(ll + m.sum()))


def em_auxiliary(post, log_emit, log_trans=None):
    """``Q = sum gamma * log p(f|s) [+ sum xi * log p(s'|s)]``.

    Inputs may be arrays or tensors; the result is a scalar tensor so the
    gradient reaches whatever produced the log-probabilities.
    """
    terms = [(log_emit, post.gamma)]
    if log_trans is not None:
        xi = post.xi
        lt = log_trans.value if isinstance(log_trans, Tensor) else np.asarray(log_trans)
        if xi.ndim == 3 and lt.ndim == 2:
            xi = xi.sum(axis=0)
        if xi.shape != lt.shape:
            raise ValueError(f"pairwise posteriors {xi.shape} do not match transitions {lt.shape}")
        terms.append((log_trans, xi))
    Q = None
    for lp, w in terms:
        val = lp.value if isinstance(lp, Tensor) else np.asarray(lp)
        if np.any((w > 0) & ~np.isfinite(val)):
            raise ValueError("log-probability of -inf carries posterior mass")
        q = weighted_sum(lp, w)
        Q = q if Q is None else Q + q
    return Q


@dataclass
class TrainResult:
    aligner: Aligner
    history: list  # per epoch (loglik, dev_aer or None)
    skipped: int = 0


class Trainer:
    """Runs the batched generalized EM loop for a neural translation model."""

    def __init__(self, config, aligner):
        self.config = config
        self.aligner = aligner
        self.model = aligner.translation
        self.rng = np.random.default_rng(config.seed + 7)
        self.skipped = 0
        self.pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None

    def _map(self, fn, items):
        return list(self.pool.map(fn, items)) if self.pool else [fn(x) for x in items]

    def e_step(self, pairs, support):
        """Posteriors per pair with parameters frozen; ``None`` marks a skipped pair."""
        a = self.aligner
        emits = a.log_emissions(pairs, support)
        per_pos = a.jump_model is not None and a.jump_model.variant == "NNJumpBoth"
        if a.family == "ibm1":
            jobs = [(e, None) for e in emits]
        else:
            jobs = list(zip(emits, a.transitions(pairs)))

        def run(job):
            e, tr = job
            try:
                if tr is None:
                    return ibm1_posteriors(e)
                init, trans = tr
                return forward_backward(e, trans, init, per_position=per_pos)
            except kernels.ZeroLikelihood:
                return None

        return self._map(run, jobs)

    def auxiliary(self, pairs, posts, support):
        """Training-mode EM auxiliary over the batch (a scalar tensor)."""
        model, a = self.model, self.aligner
        keep = [k for k, p in enumerate(posts) if p is not None]
        pairs = [pairs[k] for k in keep]
        posts = [posts[k] for k in keep]
        if not pairs:
            return None
        lp = model.logprobs(pairs, support, training=True, rng=self.rng)
        idx = model.emission_index(pairs, support)
        logw = a.jump_model.bucket_logprobs(pairs) if a.jump_model is not None else [None] * len(pairs)
        Q = None
        for p, post, ix, lw in zip(pairs, posts, idx, logw):
            lt = None
            if lw is not None:
                lt = log_transition_tensor(lw, p.I, a.jump_table.p0, a.K)
            q = em_auxiliary(post, take_flat(lp, ix), lt)
            Q = q if Q is None else Q + q
        return Q

    def run_epoch(self, batches, counts, step_state):
        cfg, a = self.config, self.aligner
        loglik = 0.0
        refresh = cfg.refresh_batches or len(batches)
        for batch in batches:
            support = self.model.training_support(batch, cfg.batch_vocab_size)
            posts = self.e_step(list(batch.pairs), support)
            for p, post in zip(batch.pairs, posts):
                if post is None:
                    self.skipped += 1
                    continue
                loglik += post.loglik
                if a.family == "hmm":
                    xi = post.xi if post.xi.ndim == 2 else post.xi.sum(axis=0)
                    counts.add(collect_jump_counts(post.gamma, xi, p.I, a.K))
            Q = self.auxiliary(list(batch.pairs), posts, support)
            stores = [self.model.store] + ([a.jump_model.store] if a.jump_model is not None else [])
            for s in stores:
                s.zero_grad()
            if Q is not None:
                (Q * -1.0).backward()
            for s in stores:
                adam_step(s, cfg.lr)
            step_state["batches"] += 1
            if a.family == "hmm" and step_state["batches"] % refresh == 0:
                a.jump_table = jump_m_step(counts.buckets, counts.null, counts.total)
                counts.__init__(np.zeros_like(counts.buckets))
        return loglik


def _support_note(config):
    if config.neural:
        return f"# loglik is measured on per-batch softmax supports of up to {config.batch_vocab_size} source words\n"
    return "# loglik is the exact corpus log-likelihood\n"


def _load_dev(config):
    if not (config.dev_src and config.dev_tgt and config.dev_gold):
        return None
    pairs = load_parallel(config.dev_src, config.dev_tgt, max_len=None)
    return pairs, load_gold(config.dev_gold)


def _dev_aer(aligner, dev):
    if dev is None:
        return None
    pairs, gold = dev
    links = aligner.align(pairs)
    by_line = dict(zip((p.index + 1 for p in pairs), links))
    n = max(by_line, default=0)
    pred = [by_line.get(k, frozenset()) for k in range(1, n + 1)]
    return score_corpus(pred, gold, n).aer


def _char_vocab(pairs, variants):
    if not any(v in CHAR_VARIANTS or v in JUMP_VARIANTS for v in variants):
        return None
    return CharVocabulary.from_words(w for p in pairs for w in p.src_words + p.tgt_words)


def _ibm1_init(config, pairs):
    """IBM-1 bundle that initializes an HMM run: loaded, cached or trained."""
    if config.init_checkpoint:
        init = Aligner.load(config.init_checkpoint)
        if init.family != "ibm1":
            raise ConfigError(f"{config.init_checkpoint}: expected an IBM-1 checkpoint")
        if init.translation_name != config.translation:
            raise ConfigError(
                f"{config.init_checkpoint}: translation variant {init.translation_name} "
                f"does not match {config.translation}"
            )
        if init.neural and init.translation.hyperparameters() != asdict(config.translation_config()):
            raise ConfigError(f"{config.init_checkpoint}: translation hyperparameters differ from the config")
        return init
    sub = TrainConfig(**{**asdict(config), "model": "ibm1", "jump": "count", "epochs": config.ibm1_epochs,
                         "output": "", "log": "", "init_checkpoint": ""})
    # the cache key hashes the corpus files, so in-memory corpora are not cached
    cache = os.environ.get(CACHE_ENV) if config.src and config.tgt else None
    if cache:
        path = os.path.join(cache, "ibm1-" + _fingerprint(sub))
        if os.path.exists(os.path.join(path, "manifest.txt")):
            logger.info("reusing cached IBM-1 initialization %s", path)
            return Aligner.load(path)
    logger.info("training IBM-1 initialization for %d epochs", sub.epochs)
    init = _train_bundle(sub, pairs, dev=None, log=None).aligner
    if cache:
        init.save(path)
    return init


def _fingerprint(config):
    h = hashlib.sha256()
    for k, v in sorted(asdict(config).items()):
        h.update(f"{k}={v}\n".encode())
    for path in (config.src, config.tgt):
        with open(path, "rb") as fh:
            h.update(hashlib.sha256(fh.read()).digest())
    return h.hexdigest()[:16]


def _write_log(log, line):
    if log is not None:
        log.write(line)
        log.flush()


def _train_discrete(config, pairs, dev, log):
    src_vocab = build_vocab(pairs, "src", cap=None)
    tgt_vocab = build_vocab(pairs, "tgt", cap=None)
    enc = encode_pairs(pairs, src_vocab, tgt_vocab)
    history = []
    table, ll1 = train_ibm1(enc, config.epochs if config.model == "ibm1" else config.ibm1_epochs)
    if config.model == "ibm1":
        aligner = Aligner("ibm1", src_vocab, tgt_vocab, table, seed=config.seed)
        lls = ll1
    else:
        table, jump, lls = train_hmm(enc, config.epochs, table, JumpTable.uniform(config.K, config.p0))
        aligner = Aligner("hmm", src_vocab, tgt_vocab, table, jump, seed=config.seed)
    for epoch, ll in enumerate(lls, 1):
        history.append((ll, None))
        _write_log(log, f"{epoch}\t{ll!r}\n")
    if dev is not None:
        score = _dev_aer(aligner, dev)
        history[-1] = (history[-1][0], score)
        _write_log(log, f"# final dev_aer\t{score:.6f}\n")
    return TrainResult(aligner, history)


def _train_bundle(config, pairs, dev, log):
    if not config.neural:
        return _train_discrete(config, pairs, dev, log)
    if config.model == "hmm":
        init = _ibm1_init(config, pairs)
        src_vocab, tgt_vocab, char_vocab = init.src_vocab, init.tgt_vocab, init.char_vocab
        if config.jump in JUMP_VARIANTS and char_vocab is None:
            char_vocab = _char_vocab(pairs, [config.jump])
        model = init.translation
        model.store.reset_optimizer()
        jump_model = None
        if config.jump in JUMP_VARIANTS:
            jump_model = NeuralJumpModel(config.jump_config(), char_vocab, config.seed + 1)
        aligner = Aligner("hmm", src_vocab, tgt_vocab, model, JumpTable.uniform(config.K, config.p0),
                          jump_model, char_vocab, config.seed)
    else:
        src_vocab = build_vocab(pairs, "src", cap=config.vocab_size)
        tgt_vocab = build_vocab(pairs, "tgt", cap=config.vocab_size)
        char_vocab = _char_vocab(pairs, [config.translation])
        model = NeuralTranslationModel(config.translation_config(), src_vocab, tgt_vocab, char_vocab, config.seed)
        aligner = Aligner("ibm1", src_vocab, tgt_vocab, model, char_vocab=char_vocab, seed=config.seed)
    enc = aligner.encode(pairs)
    trainer = Trainer(config, aligner)
    counts = JumpCounts.zeros(config.K)
    state = {"batches": 0}
    history = []
    try:
        for epoch in range(1, config.epochs + 1):
            batches = make_batches(enc, config.batch_size, shuffle=config.shuffle, seed=config.seed + epoch)
            ll = trainer.run_epoch(batches, counts, state)
            score = _dev_aer(aligner, dev)
            history.append((ll, score))
            line = f"{epoch}\t{ll!r}" + (f"\t{score:.6f}" if score is not None else "")
            _write_log(log, line + "\n")
            logger.info("epoch %d loglik %.4f%s", epoch, ll, "" if score is None else f" dev AER {score:.4f}")
    finally:
        if trainer.pool:
            trainer.pool.shutdown()
    if trainer.skipped:
        logger.warning("%d sentence visits had zero likelihood and were skipped", trainer.skipped)
    _write_log(log, f"# skipped_sentences\t{trainer.skipped}\n")
    return TrainResult(aligner, history, trainer.skipped)


def train(config, pairs=None):
    """Train per ``config`` and write the checkpoint to ``config.output`` when set.

    ``pairs`` overrides reading ``config.src``/``config.tgt``.
    """
    if pairs is None:
        if not (config.src and config.tgt):
            raise ConfigError("config needs src and tgt")
        pairs = load_parallel(config.src, config.tgt, max_len=config.max_len)
    if not pairs:
        raise DataError("training corpus is empty after filtering")
    dev = _load_dev(config)
    log_path = config.log or (os.path.join(config.output, "train.log") if config.output else "")
    if log_path:
        os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
    log = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        _write_log(log, _support_note(config))
        result = _train_bundle(config, pairs, dev, log)
    finally:
        if log is not None:
            log.close()
    if config.output:
        result.aligner.save(config.output)
    return result
