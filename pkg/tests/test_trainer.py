import filecmp
import os

import numpy as np
import pytest
from oracles import brute_force, random_hmm

import nnalign.trainer as trainer_mod
from nnalign.aligner import Aligner
from nnalign.corpus import DataError
from nnalign.synthetic import dictionary_corpus
from nnalign.trainer import (
    CACHE_ENV,
    ConfigError,
    Posteriors,
    TrainConfig,
    Trainer,
    em_auxiliary,
    forward_backward,
    ibm1_posteriors,
    train,
)

SMALL = dict(emb_dim=8, hidden_dim=8, char_dim=4, char_hidden=4, jump_char_dim=4, jump_char_hidden=4,
             jump_sent_hidden=4, jump_mlp_hidden=6, batch_size=20, batch_vocab_size=30, epochs=2, ibm1_epochs=2)


def write_corpus(tmp_path, pairs):
    src, tgt = tmp_path / "c.src", tmp_path / "c.tgt"
    src.write_text("".join(" ".join(p.src_words) + "\n" for p in pairs))
    tgt.write_text("".join(" ".join(p.tgt_words) + "\n" for p in pairs))
    return str(src), str(tgt)


def test_ibm1_posteriors_brute_force():
    rng = np.random.default_rng(0)
    emit = rng.random((3, 6)) + 0.05
    post = ibm1_posteriors(np.log(emit))
    # uniform prior: every state reachable from the start and from each state
    Z, gamma, _, _ = brute_force(emit, np.full(6, 1 / 6), np.full((1, 6, 6), 1 / 6))
    np.testing.assert_allclose(post.gamma, gamma, atol=1e-12)
    assert post.loglik == pytest.approx(np.log(Z), abs=1e-12)


@pytest.mark.parametrize("per_position", [False, True])
def test_forward_backward_wrapper(per_position):
    rng = np.random.default_rng(1)
    for _ in range(20):
        I, J = rng.integers(1, 4, size=2)
        emit, init, trans = random_hmm(rng, I, J, per_position=per_position)
        log_emit = np.log(emit) - 30.0  # exercises the row shift
        post = forward_backward(log_emit, trans if per_position else trans[0], init, per_position=per_position)
        Z, gamma, xi, _ = brute_force(emit, init, trans)
        assert post.loglik == pytest.approx(np.log(Z) - 30.0 * J, rel=1e-10)
        np.testing.assert_allclose(post.gamma, gamma, atol=1e-10)
        summed = post.xi.sum(axis=0) if per_position else post.xi
        if J > 1:
            np.testing.assert_allclose(summed, xi, atol=1e-10)


def test_em_auxiliary_one_hot_is_path_logprob():
    rng = np.random.default_rng(2)
    emit, init, trans = random_hmm(rng, 2, 3)
    path = [0, 3, 1]
    gamma = np.eye(4)[path]
    xi = np.zeros((4, 4))
    for a, b in zip(path, path[1:]):
        xi[a, b] += 1
    q = em_auxiliary(Posteriors(gamma, xi, 0.0), np.log(emit), np.log(trans[0])).value
    expect = sum(np.log(emit[j, s]) for j, s in enumerate(path)) + sum(np.log(trans[0][a, b]) for a, b in zip(path, path[1:]))
    assert q == pytest.approx(expect, abs=1e-12)


def test_em_auxiliary_sign_and_errors():
    rng = np.random.default_rng(3)
    gamma = rng.dirichlet(np.ones(4), size=3)
    log_emit = np.log(rng.dirichlet(np.ones(4), size=3))
    assert em_auxiliary(Posteriors(gamma, None, 0.0), log_emit).value <= 0
    bad = log_emit.copy()
    bad[0, 0] = -np.inf
    with pytest.raises(ValueError):
        em_auxiliary(Posteriors(gamma, None, 0.0), bad)
    with pytest.raises(ValueError):
        em_auxiliary(Posteriors(gamma, np.ones((2, 2)), 0.0), log_emit, np.zeros((4, 4)))


def test_config_file_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nsrc = data/a.src\nmodel = HMM\nlr = 0.01  # trailing\nshuffle = no\n")
    c = TrainConfig.from_file(cfg)
    assert c.model == "hmm" and c.lr == 0.01 and c.shuffle is False
    assert c.src == str(tmp_path / "data" / "a.src")


@pytest.mark.parametrize(
    "text, match",
    [("bogus = 1\n", "unknown key"), ("lr 0.1\n", "key = value"), ("epochs = ten\n", "cannot read"),
     ("model = ibm3\n", "model"), ("jump = NNJumpTgt\n", "neural jump"), ("p0 = 1.0\n", "p0")],
)
def test_config_errors(tmp_path, text, match):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    with pytest.raises(ConfigError, match=match):
        TrainConfig.from_file(cfg)


def test_lr_zero_keeps_parameters_but_refreshes_jumps(monkeypatch):
    pairs, _ = dictionary_corpus(40, 10, 2, 5, monotone=True, seed=1)
    init = train(TrainConfig(model="ibm1", translation="NN", **SMALL), pairs).aligner
    before = {k: t.value.copy() for k, t in init.translation.store.items()}
    monkeypatch.setattr(trainer_mod, "_ibm1_init", lambda config, pairs: init)
    cfg = TrainConfig(model="hmm", translation="NN", **{**SMALL, "lr": 0.0, "epochs": 1, "refresh_batches": 1})
    res = train(cfg, pairs)
    for k, t in res.aligner.translation.store.items():
        np.testing.assert_array_equal(t.value, before[k])
    assert not np.allclose(res.aligner.jump_table.buckets, 1 / 13)


def test_auxiliary_skips_missing_posteriors():
    pairs, _ = dictionary_corpus(10, 5, 2, 3, seed=2)
    aligner = train(TrainConfig(model="ibm1", translation="NN", **SMALL), pairs).aligner
    trainer = Trainer(TrainConfig(**SMALL), aligner)
    enc = aligner.encode(pairs[:2])
    support = aligner.translation.full_support(enc)
    posts = trainer.e_step(enc, support)
    assert all(p is not None for p in posts)
    assert trainer.auxiliary(enc, [None, None], support) is None


def test_training_is_deterministic(tmp_path):
    pairs, _ = dictionary_corpus(60, 10, 2, 5, monotone=True, seed=3)
    src, tgt = write_corpus(tmp_path, pairs)
    outs = []
    for run in range(2):
        cfg = TrainConfig(src=src, tgt=tgt, output=str(tmp_path / f"m{run}"), model="hmm", translation="NN",
                          jump="NNJumpTgt", threads=1 + run, **SMALL)
        train(cfg)
        outs.append(tmp_path / f"m{run}")
    names = sorted(os.listdir(outs[0]))
    assert names == sorted(os.listdir(outs[1]))
    _, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
    assert not mismatch and not errors


def test_hmm_init_mismatch_is_fatal(tmp_path):
    pairs, _ = dictionary_corpus(20, 6, 2, 3, seed=4)
    src, tgt = write_corpus(tmp_path, pairs)
    train(TrainConfig(src=src, tgt=tgt, output=str(tmp_path / "ibm1"), translation="NN", **SMALL))
    for bad in (dict(translation="CtxCc"), dict(translation="NN", emb_dim=6)):
        cfg = TrainConfig(src=src, tgt=tgt, model="hmm", init_checkpoint=str(tmp_path / "ibm1"),
                          **{**SMALL, **bad})
        with pytest.raises(ConfigError):
            train(cfg)
    train(TrainConfig(src=src, tgt=tgt, output=str(tmp_path / "hmm"), model="hmm",
                      init_checkpoint=str(tmp_path / "ibm1"), **SMALL))
    with pytest.raises(ConfigError, match="IBM-1"):
        train(TrainConfig(src=src, tgt=tgt, model="hmm", init_checkpoint=str(tmp_path / "hmm"), **SMALL))


def test_cache_reuses_ibm1_init(tmp_path, monkeypatch):
    pairs, _ = dictionary_corpus(20, 6, 2, 3, seed=5)
    src, tgt = write_corpus(tmp_path, pairs)
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "cache"))
    cfg = TrainConfig(src=src, tgt=tgt, model="hmm", **SMALL)
    train(cfg)
    assert len(os.listdir(tmp_path / "cache")) == 1
    calls = []
    load = Aligner.load

    def spy(path):
        calls.append(str(path))
        return load(path)

    monkeypatch.setattr(Aligner, "load", spy)
    train(cfg)
    assert calls and calls[0].startswith(str(tmp_path / "cache"))


def test_log_file_format(tmp_path):
    pairs, gold = dictionary_corpus(20, 6, 2, 3, seed=6)
    src, tgt = write_corpus(tmp_path, pairs)
    (tmp_path / "dev.gold").write_text(
        "".join(f"{k} {j} {i} S\n" for k, g in gold.items() for j, i in sorted(g.sure))
    )
    cfg = TrainConfig(src=src, tgt=tgt, dev_src=src, dev_tgt=tgt, dev_gold=str(tmp_path / "dev.gold"),
                      output=str(tmp_path / "m"), translation="NN", **SMALL)
    result = train(cfg)
    lines = (tmp_path / "m" / "train.log").read_text().splitlines()
    assert lines[0].startswith("# loglik")
    assert [len(x.split("\t")) for x in lines[1:3]] == [3, 3]
    assert lines[-1] == "# skipped_sentences\t0"
    assert len(result.history) == 2 and result.history[-1][1] is not None


def test_empty_corpus_rejected():
    with pytest.raises(DataError):
        train(TrainConfig(), [])
    with pytest.raises(ConfigError):
        train(TrainConfig())
