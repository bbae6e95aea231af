import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import random_links

from nnalign.alignment import JumpTable
from nnalign.corpus import DataError
from nnalign.decoder import (
    grow_diag_final,
    ibm1_decode,
    read_pharaoh,
    transpose,
    viterbi,
    write_pharaoh,
)
from nnalign.kernels import ZeroLikelihood


def test_ibm1_uniform_rows_link_to_first_target():
    assert ibm1_decode(np.zeros((3, 4))) == {(1, 1), (2, 1), (3, 1)}


def test_ibm1_real_beats_null_on_tie_and_null_drops_link():
    le = np.log(np.array([[0.2, 0.3, 0.3, 0.3], [0.1, 0.1, 0.9, 0.9]]))
    assert ibm1_decode(le) == {(1, 2)}


def test_ibm1_deterministic_lexicon():
    # source j translates target perm[j]
    perm = [2, 0, 1]
    le = np.full((3, 6), np.log(1e-3))
    for j, i in enumerate(perm):
        le[j, i] = 0.0
    assert ibm1_decode(le) == {(1, 3), (2, 1), (3, 2)}


def test_ibm1_matches_exhaustive_argmax():
    rng = np.random.default_rng(0)
    for _ in range(50):
        le = np.log(rng.random((3, 6)))
        best = [max(range(6), key=lambda s: (le[j, s], -s)) for j in range(3)]
        assert ibm1_decode(le) == {(j + 1, s + 1) for j, s in enumerate(best) if s < 3}


def test_viterbi_single_word():
    init = np.log([0.1, 0.5, 0.2, 0.2])
    emit = np.log([[0.9, 0.1, 0.5, 0.5]])
    # products: 0.09, 0.05, 0.10, 0.10 -> null copy of target 1
    assert viterbi(emit, np.zeros((4, 4)), init) == frozenset()
    emit = np.log([[0.9, 0.3, 0.1, 0.1]])
    assert viterbi(emit, np.zeros((4, 4)), init) == {(1, 2)}


def test_viterbi_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(30):
        I, J = rng.integers(1, 4, size=2)
        S = 2 * I
        le = np.log(rng.random((J, S)))
        lt = np.log(rng.dirichlet(np.ones(S), size=S))
        li = np.log(rng.dirichlet(np.ones(S)))
        best = max(
            itertools.product(range(S), repeat=J),
            key=lambda p: li[p[0]] + le[0, p[0]] + sum(lt[p[k - 1], p[k]] + le[k, p[k]] for k in range(1, J)),
        )
        assert viterbi(le, lt, li) == {(j + 1, s + 1) for j, s in enumerate(best) if s < I}


def test_viterbi_monotone_sentence():
    I = 5
    jump = JumpTable(5, np.array([1, 1, 1, 1, 1, 1, 2, 20, 2, 1, 1, 1, 1]) / 34.0, 0.05)
    # flat emissions: only the jump model distinguishes paths
    le = np.zeros((I, 2 * I))
    le[:, I:] = np.log(0.5)
    with np.errstate(divide="ignore"):
        path = viterbi(le, np.log(jump.transition(I)), np.log(jump.initial(I)))
    assert path == {(k, k) for k in range(1, I + 1)}


def test_viterbi_all_paths_impossible():
    with pytest.raises(ZeroLikelihood):
        viterbi(np.full((2, 2), -np.inf), np.zeros((2, 2)), np.zeros(2))


def test_gdfa_idempotent_on_agreement():
    rng = np.random.default_rng(2)
    for _ in range(100):
        a = random_links(rng, 5, 4)
        assert grow_diag_final(a, a) == a


def test_gdfa_disjoint_singletons():
    assert grow_diag_final({(1, 1)}, {(2, 2)}) == {(1, 1), (2, 2)}


def test_gdfa_hand_traced_fixtures():
    # grow follows the diagonal chain from the intersection
    assert grow_diag_final({(1, 1), (2, 2)}, {(1, 1), (2, 1), (3, 3)}) == {(1, 1), (2, 1), (2, 2), (3, 3)}
    # union corners whose endpoints are all covered are never added
    diag = {(1, 1), (2, 2), (3, 3)}
    assert grow_diag_final(diag | {(1, 3)}, diag | {(3, 1)}) == diag


def test_gdfa_final_step_variants():
    fwd, rev = {(1, 1)}, {(1, 1), (1, 3)}
    assert grow_diag_final(fwd, rev, 1, 3) == {(1, 1), (1, 3)}
    assert grow_diag_final(fwd, rev, 1, 3, final_and=True) == {(1, 1)}


def test_gdfa_bounds_and_range_check():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        J, I = rng.integers(1, 7, size=2)
        f, r = random_links(rng, J, I), random_links(rng, J, I)
        out = grow_diag_final(f, r, J, I)
        assert (f & r) <= out <= (f | r)
    with pytest.raises(ValueError):
        grow_diag_final({(3, 1)}, set(), 2, 2)


def test_pharaoh_format(tmp_path):
    write_pharaoh([{(1, 1), (2, 3)}, set()], tmp_path / "a")
    assert (tmp_path / "a").read_text() == "0-0 1-2\n\n"
    assert read_pharaoh(tmp_path / "a") == [{(1, 1), (2, 3)}, frozenset()]


@given(st.lists(st.frozensets(st.tuples(st.integers(1, 30), st.integers(1, 30)), max_size=20), max_size=8))
@settings(max_examples=50, deadline=None)
def test_pharaoh_roundtrip(tmp_path_factory, sets):
    path = tmp_path_factory.mktemp("ph") / "a"
    write_pharaoh(sets, path)
    assert read_pharaoh(path) == sets


@pytest.mark.parametrize("bad", ["0-0 1_2", "0-0 a-1", "0-"])
def test_pharaoh_malformed(tmp_path, bad):
    (tmp_path / "a").write_text("0-0\n" + bad + "\n")
    with pytest.raises(DataError, match=":2:"):
        read_pharaoh(tmp_path / "a")


def test_transpose():
    assert transpose({(1, 2), (3, 1)}) == {(2, 1), (1, 3)}
