import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIG2_TAGS
from lexrec.constraints import FLAG_END, FLAG_START, FLAG_TRANS, LatticeMasks, build_masks, LexcatConstraintTable
from lexrec.decoder import InfeasibleLattice, ScoreLattice, brute_force, path_score, viterbi
from lexrec.tagcodec import TagSet, encode, is_valid_sequence, FLAGS


def random_lattice(rng, T, K, p_allow=0.8, ties=False):
    if ties:
        em = rng.integers(-2, 3, size=(T, K)).astype(float)
        tr = rng.integers(-2, 3, size=(K, K)).astype(float)
        st_, en = rng.integers(-2, 3, size=K).astype(float), rng.integers(-2, 3, size=K).astype(float)
    else:
        em, tr = rng.normal(size=(T, K)), rng.normal(size=(K, K))
        st_, en = rng.normal(size=K), rng.normal(size=K)
    allow = rng.random((T, K)) < p_allow
    allow[np.arange(T), rng.integers(0, K, size=T)] = True
    masks = LatticeMasks(allow, rng.random((K, K)) < 0.7, rng.random(K) < 0.8, rng.random(K) < 0.8)
    return ScoreLattice(em, tr, st_, en, masks)


def test_all_o_only():
    K = 3
    allow = np.zeros((3, K), dtype=bool)
    allow[:, 0] = True
    m = LatticeMasks(allow, np.ones((K, K), bool), np.ones(K, bool), np.ones(K, bool))
    lat = ScoreLattice(np.zeros((3, K)), np.zeros((K, K)), np.zeros(K), np.zeros(K), m)
    assert viterbi(lat) == ([0, 0, 0], 0.0)


def test_one_token_two_tags():
    lat = ScoreLattice(np.array([[1.0, 2.0]]), np.zeros((2, 2)), np.zeros(2), np.zeros(2))
    assert brute_force(lat) == ([1], 2.0)
    assert viterbi(lat) == ([1], 2.0)


def test_tie_lexicographic():
    lat = ScoreLattice(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2), np.zeros(2))
    assert brute_force(lat)[0] == [0, 0]
    assert viterbi(lat)[0] == [0, 0]


def test_fig2_gold_emission(fig2):
    tags = encode(fig2)
    ts = TagSet(tags)
    idx = ts.indices(tags)
    em = np.zeros((len(tags), len(ts)))
    em[np.arange(len(tags)), idx] = 1.0
    m = build_masks([(t.upos, t.lemma) for t in fig2.tokens], ts, LexcatConstraintTable.default())
    lat = ScoreLattice(em, np.zeros((len(ts),) * 2), np.zeros(len(ts)), np.zeros(len(ts)), m)
    path, score = viterbi(lat)
    assert ts.strings() and [ts.strings()[k] for k in path] == FIG2_TAGS
    assert score == len(tags)


def test_flag_lattices_valid():
    rng = np.random.default_rng(5)
    for _ in range(5):
        T, K = 5, len(FLAGS)
        m = LatticeMasks(np.ones((T, K), bool), FLAG_TRANS, FLAG_START, FLAG_END)
        lat = ScoreLattice(rng.normal(size=(T, K)), rng.normal(size=(K, K)),
                           rng.normal(size=K), rng.normal(size=K), m)
        p, s = viterbi(lat)
        assert (p, s) == brute_force(lat)
        assert is_valid_sequence([FLAGS[k] for k in p])


def test_infeasible():
    K = 2
    m = LatticeMasks(np.ones((2, K), bool), np.zeros((K, K), bool), np.ones(K, bool), np.ones(K, bool))
    lat = ScoreLattice(np.zeros((2, K)), np.zeros((K, K)), np.zeros(K), np.zeros(K), m)
    with pytest.raises(InfeasibleLattice):
        viterbi(lat)
    with pytest.raises(InfeasibleLattice):
        brute_force(lat)


def test_guard():
    lat = ScoreLattice(np.zeros((8, 12)), np.zeros((12, 12)), np.zeros(12), np.zeros(12))
    with pytest.raises(ValueError):
        brute_force(lat, limit=1000)


def test_dimension_checks():
    with pytest.raises(ValueError):
        ScoreLattice(np.zeros((2, 3)), np.zeros((2, 2)), np.zeros(3), np.zeros(3))


def test_empty():
    lat = ScoreLattice(np.zeros((0, 3)), np.zeros((3, 3)), np.zeros(3), np.zeros(3))
    assert viterbi(lat) == ([], 0.0)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.integers(1, 12), st.booleans())
def test_oracle_equivalence(seed, T, K, ties):
    rng = np.random.default_rng(seed)
    lat = random_lattice(rng, T, K, ties=ties)
    try:
        expect = brute_force(lat)
    except InfeasibleLattice:
        with pytest.raises(InfeasibleLattice):
            viterbi(lat)
        return
    got = viterbi(lat)
    assert got == expect
    assert lat.feasible(got[0])
    assert path_score(lat, got[0]) == got[1]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-50, 50))
def test_shift_monotonicity(seed, c):
    rng = np.random.default_rng(seed)
    lat = random_lattice(rng, 4, 6, p_allow=1.0)
    lat.masks = None
    p, s = viterbi(lat)
    em = lat.emissions.copy()
    em[2] += c
    p2, s2 = viterbi(ScoreLattice(em, lat.transitions, lat.start, lat.end))
    assert p2 == p
    assert s2 == pytest.approx(s + c, abs=1e-9)
