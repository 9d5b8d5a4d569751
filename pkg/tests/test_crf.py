import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lexrec import crf
from lexrec.constraints import LexcatConstraintTable, build_masks
from lexrec.corpus import Token
from lexrec.decoder import ScoreLattice, brute_force, path_score, viterbi
from lexrec.kernels import NEG
from lexrec.synthetic import random_corpus
from lexrec.tagcodec import TagSet, decode, encode, is_valid_sequence, parse_tag


def toy_model(seed, n_sent=3, max_len=4, provider="features", scale=0.3):
    sents = random_corpus(n_sent, seed=seed, max_len=max_len)
    rng = np.random.default_rng(seed)
    vecs = [rng.normal(size=(len(s.tokens), 5)) for s in sents] if provider == "projection" else None
    ex = crf.examples_from_sentences(sents, vecs)
    ts = TagSet.from_sequences(e.tags for e in ex)
    kw = {"dim": 2 ** 10} if provider == "features" else {"dim": 5}
    m = crf.new_model(ts, provider, **kw)
    for v in m.params().values():
        v[...] = np.where(v > NEG / 2, rng.normal(size=v.shape) * scale, v)
    return m, ex


def enumerate_paths(lat):
    T, K = lat.shape
    m = lat.masks
    out = []
    for p in itertools.product(range(K), repeat=T):
        if m is not None and not lat.feasible(list(p)):
            continue
        s = path_score(lat, list(p))
        if s > NEG / 2:
            out.append(s)
    return out


def test_log_partition_trivial():
    lat = ScoreLattice(np.zeros((1, 2)), np.zeros((2, 2)), np.zeros(2), np.zeros(2))
    assert crf.log_partition(lat) == pytest.approx(math.log(2))


def test_normalization_and_bound():
    m, ex = toy_model(3, n_sent=1, max_len=4)
    inst = m.prepare(ex[0])
    lat = m.lattice(inst)
    scores = enumerate_paths(lat)
    z = crf.log_partition(lat)
    assert sum(math.exp(s - z) for s in scores) == pytest.approx(1.0, abs=1e-8)
    assert z >= viterbi(lat)[1]


def _fd_check(m, inst, n_coords=6, seed=0, h=1e-4):
    nll, g = crf.nll_and_gradient(m, inst)
    assert nll >= 0
    rng = np.random.default_rng(seed)
    errs = []
    for k, p in m.params().items():
        flat, gflat = p.reshape(-1), g[k].reshape(-1)
        cand = np.flatnonzero(flat > NEG / 2)
        nz = cand[np.abs(gflat[cand]) > 1e-7]
        pick = rng.choice(nz, size=min(n_coords, len(nz)), replace=False) if len(nz) else []
        for j in pick:
            old = flat[j]
            flat[j] = old + h
            f1 = crf.nll_and_gradient(m, inst)[0]
            flat[j] = old - h
            f2 = crf.nll_and_gradient(m, inst)[0]
            flat[j] = old
            fd = (f1 - f2) / (2 * h)
            errs.append(abs(fd - gflat[j]) / max(abs(fd), abs(gflat[j])))
    return max(errs)


@pytest.mark.parametrize("provider", ["features", "projection"])
def test_gradient_finite_differences(provider):
    m, ex = toy_model(7, n_sent=1, max_len=4, provider=provider)
    assert _fd_check(m, m.prepare(ex[0])) <= 1e-4


def test_structural_gradients_zero():
    m, ex = toy_model(2)
    _, g = crf.nll_and_gradient(m, m.prepare(ex[0]))
    assert (g["transitions"][~m.trans_mask] == 0).all()
    assert (g["start"][~m.start_mask] == 0).all()


def test_adam_quadratic():
    target = np.array([3.0, -2.0])
    x = np.zeros(2)
    opt = crf.Adam({"x": x}, lr=0.01)
    for _ in range(10000):
        opt.step({"x": 2 * (x - target) * np.array([1.0, 10.0])})
    assert np.abs(x - target).max() < 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        crf.TrainConfig(lr=0)
    with pytest.raises(ValueError):
        crf.TrainConfig(l2=-1)
    d = crf.TrainConfig()
    assert (d.lr, d.batch_size, d.max_epochs, d.clip_norm, d.patience) == (0.001, 64, 75, 5.0, 25)


def test_empty_corpus():
    with pytest.raises(ValueError):
        crf.train([], crf.TrainConfig())


def test_zero_model_tags_valid(fig2):
    ts = TagSet.from_sequences([encode(fig2)])
    m = crf.new_model(ts, dim=2 ** 8)
    out = crf.tag(m, crf.Example(fig2.tokens))
    assert is_valid_sequence([t.flag for t in out])
    assert out == crf.tag(m, crf.Example(fig2.tokens))
    decode(out)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 20))
def test_adversarial_parameters_valid(seed, scale):
    m, ex = toy_model(seed % 50, n_sent=4, max_len=10, scale=scale)
    table = LexcatConstraintTable.default()
    for e in ex:
        masks = crf.sentence_masks(m, e.tokens, table)
        out = crf.tag(m, e, masks)
        assert is_valid_sequence([t.flag for t in out])
        decode(out)


def test_determinism():
    sents = random_corpus(20, seed=4, max_len=8)
    ex = crf.examples_from_sentences(sents)
    cfg = crf.TrainConfig(lr=0.05, batch_size=4, max_epochs=3, seed=9)
    a = crf.train(ex, cfg, ex[:5], dim=2 ** 12)
    b = crf.train(ex, cfg, ex[:5], dim=2 ** 12)
    for k in a.params():
        assert np.array_equal(a.params()[k], b.params()[k])


def test_overfit_and_smoke():
    sents = random_corpus(50, seed=21, max_len=12)
    ex = crf.examples_from_sentences(sents)
    cfg = crf.TrainConfig(lr=0.05, batch_size=8, max_epochs=30, patience=30)
    records = []
    zero = crf.new_model(TagSet.from_sequences(e.tags for e in ex), dim=2 ** 16)
    nll0 = crf.mean_nll(zero, [zero.prepare(e) for e in ex])
    m = crf.train(ex, cfg, ex, dim=2 ** 16, on_epoch=records.append)
    assert records[0].epoch == 1 and records[-1].best_epoch >= 1
    assert crf.accuracy(m, [m.prepare(e) for e in ex]) >= 0.99
    one = crf.train(ex, crf.TrainConfig(lr=0.05, batch_size=8, max_epochs=1), dim=2 ** 16)
    assert crf.mean_nll(one, [one.prepare(e) for e in ex]) < nll0


def test_early_stopping_restores_best():
    sents = random_corpus(20, seed=8, max_len=8)
    ex = crf.examples_from_sentences(sents)
    recs = []
    crf.train(ex[:15], crf.TrainConfig(lr=0.5, batch_size=4, max_epochs=40, patience=2),
              ex[15:], dim=2 ** 12, on_epoch=recs.append)
    assert len(recs) < 40 or recs[-1].epoch == 40
    last = recs[-1]
    assert last.epoch - last.best_epoch <= 2


def test_unseen_dev_tag_backoff():
    sents = random_corpus(10, seed=1, max_len=6)
    ex = crf.examples_from_sentences(sents)
    m = crf.train(ex, crf.TrainConfig(max_epochs=1), dim=2 ** 10)
    unseen = crf.Example((Token(1, "x"),), [parse_tag("O-N-n.TIME")])
    inst = m.prepare(unseen)
    assert m.tagset.tags[inst.gold[0]].flag.value == "O"


def test_save_load(tmp_path):
    m, ex = toy_model(5)
    p = tmp_path / "m.npz"
    crf.save_model(m, p, crf.TrainConfig())
    m2 = crf.load_model(p)
    assert m2.tagset.tags == m.tagset.tags
    for k in m.params():
        assert np.array_equal(m.params()[k], m2.params()[k])
    assert crf.tag(m, ex[0]) == crf.tag(m2, ex[0])
    mp, exp_ = toy_model(5, provider="projection")
    crf.save_model(mp, p)
    assert crf.tag(crf.load_model(p), exp_[0]) == crf.tag(mp, exp_[0])
    (tmp_path / "bad.npz").write_bytes(b"nope")
    with pytest.raises(Exception):
        crf.load_model(tmp_path / "bad.npz")


def test_projection_training():
    sents = random_corpus(30, seed=2, max_len=6)
    ts = TagSet.from_sequences(encode(s) for s in sents)
    # vectors that encode the gold tag make the task learnable
    vecs = []
    for s in sents:
        X = np.zeros((len(s.tokens), len(ts)))
        X[np.arange(len(s.tokens)), ts.indices(encode(s))] = 1.0
        vecs.append(X)
    ex = crf.examples_from_sentences(sents, vecs)
    m = crf.train(ex, crf.TrainConfig(lr=0.1, batch_size=5, max_epochs=40), ex, provider="projection")
    assert crf.accuracy(m, [m.prepare(e) for e in ex]) >= 0.99
    with pytest.raises(ValueError):
        m.prepare(crf.Example(sents[0].tokens, None, np.zeros((1, 2))))


def test_vector_file_round_trip():
    blocks = [np.arange(6.0).reshape(2, 3), np.array([[0.5, -1e-3, 2.25]])]
    lines = crf.write_vectors(blocks)
    assert lines[0] == "dim=3\n"
    back = crf.read_vectors(lines)
    assert len(back) == 2 and all(np.array_equal(a, b) for a, b in zip(blocks, back))
    with pytest.raises(ValueError):
        crf.read_vectors(["dim=3\n", "1\t1 2\n"])
    with pytest.raises(ValueError):
        crf.read_vectors(["1\t1 2 3\n"])


def test_features():
    toks = [Token(1, "New", "new", "PROPN"), Token(2, "York", "york", "PROPN")]
    f = crf.extract_features(toks)
    assert len(f[0]) == len(f[1])
    assert "w=New" in f[0] and "w+1=york" in f[0] and "w-1=<s>" in f[0] and "sh=Xx" in f[0]
    assert not any(x.startswith("pos=") for x in f[0])
    g = crf.extract_features(toks, crf.ALL_TEMPLATES)
    assert "pos=PROPN" in g[0] and "lem=new" in g[0]
    with pytest.raises(ValueError):
        crf.extract_features(toks, ["nope"])
    assert crf.word_shape("McDonald's3") == "XxXx'xd"


def test_baseline():
    sents = random_corpus(30, seed=3)
    ex = crf.examples_from_sentences(sents)
    pred = crf.most_frequent_tag_baseline(ex)
    out = pred(sents[0].tokens)
    assert len(out) == len(sents[0].tokens)


def test_dev_flag_unseen_in_training():
    m, _ = toy_model(1)
    flags = {t.flag for t in m.tagset.tags}
    missing_flag = next(f for f in ("i_", "I_", "b") if f not in {x.value for x in flags})
    ex = crf.Example((Token(1, "a"),), [parse_tag(missing_flag + ("-N" if missing_flag == "b" else ""))])
    inst = m.prepare(ex)
    assert inst.gold is None
    assert crf.accuracy(m, [inst]) == 0.0
    assert crf.mean_nll(m, [inst]) == 0.0  # nothing scorable
    with pytest.raises(KeyError):
        m.prepare(ex, backoff=False)
