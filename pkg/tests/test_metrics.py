import random

import pytest
from hypothesis import given, settings, strategies as st

from lexrec import metrics as M
from lexrec.convert import DimsumSentence, DimsumUnit, to_dimsum, to_parseme
from lexrec.corpus import Lexcat, LexicalUnit, Sentence, SupersensePair, Token, WeakGroup, default_inventory
from lexrec.synthetic import random_corpus
from lexrec.tagcodec import LexTag, encode, parse_tag

INV = default_inventory()


def ss(label):
    return INV.get(label)


def sent(n, units, weak=(), sid="s"):
    toks = tuple(Token(i, f"w{i}") for i in range(1, n + 1))
    covered = {i for u in units for i in u.token_indices}
    units = list(units) + [LexicalUnit((i,), Lexcat.X) for i in range(1, n + 1) if i not in covered]
    return Sentence(sid, "", toks, tuple(units), tuple(weak))


def N(idx, label="n.ARTIFACT"):
    return LexicalUnit(tuple(idx), Lexcat.N, ss(label))


def P(idx, role, fxn=None):
    s = ss(role) if fxn is None else SupersensePair(ss(role), ss(fxn))
    return LexicalUnit(tuple(idx), Lexcat.P, s)


# --- PRF arithmetic -------------------------------------------------------

def test_prf_toy():
    r = M.PRF(1, 3, 2)
    assert r.p == pytest.approx(1 / 3) and r.r == pytest.approx(1 / 2) and r.f == pytest.approx(0.4)


def test_prf_zero_conventions():
    assert (M.PRF(0, 0, 5).p, M.PRF(0, 0, 5).r, M.PRF(0, 0, 5).f) == (0, 0, 0)
    assert (M.PRF(0, 4, 0).p, M.PRF(0, 4, 0).r) == (0, 0)
    e = M.PRF(0, 0, 0)
    assert (e.p, e.r, e.f) == (1, 1, 1)
    assert M.Accuracy(0, 0).value == 1.0


def test_unit_labeled_toy():
    gold = sent(6, [N([1], "n.TIME"), N([2], "n.ACT")])
    pred = sent(6, [N([1], "n.TIME"), N([3]), N([4])])
    r = M.unit_labeled_prf([gold], [pred], "noun")
    assert (r.matched_pred, r.predicted, r.gold) == (1, 3, 2)
    assert r.f == pytest.approx(0.4)


def test_snacs_role_function():
    gold = sent(3, [P([1], "p.Locus", "p.Goal")])
    pred = sent(3, [P([1], "p.Locus", "p.Source")])
    assert M.unit_labeled_prf([gold], [pred], "snacs", "role_only").f == 1
    assert M.unit_labeled_prf([gold], [pred], "snacs", "function_only").f == 0
    assert M.unit_labeled_prf([gold], [pred], "snacs", "full").f == 0
    with pytest.raises(ValueError):
        M.unit_labeled_prf([gold], [pred], "adj")


def test_tag_accuracy_supersense_only():
    gold = [[parse_tag("O-N-n.TIME")] + [parse_tag("O-DET")] * 9]
    pred = [[parse_tag("O-N-n.ACT")] + [parse_tag("O-DET")] * 9]
    assert M.tag_accuracy(gold, pred, "full").value == pytest.approx(0.9)
    assert M.tag_accuracy(gold, pred, "drop_supersense").value == 1.0
    assert M.tag_accuracy(gold, pred, "drop_lexcat").value == pytest.approx(0.9)
    with pytest.raises(ValueError):
        M.tag_accuracy(gold, [pred[0][:5]])


def test_tag_accuracy_flag_always_compared():
    g = [[parse_tag("B-N-n.TIME"), parse_tag("I_")]]
    p = [[parse_tag("O-N-n.TIME"), parse_tag("O-X")]]
    assert M.tag_accuracy(g, p, "drop_lexcat").value == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_corruption_accuracy(seed):
    rng = random.Random(seed)
    tags = [encode(s) for s in random_corpus(5, seed=seed)]
    N_ = sum(map(len, tags))
    k = rng.randint(0, N_)
    flat = [(i, j) for i, t in enumerate(tags) for j in range(len(t)) if t[j].lexcat is not None]
    k = min(k, len(flat))
    pred = [list(t) for t in tags]
    for i, j in rng.sample(flat, k):
        pred[i][j] = LexTag(pred[i][j].flag, Lexcat.NUM if pred[i][j].lexcat is not Lexcat.NUM else Lexcat.SYM)
    assert M.tag_accuracy(tags, pred).value == pytest.approx((N_ - k) / N_)


# --- links ----------------------------------------------------------------

def test_link_split_segmentation():
    gold = sent(4, [N([1, 2, 3, 4])])
    pred = sent(4, [N([1, 2]), N([3, 4])])
    r = M.mwe_link_prf([gold], [pred], "strong_only")
    assert (r.matched_pred, r.predicted, r.gold, r.matched_gold) == (2, 2, 3, 2)
    assert r.p == 1 and r.r == pytest.approx(2 / 3)


def test_link_gap_and_no_prediction():
    gold = sent(5, [N([1, 4])])
    r = M.mwe_link_prf([gold], [sent(5, [])], "strong_only")
    assert (r.p, r.r, r.f) == (0, 0, 0) and r.gold == 1


def test_weak_links_and_average():
    a, b = N([1, 2]), N([3])
    gold = sent(4, [a, b], [WeakGroup((a, b))])
    pred = sent(4, [N([1, 2])])
    so = M.mwe_link_prf([gold], [pred], "strong_only")
    sw = M.mwe_link_prf([gold], [pred], "strong_plus_weak")
    av = M.mwe_link_prf([gold], [pred], "average")
    assert (so.gold, sw.gold) == (1, 2)
    assert av.gold == 1.5 and av.matched_pred == (so.matched_pred + sw.matched_pred) / 2
    assert av.matched_gold == (so.matched_gold + sw.matched_gold) / 2
    with pytest.raises(ValueError):
        M.mwe_link_prf([gold], [pred], "both")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_linkavg_is_mean(seed):
    g = random_corpus(6, seed=seed)
    p = random_corpus(6, seed=seed + 1)
    p = [s.__class__(a.sent_id, a.text, a.tokens, s.units, s.weak_groups)
         for a, s in zip(g, p) if len(a.tokens) == len(s.tokens)]
    g = [a for a in g if any(a.sent_id == b.sent_id for b in p)]
    if not g:
        return
    so, sw, av = (M.mwe_link_prf(g, p, w) for w in M.WEAK_MODES)
    for f in ("matched_pred", "predicted", "gold", "matched_gold"):
        assert getattr(av, f) == pytest.approx((getattr(so, f) + getattr(sw, f)) / 2)


# --- PARSEME --------------------------------------------------------------

def test_parseme_examples():
    g, p = [[{1, 2, 3}]], [[{1, 2}]]
    mb = M.parseme_prf(g, p, "mwe_based")
    assert mb.p == 0 and mb.r == 0
    tb = M.parseme_prf(g, p, "token_based")
    assert (tb.matched_pred, tb.predicted, tb.gold) == (2, 2, 3)
    assert tb.p == 1 and tb.r == pytest.approx(2 / 3)


def test_parseme_one_to_one():
    # two predictions overlap one gold; only one may be matched
    tb = M.parseme_prf([[{1, 2, 3, 4}]], [[{1, 2}, {3, 4}]], "token_based")
    assert tb.matched_pred == 2 and tb.predicted == 4 and tb.gold == 4
    # the optimal assignment, not a greedy one
    tb = M.parseme_prf([[{1, 2}, {3, 4, 5}]], [[{2, 3, 4}, {1, 2, 9}]], "token_based")
    assert tb.matched_pred == 4
    mb = M.parseme_prf([[{1, 2}]], [[{1, 2}, {1, 2}]], "mwe_based")
    assert (mb.matched_pred, mb.predicted) == (1, 2)
    with pytest.raises(ValueError):
        M.parseme_prf([[]], [[]], "tokens")


# --- DiMSUM ---------------------------------------------------------------

def dsent(n, units, sid="d"):
    toks = tuple(Token(i, f"w{i}") for i in range(1, n + 1))
    covered = {i for u in units for i in u.token_indices}
    units = list(units) + [DimsumUnit((i,)) for i in range(1, n + 1) if i not in covered]
    return DimsumSentence(sid, toks, tuple(units))


def test_dimsum_empty_prediction():
    gold = dsent(6, [DimsumUnit((1, 3), "v.motion"), DimsumUnit((4,), "n.act")])
    d = M.dimsum_prf([gold], [dsent(6, [])])
    for r in (d.mwe, d.supersense, d.combined):
        assert (r.p, r.r, r.f) == (0, 0, 0)
    # tokens 2, 5, 6 are O without supersense in gold; token 2 is "o" (inside a gap)
    assert d.accuracy.value == pytest.approx(2 / 6)


def test_dimsum_combined_is_sum(synth):
    gold = [to_dimsum(s) for s in synth[:40]]
    pred = [to_dimsum(s.replace_annotation(p.units, p.weak_groups))
            for s, p in zip(synth[:40], synth[40:80]) if len(s.tokens) == len(p.tokens)]
    gold = [g for g in gold if any(g.sent_id == q.sent_id for q in pred)]
    d = M.dimsum_prf(gold, pred)
    for f in ("matched_pred", "predicted", "gold", "matched_gold"):
        assert getattr(d.combined, f) == getattr(d.mwe, f) + getattr(d.supersense, f)


# --- general properties ---------------------------------------------------

def all_prfs(gold, pred):
    out = [M.unit_labeled_prf(gold, pred, c, m) for c in ("noun", "verb") for m in ("full",)]
    out += [M.unit_labeled_prf(gold, pred, "snacs", m) for m in M.LABEL_MODES]
    out += [M.mwe_link_prf(gold, pred, w) for w in M.WEAK_MODES]
    out += [M.strong_identification_prf(gold, pred), M.strong_identification_prf(gold, pred, labeled=True)]
    gp = [to_parseme(s).mwe_sets() for s in gold]
    pp = [to_parseme(s).mwe_sets() for s in pred]
    out += [M.parseme_prf(gp, pp, m) for m in ("mwe_based", "token_based")]
    d = M.dimsum_prf([to_dimsum(s) for s in gold], [to_dimsum(s) for s in pred])
    out += [d.mwe, d.supersense, d.combined]
    return out


def test_self_evaluation(synth):
    for r in all_prfs(synth, synth):
        assert (r.p, r.r, r.f) == (1, 1, 1)
    rep = M.streusle_report(synth, synth, extended=True)
    for name in rep.names():
        v = rep[name]
        assert (v.value if isinstance(v, M.Accuracy) else v.f) == 1


def _paired(seed):
    g = random_corpus(8, seed=seed, max_len=10)
    rng = random.Random(seed)
    p = []
    for s in g:
        # a prediction on the same tokens: the annotation of a random same-length sentence
        n = len(s.tokens)
        q = random_corpus(1, seed=rng.randint(0, 10 ** 9), min_len=n, max_len=n)[0]
        p.append(s.replace_annotation(q.units, q.weak_groups))
    return g, p


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_symmetry(seed):
    g, p = _paired(seed)
    for a, b in zip(all_prfs(g, p), all_prfs(p, g)):
        assert a.p == pytest.approx(b.r) and a.r == pytest.approx(b.p) and a.f == pytest.approx(b.f)
        assert a.swapped() == b or a.swapped().f == pytest.approx(b.f)


LABELS = ("n.TIME", "n.ACT", "n.ARTIFACT")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(("gold", "pred", "both", "wrong", "none")),
                          st.sampled_from(LABELS)), min_size=1, max_size=12), st.data())
def test_monotonicity(spec, data):
    n = len(spec)
    gu, pu = [], []
    for i, (kind, lab) in enumerate(spec, 1):
        if kind in ("gold", "both", "wrong"):
            gu.append(N([i], lab))
        if kind in ("pred", "both"):
            pu.append(N([i], lab))
        if kind == "wrong":
            pu.append(N([i], LABELS[(LABELS.index(lab) + 1) % 3]))
    gold = [sent(n, gu)]
    base = M.unit_labeled_prf(gold, [sent(n, pu)], "noun")
    if pu:
        k = data.draw(st.integers(0, len(pu) - 1))
        fewer = M.unit_labeled_prf(gold, [sent(n, pu[:k] + pu[k + 1:])], "noun")
        assert fewer.matched_pred <= base.matched_pred
    missing = [i for i, (kind, _) in enumerate(spec, 1) if kind == "gold"]
    if missing:
        i = data.draw(st.sampled_from(missing))
        more = M.unit_labeled_prf(gold, [sent(n, pu + [N([i], spec[i - 1][1])])], "noun")
        assert more.p >= base.p and more.r >= base.r


def test_report_records_and_table(synth):
    rep = M.streusle_report(synth[:10], synth[:10])
    rec = rep.records()
    assert rec[0].startswith("metric\tmatched\tpredicted\tgold\tP\tR\tF")
    assert len(rec) == len(rep.names()) + 1
    assert all(len(r.split("\t")) == 8 for r in rec)
    assert rep.table()[0].strip() == "STREUSLE"
    with pytest.raises(KeyError):
        rep["nope"]
    assert M.MetricReport._num(433.5) == "433.5" and M.MetricReport._num(5381.0) == "5381"
