"""Evaluation: tag accuracies, labeled unit scores, link-based MWE scores,
PARSEME identification scores and DiMSUM scores.

All metrics work on structures (sentences, unit sets), never on tag strings.
Counts are accumulated per sentence and pooled over the corpus.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .convert import DimsumSentence, ParsemeSentence, dimsum_tags
from .corpus import Sentence, SupersensePair, function_of, role_of
from .tagcodec import LexTag, encode


def _ratio(num: float, den: float, other_den: float) -> float:
    # x/0 is 0, except that an empty prediction of an empty gold is perfect
    if den == 0:
        return 1.0 if other_den == 0 else 0.0
    return num / den


@dataclass(frozen=True)
class PRF:
    """Precision/recall/F1 from counts.

    Link-based scores need two numerators: predicted items matched in gold
    (for P) and gold items matched in the prediction (for R). Everywhere else
    they coincide.
    """
    matched_pred: float
    predicted: float
    gold: float
    matched_gold: Optional[float] = None

    def __post_init__(self):
        if self.matched_gold is None:
            object.__setattr__(self, "matched_gold", self.matched_pred)

    @property
    def p(self) -> float:
        return _ratio(self.matched_pred, self.predicted, self.gold)

    @property
    def r(self) -> float:
        return _ratio(self.matched_gold, self.gold, self.predicted)

    @property
    def f(self) -> float:
        p, r = self.p, self.r
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(self.matched_pred + other.matched_pred, self.predicted + other.predicted,
                   self.gold + other.gold, self.matched_gold + other.matched_gold)

    def swapped(self) -> "PRF":
        return PRF(self.matched_gold, self.gold, self.predicted, self.matched_pred)

    @staticmethod
    def mean(a: "PRF", b: "PRF") -> "PRF":
        return PRF((a.matched_pred + b.matched_pred) / 2, (a.predicted + b.predicted) / 2,
                   (a.gold + b.gold) / 2, (a.matched_gold + b.matched_gold) / 2)


ZERO = PRF(0, 0, 0)


@dataclass(frozen=True)
class Accuracy:
    correct: int
    total: int

    @property
    def value(self) -> float:
        return self.correct / self.total if self.total else 1.0

    def __add__(self, other: "Accuracy") -> "Accuracy":
        return Accuracy(self.correct + other.correct, self.total + other.total)


def _check_aligned(gold: Sequence, pred: Sequence) -> None:
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold vs {len(pred)} predicted sentences")
    for g, p in zip(gold, pred):
        if len(g.tokens) != len(p.tokens):
            raise ValueError(f"sentence {g.sent_id}: {len(g.tokens)} gold vs "
                             f"{len(p.tokens)} predicted tokens")


# ---------------------------------------------------------------------------
# tags

TAG_MODES = ("full", "drop_lexcat", "drop_supersense")


def project_tag(t: LexTag, mode: str):
    if mode == "full":
        return t
    if mode == "drop_lexcat":
        return (t.flag, t.supersense)
    if mode == "drop_supersense":
        return (t.flag, t.lexcat)
    raise ValueError(f"unknown tag accuracy mode {mode!r}")


def tag_accuracy(gold: Sequence[Sequence[LexTag]], pred: Sequence[Sequence[LexTag]],
                 mode: str = "full") -> Accuracy:
    """Token-level exact match over a corpus of tag sequences."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold vs {len(pred)} predicted sequences")
    correct = total = 0
    for g, p in zip(gold, pred):
        if len(g) != len(p):
            raise ValueError(f"sequence lengths differ ({len(g)} vs {len(p)})")
        correct += sum(project_tag(a, mode) == project_tag(b, mode) for a, b in zip(g, p))
        total += len(g)
    return Accuracy(correct, total)


# ---------------------------------------------------------------------------
# labeled units

LABEL_MODES = ("full", "role_only", "function_only")


def _unit_label(ss, mode: str):
    if mode == "full":
        return (role_of(ss).label, function_of(ss).label)
    if mode == "role_only":
        return role_of(ss).label
    if mode == "function_only":
        return function_of(ss).label
    raise ValueError(f"unknown label mode {mode!r}")


def _scored(ss, cls: str) -> bool:
    if ss is None or ss.cls != cls:
        return False
    if isinstance(ss, SupersensePair):
        return ss.role.is_scored and ss.function.is_scored
    return ss.is_scored


def labeled_units(s: Sentence, cls: str, mode: str = "full") -> set:
    return {(u.token_indices, _unit_label(u.supersense, mode))
            for u in s.units if _scored(u.supersense, cls)}


def unit_labeled_prf(gold: Sequence[Sentence], pred: Sequence[Sentence], cls: str,
                     mode: str = "full") -> PRF:
    """Exact span + label match, restricted to units labeled with class `cls`."""
    if cls not in ("noun", "verb", "snacs"):
        raise ValueError(f"unknown supersense class {cls!r}")
    _check_aligned(gold, pred)
    m = np_ = ng = 0
    for g, p in zip(gold, pred):
        gs, ps = labeled_units(g, cls, mode), labeled_units(p, cls, mode)
        m += len(gs & ps)
        np_ += len(ps)
        ng += len(gs)
    return PRF(m, np_, ng)


def strong_identification_prf(gold: Sequence[Sentence], pred: Sequence[Sentence],
                              labeled: bool = False) -> PRF:
    """Exact match of every lexical unit (optionally with lexcat and supersense)."""
    _check_aligned(gold, pred)
    out = ZERO
    for g, p in zip(gold, pred):
        key = (lambda u: (u.token_indices, u.lexcat, u.supersense)) if labeled else (
            lambda u: u.token_indices)
        gs, ps = {key(u) for u in g.units}, {key(u) for u in p.units}
        out = out + PRF(len(gs & ps), len(ps), len(gs))
    return out


# ---------------------------------------------------------------------------
# link-based MWE scores

WEAK_MODES = ("strong_only", "strong_plus_weak", "average")


def groupings(s: Sentence, weak: bool) -> list[tuple[int, ...]]:
    """Token groups whose consecutive members are linked."""
    if not weak:
        return [u.token_indices for u in s.units if u.is_mwe]
    grouped = {u for g in s.weak_groups for u in g.member_units}
    out = [g.token_indices for g in s.weak_groups]
    out.extend(u.token_indices for u in s.units if u.is_mwe and u not in grouped)
    return out


def _links(groups: Iterable[Sequence[int]]) -> list[tuple[int, int]]:
    return [(a, b) for g in groups for a, b in zip(g, g[1:])]


def _group_id(groups: Iterable[Sequence[int]]) -> dict[int, int]:
    return {i: k for k, g in enumerate(groups) for i in g}


def link_counts(gold_groups, pred_groups) -> PRF:
    """Partial credit: a link counts if both its tokens share a group on the other side."""
    gl, pl = _links(gold_groups), _links(pred_groups)
    gid, pid = _group_id(gold_groups), _group_id(pred_groups)

    def co(ids, a, b):
        return a in ids and b in ids and ids[a] == ids[b]

    mp = sum(co(gid, a, b) for a, b in pl)
    mg = sum(co(pid, a, b) for a, b in gl)
    return PRF(mp, len(pl), len(gl), mg)


def mwe_link_prf(gold: Sequence[Sentence], pred: Sequence[Sentence],
                 weak: str = "average") -> PRF:
    if weak not in WEAK_MODES:
        raise ValueError(f"unknown weak handling {weak!r}")
    _check_aligned(gold, pred)
    if weak == "average":
        return PRF.mean(mwe_link_prf(gold, pred, "strong_only"),
                        mwe_link_prf(gold, pred, "strong_plus_weak"))
    w = weak == "strong_plus_weak"
    out = ZERO
    for g, p in zip(gold, pred):
        out = out + link_counts(groupings(g, w), groupings(p, w))
    return out


# ---------------------------------------------------------------------------
# PARSEME

MweSets = Sequence[Iterable[int]]


def _parseme_sentence(gold: MweSets, pred: MweSets, mode: str) -> PRF:
    gs = [frozenset(x) for x in gold]
    ps = [frozenset(x) for x in pred]
    if mode == "mwe_based":
        remaining = list(gs)
        m = 0
        for p in ps:
            if p in remaining:
                remaining.remove(p)
                m += 1
        return PRF(m, len(ps), len(gs))
    if mode == "token_based":
        ng = sum(len(g) for g in gs)
        np_ = sum(len(p) for p in ps)
        if not gs or not ps:
            return PRF(0, np_, ng)
        overlap = np.array([[len(p & g) for g in gs] for p in ps])
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        return PRF(int(overlap[rows, cols].sum()), np_, ng)
    raise ValueError(f"unknown PARSEME mode {mode!r}")


def parseme_prf(gold: Sequence[MweSets], pred: Sequence[MweSets], mode: str = "mwe_based") -> PRF:
    """Per-sentence VMWE sets (labels ignored); one-to-one matching within each sentence."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold vs {len(pred)} predicted sentences")
    out = ZERO
    for g, p in zip(gold, pred):
        out = out + _parseme_sentence(g, p, mode)
    return out


# ---------------------------------------------------------------------------
# DiMSUM


@dataclass(frozen=True)
class DimsumScores:
    mwe: PRF
    supersense: PRF
    combined: PRF
    accuracy: Accuracy


def _dimsum_ss(s: DimsumSentence) -> set:
    return {(u.first, u.supersense) for u in s.units if u.supersense}


def dimsum_prf(gold: Sequence[DimsumSentence], pred: Sequence[DimsumSentence]) -> DimsumScores:
    _check_aligned(gold, pred)
    mwe = ss = ZERO
    acc = Accuracy(0, 0)
    for g, p in zip(gold, pred):
        mwe = mwe + link_counts(g.mwes(), p.mwes())
        gs, ps = _dimsum_ss(g), _dimsum_ss(p)
        ss = ss + PRF(len(gs & ps), len(ps), len(gs))
        gt, pt = dimsum_tags(g), dimsum_tags(p)
        acc = acc + Accuracy(sum(a == b for a, b in zip(gt, pt)), len(gt))
    return DimsumScores(mwe, ss, mwe + ss, acc)


# ---------------------------------------------------------------------------
# reports

Value = Union[PRF, Accuracy]


class MetricReport:
    def __init__(self, title: str = ""):
        self.title = title
        self.rows: list[tuple[str, Value]] = []

    def add(self, name: str, value: Value) -> "MetricReport":
        self.rows.append((name, value))
        return self

    def __getitem__(self, name: str) -> Value:
        for n, v in self.rows:
            if n == name:
                return v
        raise KeyError(name)

    def names(self) -> list[str]:
        return [n for n, _ in self.rows]

    @staticmethod
    def _num(x: float) -> str:
        return str(int(x)) if float(x).is_integer() else f"{x:g}"

    def records(self) -> list[str]:
        """Tab-separated: metric, matched, predicted, gold, P, R, F, matched_gold."""
        out = ["metric\tmatched\tpredicted\tgold\tP\tR\tF\tmatched_gold\n"]
        for name, v in self.rows:
            if isinstance(v, Accuracy):
                a = f"{v.value:.6f}"
                cells = [name, str(v.correct), str(v.total), str(v.total), a, a, a, str(v.correct)]
            else:
                cells = [name, self._num(v.matched_pred), self._num(v.predicted), self._num(v.gold),
                         f"{v.p:.6f}", f"{v.r:.6f}", f"{v.f:.6f}", self._num(v.matched_gold)]
            out.append("\t".join(cells) + "\n")
        return out

    def table(self) -> list[str]:
        w = max([len(n) for n in self.names()] + [6])
        out = []
        if self.title:
            out.append(self.title + "\n")
        out.append(f"{'metric':<{w}}  {'P':>6}  {'R':>6}  {'F/Acc':>6}  {'# gold':>8}\n")
        for name, v in self.rows:
            if isinstance(v, Accuracy):
                out.append(f"{name:<{w}}  {'':>6}  {'':>6}  {100 * v.value:6.2f}  "
                           f"{v.total:>8}\n")
            else:
                out.append(f"{name:<{w}}  {100 * v.p:6.2f}  {100 * v.r:6.2f}  {100 * v.f:6.2f}  "
                           f"{self._num(v.gold):>8}\n")
        return out


def streusle_report(gold: Sequence[Sentence], pred: Sequence[Sentence],
                    extended: bool = False) -> MetricReport:
    _check_aligned(gold, pred)
    gt = [encode(s) for s in gold]
    pt = [encode(s) for s in pred]
    r = MetricReport("STREUSLE")
    r.add("tags.full", tag_accuracy(gt, pt, "full"))
    r.add("tags.-lexcat", tag_accuracy(gt, pt, "drop_lexcat"))
    r.add("tags.-ss", tag_accuracy(gt, pt, "drop_supersense"))
    r.add("labeled.noun", unit_labeled_prf(gold, pred, "noun"))
    r.add("labeled.verb", unit_labeled_prf(gold, pred, "verb"))
    r.add("labeled.snacs.role", unit_labeled_prf(gold, pred, "snacs", "role_only"))
    r.add("labeled.snacs.fxn", unit_labeled_prf(gold, pred, "snacs", "function_only"))
    r.add("mwe.linkavg", mwe_link_prf(gold, pred, "average"))
    if extended:
        r.add("labeled.snacs.full", unit_labeled_prf(gold, pred, "snacs", "full"))
        r.add("mwe.link.strong", mwe_link_prf(gold, pred, "strong_only"))
        r.add("mwe.link.weak", mwe_link_prf(gold, pred, "strong_plus_weak"))
        r.add("strong.id", strong_identification_prf(gold, pred))
        r.add("strong.labeled", strong_identification_prf(gold, pred, labeled=True))
    return r


def parseme_report(gold: Sequence[ParsemeSentence], pred: Sequence[ParsemeSentence]) -> MetricReport:
    _check_aligned(gold, pred)
    g = [s.mwe_sets() for s in gold]
    p = [s.mwe_sets() for s in pred]
    r = MetricReport("PARSEME")
    r.add("parseme.mwe", parseme_prf(g, p, "mwe_based"))
    r.add("parseme.token", parseme_prf(g, p, "token_based"))
    return r


def dimsum_report(gold: Sequence[DimsumSentence], pred: Sequence[DimsumSentence]) -> MetricReport:
    d = dimsum_prf(gold, pred)
    r = MetricReport("DiMSUM")
    r.add("dimsum.mwe", d.mwe)
    r.add("dimsum.ss", d.supersense)
    r.add("dimsum.combined", d.combined)
    r.add("dimsum.acc", d.accuracy)
    return r
