"""Hard decoding constraints: tag transitions and UPOS/lemma-licensed lexcats."""
from __future__ import annotations

import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Lexcat, Sentence
from .tagcodec import END, FLAGS, START, MweFlag, TagSet, is_valid_transition

log = logging.getLogger(__name__)

ALL_LEXCATS = frozenset(Lexcat)

# flag-level transition table as boolean arrays over FLAGS order
FLAG_TRANS = np.array([[is_valid_transition(a, b) for b in FLAGS] for a in FLAGS])
FLAG_START = np.array([is_valid_transition(START, b) for b in FLAGS])
FLAG_END = np.array([is_valid_transition(a, END) for a in FLAGS])

_RULE_RE = re.compile(r"^(\S+)(?:\s+lemma=(\S.*?))?\s*->\s*(\S.*)$")

# flags whose lexcat describes a unit that is known to be a single word
SINGLE_WORD_FLAGS = frozenset({MweFlag.O, MweFlag.o})


class ConstraintTableError(ValueError):
    pass


class LexcatConstraintTable:
    """UPOS (optionally refined by lemma) -> allowed lexcats."""

    def __init__(self, by_upos: dict[str, frozenset], by_lemma: Optional[dict] = None,
                 missing: str = "all"):
        if missing not in ("all", "error"):
            raise ValueError("missing must be 'all' or 'error'")
        self.by_upos = {k: frozenset(v) for k, v in by_upos.items()}
        self.by_lemma = {k: frozenset(v) for k, v in (by_lemma or {}).items()}
        self.missing = missing
        for (upos, lemma), lcs in self.by_lemma.items():
            base = self.by_upos.get(upos)
            if not lcs:
                raise ConstraintTableError(f"empty rule for {upos} lemma={lemma}")
            if base is not None and not (lcs & base):
                raise ConstraintTableError(
                    f"rule for {upos} lemma={lemma} shares no lexcat with the {upos} rule")

    @classmethod
    def parse(cls, lines: Iterable[str], missing: str = "all") -> "LexcatConstraintTable":
        by_upos: dict = {}
        by_lemma: dict = {}
        for lineno, raw in enumerate(lines, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = _RULE_RE.match(line)
            if not m:
                raise ConstraintTableError(f"line {lineno}: cannot parse rule {raw.strip()!r}")
            upos, lemma, rhs = m.groups()
            try:
                lcs = frozenset(Lexcat.parse(x.strip()) for x in rhs.split(",") if x.strip())
            except ValueError as e:
                raise ConstraintTableError(f"line {lineno}: {e}") from None
            if lemma is None:
                by_upos[upos] = by_upos.get(upos, frozenset()) | lcs
            else:
                key = (upos, lemma)
                by_lemma[key] = by_lemma.get(key, frozenset()) | lcs
        return cls(by_upos, by_lemma, missing)

    @classmethod
    def from_file(cls, path, missing: str = "all") -> "LexcatConstraintTable":
        with open(path, encoding="utf-8") as f:
            return cls.parse(f, missing)

    @classmethod
    def default(cls, missing: str = "all") -> "LexcatConstraintTable":
        text = resources.files("lexrec").joinpath("resources/lexcat_constraints.txt").read_text("utf-8")
        return cls.parse(text.splitlines(), missing)

    @classmethod
    def from_corpus(cls, sentences: Iterable[Sentence], lemma_upos: Sequence[str] = ("AUX",),
                    single_word_only: bool = True) -> "LexcatConstraintTable":
        """Collect observed (UPOS, lemma) -> lexcat co-occurrences from gold data.

        For UPOS values in `lemma_upos`, lexcats seen with a single lemma only
        (e.g. V for AUX "be") become lemma-specific rules.
        """
        upos_lc: dict = defaultdict(set)
        lemma_lc: dict = defaultdict(set)
        for s in sentences:
            for u in s.units:
                if single_word_only and u.is_mwe:
                    continue
                tok = s.tokens[u.first - 1]
                upos_lc[tok.upos].add(u.lexcat)
                if tok.upos in lemma_upos:
                    lemma_lc[(tok.upos, tok.lemma)].add(u.lexcat)
        by_upos = {}
        by_lemma = {}
        for upos, lcs in upos_lc.items():
            lemmas = {k: v for k, v in lemma_lc.items() if k[0] == upos}
            if not lemmas:
                by_upos[upos] = frozenset(lcs)
                continue
            # lexcats licensed by several lemmas form the base rule; the rest
            # become lemma-specific exceptions
            spread = defaultdict(int)
            for v in lemmas.values():
                for lc in v:
                    spread[lc] += 1
            base = frozenset(lc for lc, n in spread.items() if n > 1) or frozenset(lcs)
            by_upos[upos] = base
            for key, v in lemmas.items():
                if not v <= base:
                    by_lemma[key] = frozenset(v) | (base if not (v & base) else frozenset())
        return cls(by_upos, by_lemma)

    def allowed(self, upos: str, lemma: str) -> frozenset:
        hit = self.by_lemma.get((upos, lemma))
        if hit is not None:
            return hit
        hit = self.by_upos.get(upos)
        if hit is not None:
            return hit
        if self.missing == "error":
            raise KeyError(f"UPOS {upos!r} has no constraint rule")
        return ALL_LEXCATS

    def to_lines(self) -> list[str]:
        def fmt(lcs):
            return ",".join(lc.value for lc in sorted(lcs, key=lambda x: list(Lexcat).index(x)))
        out = []
        for upos in sorted(self.by_upos):
            out.append(f"{upos} -> {fmt(self.by_upos[upos])}\n")
            for (u, lemma), lcs in sorted(self.by_lemma.items()):
                if u == upos:
                    out.append(f"{u} lemma={lemma} -> {fmt(lcs)}\n")
        for (u, lemma), lcs in sorted(self.by_lemma.items()):
            if u not in self.by_upos:
                out.append(f"{u} lemma={lemma} -> {fmt(lcs)}\n")
        return out


def allowed_lexcats(upos: str, lemma: str, table: LexcatConstraintTable) -> frozenset:
    return table.allowed(upos, lemma)


@dataclass
class LatticeMasks:
    allow: np.ndarray   # (T, K) bool
    trans: np.ndarray   # (K, K) bool
    start: np.ndarray   # (K,) bool
    end: np.ndarray     # (K,) bool
    relaxed: list[int] = field(default_factory=list)  # positions where the lexcat mask was dropped


def structural_masks(tagset: TagSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tag-level transition/start/end masks lifted from the flag table."""
    f = np.asarray(tagset.flag_ids, dtype=np.intp)
    return FLAG_TRANS[np.ix_(f, f)], FLAG_START[f], FLAG_END[f]


def build_masks(tokens: Sequence[tuple[str, str]], tagset: TagSet,
                table: Optional[LexcatConstraintTable], scope: str = "single") -> LatticeMasks:
    """Masks for one sentence given (upos, lemma) per token.

    `scope` selects which tags are lexcat-checked: ``"single"`` restricts only
    O/o tags (single-word units, whose lexcat follows from the word itself);
    ``"all"`` restricts every lexcat-bearing tag. Bare I_/i_ are never checked.
    """
    if not len(tagset):
        raise ValueError("empty tag set")
    if scope not in ("single", "all"):
        raise ValueError("scope must be 'single' or 'all'")
    trans, start, end = structural_masks(tagset)
    T, K = len(tokens), len(tagset)
    allow = np.ones((T, K), dtype=bool)
    relaxed = []
    if table is not None:
        checked = np.array([
            t.lexcat is not None and (scope == "all" or t.flag in SINGLE_WORD_FLAGS)
            for t in tagset.tags])
        lex = [t.lexcat for t in tagset.tags]
        cache: dict = {}
        for i, (upos, lemma) in enumerate(tokens):
            key = (upos, lemma)
            if key not in cache:
                ok = table.allowed(upos, lemma)
                cache[key] = np.array([(not c) or (lc in ok) for c, lc in zip(checked, lex)])
            row = cache[key]
            if not row.any():
                log.warning("no tag survives lexcat masking at position %d (%s/%s); relaxing",
                            i + 1, upos, lemma)
                relaxed.append(i)
            else:
                allow[i] = row
        _ensure_feasible(allow, trans, start, end, relaxed)
    return LatticeMasks(allow, trans, start, end, relaxed)


def _ensure_feasible(allow, trans, start, end, relaxed):
    """Relax lexcat masks position by position until some full path exists."""
    T = allow.shape[0]
    while T:
        reach = allow[0] & start
        dead = None
        for t in range(1, T):
            reach = trans[reach].any(axis=0) & allow[t]
            if not reach.any():
                dead = t
                break
        if dead is None and (reach & end).any():
            return
        t = T - 1 if dead is None else dead
        # drop the mask at the failing position, then at its left neighbours
        while t >= 0 and allow[t].all():
            t -= 1
        if t < 0:
            return
        log.warning("lexcat masks leave no feasible path; relaxing position %d", t + 1)
        allow[t] = True
        if t not in relaxed:
            relaxed.append(t)
