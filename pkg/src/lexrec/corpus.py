"""Sentence data model for STREUSLE-style lexical semantic annotation.

A :class:`Sentence` holds UD tokens plus two layers of grouping: strong
lexical units (single words or strong MWEs, each with a lexcat and optional
supersense) and weak groups of whole units. The CONLLULEX reader and writer
live here as well.
"""
from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Iterator, Optional, Sequence, Union

__all__ = [
    "ConllulexError",
    "Lexcat",
    "LexicalUnit",
    "Sentence",
    "Supersense",
    "SupersenseInventory",
    "SupersensePair",
    "Token",
    "Violation",
    "WeakGroup",
    "default_inventory",
    "parse_conllulex",
    "read_conllulex",
    "supersense_from_columns",
    "validate_sentence",
    "write_conllulex",
]

NUM_COLUMNS = 19
CONLLULEX_COLUMNS = (
    "ID", "FORM", "LEMMA", "UPOS", "XPOS", "FEATS", "HEAD", "DEPREL", "DEPS",
    "MISC", "SMWE", "LEXCAT", "LEXLEMMA", "SS", "SS2", "WMWE", "WCAT",
    "WLEMMA", "LEXTAG",
)


class Lexcat(str, enum.Enum):
    N = "N"
    PRON_POSS = "PRON.POSS"
    POSS = "POSS"
    P = "P"
    PP = "PP"
    INF_P = "INF.P"
    V = "V"
    V_VID = "V.VID"
    V_VPC_FULL = "V.VPC.full"
    V_VPC_SEMI = "V.VPC.semi"
    V_LVC_FULL = "V.LVC.full"
    V_LVC_CAUSE = "V.LVC.cause"
    V_IAV = "V.IAV"
    NUM = "NUM"
    PRON = "PRON"
    ADJ = "ADJ"
    ADV = "ADV"
    DET = "DET"
    INF = "INF"
    AUX = "AUX"
    DISC = "DISC"
    CCONJ = "CCONJ"
    SCONJ = "SCONJ"
    INTJ = "INTJ"
    SYM = "SYM"
    PUNCT = "PUNCT"
    X = "X"

    def __str__(self) -> str:
        return self.value

    @property
    def supersense_class(self) -> Optional[str]:
        """'noun', 'verb', 'snacs', or None for lexcats that take no supersense."""
        return _SS_CLASS.get(self)

    @property
    def is_verbal_mwe(self) -> bool:
        return self in _VERBAL_MWE

    @classmethod
    def parse(cls, text: str) -> "Lexcat":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown lexcat {text!r}") from None


_VERBAL_MWE = frozenset({
    Lexcat.V_VID, Lexcat.V_VPC_FULL, Lexcat.V_VPC_SEMI,
    Lexcat.V_LVC_FULL, Lexcat.V_LVC_CAUSE, Lexcat.V_IAV,
})
_SS_CLASS = {Lexcat.N: "noun", Lexcat.V: "verb"}
_SS_CLASS.update({lc: "verb" for lc in _VERBAL_MWE})
_SS_CLASS.update({lc: "snacs" for lc in (Lexcat.PRON_POSS, Lexcat.POSS, Lexcat.P,
                                         Lexcat.PP, Lexcat.INF_P)})
# p.* lexcats may be left without a supersense (e.g. "our" in the
# reviews-086839-0003 example is tagged o-PRON.POSS).
SUPERSENSE_OPTIONAL = frozenset({"snacs"})


@dataclass(frozen=True)
class Supersense:
    cls: str
    label: str

    def __str__(self) -> str:
        return self.label

    @property
    def is_scored(self) -> bool:
        """True for real n.*/v.*/p.* labels, False for special markers like `d or ??."""
        return self.label[:2] in ("n.", "v.", "p.")


@dataclass(frozen=True)
class SupersensePair:
    """Scene role and function of an adposition or possessive (SNACS construal)."""

    role: Supersense
    function: Supersense

    def __post_init__(self):
        if self.role.cls != "snacs" or self.function.cls != "snacs":
            raise ValueError("supersense pair members must be SNACS labels")

    def __str__(self) -> str:
        return f"{self.role.label}|{self.function.label}"

    @property
    def cls(self) -> str:
        return "snacs"

    @property
    def is_scored(self) -> bool:
        return self.role.is_scored


SupersenseLike = Union[Supersense, SupersensePair]


def role_of(ss: Optional[SupersenseLike]) -> Optional[Supersense]:
    if isinstance(ss, SupersensePair):
        return ss.role
    return ss


def function_of(ss: Optional[SupersenseLike]) -> Optional[Supersense]:
    if isinstance(ss, SupersensePair):
        return ss.function
    return ss


class SupersenseInventory:
    """Closed label sets for the noun, verb and SNACS classes."""

    CLASSES = ("noun", "verb", "snacs")

    def __init__(self, labels: dict[str, Iterable[str]]):
        self.labels = {c: tuple(labels.get(c, ())) for c in self.CLASSES}
        self._class_of = {}
        for c in self.CLASSES:
            for lab in self.labels[c]:
                self._class_of.setdefault(lab, c)

    @classmethod
    def from_text(cls, text: str) -> "SupersenseInventory":
        labels: dict[str, list[str]] = {}
        current = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            m = re.fullmatch(r"\[(\w+)\]", line)
            if m:
                current = m.group(1)
                if current not in cls.CLASSES:
                    raise ValueError(f"unknown supersense class section [{current}]")
                labels.setdefault(current, [])
                continue
            if current is None:
                raise ValueError(f"label {line!r} outside of a class section")
            labels[current].append(line)
        return cls(labels)

    @classmethod
    def from_file(cls, path) -> "SupersenseInventory":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read())

    def __contains__(self, label: str) -> bool:
        return label in self._class_of

    def class_of(self, label: str) -> Optional[str]:
        return self._class_of.get(label)

    def get(self, label: str) -> Supersense:
        c = self._class_of.get(label)
        if c is None:
            raise ValueError(f"unknown supersense {label!r}")
        return Supersense(c, label)


@functools.lru_cache(maxsize=None)
def default_inventory() -> SupersenseInventory:
    text = resources.files("lexrec").joinpath("resources/supersenses.txt").read_text("utf-8")
    return SupersenseInventory.from_text(text)


def supersense_from_columns(ss: str, ss2: str,
                            inventory: Optional[SupersenseInventory] = None) -> Optional[SupersenseLike]:
    """Build a supersense value from SS/SS2 cells ('_' means empty)."""
    inv = inventory or default_inventory()
    if ss in ("_", ""):
        if ss2 not in ("_", ""):
            raise ValueError("SS2 given without SS")
        return None
    first = inv.get(ss)
    if ss2 in ("_", "") or ss2 == ss:
        return first
    return SupersensePair(first, inv.get(ss2))


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: str = "_"
    head: str = "_"
    deprel: str = "_"
    deps: str = "_"
    misc: str = "_"

    def ud_columns(self) -> list[str]:
        return [str(self.index), self.form, self.lemma, self.upos, self.xpos,
                self.feats, self.head, self.deprel, self.deps, self.misc]


@dataclass(frozen=True)
class LexicalUnit:
    token_indices: tuple[int, ...]
    lexcat: Lexcat
    supersense: Optional[SupersenseLike] = None
    # presentation-only details kept for lossless round trips
    lexlemma: Optional[str] = field(default=None, compare=False)
    ss2_blank: bool = field(default=False, compare=False)
    number: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "token_indices", tuple(self.token_indices))
        if not isinstance(self.lexcat, Lexcat):
            object.__setattr__(self, "lexcat", Lexcat.parse(self.lexcat))

    @property
    def first(self) -> int:
        return self.token_indices[0]

    @property
    def is_mwe(self) -> bool:
        return len(self.token_indices) > 1

    @property
    def is_gappy(self) -> bool:
        idx = self.token_indices
        return idx[-1] - idx[0] + 1 != len(idx)


@dataclass(frozen=True)
class WeakGroup:
    member_units: tuple[LexicalUnit, ...]
    wcat: Optional[str] = field(default=None, compare=False)
    wlemma: Optional[str] = field(default=None, compare=False)
    number: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        units = tuple(sorted(self.member_units, key=lambda u: u.first))
        object.__setattr__(self, "member_units", units)

    @property
    def token_indices(self) -> tuple[int, ...]:
        return tuple(sorted(i for u in self.member_units for i in u.token_indices))


@dataclass(frozen=True)
class Sentence:
    sent_id: str
    text: str
    tokens: tuple[Token, ...]
    units: tuple[LexicalUnit, ...]
    weak_groups: tuple[WeakGroup, ...] = ()
    # raw comment lines in file order (sent_id/text included)
    comments: tuple[str, ...] = field(default=(), compare=False)
    # (number of regular tokens preceding the row, raw row) for multiword
    # token ranges and empty nodes, which carry no lexical annotation
    extra_rows: tuple[tuple[int, str], ...] = field(default=(), compare=False)
    # LEXTAG column as read from the file
    source_lextags: Optional[tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "units", tuple(sorted(self.units, key=lambda u: u.first)))
        object.__setattr__(self, "weak_groups", tuple(
            sorted(self.weak_groups, key=lambda g: g.member_units[0].first)))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def metadata(self) -> dict[str, str]:
        """Key/value view of `# key = value` comment lines."""
        out = {}
        for line in self.comments:
            m = _META_RE.match(line)
            if m:
                out[m.group(1)] = m.group(2)
        return out

    def unit_of(self) -> dict[int, LexicalUnit]:
        return {i: u for u in self.units for i in u.token_indices}

    def weak_group_of(self) -> dict[LexicalUnit, WeakGroup]:
        return {u: g for g in self.weak_groups for u in g.member_units}

    def replace_annotation(self, units: Sequence[LexicalUnit],
                           weak_groups: Sequence[WeakGroup] = ()) -> "Sentence":
        return Sentence(self.sent_id, self.text, self.tokens, tuple(units),
                        tuple(weak_groups), comments=self.comments,
                        extra_rows=self.extra_rows)


_META_RE = re.compile(r"#\s*([^=]+?)\s*=\s?(.*)$")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    rule: str
    indices: tuple[int, ...]
    message: str

    def __str__(self) -> str:
        idx = ",".join(map(str, self.indices))
        return f"{self.rule} [{idx}]: {self.message}"


def _gaps(indices: Sequence[int]) -> list[tuple[int, ...]]:
    """Maximal runs of missing positions strictly inside the span of `indices`."""
    out = []
    for a, b in zip(indices, indices[1:]):
        if b > a + 1:
            out.append(tuple(range(a + 1, b)))
    return out


def _unit_violations(u: LexicalUnit, n: int) -> list[Violation]:
    out = []
    idx = u.token_indices
    if not idx:
        return [Violation("unit-empty", (), "lexical unit has no tokens")]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        out.append(Violation("unit-order", idx, "token indices must be strictly increasing"))
    if idx[0] < 1 or idx[-1] > n:
        out.append(Violation("unit-range", idx, f"token index outside 1..{n}"))
    want = u.lexcat.supersense_class
    ss = u.supersense
    if want is None and ss is not None:
        out.append(Violation("lexcat-supersense", idx,
                             f"lexcat {u.lexcat} takes no supersense, got {ss}"))
    elif want is not None and ss is None and want not in SUPERSENSE_OPTIONAL:
        out.append(Violation("lexcat-supersense", idx,
                             f"lexcat {u.lexcat} requires a {want} supersense"))
    elif want is not None and ss is not None and ss.cls != want:
        out.append(Violation("lexcat-supersense", idx,
                             f"lexcat {u.lexcat} requires a {want} supersense, got {ss}"))
    elif isinstance(ss, SupersensePair) and want != "snacs":
        out.append(Violation("lexcat-supersense", idx, "only SNACS units take a role/function pair"))
    if len(idx) == 1 and (u.lexcat.is_verbal_mwe or u.lexcat is Lexcat.PP):
        out.append(Violation("lexcat-arity", idx, f"lexcat {u.lexcat} requires a multiword unit"))
    if len(idx) > 1 and u.lexcat is Lexcat.V:
        out.append(Violation("lexcat-arity", idx, "plain V applies to single-word units only"))
    return out


def validate_sentence(s: Sentence) -> list[Violation]:
    """Check every structural invariant; an empty list means the sentence is valid."""
    out: list[Violation] = []
    n = len(s.tokens)
    for pos, tok in enumerate(s.tokens, 1):
        if tok.index != pos:
            out.append(Violation("token-index", (pos,), f"token {pos} has index {tok.index}"))
        if not tok.form:
            out.append(Violation("form-empty", (pos,), "token form is empty"))

    for u in s.units:
        out.extend(_unit_violations(u, n))

    owner: dict[int, LexicalUnit] = {}
    for u in s.units:
        for i in u.token_indices:
            if i in owner:
                out.append(Violation("unit-disjoint", (i,),
                                     f"token {i} belongs to units {owner[i].token_indices} "
                                     f"and {u.token_indices}"))
            else:
                owner[i] = u
    missing = [i for i in range(1, n + 1) if i not in owner]
    if missing:
        out.append(Violation("coverage", tuple(missing), "tokens not covered by any lexical unit"))

    unit_set = set(s.units)
    seen_members: dict[LexicalUnit, WeakGroup] = {}
    for g in s.weak_groups:
        if len(g.member_units) < 2:
            out.append(Violation("weak-size", g.token_indices, "weak group needs at least two units"))
        for u in g.member_units:
            if u not in unit_set:
                out.append(Violation("weak-member", u.token_indices,
                                     "weak group member is not a lexical unit of the sentence"))
            if u in seen_members and seen_members[u] is not g:
                out.append(Violation("weak-disjoint", u.token_indices,
                                     "unit belongs to more than one weak group"))
            seen_members[u] = g
    if out:
        return out
    out.extend(_gap_violations(s))
    return out


def _groupings(s: Sentence) -> list[tuple[tuple[int, ...], tuple[LexicalUnit, ...]]]:
    """Top-level groupings: weak groups, plus every unit outside a weak group."""
    in_weak = s.weak_group_of()
    out = [(g.token_indices, g.member_units) for g in s.weak_groups]
    out.extend((u.token_indices, (u,)) for u in s.units if u not in in_weak)
    out.sort(key=lambda x: x[0][0])
    return out


def _gap_violations(s: Sentence) -> list[Violation]:
    out = []
    groupings = _groupings(s)
    group_of_token = {}
    for gi, (toks, _) in enumerate(groupings):
        for i in toks:
            group_of_token[i] = gi
    for gi, (toks, units) in enumerate(groupings):
        for u in units:
            for gap in _gaps(u.token_indices):
                own = [i for i in gap if group_of_token[i] == gi]
                if own:
                    out.append(Violation("gap-own-group", tuple(own),
                                         f"gap of unit {u.token_indices} holds tokens of its own "
                                         "weak group"))
        for gap in _gaps(toks):
            gap_set = set(gap)
            inner = sorted({group_of_token[i] for i in gap if group_of_token[i] != gi})
            for hi in inner:
                htoks, hunits = groupings[hi]
                if not set(htoks) <= gap_set:
                    out.append(Violation("gap-containment", htoks,
                                         f"expression {htoks} straddles the gap of {toks}"))
                elif _gaps(htoks) or any(v.is_gappy for v in hunits):
                    out.append(Violation("nested-gap", htoks,
                                         f"expression {htoks} inside the gap of {toks} has a gap"))
    return out


# ---------------------------------------------------------------------------
# CONLLULEX reading


class ConllulexError(ValueError):
    def __init__(self, message: str, sent_id: Optional[str] = None,
                 line: Optional[int] = None, rule: str = "format"):
        self.sent_id = sent_id
        self.line = line
        self.rule = rule
        where = []
        if sent_id is not None:
            where.append(f"sent_id={sent_id}")
        if line is not None:
            where.append(f"line={line}")
        prefix = f"[{' '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{rule}: {message}")


def _blank(cell: str) -> Optional[str]:
    return None if cell in ("_", "") else cell


def _mwe_pos(cell: str, what: str) -> Optional[tuple[int, int]]:
    if cell in ("_", ""):
        return None
    m = re.fullmatch(r"(\d+):(\d+)", cell)
    if not m:
        raise ValueError(f"malformed {what} cell {cell!r}")
    return int(m.group(1)), int(m.group(2))


def _iter_blocks(lines: Iterable[str]) -> Iterator[list[tuple[int, str]]]:
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if line.strip() == "":
            if block:
                yield block
                block = []
        else:
            block.append((lineno, line))
    if block:
        yield block


def parse_conllulex(lines: Iterable[str],
                    inventory: Optional[SupersenseInventory] = None,
                    validate: bool = True) -> list[Sentence]:
    """Parse CONLLULEX text (an iterable of lines) into sentences.

    Raises :class:`ConllulexError` naming the sentence, line and rule on
    malformed rows, unknown labels or structural violations.
    """
    inv = inventory or default_inventory()
    sentences = []
    for block in _iter_blocks(lines):
        sentences.append(_parse_block(block, inv, validate))
    return sentences


def read_conllulex(path, **kw) -> list[Sentence]:
    with open(path, encoding="utf-8") as f:
        return parse_conllulex(f, **kw)


def parse_conllulex_tokens(lines: Iterable[str]) -> list[Sentence]:
    """Read only the CoNLL-U part of each row (10 or more columns).

    Annotation columns, if any, are ignored; every token becomes a
    placeholder X unit. Used for tagging unannotated input.
    """
    out = []
    for block in _iter_blocks(lines):
        comments, tokens, extra = [], [], []
        sent_id = text = None
        for lineno, line in block:
            if line.startswith("#"):
                comments.append(line)
                m = _META_RE.match(line)
                if m and m.group(1) == "sent_id":
                    sent_id = m.group(2)
                elif m and m.group(1) == "text":
                    text = m.group(2)
                continue
            cols = line.split("\t")
            if len(cols) < 10:
                raise ConllulexError(f"expected at least 10 columns, found {len(cols)}",
                                     sent_id, lineno, "column-count")
            if "-" in cols[0] or "." in cols[0]:
                extra.append((len(tokens), line))
                continue
            if not cols[0].isdigit() or int(cols[0]) != len(tokens) + 1:
                raise ConllulexError(f"token ID {cols[0]!r} out of sequence",
                                     sent_id, lineno, "token-index")
            tokens.append(Token(len(tokens) + 1, *cols[1:10]))
        if not tokens:
            raise ConllulexError("sentence without tokens", sent_id, block[0][0], "token-index")
        units = tuple(LexicalUnit((t.index,), Lexcat.X) for t in tokens)
        if text is None:
            text = " ".join(t.form for t in tokens)
        out.append(Sentence(sent_id or "", text, tuple(tokens), units, (),
                            comments=tuple(comments), extra_rows=tuple(extra)))
    return out


def _parse_block(block, inv, validate) -> Sentence:
    comments = []
    rows = []
    extra = []
    sent_id = None
    text = None
    for lineno, line in block:
        if line.startswith("#"):
            comments.append(line)
            m = _META_RE.match(line)
            if m and m.group(1) == "sent_id":
                sent_id = m.group(2)
            elif m and m.group(1) == "text":
                text = m.group(2)
            continue
        cols = line.split("\t")
        if len(cols) != NUM_COLUMNS:
            raise ConllulexError(f"expected {NUM_COLUMNS} columns, found {len(cols)}",
                                 sent_id, lineno, "column-count")
        if "-" in cols[0] or "." in cols[0]:
            extra.append((len(rows), line))
            continue
        rows.append((lineno, cols))

    tokens = []
    for pos, (lineno, cols) in enumerate(rows, 1):
        if not cols[0].isdigit() or int(cols[0]) != pos:
            raise ConllulexError(f"token ID {cols[0]!r} out of sequence (expected {pos})",
                                 sent_id, lineno, "token-index")
        tokens.append(Token(pos, *cols[1:10]))

    strong: dict[int, dict[int, tuple[int, list[str]]]] = {}
    weak: dict[int, dict[int, tuple[int, list[str]]]] = {}
    singles = []
    for pos, (lineno, cols) in enumerate(rows, 1):
        try:
            sm = _mwe_pos(cols[10], "SMWE")
            wm = _mwe_pos(cols[15], "WMWE")
        except ValueError as e:
            raise ConllulexError(str(e), sent_id, lineno, "mwe-column") from None
        if sm is None:
            singles.append((pos, lineno, cols))
        else:
            strong.setdefault(sm[0], {})[sm[1]] = (pos, lineno, cols)
        if wm is not None:
            weak.setdefault(wm[0], {})[wm[1]] = (pos, lineno, cols)

    units = []
    for pos, lineno, cols in singles:
        units.append(_make_unit((pos,), cols, lineno, sent_id, inv, None))
    for num, members in strong.items():
        order = sorted(members)
        if order != list(range(1, len(order) + 1)) or len(order) < 2:
            lineno = members[order[0]][1]
            raise ConllulexError(f"strong MWE {num} has positions {order}",
                                 sent_id, lineno, "mwe-numbering")
        idx = tuple(members[j][0] for j in order)
        _, lineno, cols = members[1]
        for j in order[1:]:
            p, ln, c = members[j]
            if _blank(c[11]) is not None or _blank(c[13]) is not None:
                raise ConllulexError("non-initial MWE token carries lexcat/supersense",
                                     sent_id, ln, "mwe-continuation")
        units.append(_make_unit(idx, cols, lineno, sent_id, inv, num))

    unit_of = {i: u for u in units for i in u.token_indices}
    groups = []
    for num, members in weak.items():
        order = sorted(members)
        first_line = members[order[0]][1]
        if order != list(range(1, len(order) + 1)):
            raise ConllulexError(f"weak MWE {num} has positions {order}",
                                 sent_id, first_line, "mwe-numbering")
        toks = [members[j][0] for j in order]
        member_units = []
        for i in toks:
            u = unit_of[i]
            if u not in member_units:
                member_units.append(u)
        covered = sorted(i for u in member_units for i in u.token_indices)
        if covered != sorted(toks):
            raise ConllulexError(f"weak MWE {num} splits a strong unit",
                                 sent_id, first_line, "weak-member")
        _, _, fcols = members[1]
        groups.append(WeakGroup(tuple(member_units), wcat=_blank(fcols[16]),
                                wlemma=_blank(fcols[17]), number=num))

    lextags = tuple(cols[18] for _, cols in rows)
    if text is None:
        text = " ".join(t.form for t in tokens)
    s = Sentence(sent_id if sent_id is not None else "", text, tuple(tokens), tuple(units),
                 tuple(groups), comments=tuple(comments), extra_rows=tuple(extra),
                 source_lextags=lextags)
    if validate:
        violations = validate_sentence(s)
        if violations:
            v = violations[0]
            first = v.indices[0] if v.indices else 1
            lineno = rows[min(max(first, 1), len(rows)) - 1][0] if rows else block[0][0]
            raise ConllulexError(str(v), sent_id, lineno, v.rule)
    return s


def _make_unit(idx, cols, lineno, sent_id, inv, number) -> LexicalUnit:
    lexcat_cell = _blank(cols[11])
    if lexcat_cell is None:
        raise ConllulexError("lexical unit without a lexcat", sent_id, lineno, "missing-lexcat")
    try:
        lexcat = Lexcat.parse(lexcat_cell)
        ss = supersense_from_columns(cols[13], cols[14], inv)
    except ValueError as e:
        raise ConllulexError(str(e), sent_id, lineno, "unknown-label") from None
    return LexicalUnit(idx, lexcat, ss, lexlemma=_blank(cols[12]),
                       ss2_blank=_blank(cols[14]) is None, number=number)


# ---------------------------------------------------------------------------
# CONLLULEX writing


def _assign_numbers(s: Sentence) -> tuple[dict, dict]:
    """MWE numbers for strong MWEs and weak groups, keeping stored ones when complete."""
    mwes = [u for u in s.units if u.is_mwe]
    if all(u.number is not None for u in mwes) and all(g.number is not None for g in s.weak_groups):
        return {u: u.number for u in mwes}, {g: g.number for g in s.weak_groups}
    items = [(u.first, 0, u) for u in mwes] + [(g.member_units[0].first, 1, g) for g in s.weak_groups]
    items.sort(key=lambda x: (x[0], x[1]))
    strong_nums, weak_nums = {}, {}
    for n, (_, kind, obj) in enumerate(items, 1):
        (strong_nums if kind == 0 else weak_nums)[obj] = n
    return strong_nums, weak_nums


def _ss_cells(u: LexicalUnit) -> tuple[str, str]:
    ss = u.supersense
    if ss is None:
        return "_", "_"
    if isinstance(ss, SupersensePair):
        return ss.role.label, ss.function.label
    if ss.cls == "snacs" and not u.ss2_blank:
        return ss.label, ss.label
    return ss.label, "_"


def write_conllulex(sentences: Iterable[Sentence]) -> list[str]:
    """Serialize sentences to CONLLULEX lines (newline-terminated)."""
    from .tagcodec import encode, format_tag

    out: list[str] = []
    for s in sentences:
        seen_meta = set()
        for line in s.comments:
            m = _META_RE.match(line)
            key = m.group(1) if m else None
            if key == "sent_id":
                out.append(f"# sent_id = {s.sent_id}\n")
            elif key == "text":
                out.append(f"# text = {s.text}\n")
            else:
                out.append(line + "\n")
            if key:
                seen_meta.add(key)
        if "sent_id" not in seen_meta:
            out.append(f"# sent_id = {s.sent_id}\n")
        if "text" not in seen_meta:
            out.append(f"# text = {s.text}\n")

        tags = [format_tag(t) for t in encode(s)]
        strong_nums, weak_nums = _assign_numbers(s)
        lex = [["_"] * 9 for _ in s.tokens]
        for u in s.units:
            row = lex[u.first - 1]
            row[1] = str(u.lexcat)
            row[2] = u.lexlemma if u.lexlemma is not None else " ".join(
                s.tokens[i - 1].lemma for i in u.token_indices)
            row[3], row[4] = _ss_cells(u)
            if u.is_mwe:
                n = strong_nums[u]
                for j, i in enumerate(u.token_indices, 1):
                    lex[i - 1][0] = f"{n}:{j}"
        for g in s.weak_groups:
            n = weak_nums[g]
            toks = g.token_indices
            for j, i in enumerate(toks, 1):
                lex[i - 1][5] = f"{n}:{j}"
            first = lex[toks[0] - 1]
            first[6] = g.wcat if g.wcat is not None else "_"
            first[7] = g.wlemma if g.wlemma is not None else " ".join(
                s.tokens[i - 1].lemma for i in toks)
        for i, row in enumerate(lex):
            row[8] = tags[i]

        extra = {}
        for after, raw in s.extra_rows:
            extra.setdefault(after, []).append(raw)
        for i, tok in enumerate(s.tokens):
            for raw in extra.get(i, ()):
                out.append(raw + "\n")
            out.append("\t".join(tok.ud_columns() + lex[i]) + "\n")
        for raw in extra.get(len(s.tokens), ()):
            out.append(raw + "\n")
        out.append("\n")
    return out
