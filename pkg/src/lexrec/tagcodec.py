"""The ``BbIiOo_~`` token tag scheme.

Each token gets a positional flag; the first token of every lexical unit
also carries the unit's lexcat and supersense, e.g. ``B-V.VPC.full-v.Motion``
or ``O-P-p.Circumstance|p.Locus``. Continuation tags ``I_``/``i_`` are bare.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .corpus import (
    LexicalUnit,
    Lexcat,
    Sentence,
    SupersenseInventory,
    SupersenseLike,
    SupersensePair,
    WeakGroup,
    _groupings,
    default_inventory,
)

PART_SEP = "-"
PAIR_SEP = "|"


class MweFlag(str, enum.Enum):
    O = "O"
    o = "o"
    B = "B"
    b = "b"
    I_ = "I_"
    i_ = "i_"
    I_WEAK = "I~"
    i_WEAK = "i~"

    def __str__(self) -> str:
        return self.value

    @property
    def in_gap(self) -> bool:
        return self.value[0].islower()

    @property
    def is_continuation(self) -> bool:
        """Strong continuations carry no lexcat or supersense."""
        return self in (MweFlag.I_, MweFlag.i_)

    @property
    def upper(self) -> "MweFlag":
        return MweFlag(self.value[0].upper() + self.value[1:])

    @property
    def lower(self) -> "MweFlag":
        return MweFlag(self.value[0].lower() + self.value[1:])


FLAGS = tuple(MweFlag)
START = "<s>"
END = "</s>"

_SUCCESSORS = {
    START: {"O", "B"},
    "O": {"O", "B", END},
    "B": {"I_", "I~", "o", "b"},
    "I_": {"O", "B", "I_", "I~", "o", "b", END},
    "I~": {"O", "B", "I_", "I~", "o", "b", END},
    "o": {"o", "b", "I_", "I~"},
    "b": {"i_", "i~"},
    "i_": {"i_", "i~", "o", "b", "I_", "I~"},
    "i~": {"i_", "i~", "o", "b", "I_", "I~"},
}


def _key(x) -> str:
    if isinstance(x, MweFlag):
        return x.value
    if isinstance(x, LexTag):
        return x.flag.value
    return x


def is_valid_transition(prev, nxt) -> bool:
    """Flag bigram validity; use START/END (or None) for the sentence boundaries."""
    p = START if prev is None else _key(prev)
    n = END if nxt is None else _key(nxt)
    return n in _SUCCESSORS.get(p, ())


def first_invalid_position(flags: Sequence) -> Optional[int]:
    """0-based position of the first bad bigram (len(flags) for a bad ending), or None."""
    prev = START
    for i, f in enumerate(flags):
        if not is_valid_transition(prev, f):
            return i
        prev = f
    if not is_valid_transition(prev, END):
        return len(flags)
    return None


def is_valid_sequence(flags: Sequence) -> bool:
    return first_invalid_position(flags) is None


@dataclass(frozen=True)
class LexTag:
    flag: MweFlag
    lexcat: Optional[Lexcat] = None
    supersense: Optional[SupersenseLike] = None

    def __post_init__(self):
        if not isinstance(self.flag, MweFlag):
            object.__setattr__(self, "flag", MweFlag(self.flag))
        if self.lexcat is not None and not isinstance(self.lexcat, Lexcat):
            object.__setattr__(self, "lexcat", Lexcat.parse(self.lexcat))
        if self.flag.is_continuation:
            if self.lexcat is not None or self.supersense is not None:
                raise ValueError(f"{self.flag} tags carry no lexcat or supersense")
            return
        if self.lexcat is None:
            raise ValueError(f"{self.flag} tags require a lexcat")
        want = self.lexcat.supersense_class
        ss = self.supersense
        if ss is not None and ss.cls != want:
            raise ValueError(f"supersense {ss} does not fit lexcat {self.lexcat}")
        if ss is None and want in ("noun", "verb"):
            raise ValueError(f"lexcat {self.lexcat} requires a {want} supersense")

    def __str__(self) -> str:
        return format_tag(self)

    def without_lexcat(self) -> tuple:
        return (self.flag, self.supersense)

    def without_supersense(self) -> tuple:
        return (self.flag, self.lexcat)


def format_tag(t: LexTag) -> str:
    parts = [t.flag.value]
    if t.lexcat is not None:
        parts.append(t.lexcat.value)
    ss = t.supersense
    if ss is not None:
        if isinstance(ss, SupersensePair):
            if ss.role == ss.function:
                parts.append(ss.role.label)
            else:
                parts.append(f"{ss.role.label}{PAIR_SEP}{ss.function.label}")
        else:
            parts.append(ss.label)
    return PART_SEP.join(parts)


def parse_tag(text: str, inventory: Optional[SupersenseInventory] = None) -> LexTag:
    inv = inventory or default_inventory()
    parts = text.split(PART_SEP, 2)
    try:
        flag = MweFlag(parts[0])
    except ValueError:
        raise ValueError(f"unknown flag in tag {text!r}") from None
    lexcat = Lexcat.parse(parts[1]) if len(parts) > 1 else None
    ss = None
    if len(parts) > 2:
        role, sep, fxn = parts[2].partition(PAIR_SEP)
        ss = inv.get(role)
        if sep:
            f = inv.get(fxn)
            ss = ss if f == ss else SupersensePair(ss, f)
    try:
        return LexTag(flag, lexcat, ss)
    except ValueError as e:
        raise ValueError(f"bad tag {text!r}: {e}") from None


# ---------------------------------------------------------------------------
# encoding / decoding


class DecodeError(ValueError):
    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"position {position}: {message}")


def encode(s: Sentence) -> list[LexTag]:
    """One tag per token for a valid sentence."""
    n = len(s.tokens)
    groupings = _groupings(s)
    in_gap = [False] * (n + 1)
    for toks, _ in groupings:
        for a, b in zip(toks, toks[1:]):
            for i in range(a + 1, b):
                in_gap[i] = True
    flags: list[Optional[MweFlag]] = [None] * (n + 1)
    tags: list[Optional[LexTag]] = [None] * (n + 1)
    for toks, units in groupings:
        weak = len(units) > 1
        for ui, u in enumerate(units):
            for j, i in enumerate(u.token_indices):
                if j > 0:
                    f = MweFlag.I_
                elif weak:
                    f = MweFlag.B if ui == 0 else MweFlag.I_WEAK
                else:
                    f = MweFlag.B if u.is_mwe else MweFlag.O
                if in_gap[i]:
                    f = f.lower
                flags[i] = f
                if f.is_continuation:
                    tags[i] = LexTag(f)
                else:
                    tags[i] = LexTag(f, u.lexcat, u.supersense)
    if any(t is None for t in tags[1:]):
        raise AssertionError("sentence is not fully covered by lexical units")
    return tags[1:]  # type: ignore[return-value]


def decode(tags: Sequence[LexTag]) -> tuple[list[LexicalUnit], list[WeakGroup]]:
    """Rebuild units and weak groups from a valid tag sequence."""
    bad = first_invalid_position([t.flag for t in tags])
    if bad is not None:
        what = "sequence cannot end here" if bad == len(tags) else "invalid tag bigram"
        raise DecodeError(bad, what)

    # per nesting level: units started so far (as token lists) and group lists
    unit_toks: list[list[int]] = []
    unit_tag: list[LexTag] = []
    groups: list[list[int]] = []
    cur = {False: None, True: None}      # level -> index into unit_toks
    cur_group = {False: None, True: None}  # level -> index into groups

    for pos, t in enumerate(tags, 1):
        f = t.flag
        lvl = f.in_gap
        if not lvl:
            cur[True] = cur_group[True] = None
        up = f.upper
        if up is MweFlag.I_:
            if cur[lvl] is None:
                raise DecodeError(pos - 1, "continuation without an open unit")
            unit_toks[cur[lvl]].append(pos)
            continue
        unit_toks.append([pos])
        unit_tag.append(t)
        ui = len(unit_toks) - 1
        if up is MweFlag.O:
            cur_group[lvl] = None
        elif up is MweFlag.B:
            groups.append([ui])
            cur_group[lvl] = len(groups) - 1
        else:  # I~
            if cur_group[lvl] is None:
                raise DecodeError(pos - 1, "weak continuation without an open group")
            groups[cur_group[lvl]].append(ui)
        cur[lvl] = ui

    units = [LexicalUnit(tuple(toks), tg.lexcat, tg.supersense)
             for toks, tg in zip(unit_toks, unit_tag)]
    weak = []
    for g in groups:
        if len(g) > 1:
            weak.append(WeakGroup(tuple(units[i] for i in g)))
        elif len(unit_toks[g[0]]) < 2:
            raise DecodeError(unit_toks[g[0]][0] - 1, "B tag opens a single-token expression")
    return units, weak


def decode_sentence(template: Sentence, tags: Sequence[LexTag]) -> Sentence:
    """Replace the annotation of `template` by the one encoded in `tags`."""
    if len(tags) != len(template.tokens):
        raise ValueError(f"{len(tags)} tags for {len(template.tokens)} tokens")
    units, weak = decode(tags)
    return template.replace_annotation(units, weak)


# ---------------------------------------------------------------------------
# tag inventories


class TagSet:
    """Ordered distinct tags with index lookup; ordering is by formatted string."""

    def __init__(self, tags: Iterable[LexTag], counts: Optional[Counter] = None):
        uniq = sorted(set(tags), key=format_tag)
        self.tags: tuple[LexTag, ...] = tuple(uniq)
        self.index = {t: k for k, t in enumerate(self.tags)}
        self.counts = Counter(counts or {})
        self.flag_ids = [FLAGS.index(t.flag) for t in self.tags]

    @classmethod
    def from_sequences(cls, seqs: Iterable[Sequence[LexTag]]) -> "TagSet":
        c: Counter = Counter()
        for seq in seqs:
            c.update(seq)
        return cls(c.keys(), c)

    def __len__(self) -> int:
        return len(self.tags)

    def __iter__(self):
        return iter(self.tags)

    def __contains__(self, t) -> bool:
        return t in self.index

    def strings(self) -> list[str]:
        return [format_tag(t) for t in self.tags]

    def backoff(self, t: LexTag) -> Optional[int]:
        """Index of the closest known tag: same flag and lexcat, else same flag."""
        if t in self.index:
            return self.index[t]
        for same in (lambda u: u.flag == t.flag and u.lexcat == t.lexcat,
                     lambda u: u.flag == t.flag):
            cands = [k for k, u in enumerate(self.tags) if same(u)]
            if cands:
                return max(cands, key=lambda k: (self.counts.get(self.tags[k], 0), -k))
        return None

    def indices(self, seq: Sequence[LexTag], backoff: bool = True) -> list[int]:
        out = []
        for t in seq:
            k = self.backoff(t) if backoff else self.index.get(t)
            if k is None:
                raise KeyError(f"tag {format_tag(t)} not in tag set")
            out.append(k)
        return out
