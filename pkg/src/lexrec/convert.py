"""Projection of lexical semantic annotations onto the PARSEME and DiMSUM
label spaces, and readers/writers for the .cupt and DiMSUM .tsv formats."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .corpus import Lexcat, Sentence, Token

# verbal MWE lexcat -> PARSEME category; edit to follow category changes
PARSEME_CATEGORIES = {
    Lexcat.V_VID: "VID",
    Lexcat.V_VPC_FULL: "VPC.full",
    Lexcat.V_VPC_SEMI: "VPC.semi",
    Lexcat.V_LVC_FULL: "LVC.full",
    Lexcat.V_LVC_CAUSE: "LVC.cause",
    Lexcat.V_IAV: "IAV",
}
# categories accepted when reading .cupt files; English 1.1 files also use MVC and LS.ICV
KNOWN_CUPT_CATEGORIES = frozenset(PARSEME_CATEGORIES.values()) | {"MVC", "LS.ICV"}

CUPT_COLUMNS = 11
DIMSUM_COLUMNS = 9
DIMSUM_FLAGS = ("O", "o", "B", "b", "I", "i")


class FormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _blocks(lines: Iterable[str]):
    block = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if line.strip():
            block.append((lineno, line))
        elif block:
            yield block
            block = []
    if block:
        yield block


# ---------------------------------------------------------------------------
# PARSEME


@dataclass(frozen=True)
class Vmwe:
    token_indices: tuple[int, ...]
    category: Optional[str]
    number: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class ParsemeSentence:
    sent_id: str
    tokens: tuple[Token, ...]
    vmwes: tuple[Vmwe, ...]
    comments: tuple[str, ...] = field(default=(), compare=False)
    extra_rows: tuple[tuple[int, str], ...] = field(default=(), compare=False)
    # the MWE column was "_" (blind input) on every token
    blind: bool = field(default=False, compare=False)

    def mwe_sets(self) -> list[frozenset]:
        return [frozenset(v.token_indices) for v in self.vmwes]


def to_parseme(s: Sentence) -> ParsemeSentence:
    """Keep the verbal MWEs only; their category is the lexcat without ``V.``."""
    vm = tuple(Vmwe(u.token_indices, PARSEME_CATEGORIES[u.lexcat])
               for u in s.units if u.is_mwe and u.lexcat in PARSEME_CATEGORIES)
    return ParsemeSentence(s.sent_id, s.tokens, vm, s.comments, s.extra_rows)


def parse_cupt(lines: Iterable[str]) -> list[ParsemeSentence]:
    out = []
    for block in _blocks(lines):
        comments = []
        tokens = []
        extra = []
        open_mwes: dict[int, list] = {}
        cats: dict[int, Optional[str]] = {}
        blind = True
        sent_id = ""
        for lineno, line in block:
            if line.startswith("#"):
                comments.append(line)
                key, _, val = line[1:].partition("=")
                if key.strip() in ("source_sent_id", "sent_id") and not sent_id:
                    sent_id = val.strip()
                continue
            cols = line.split("\t")
            if len(cols) != CUPT_COLUMNS:
                raise FormatError(f"expected {CUPT_COLUMNS} columns, found {len(cols)}", lineno)
            if not cols[0].isdigit():
                extra.append((len(tokens), line))
                continue
            idx = int(cols[0])
            if idx != len(tokens) + 1:
                raise FormatError(f"token index {idx} out of sequence", lineno)
            tokens.append(Token(idx, *cols[1:10]))
            code = cols[10]
            if code == "_":
                continue
            blind = False
            if code == "*":
                continue
            for part in code.split(";"):
                num, _, cat = part.partition(":")
                if not num.isdigit():
                    raise FormatError(f"bad MWE code {part!r}", lineno)
                k = int(num)
                if cat:
                    if k in cats and cats[k] is not None:
                        raise FormatError(f"MWE {k} has two categories", lineno)
                    if cat not in KNOWN_CUPT_CATEGORIES:
                        raise FormatError(f"unknown MWE category {cat!r}", lineno)
                    cats[k] = cat
                open_mwes.setdefault(k, []).append(idx)
        if not tokens:
            raise FormatError("sentence without tokens", block[0][0])
        vm = tuple(Vmwe(tuple(v), cats.get(k), k) for k, v in sorted(open_mwes.items()))
        out.append(ParsemeSentence(sent_id, tuple(tokens), vm, tuple(comments), tuple(extra),
                                   blind and not vm))
    return out


def write_cupt(sentences: Iterable[ParsemeSentence]) -> list[str]:
    out = []
    for s in sentences:
        out.extend(c + "\n" for c in s.comments)
        codes: dict[int, list[str]] = {t.index: [] for t in s.tokens}
        used = {v.number for v in s.vmwes if v.number is not None}
        nxt = 1
        for v in sorted(s.vmwes, key=lambda v: v.token_indices):
            k = v.number
            if k is None:
                while nxt in used:
                    nxt += 1
                k = nxt
                used.add(k)
            for j, i in enumerate(v.token_indices):
                codes[i].append(f"{k}:{v.category}" if j == 0 and v.category else str(k))
        extra = list(s.extra_rows)
        for t in s.tokens:
            while extra and extra[0][0] < t.index:
                out.append(extra.pop(0)[1] + "\n")
            if s.blind and not s.vmwes:
                mwe = "_"
            else:
                mwe = ";".join(sorted(codes[t.index], key=lambda c: int(c.partition(":")[0]))) or "*"
            out.append("\t".join(t.ud_columns() + [mwe]) + "\n")
        out.extend(r + "\n" for _, r in extra)
        out.append("\n")
    return out


# ---------------------------------------------------------------------------
# DiMSUM


@dataclass(frozen=True)
class DimsumUnit:
    token_indices: tuple[int, ...]
    supersense: Optional[str] = None

    @property
    def first(self) -> int:
        return self.token_indices[0]


@dataclass(frozen=True)
class DimsumSentence:
    sent_id: str
    tokens: tuple[Token, ...]
    units: tuple[DimsumUnit, ...]
    # strength column as read, one entry per token
    strength: Optional[tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(sorted(self.units, key=lambda u: u.first)))

    def mwes(self) -> list[tuple[int, ...]]:
        return [u.token_indices for u in self.units if len(u.token_indices) > 1]


def dimsum_label(ss) -> Optional[str]:
    """STREUSLE noun/verb label in DiMSUM spelling (lowercase), else None."""
    if ss is None or getattr(ss, "cls", None) not in ("noun", "verb"):
        return None
    return ss.label.lower()


def to_dimsum(s: Sentence) -> DimsumSentence:
    """Strong units with noun/verb supersenses; weak groups, lexcats and SNACS are dropped."""
    units = tuple(DimsumUnit(u.token_indices, dimsum_label(u.supersense)) for u in s.units)
    return DimsumSentence(s.sent_id, s.tokens, units)


def dimsum_tags(s: DimsumSentence) -> list[tuple[str, Optional[str]]]:
    """(flag, supersense) per token in the 6-flag scheme."""
    n = len(s.tokens)
    in_gap = [False] * (n + 1)
    for u in s.units:
        for a, b in zip(u.token_indices, u.token_indices[1:]):
            for i in range(a + 1, b):
                in_gap[i] = True
    out: list = [None] * (n + 1)
    for u in s.units:
        for j, i in enumerate(u.token_indices):
            if j:
                f = "I"
            else:
                f = "B" if len(u.token_indices) > 1 else "O"
            if in_gap[i]:
                f = f.lower()
            out[i] = (f, u.supersense if j == 0 else None)
    if any(x is None for x in out[1:]):
        raise ValueError(f"sentence {s.sent_id}: tokens not covered by units")
    return out[1:]


def parse_dimsum(lines: Iterable[str]) -> list[DimsumSentence]:
    """Columns: index, form, lemma, pos, flag, parent, strength, supersense, sent id.

    `parent` is the index of the preceding token of the same expression (0 if
    the token starts one).
    """
    out = []
    for block in _blocks(lines):
        tokens = []
        parents = []
        labels = []
        strength = []
        sent_id = None
        for lineno, line in block:
            cols = line.split("\t")
            if len(cols) != DIMSUM_COLUMNS:
                raise FormatError(f"expected {DIMSUM_COLUMNS} columns, found {len(cols)}", lineno)
            idx_s, form, lemma, pos, flag, parent, strg, ss, sid = cols
            if not idx_s.isdigit() or int(idx_s) != len(tokens) + 1:
                raise FormatError(f"token index {idx_s!r} out of sequence", lineno)
            if flag not in DIMSUM_FLAGS:
                raise FormatError(f"unknown MWE flag {flag!r}", lineno)
            if not parent.isdigit() or int(parent) >= int(idx_s):
                raise FormatError(f"bad parent {parent!r}", lineno)
            if (int(parent) > 0) != (flag in ("I", "i")):
                raise FormatError(f"flag {flag} disagrees with parent {parent}", lineno)
            if sent_id is None:
                sent_id = sid
            elif sid != sent_id:
                raise FormatError(f"sentence id changes within a sentence ({sid!r})", lineno)
            tokens.append(Token(int(idx_s), form, lemma, pos))
            parents.append(int(parent))
            labels.append(ss or None)
            strength.append(strg)
        owner = {}
        members: dict[int, list[int]] = {}
        for i, p in enumerate(parents, 1):
            root = owner[p] if p else i
            owner[i] = root
            members.setdefault(root, []).append(i)
        units = []
        for root, toks in members.items():
            for i in toks[1:]:
                if labels[i - 1]:
                    raise FormatError(f"supersense on a non-initial MWE token {i}", block[i - 1][0])
            units.append(DimsumUnit(tuple(toks), labels[root - 1]))
        s = DimsumSentence(sent_id or "", tuple(tokens), tuple(units), tuple(strength))
        got = [f for f, _ in dimsum_tags(s)]
        for i, (f, (_, line)) in enumerate(zip(got, block), 1):
            if line.split("\t")[4] != f:
                raise FormatError(f"flag {line.split(chr(9))[4]} inconsistent with structure ({f})",
                                  block[i - 1][0])
        out.append(s)
    return out


def write_dimsum(sentences: Iterable[DimsumSentence]) -> list[str]:
    out = []
    for s in sentences:
        tags = dimsum_tags(s)
        prev = {}
        for u in s.units:
            for a, b in zip(u.token_indices, u.token_indices[1:]):
                prev[b] = a
        for t, (flag, ss) in zip(s.tokens, tags):
            strg = s.strength[t.index - 1] if s.strength else ""
            out.append("\t".join([str(t.index), t.form, t.lemma, t.upos, flag,
                                  str(prev.get(t.index, 0)), strg, ss or "", s.sent_id]) + "\n")
        out.append("\n")
    return out


def dimsum_from_tokens(template: DimsumSentence, s: Sentence) -> DimsumSentence:
    """Project a predicted sentence onto a DiMSUM template's tokens and id."""
    d = to_dimsum(s)
    return DimsumSentence(template.sent_id, template.tokens, d.units, template.strength)


def parseme_from_tokens(template: ParsemeSentence, s: Sentence) -> ParsemeSentence:
    p = to_parseme(s)
    return ParsemeSentence(template.sent_id, template.tokens, p.vmwes, template.comments,
                           template.extra_rows)


def sentence_from_tokens(tokens: Sequence[Token], sent_id: str = "", comments=()) -> Sentence:
    """A placeholder annotation (every token an X unit) to carry tokens through tagging."""
    from .corpus import LexicalUnit

    units = tuple(LexicalUnit((t.index,), Lexcat.X) for t in tokens)
    text = " ".join(t.form for t in tokens)
    return Sentence(sent_id, text, tuple(tokens), units, (), comments=tuple(comments))
