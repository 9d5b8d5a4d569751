"""Random structurally valid sentences, for tests and benchmarks.

A flag sequence is drawn uniformly step by step among transitions that can
still reach a valid sentence end, decoded into units, and then labeled with
lexcats that respect unit arity plus matching supersenses and UPOS.
"""
from __future__ import annotations

import random
from functools import lru_cache
from typing import Optional

from .constraints import LexcatConstraintTable
from .corpus import (
    LexicalUnit,
    Lexcat,
    Sentence,
    SupersensePair,
    Token,
    WeakGroup,
    default_inventory,
)
from .tagcodec import END, FLAGS, START, LexTag, MweFlag, decode, is_valid_transition

_MWE_ONLY = frozenset({Lexcat.PP, Lexcat.V_VID, Lexcat.V_VPC_FULL, Lexcat.V_VPC_SEMI,
                       Lexcat.V_LVC_FULL, Lexcat.V_LVC_CAUSE, Lexcat.V_IAV})
SINGLE_LEXCATS = tuple(lc for lc in Lexcat if lc not in _MWE_ONLY)
MWE_LEXCATS = tuple(lc for lc in Lexcat if lc is not Lexcat.V)

_WORDS = ("the", "a", "dog", "ran", "in", "to", "of", "take", "off", "up", "and",
          "New", "York", "he", "she", "it", "was", "have", "be", "quickly", "!", ",",
          "3", "over", "look", "after", "kick", "bucket", "air", "conditioning")


@lru_cache(maxsize=None)
def _can_finish(flag, remaining: int) -> bool:
    """Whether `remaining` more tags can follow `flag` and still end validly."""
    if remaining == 0:
        return is_valid_transition(flag, END)
    return any(is_valid_transition(flag, f) and _can_finish(f, remaining - 1) for f in FLAGS)


def random_flags(n: int, rng: random.Random) -> list[MweFlag]:
    out = []
    prev = START
    for i in range(n):
        rest = n - i - 1
        opts = [f for f in FLAGS if is_valid_transition(prev, f) and _can_finish(f, rest)]
        prev = rng.choice(opts)
        out.append(prev)
    return out


@lru_cache(maxsize=None)
def _table() -> LexcatConstraintTable:
    return LexcatConstraintTable.default()


@lru_cache(maxsize=None)
def _upos_for() -> dict:
    table = _table()
    out: dict = {}
    for upos, lcs in table.by_upos.items():
        for lc in lcs:
            out.setdefault(lc, []).append(upos)
    return {k: sorted(v) for k, v in out.items()}


def random_supersense(lexcat: Lexcat, rng: random.Random, pair_rate=0.3, none_rate=0.1):
    inv = default_inventory()
    cls = lexcat.supersense_class
    if cls is None:
        return None
    labels = [lab for lab in inv.labels[cls] if lab[:2] in ("n.", "v.", "p.")]
    if cls == "snacs":
        r = rng.random()
        if r < none_rate:
            return None
        role = inv.get(rng.choice(labels))
        if r < none_rate + pair_rate:
            fxn = inv.get(rng.choice(labels))
            if fxn != role:
                return SupersensePair(role, fxn)
        return role
    return inv.get(rng.choice(labels))


def random_sentence(n: int, rng: random.Random, sent_id: str = "synth",
                    flag_seq: Optional[list] = None) -> Sentence:
    """A valid sentence of `n` tokens (n >= 1)."""
    flags = flag_seq if flag_seq is not None else random_flags(n, rng)
    placeholder = [LexTag(f) if f.is_continuation else LexTag(f, Lexcat.X) for f in flags]
    units0, weak0 = decode(placeholder)
    upos_of = _upos_for()
    relabel = {}
    for u in units0:
        lc = rng.choice(MWE_LEXCATS if u.is_mwe else SINGLE_LEXCATS)
        relabel[u] = LexicalUnit(u.token_indices, lc, random_supersense(lc, rng))
    units = [relabel[u] for u in units0]
    weak = [WeakGroup(tuple(relabel[m] for m in g.member_units)) for g in weak0]
    unit_of = {i: u for u in units for i in u.token_indices}
    tokens = []
    for i in range(1, n + 1):
        u = unit_of[i]
        form = rng.choice(_WORDS)
        if i == u.first:
            upos = rng.choice(upos_of.get(u.lexcat, ["X"]))
        else:
            upos = rng.choice(("ADP", "NOUN", "VERB", "ADV", "PART"))
        lemma = form.lower()
        if upos == "AUX":
            lemma = "be"  # licensed for both AUX and V
        if i == u.first and u.lexcat not in _table().allowed(upos, lemma):
            lemma += "_"  # dodge a lemma-specific rule
        tokens.append(Token(i, form, lemma, upos))
    text = " ".join(t.form for t in tokens)
    return Sentence(sent_id, text, tuple(tokens), tuple(units), tuple(weak),
                    comments=(f"# sent_id = {sent_id}", f"# text = {text}"))


def random_corpus(count: int, seed: int = 0, min_len: int = 1, max_len: int = 20,
                  prefix: str = "synth") -> list[Sentence]:
    rng = random.Random(seed)
    return [random_sentence(rng.randint(min_len, max_len), rng, f"{prefix}-{k:05d}")
            for k in range(count)]
