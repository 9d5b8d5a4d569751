"""Exact first-order decoding under lattice masks, plus an enumeration oracle."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .constraints import LatticeMasks
from .kernels import NEG

MAX_BRUTE_FORCE_PATHS = 10 ** 7


class InfeasibleLattice(ValueError):
    pass


@dataclass
class ScoreLattice:
    emissions: np.ndarray     # (T, K)
    transitions: np.ndarray   # (K, K)
    start: np.ndarray         # (K,)
    end: np.ndarray           # (K,)
    masks: Optional[LatticeMasks] = None

    def __post_init__(self):
        self.emissions = np.ascontiguousarray(self.emissions, dtype=np.float64)
        self.transitions = np.ascontiguousarray(self.transitions, dtype=np.float64)
        self.start = np.ascontiguousarray(self.start, dtype=np.float64)
        self.end = np.ascontiguousarray(self.end, dtype=np.float64)
        T, K = self.emissions.shape
        if self.transitions.shape != (K, K) or self.start.shape != (K,) or self.end.shape != (K,):
            raise ValueError("lattice dimensions disagree")
        if self.masks is not None and self.masks.allow.shape != (T, K):
            raise ValueError("mask dimensions disagree with emissions")

    @property
    def shape(self) -> tuple[int, int]:
        return self.emissions.shape

    def masked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Scores with forbidden entries replaced by the NEG sentinel."""
        em, tr, st, en = self.emissions, self.transitions, self.start, self.end
        m = self.masks
        if m is None:
            return em, tr, st, en
        return (np.where(m.allow, em, NEG), np.where(m.trans, tr, NEG),
                np.where(m.start, st, NEG), np.where(m.end, en, NEG))

    def feasible(self, path) -> bool:
        m = self.masks
        if m is None:
            return True
        if not (m.start[path[0]] and m.end[path[-1]]):
            return False
        if not all(m.allow[t, k] for t, k in enumerate(path)):
            return False
        return all(m.trans[a, b] for a, b in zip(path, path[1:]))


def path_score(lattice: ScoreLattice, path) -> float:
    """start + emission_0 + sum(transition + emission) + end, summed left to right."""
    em, tr = lattice.emissions, lattice.transitions
    s = lattice.start[path[0]] + em[0, path[0]]
    for t in range(1, len(path)):
        s = s + tr[path[t - 1], path[t]]
        s = s + em[t, path[t]]
    return float(s + lattice.end[path[-1]])


def viterbi(lattice: ScoreLattice) -> tuple[list[int], float]:
    """Highest-scoring mask-feasible path and its score."""
    T, K = lattice.shape
    if T == 0:
        return [], 0.0
    em, tr, st, en = lattice.masked()
    path = kernels.viterbi(em, tr, st, en)
    path = [int(k) for k in path]
    if not lattice.feasible(path):
        raise InfeasibleLattice("no feasible path through the lattice")
    return path, path_score(lattice, path)


def brute_force(lattice: ScoreLattice, limit: int = MAX_BRUTE_FORCE_PATHS) -> tuple[list[int], float]:
    """Enumerate every feasible path; ties go to the lexicographically smallest.

    Candidates are generated in lexicographic order from the per-position
    allowed tags and scored with the same left-to-right summation as
    :func:`path_score`.
    """
    T, K = lattice.shape
    if T == 0:
        return [], 0.0
    m = lattice.masks
    options = [np.flatnonzero(m.allow[t]) if m is not None else np.arange(K) for t in range(T)]
    total = 1
    for o in options:
        total *= len(o)
    if total > limit:
        raise ValueError(f"{total} candidate paths exceed the enumeration limit {limit}")
    if total == 0:
        raise InfeasibleLattice("a position admits no tag")
    em, tr, st, en = lattice.emissions, lattice.transitions, lattice.start, lattice.end
    grids = np.meshgrid(*options, indexing="ij")
    paths = np.stack([g.ravel() for g in grids], axis=1)
    ok = np.ones(len(paths), dtype=bool)
    if m is not None:
        ok &= m.start[paths[:, 0]] & m.end[paths[:, -1]]
        for t in range(1, T):
            ok &= m.trans[paths[:, t - 1], paths[:, t]]
    if not ok.any():
        raise InfeasibleLattice("no feasible path through the lattice")
    paths = paths[ok]
    s = st[paths[:, 0]] + em[0, paths[:, 0]]
    for t in range(1, T):
        s = s + tr[paths[:, t - 1], paths[:, t]]
        s = s + em[t, paths[:, t]]
    s = s + en[paths[:, -1]]
    best = int(np.argmax(s))
    return [int(k) for k in paths[best]], float(s[best])
