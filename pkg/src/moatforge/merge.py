"""Terminal merge history: the laminar forest of parts of S^t, merge
times, terminal MST, drop values and drop certificates."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .instance import MetricInstance
from .rationals import fmt

ZERO = Fraction(0)


@dataclass(frozen=True)
class ForestSet:
    id: int
    members: frozenset[int]
    activation: Fraction
    deactivation: Fraction | None  # None stands for +infinity (the top set)
    parent: int | None
    children: tuple[int, ...]

    def active_at(self, t: Fraction) -> bool:
        return self.activation <= t and (self.deactivation is None or t < self.deactivation)


@dataclass(frozen=True)
class MergeEvent:
    time: Fraction
    children: tuple[int, ...]
    new: int


@dataclass(frozen=True)
class MergeForest:
    sets: tuple[ForestSet, ...]
    terminals: tuple[int, ...]  # leaf order
    t_max: Fraction
    events: tuple[MergeEvent, ...]
    mst_edges: tuple[tuple[int, int, Fraction], ...]

    @property
    def top(self) -> ForestSet:
        return next(s for s in self.sets if s.parent is None)

    def leaf(self, s: int) -> ForestSet:
        try:
            return self.sets[self.terminals.index(s)]
        except ValueError:
            raise KeyError(f"unknown terminal {s}") from None

    def rank(self, s: int) -> int:
        return self.terminals.index(s)

    def representative(self, S: ForestSet) -> int:
        """Position of the leaf-order-first member of ``S``."""
        return min(self.rank(s) for s in S.members)

    def chain(self, s: int) -> list[ForestSet]:
        """All forest sets containing ``s``, innermost first."""
        out = [self.leaf(s)]
        while out[-1].parent is not None:
            out.append(self.sets[out[-1].parent])
        return out

    def active(self, t: Fraction) -> list[ForestSet]:
        return [S for S in self.sets if S.active_at(t)]

    def find(self, members: Iterable[int]) -> ForestSet:
        key = frozenset(members)
        for S in self.sets:
            if S.members == key:
                return S
        raise KeyError("not a forest set")

    def smallest_containing(self, X: Iterable[int]) -> ForestSet:
        X = frozenset(X)
        if not X:
            raise ValueError("empty terminal set")
        for S in self.chain(next(iter(X))):
            if X <= S.members:
                return S
        raise AssertionError("top set contains every terminal")


def build_merge_forest(m: MetricInstance) -> MergeForest:
    """Kruskal on the terminal distance graph at threshold 2t.

    Pairs at equal distance merge in one multi-way event.
    """
    R = m.terminals
    k = len(R)
    sets: list[dict] = [
        {"members": frozenset([s]), "a": ZERO, "d": None, "parent": None, "children": ()}
        for s in R
    ]
    current = list(range(k))  # union-find root -> current forest set id
    parent = list(range(k))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def first_rank(sid: int) -> int:
        return min(R.index(x) for x in sets[sid]["members"])

    pairs = sorted((m.dist[R[i]][R[j]], i, j) for i in range(k) for j in range(i + 1, k))
    events: list[MergeEvent] = []
    mst: list[tuple[int, int, Fraction]] = []
    t_max = ZERO
    for cost, group in itertools.groupby(pairs, key=lambda p: p[0]):
        old_root = [find(i) for i in range(k)]
        old_set = {r: current[r] for r in set(old_root)}
        touched = False
        for _, i, j in group:
            a, b = find(i), find(j)
            if a != b:
                parent[a] = b
                mst.append((R[i], R[j], cost))
                touched = True
        if not touched:
            continue
        t = cost / 2
        merged: dict[int, set[int]] = {}
        for i in range(k):
            merged.setdefault(find(i), set()).add(old_set[old_root[i]])
        groups = [(root, sorted(kids, key=first_rank))
                  for root, kids in merged.items() if len(kids) > 1]
        groups.sort(key=lambda g: first_rank(g[1][0]))
        for root, kids in groups:
            nid = len(sets)
            members = frozenset().union(*(sets[c]["members"] for c in kids))
            sets.append({"members": members, "a": t, "d": None, "parent": None,
                         "children": tuple(kids)})
            for c in kids:
                sets[c]["d"] = t
                sets[c]["parent"] = nid
            current[root] = nid
            events.append(MergeEvent(t, tuple(kids), nid))
        for root, kids in merged.items():
            if len(kids) == 1:
                current[root] = next(iter(kids))
        t_max = t
    fsets = tuple(
        ForestSet(i, s["members"], s["a"], s["d"], s["parent"], s["children"])
        for i, s in enumerate(sets)
    )
    return MergeForest(fsets, tuple(R), t_max, tuple(events), tuple(mst))


def merge_time(f: MergeForest, s1: int, s2: int) -> Fraction:
    """First t at which s1 and s2 share a part of S^t."""
    if s1 not in f.terminals or s2 not in f.terminals:
        raise KeyError("unknown terminal")
    if s1 == s2:
        return ZERO
    return f.smallest_containing((s1, s2)).activation


def forest_integral(f: MergeForest) -> Fraction:
    """2 * integral over [0, t_max) of (|S^t| - 1)."""
    total = ZERO
    parts = len(f.terminals)
    prev = ZERO
    for t, group in itertools.groupby(f.events, key=lambda e: e.time):
        total += 2 * (parts - 1) * (t - prev)
        parts -= sum(len(e.children) - 1 for e in group)
        prev = t
    return total


def terminal_mst(m: MetricInstance, f: MergeForest | None = None
                 ) -> tuple[list[tuple[int, int]], Fraction]:
    """Terminal MST edges (in G[R]) and its cost."""
    f = f or build_merge_forest(m)
    cost = sum((c for _, _, c in f.mst_edges), ZERO)
    assert cost == forest_integral(f), "Kruskal and merge integral disagree"
    return [(u, v) for u, v, _ in f.mst_edges], cost


def _check_subset(f: MergeForest, X: Iterable[int]) -> frozenset[int]:
    X = frozenset(X)
    if not X:
        raise ValueError("terminal set is empty")
    if not X <= set(f.terminals):
        raise ValueError("terminal set is not a subset of R")
    return X


def drop_value(m: MetricInstance | None, f: MergeForest, X: Iterable[int]) -> Fraction:
    """mst(G[R]) - mst(G[R]/X) as 2 * integral of (|S^t| - |S_X^t|).

    |S^t| - |S_X^t| is the number of parts meeting X, minus one.
    """
    X = _check_subset(f, X)
    part_of = {s: f.leaf(s).id for s in f.terminals}
    total = ZERO
    prev = ZERO
    for t, group in itertools.groupby(f.events, key=lambda e: e.time):
        meeting = len({part_of[x] for x in X})
        total += 2 * (meeting - 1) * (t - prev)
        for e in group:
            for s in f.sets[e.new].members:
                part_of[s] = e.new
        prev = t
    return total


@dataclass(frozen=True)
class DropCertificate:
    sets: tuple[ForestSet, ...]
    target: frozenset[int]
    value: Fraction

    def separates_all(self) -> bool:
        return separates_all(self.sets, self.target)


def separates_all(family: Iterable[ForestSet], X: frozenset[int]) -> bool:
    """Every pair of X is split by some set of the family."""
    classes = {x: () for x in X}
    for S in family:
        for x in X:
            classes[x] = classes[x] + (x in S.members,)
    return len(set(classes.values())) == len(X)


def certificate_value(family: Iterable[ForestSet]) -> Fraction:
    return 2 * sum((S.deactivation for S in family), ZERO)


def max_drop_certificate(f: MergeForest, X: Iterable[int], avoid: int | None = None
                         ) -> DropCertificate:
    X = _check_subset(f, X)
    if avoid is not None and avoid not in X:
        raise ValueError("avoided terminal must belong to X")
    if len(X) == 1:
        return DropCertificate((), X, ZERO)
    if avoid is None:
        chosen: list[ForestSet] = []
        for e in f.events:
            meet = [f.sets[c] for c in e.children if f.sets[c].members & X]
            meet.sort(key=f.representative)
            chosen += meet[:-1]
        cert = DropCertificate(tuple(chosen), X, certificate_value(chosen))
        assert len(chosen) == len(X) - 1
        return cert
    return _best_avoiding(f, X, avoid)


def _best_avoiding(f: MergeForest, X: frozenset[int], avoid: int) -> DropCertificate:
    # only sets that split X can belong to a certificate of size |X|-1
    cands = [S for S in f.sets
             if S.deactivation is not None and avoid not in S.members
             and 0 < len(S.members & X) < len(X)]
    cands.sort(key=lambda S: (-S.deactivation, S.id))
    need = len(X) - 1
    best: tuple[Fraction, tuple[int, ...]] | None = None
    best_family: tuple[ForestSet, ...] = ()

    def classes_of(family) -> int:
        sig = {x: tuple(x in S.members for S in family) for x in X}
        return len(set(sig.values()))

    # depth-first over combinations; a laminar set must split a class to help
    def search(start: int, family: list[ForestSet], value: Fraction) -> None:
        nonlocal best, best_family
        if len(family) == need:
            if classes_of(family) == len(X):
                key = (value, tuple(-S.id for S in family))
                if best is None or key > best:
                    best = key
                    best_family = tuple(family)
            return
        remaining = need - len(family)
        if len(cands) - start < remaining:
            return
        bound = value + 2 * sum((S.deactivation for S in cands[start:start + remaining]), ZERO)
        if best is not None and bound < best[0]:
            return
        for i in range(start, len(cands)):
            S = cands[i]
            if classes_of(family + [S]) != classes_of(family) + 1:
                continue
            family.append(S)
            search(i + 1, family, value + 2 * S.deactivation)
            family.pop()

    search(0, [], ZERO)
    if best is None:
        raise ValueError("no certificate avoids the given terminal")
    fam = tuple(sorted(best_family, key=lambda S: S.id))
    return DropCertificate(fam, X, best[0])


def forest_to_json(f: MergeForest) -> list[dict]:
    return [
        {
            "id": S.id,
            "members": sorted(s + 1 for s in S.members),
            "a": fmt(S.activation),
            "d": "inf" if S.deactivation is None else fmt(S.deactivation),
            "parent": S.parent,
        }
        for S in f.sets
    ]
