"""Brute-force references that never touch the merge forest."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterable

from ..duals import DualAssignment
from ..instance import Instance, MetricInstance, mst_cost

ZERO = Fraction(0)


def brute_drop(m: MetricInstance, X: Iterable[int]) -> Fraction:
    """mst(G[R]) - mst(G[R]/X) from two Prim runs."""
    X = frozenset(X)
    R = list(m.terminals)
    if not X <= set(R):
        raise ValueError("X must be a set of terminals")
    if len(X) <= 1:
        return ZERO
    d = m.dist
    full = mst_cost(R, lambda a, b: d[a][b])
    hub = min(X)
    rest = [s for s in R if s not in X]

    def w(a: int, b: int) -> Fraction:
        A = X if a == hub else (a,)
        B = X if b == hub else (b,)
        return min(d[x][y] for x in A for y in B)

    return full - mst_cost([hub] + rest, w)


def _cycle_order(inst: Instance) -> list[int]:
    adj = inst.adjacency()
    order = [inst.root]
    prev, cur = None, inst.root
    while True:
        nxt = min(v for v, _ in adj[cur] if v != prev) if prev is None else \
            next(v for v, _ in adj[cur] if v != prev)
        if nxt == inst.root:
            return order
        order.append(nxt)
        prev, cur = cur, nxt


def _random_intervals(lo: int, hi: int, rng: random.Random, out: list[tuple[int, int]]) -> None:
    """Random laminar family of sub-intervals of [lo, hi)."""
    if hi - lo <= 0:
        return
    if rng.random() < 0.7:
        out.append((lo, hi))
    if hi - lo == 1:
        return
    cuts = sorted(rng.sample(range(lo + 1, hi), rng.randint(0, min(2, hi - lo - 1))))
    bounds = [lo] + cuts + [hi]
    if len(bounds) == 2:
        # shrink from one side so the recursion makes progress
        if rng.random() < 0.5:
            bounds = [lo + 1, hi]
        else:
            bounds = [lo, hi - 1]
    for a, b in zip(bounds, bounds[1:]):
        _random_intervals(a, b, rng, out)


def _random_chains(path: list[int], terminals: set[int], rng: random.Random
                   ) -> list[tuple[int, int]]:
    """Nested intervals grown outward from terminals one vertex at a time,
    merging neighbours when they touch."""
    tops = [(i, i + 1) for i, v in enumerate(path) if v in terminals]
    out = list(tops)
    for _ in range(rng.randint(0, 3 * len(path))):
        if not tops:
            break
        i = rng.randrange(len(tops))
        a, b = tops[i]
        if rng.random() < 0.5:
            a = max(0, a - 1)
        else:
            b = min(len(path), b + 1)
        merged = [(x, y) for x, y in tops if (x, y) != tops[i] and x < b and a < y]
        for x, y in merged:
            a, b = min(a, x), max(b, y)
        tops = [t for j, t in enumerate(tops) if j != i and t not in merged]
        if (a, b) not in out:
            out.append((a, b))
        tops.append((a, b))
        tops.sort()
    return out


def random_laminar_dual(inst: Instance, seed: int) -> DualAssignment:
    """Feasible rooted dual on a cycle with laminar support.

    A random laminar family of arcs of the cycle avoiding the root is grown
    greedily, in random order, until some boundary edge is tight.
    """
    if len(inst.edges) != inst.vertex_count or any(len(a) != 2 for a in inst.adjacency()):
        raise ValueError("random laminar duals need a cycle instance")
    order = _cycle_order(inst)
    rng = random.Random(seed)
    path = order[1:]  # the cycle with the root removed, in order
    R = set(inst.terminals)
    spans: list[tuple[int, int]] = []
    if rng.random() < 0.5:
        _random_intervals(0, len(path), rng, spans)
    else:
        spans = _random_chains(path, R, rng)
    family = []
    for a, b in spans:
        U = frozenset(path[a:b])
        if U & R and U not in family:
            family.append(U)
    if rng.random() < 0.5:
        rng.shuffle(family)
    load: dict[tuple[int, int], Fraction] = {}
    cost = {}
    for u, v, c in inst.edges:
        cost[(u, v)] = cost[(v, u)] = c
    entries: dict[frozenset[int], Fraction] = {}
    for U in family:
        out = [(u, v) for (u, v) in cost if u in U and v not in U]
        room = min(cost[a] - load.get(a, ZERO) for a in out)
        if room <= 0:
            continue
        amount = room if rng.random() < 0.8 else room * Fraction(rng.randint(1, 9), 10)
        entries[U] = amount
        for a in out:
            load[a] = load.get(a, ZERO) + amount
    return DualAssignment("bcr", entries, inst.root)
