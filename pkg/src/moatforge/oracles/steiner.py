"""Dreyfus–Wagner exact Steiner trees on the metric closure."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Iterable

from ..instance import MetricInstance

DEFAULT_MAX_TERMINALS = 14


class TooManyTerminalsError(ValueError):
    pass


def dreyfus_wagner(m: MetricInstance, terminals: Iterable[int] | None = None,
                   max_terminals: int = DEFAULT_MAX_TERMINALS
                   ) -> tuple[Fraction, list[tuple[int, int]]]:
    """Optimum Steiner tree cost and its closure edges (u < v).

    Steiner points are restricted to the original vertices.
    """
    T = sorted(set(m.terminals if terminals is None else terminals))
    if len(T) > max_terminals:
        raise TooManyTerminalsError(
            f"{len(T)} terminals exceed the Dreyfus–Wagner bound of {max_terminals}")
    if len(T) <= 1:
        return Fraction(0), []
    d = m.dist
    n = m.n
    last, rest = T[-1], T[:-1]
    k = len(rest)
    full = (1 << k) - 1
    # best[mask][v]: cheapest tree on rest[mask] + v; join[mask][v]: where v attaches
    best: list[list[Fraction] | None] = [None] * (full + 1)
    join: list[list[int] | None] = [None] * (full + 1)
    split: list[list[int] | None] = [None] * (full + 1)
    for i, t in enumerate(rest):
        mask = 1 << i
        best[mask] = [d[t][v] for v in range(n)]
        join[mask] = [t] * n
    masks = sorted(range(1, full + 1), key=lambda x: (bin(x).count("1"), x))
    for mask in masks:
        if mask & (mask - 1) == 0:
            continue
        # merged[u]: cheapest way to have u as a branching point
        merged: list[Fraction | None] = [None] * n
        choice = [0] * n
        low = mask & -mask
        sub = (mask - 1) & mask
        while sub:
            if sub & low:  # each unordered split once
                other = mask ^ sub
                a, b = best[sub], best[other]
                for u in range(n):
                    c = a[u] + b[u]
                    if merged[u] is None or c < merged[u]:
                        merged[u] = c
                        choice[u] = sub
            sub = (sub - 1) & mask
        row: list[Fraction] = []
        jrow: list[int] = []
        for v in range(n):
            bu = min(range(n), key=lambda u: (merged[u] + d[u][v], u))
            row.append(merged[bu] + d[bu][v])
            jrow.append(bu)
        best[mask], join[mask], split[mask] = row, jrow, choice
    cost = best[full][last]
    edges: set[tuple[int, int]] = set()

    def walk(mask: int, v: int) -> None:
        u = join[mask][v]
        if u != v:
            edges.add((min(u, v), max(u, v)))
        if mask & (mask - 1) == 0:
            return
        A = split[mask][u]
        walk(A, u)
        walk(mask ^ A, u)

    walk(full, last)
    return cost, sorted(edges)


def expand_edges(m: MetricInstance, closure_edges: Iterable[tuple[int, int]]
                 ) -> list[tuple[int, int]]:
    """Replace closure edges by the base edges of their shortest paths."""
    out: set[tuple[int, int]] = set()
    for u, v in closure_edges:
        out.update(m.path_edges(u, v))
    return sorted(out)


def subset_steiner_costs(m: MetricInstance, terminals: Iterable[int], h: int
                         ) -> dict[frozenset[int], Fraction]:
    """Optimum Steiner tree cost for every subset of ``terminals`` with
    2 <= size <= h, from one bottom-up pass."""
    T = sorted(set(terminals))
    d = m.dist
    n = m.n
    best: dict[int, list[Fraction]] = {}
    for i, t in enumerate(T):
        best[1 << i] = [d[t][v] for v in range(n)]
    out: dict[frozenset[int], Fraction] = {}
    by_size = sorted((mask for size in range(2, h) for mask in _masks(len(T), size)),
                     key=lambda x: (bin(x).count("1"), x))
    for mask in by_size:
        merged: list[Fraction | None] = [None] * n
        low = mask & -mask
        sub = (mask - 1) & mask
        while sub:
            if sub & low:
                a, b = best[sub], best[mask ^ sub]
                for u in range(n):
                    c = a[u] + b[u]
                    if merged[u] is None or c < merged[u]:
                        merged[u] = c
            sub = (sub - 1) & mask
        best[mask] = [min(merged[u] + d[u][v] for u in range(n)) for v in range(n)]
    for mask, row in best.items():
        members = [T[i] for i in range(len(T)) if mask >> i & 1]
        # adding one more terminal x as the attachment point
        for i, x in enumerate(T):
            if mask >> i & 1 or x < max(members):
                continue
            out[frozenset(members + [x])] = row[x]
    return out


def _masks(k: int, size: int):
    for combo in combinations(range(k), size):
        yield sum(1 << i for i in combo)
