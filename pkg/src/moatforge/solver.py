"""Scale-or-contract: grow the scaled rooted dual; when the root is captured,
contract a component whose drop beats its cost by a factor 1+gamma, and
repeat.  The result is a Steiner tree with a certified dual lower bound."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from .growth import (DEFAULT_DELTA, GrowthConfig, GrowthTrace, UnreachableError,
                     extract_s_tight_path, run_growth)
from .instance import Instance, MetricInstance, contract_terminals, metric_closure
from .merge import MergeForest, build_merge_forest, drop_value, terminal_mst
from .oracles.steiner import dreyfus_wagner, subset_steiner_costs
from .rationals import fmt

ZERO = Fraction(0)
DEFAULT_GAMMA = Fraction(774, 10000)
DEFAULT_H = 6
TRACE_TERMINAL_CAP = 12  # largest X a trace-guided candidate may have
FALLBACK_POOL = 12  # terminals considered by the exhaustive fallback

Edge = tuple[int, int]


def theorem_ratio(delta: Fraction, gamma: Fraction) -> Fraction:
    delta, gamma = Fraction(delta), Fraction(gamma)
    if delta < 0 or gamma < 0:
        raise ValueError("delta and gamma must be nonnegative")
    return 2 * (1 + gamma + delta) / ((1 + gamma) * (1 + delta))


@dataclass(frozen=True)
class Component:
    edges: tuple[Edge, ...]  # closure edges of the current instance
    terminals: frozenset[int]
    cost: Fraction
    source: str = "exhaustive"


def component_for(m: MetricInstance, X, source: str) -> Component:
    cost, edges = dreyfus_wagner(m, X)
    return Component(tuple(edges), frozenset(X), cost, source)


def _representative(m: MetricInstance, members, anchor: int) -> int:
    return min(members, key=lambda s: (m.dist[s][anchor], s))


def trace_candidates(m: MetricInstance, tr: GrowthTrace) -> Iterator[Component]:
    """Components along each captured S-tight path to the root: every prefix,
    plus one terminal from each set that loaded the prefix."""
    f = tr.forest
    seen: set[frozenset[int]] = set()
    for cap in tr.captures:
        S = f.sets[cap.set_id]
        try:
            P = extract_s_tight_path(tr, S, tr.root)
        except UnreachableError:
            continue
        contributors: dict[Edge, list[int]] = {}
        for (sid, arc) in tr.contributions:
            contributors.setdefault(arc, []).append(sid)
        R = set(m.terminals)
        X = {P.start}
        for i, (u, w) in enumerate(P.edges, start=1):
            for sid in sorted(contributors.get((u, w), ())):
                X.add(_representative(m, f.sets[sid].members, u))
            X.update(v for v in P.vertices[:i + 1] if v in R)
            for Y in (frozenset(X), frozenset(X | {tr.root})):
                if 2 <= len(Y) <= TRACE_TERMINAL_CAP and Y not in seen:
                    seen.add(Y)
                    yield component_for(m, Y, "trace")


def exhaustive_candidates(m: MetricInstance, h: int, pool=None) -> Iterator[Component]:
    terms = sorted(m.terminals if pool is None else pool)
    costs = subset_steiner_costs(m, terms, h)
    for X in sorted(costs, key=lambda x: (len(x), sorted(x))):
        yield Component((), X, costs[X], "exhaustive")


def candidate_components(m: MetricInstance, tr: GrowthTrace | None, h: int
                         ) -> Iterator[Component]:
    if h < 2:
        raise ValueError("h must be at least 2")
    seen: set[frozenset[int]] = set()
    if tr is not None:
        for K in trace_candidates(m, tr):
            seen.add(K.terminals)
            yield K
    for K in exhaustive_candidates(m, h):
        if K.terminals not in seen:
            seen.add(K.terminals)
            yield _with_edges(m, K)


def _with_edges(m: MetricInstance, K: Component) -> Component:
    if K.edges or len(K.terminals) < 2:
        return K
    cost, edges = dreyfus_wagner(m, K.terminals)
    assert cost == K.cost
    return Component(tuple(edges), K.terminals, cost, K.source)


def improvement_test(m: MetricInstance, f: MergeForest, K: Component, gamma: Fraction) -> bool:
    if len(K.terminals) < 2:
        return False
    return drop_value(m, f, K.terminals) >= (1 + Fraction(gamma)) * K.cost


def gain(m: MetricInstance, f: MergeForest, K: Component, gamma: Fraction) -> Fraction:
    return drop_value(m, f, K.terminals) - (1 + Fraction(gamma)) * K.cost


@dataclass(frozen=True)
class Contraction:
    terminals: frozenset[int]  # original terminal ids merged by this step
    current: frozenset[int]  # the same set in the then-current instance
    cost: Fraction
    drop: Fraction
    edges: tuple[Edge, ...]  # original-graph edges of the component
    source: str

    def to_json(self) -> dict:
        return {"X": sorted(v + 1 for v in self.terminals), "component_cost": fmt(self.cost),
                "drop": fmt(self.drop), "source": self.source}


@dataclass
class ContractionLog:
    entries: list[Contraction] = field(default_factory=list)
    mappings: list[tuple[int, ...]] = field(default_factory=list)


@dataclass(frozen=True)
class IterationSummary:
    terminals: int
    completed: bool
    horizon: Fraction
    captures: int

    def to_json(self) -> dict:
        return {"terminals": self.terminals, "completed": self.completed,
                "horizon": fmt(self.horizon), "captures": self.captures}


@dataclass
class GapReport:
    instance: str
    n: int
    m: int
    k: int
    delta: Fraction
    gamma: Fraction
    h: int
    mst: Fraction
    tree: list[Edge]
    tree_cost: Fraction
    dual_bound: Fraction
    ratio: Fraction
    rho: Fraction
    log: ContractionLog
    captures: int
    status: str
    iterations: list[IterationSummary]
    runtime_ms: int | None = None
    failed_trace: GrowthTrace | None = None

    @property
    def ok(self) -> bool:
        return self.status == "OK"

    def to_json(self, timing: bool = True) -> dict:
        out = {
            "instance": self.instance, "n": self.n, "m": self.m, "k": self.k,
            "delta": fmt(self.delta), "gamma": fmt(self.gamma), "h": self.h,
            "mst": fmt(self.mst), "tree_cost": fmt(self.tree_cost),
            "dual_bound": fmt(self.dual_bound), "ratio": fmt(self.ratio), "rho": fmt(self.rho),
            "contractions": [c.to_json() for c in self.log.entries],
            "captures": self.captures, "status": self.status,
            "tree": [[u + 1, v + 1] for u, v in self.tree],
            "iterations": [it.to_json() for it in self.iterations],
        }
        if timing:
            out["runtime_ms"] = self.runtime_ms
        return out


class _Tracker:
    """Follows vertices and edges of the current instance back to the original."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.members: list[frozenset[int]] = [frozenset([v]) for v in range(inst.vertex_count)]
        self.edge_origin: dict[Edge, Edge] = {(u, v): (u, v) for u, v, _ in inst.edges}

    def contract(self, X: frozenset[int]) -> tuple[int, ...]:
        old = self.inst
        new, mapping = contract_terminals(old, X)
        members: list[set[int]] = [set() for _ in range(new.vertex_count)]
        for v, img in enumerate(mapping):
            members[img] |= self.members[v]
        origin: dict[Edge, Edge] = {}
        for u, v, c in old.edges:
            a, b = mapping[u], mapping[v]
            if a == b:
                continue
            key = (min(a, b), max(a, b))
            if key not in origin and new.edge_cost(*key) == c:
                origin[key] = self.edge_origin[(u, v)]
        self.inst = new
        self.members = [frozenset(s) for s in members]
        self.edge_origin = origin
        return mapping

    def original_edges(self, m: MetricInstance, closure_edges) -> set[Edge]:
        out: set[Edge] = set()
        for u, v in closure_edges:
            for e in m.path_edges(u, v):
                out.add(self.edge_origin[e])
        return out


def assemble_tree(log: ContractionLog, final_mst: list[Edge], original: Instance) -> list[Edge]:
    """Union of component edges and the final MST, reduced to a tree on R."""
    union = set(final_mst)
    for c in log.entries:
        union.update(c.edges)
    cost = {(u, v): c for u, v, c in original.edges}
    for e in union:
        if e not in cost:
            raise ValueError(f"edge {e[0] + 1}-{e[1] + 1} is not in the original graph")
    parent = list(range(original.vertex_count))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for e in sorted(union, key=lambda e: (cost[e], e)):
        a, b = find(e[0]), find(e[1])
        if a != b:
            parent[a] = b
            tree.append(e)
    R = set(original.terminals)
    if len({find(s) for s in R}) > 1:
        raise ValueError("assembled edges do not connect the terminals")
    # keep only the part that holds the terminals, then strip Steiner leaves
    keep_root = find(original.root)
    tree = [e for e in tree if find(e[0]) == keep_root]
    deg: dict[int, int] = {}
    for u, v in tree:
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    changed = True
    while changed:
        changed = False
        for e in list(tree):
            for x in e:
                if x not in R and deg[x] == 1:
                    tree.remove(e)
                    deg[e[0]] -= 1
                    deg[e[1]] -= 1
                    changed = True
                    break
    return sorted(tree)


def tree_cost(inst: Instance, edges) -> Fraction:
    return sum((inst.edge_cost(u, v) for u, v in edges), ZERO)


def scale_or_contract(inst: Instance, cfg: GrowthConfig | None = None,
                      gamma: Fraction = DEFAULT_GAMMA, h: int = DEFAULT_H) -> GapReport:
    started = time.perf_counter()
    cfg = cfg or GrowthConfig()
    if cfg.root is not None and cfg.root != inst.root:
        inst = inst.with_root(cfg.root)
    cfg = GrowthConfig(cfg.delta, cfg.eps_prime, cfg.mode, None, True, cfg.epsilon,
                       cfg.segment_budget)
    gamma = Fraction(gamma)
    m0 = metric_closure(inst)
    mst0 = terminal_mst(m0)[1] if len(inst.terminals) > 1 else ZERO
    report = GapReport(inst.name or "instance", inst.vertex_count, inst.edge_count,
                       len(inst.terminals), cfg.delta, gamma, h, mst0, [], ZERO, ZERO,
                       Fraction(1), Fraction(1), ContractionLog(), 0, "OK", [])
    if len(inst.terminals) <= 1:
        report.runtime_ms = _ms(started)
        return report
    tracker = _Tracker(inst)
    completed = True
    while True:
        cur = tracker.inst
        m = metric_closure(cur)
        if len(cur.terminals) < 2:
            final_mst_edges: set[Edge] = set()
            mst_final = ZERO
            break
        f = build_merge_forest(m)
        tr = run_growth(m, f, cfg)
        report.iterations.append(IterationSummary(len(cur.terminals), tr.completed,
                                                  tr.horizon, len(tr.captures)))
        if tr.completed:
            edges, mst_final = terminal_mst(m, f)
            final_mst_edges = tracker.original_edges(m, edges)
            break
        report.captures += 1
        K = _pick(m, f, tr, gamma, h)
        if K is None:
            completed = False
            report.failed_trace = tr
            edges, mst_final = terminal_mst(m, f)
            final_mst_edges = tracker.original_edges(m, edges)
            break
        drop = drop_value(m, f, K.terminals)
        original_X = frozenset().union(*(tracker.members[x] for x in K.terminals)) & set(inst.terminals)
        report.log.entries.append(Contraction(original_X, K.terminals, K.cost, drop,
                                              tuple(sorted(tracker.original_edges(m, K.edges))),
                                              K.source))
        report.log.mappings.append(tracker.contract(K.terminals))
    report.tree = assemble_tree(report.log, sorted(final_mst_edges), inst)
    report.tree_cost = tree_cost(inst, report.tree)
    report.rho = mst_final / mst0
    if completed:
        report.dual_bound = max(mst0 / 2, (1 + cfg.delta) / 2 * mst_final)
    else:
        report.dual_bound = mst0 / 2
        report.status = "DIAGNOSTIC-FAIL"
    report.ratio = report.tree_cost / report.dual_bound
    report.runtime_ms = _ms(started)
    return report


def _pick(m: MetricInstance, f: MergeForest, tr: GrowthTrace, gamma: Fraction, h: int
          ) -> Component | None:
    """Improving component with the largest gain; trace-guided first."""
    best, best_gain = None, None
    for K in trace_candidates(m, tr):
        g = gain(m, f, K, gamma)
        if g >= 0 and (best_gain is None or g > best_gain):
            best, best_gain = K, g
    if best is not None:
        return best
    for K in exhaustive_candidates(m, h, _fallback_pool(m, tr)):
        g = gain(m, f, K, gamma)
        if g >= 0 and (best_gain is None or g > best_gain):
            best, best_gain = K, g
    return None if best is None else _with_edges(m, best)


def _fallback_pool(m: MetricInstance, tr: GrowthTrace) -> list[int]:
    """Terminals nearest to the captured reach, capped for the subset search."""
    R = list(m.terminals)
    if len(R) <= FALLBACK_POOL:
        return R
    near = set()
    for cap in tr.captures:
        near |= cap.reach
    return sorted(R, key=lambda s: (min(m.dist[s][v] for v in near), s))[:FALLBACK_POOL]


def _ms(started: float) -> int:
    return int((time.perf_counter() - started) * 1000)


__all__ = ["theorem_ratio", "Component", "candidate_components", "improvement_test",
           "scale_or_contract", "assemble_tree", "GapReport", "ContractionLog", "Contraction",
           "DEFAULT_GAMMA", "DEFAULT_H", "DEFAULT_DELTA", "trace_candidates",
           "exhaustive_candidates"]
