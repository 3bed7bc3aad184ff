"""Event-driven growth of the rooted (bidirected-cut) dual.

Each part S of S^t without the root grows z on U_S, the set of vertices
reachable from S along delta-tight directed edges.  An arc u->w is
delta-tight once its load reaches c/(1+delta); its load grows at the
number of sets standing at its frontier.

Two realizations share one engine:

* continuous: whole edges with a forward and a reverse tight prefix.  A set
  holding both endpoints stands at both frontiers until the prefixes meet
  (the overlap onset), after which it only holds the middle.  This is the
  exact limit of ever finer subdivisions.
* subdivide: the edges of an explicit subdivision, treated atomically.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .duals import DualAssignment
from .instance import (Instance, MetricInstance, SubdividedGraph, subdivide,
                       subdivision_epsilon)
from .merge import ForestSet, MergeForest, build_merge_forest
from .rationals import fmt

ZERO = Fraction(0)
DEFAULT_DELTA = Fraction(429, 50000)
DEFAULT_EPS_PRIME = Fraction(1, 10**7)
MODES = ("continuous", "subdivide")

Arc = tuple[int, int]


@dataclass(frozen=True)
class GrowthConfig:
    delta: Fraction = DEFAULT_DELTA
    eps_prime: Fraction = DEFAULT_EPS_PRIME
    mode: str = "continuous"
    root: int | None = None
    halt_on_capture: bool = True
    epsilon: Fraction | None = None  # overrides the eps' rule in subdivide mode
    segment_budget: int | None = None

    def __post_init__(self) -> None:
        if Fraction(self.delta) <= 0:
            raise ValueError("delta must be positive")
        if Fraction(self.eps_prime) <= 0:
            raise ValueError("eps_prime must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown growth mode {self.mode!r}")
        object.__setattr__(self, "delta", Fraction(self.delta))
        object.__setattr__(self, "eps_prime", Fraction(self.eps_prime))


@dataclass(frozen=True)
class GrowthEvent:
    time: Fraction
    kind: str  # edge-tight | overlap-onset | merge | capture | finished
    data: tuple

    def to_json(self) -> dict:
        out = {"time": fmt(self.time), "kind": self.kind}
        if self.kind in ("edge-tight", "overlap-onset"):
            out["edge"] = [self.data[0] + 1, self.data[1] + 1]
        elif self.kind == "merge":
            out["children"] = list(self.data[0])
            out["set"] = self.data[1]
        elif self.kind == "capture":
            out["set"] = self.data[0]
            out["vertex"] = self.data[1] + 1
        return out


@dataclass(frozen=True)
class GrowthInterval:
    start: Fraction
    end: Fraction
    vertices: frozenset[int]


@dataclass(frozen=True)
class Capture:
    time: Fraction
    set_id: int
    reach: frozenset[int]


@dataclass
class GrowthTrace:
    instance: MetricInstance
    forest: MergeForest
    config: GrowthConfig
    graph: Instance  # the graph growth ran on
    base_count: int
    root: int
    events: list[GrowthEvent]
    intervals: dict[int, list[GrowthInterval]]
    contributions: dict[tuple[int, Arc], list[tuple[Fraction, Fraction]]]
    tight_time: dict[Arc, Fraction]
    z: DualAssignment
    horizon: Fraction
    completed: bool
    captures: list[Capture]
    subdivision: SubdividedGraph | None = None
    certifying: bool = True
    _adj: list[list[tuple[int, Fraction]]] | None = field(default=None, repr=False)

    @property
    def captured(self) -> bool:
        return bool(self.captures)

    @property
    def delta(self) -> Fraction:
        return self.config.delta

    def arc_cost(self, u: int, w: int) -> Fraction:
        c = self.graph.edge_cost(u, w)
        if c is None:
            raise KeyError(f"no edge {u}-{w} in the growth graph")
        return c

    def threshold(self, u: int, w: int) -> Fraction:
        return self.arc_cost(u, w) / (1 + self.delta)

    def out_tight(self) -> list[list[tuple[int, Fraction]]]:
        if self._adj is None:
            adj: list[list[tuple[int, Fraction]]] = [[] for _ in range(self.graph.vertex_count)]
            for (u, w), t in sorted(self.tight_time.items()):
                if t <= self.horizon:
                    adj[u].append((w, t))
            self._adj = adj
        return self._adj

    def reach_at(self, set_id: int, t: Fraction) -> frozenset[int] | None:
        """U_S on the sub-interval containing t (None if S was not growing)."""
        for iv in self.intervals.get(set_id, ()):
            if iv.start <= t < iv.end:
                return iv.vertices
        return None

    def set_contributions(self, u: int, w: int) -> dict[int, Fraction]:
        """Accumulated load on arc u->w split by growing set."""
        out: dict[int, Fraction] = {}
        for (sid, arc), spans in self.contributions.items():
            if arc == (u, w):
                out[sid] = out.get(sid, ZERO) + sum((b - a for a, b in spans), ZERO)
        return dict(sorted(out.items()))

    def arc_load(self, u: int, w: int) -> Fraction:
        return sum(self.set_contributions(u, w).values(), ZERO)

    def to_json(self) -> dict:
        return {
            "mode": self.config.mode,
            "delta": fmt(self.delta),
            "root": self.root + 1,
            "completed": self.completed,
            "certifying": self.certifying,
            "horizon": fmt(self.horizon),
            "events": [e.to_json() for e in self.events],
            "growth": [
                {"set": sid, "terminals": sorted(v + 1 for v in self.forest.sets[sid].members),
                 "intervals": [{"start": fmt(iv.start), "end": fmt(iv.end),
                                "vertices": sorted(v + 1 for v in iv.vertices)} for iv in ivs]}
                for sid, ivs in sorted(self.intervals.items())
            ],
            "contributions": [
                {"set": sid, "edge": [u + 1, w + 1],
                 "spans": [[fmt(a), fmt(b)] for a, b in spans]}
                for (sid, (u, w)), spans in sorted(self.contributions.items())
            ],
            "tight": [{"edge": [u + 1, w + 1], "time": fmt(t)}
                      for (u, w), t in sorted(self.tight_time.items())],
            "z": self.z.to_json(),
        }


# event kinds in batch order
_TIGHT, _OVERLAP = 0, 1


class _Engine:
    def __init__(self, graph: Instance, base_count: int, forest: MergeForest, root: int,
                 delta: Fraction, frontier: bool, halt: bool):
        self.graph = graph
        self.nb = base_count
        self.forest = forest
        self.root = root
        self.frontier = frontier
        self.halt = halt
        n = graph.vertex_count
        arcs: list[Arc] = []
        self.thr: list[Fraction] = []
        for u, w, c in graph.edges:
            arcs += [(u, w), (w, u)]
            self.thr.append(c / (1 + delta))
        self.arcs = arcs
        self.out = [[] for _ in range(n)]
        self.inc = [[] for _ in range(n)]
        for a, (u, w) in enumerate(arcs):
            self.out[u].append(a)
            self.inc[w].append(a)
        m = len(arcs)
        self.base = [ZERO] * m
        self.rate = [0] * m
        self.t_upd = [ZERO] * m
        self.tight_at: list[Fraction | None] = [None] * m
        self.version = [0] * m
        self.edge_version = [0] * (m // 2)
        self.contrib: list[dict[int, Fraction]] = [dict() for _ in range(m)]
        self.mem: list[set[int]] = [set() for _ in range(n)]
        self.reach: dict[int, set[int]] = {}
        self.growing: set[int] = set()
        self.since: dict[int, Fraction] = {}
        self.heap: list = []
        self.seq = itertools.count()
        # outputs
        self.events: list[GrowthEvent] = []
        self.intervals: dict[int, list[GrowthInterval]] = {}
        self.contributions: dict[tuple[int, Arc], list[tuple[Fraction, Fraction]]] = {}
        self.z: dict[frozenset[int], Fraction] = {}
        self.captures: list[Capture] = []

    # loads ---------------------------------------------------------------
    def load(self, a: int, t: Fraction) -> Fraction:
        return self.base[a] + self.rate[a] * (t - self.t_upd[a])

    def overlapping(self, e: int, t: Fraction) -> bool:
        return self.load(2 * e, t) + self.load(2 * e + 1, t) >= self.thr[e]

    def contributors(self, a: int, t: Fraction) -> set[int]:
        u, w = self.arcs[a]
        if self.tight_at[a] is not None:
            return set()
        mu, mw = self.mem[u], self.mem[w]
        if self.frontier and mu & mw and not self.overlapping(a // 2, t):
            return set(mu)
        return mu - mw

    def refresh(self, arcs: Iterable[int], t: Fraction) -> None:
        arcs = sorted({b for a in arcs for b in (a, a ^ 1)})
        for a in arcs:
            self.base[a] = self.load(a, t)
            self.t_upd[a] = t
        for a in arcs:
            new = self.contributors(a, t)
            cur = self.contrib[a]
            for sid in sorted(set(cur) - new):
                self._close_contrib(sid, a, t)
            for sid in sorted(new - set(cur)):
                cur[sid] = t
            self.rate[a] = len(new)
            self.version[a] += 1
            if self.rate[a] and self.tight_at[a] is None:
                when = t + (self.thr[a // 2] - self.base[a]) / self.rate[a]
                heapq.heappush(self.heap, (when, _TIGHT, a, self.version[a], next(self.seq)))
        if not self.frontier:
            return
        for e in sorted({a // 2 for a in arcs}):
            self.edge_version[e] += 1
            u, w = self.arcs[2 * e]
            if not self.mem[u] & self.mem[w] or self.overlapping(e, t):
                continue
            r = self.rate[2 * e] + self.rate[2 * e + 1]
            if r:
                gap = self.thr[e] - self.base[2 * e] - self.base[2 * e + 1]
                heapq.heappush(self.heap, (t + gap / r, _OVERLAP, e, self.edge_version[e],
                                           next(self.seq)))

    def _close_contrib(self, sid: int, a: int, t: Fraction) -> None:
        start = self.contrib[a].pop(sid)
        if t > start:
            self.contributions.setdefault((sid, self.arcs[a]), []).append((start, t))

    # growing sets --------------------------------------------------------
    def _collapse(self, U: Iterable[int]) -> frozenset[int]:
        return frozenset(v for v in U if v < self.nb)

    def _close_interval(self, sid: int, t: Fraction) -> None:
        start = self.since[sid]
        if t <= start:
            return
        U = self._collapse(self.reach[sid])
        ivs = self.intervals.setdefault(sid, [])
        if ivs and ivs[-1].vertices == U and ivs[-1].end == start:
            ivs[-1] = GrowthInterval(ivs[-1].start, t, U)
        else:
            ivs.append(GrowthInterval(start, t, U))
        self.z[U] = self.z.get(U, ZERO) + (t - start)
        self.since[sid] = t

    def start(self, sid: int, U: set[int], t: Fraction) -> set[int]:
        self.reach[sid] = set(U)
        self.growing.add(sid)
        self.since[sid] = t
        for v in U:
            self.mem[v].add(sid)
        return set(U)

    def stop(self, sid: int, t: Fraction) -> set[int]:
        self._close_interval(sid, t)
        self.growing.discard(sid)
        for v in self.reach[sid]:
            self.mem[v].discard(sid)
        return set(self.reach[sid])

    def close_reach(self, sids: Iterable[int], t: Fraction) -> set[int]:
        """Extend each U along tight arcs; returns the vertices added."""
        touched: set[int] = set()
        for sid in sorted(sids):
            if sid not in self.growing:
                continue
            U = self.reach[sid]
            seen = set(U)
            stack = sorted(U)
            added = []
            while stack:
                x = stack.pop()
                for a in self.out[x]:
                    y = self.arcs[a][1]
                    if self.tight_at[a] is not None and y not in seen:
                        seen.add(y)
                        added.append(y)
                        stack.append(y)
            if added:
                self._close_interval(sid, t)  # the old U grew until now
                U.update(added)
                for y in added:
                    self.mem[y].add(sid)
                touched.update(added)
        return touched

    @staticmethod
    def _around(vertices: Iterable[int], out, inc) -> set[int]:
        arcs: set[int] = set()
        for v in vertices:
            for a in out[v]:
                arcs.add(a)
                arcs.add(a ^ 1)
            for a in inc[v]:
                arcs.add(a)
                arcs.add(a ^ 1)
        return arcs

    # main loop -----------------------------------------------------------
    def run(self) -> tuple[Fraction, bool]:
        f = self.forest
        merges = sorted({e.time for e in f.events})
        by_time = {t: [e for e in f.events if e.time == t] for t in merges}
        t_max = f.t_max
        touched: set[int] = set()
        for S in f.sets:
            if not S.children and self.root not in S.members:
                touched |= self.start(S.id, set(S.members), ZERO)
        touched |= self.close_reach(list(self.growing), ZERO)
        self.refresh(self._around(touched, self.out, self.inc), ZERO)
        if self._capture_check(ZERO):
            return ZERO, False
        mi = 0
        while True:
            nxt_merge = merges[mi] if mi < len(merges) else None
            while self.heap and not self._valid(self.heap[0]):
                heapq.heappop(self.heap)
            t = self.heap[0][0] if self.heap else None
            if nxt_merge is not None and (t is None or nxt_merge <= t):
                t = nxt_merge
            if t is None or t > t_max:
                t = t_max
            new_tight, overlaps = [], []
            while self.heap and self.heap[0][0] == t:
                item = heapq.heappop(self.heap)
                if not self._valid(item):
                    continue
                if item[1] == _TIGHT:
                    new_tight.append(item[2])
                else:
                    overlaps.append(item[2])
            affected: set[int] = set()
            for a in sorted(set(new_tight)):
                assert self.load(a, t) == self.thr[a // 2]
                self.tight_at[a] = t
                self.events.append(GrowthEvent(t, "edge-tight", self.arcs[a]))
                affected.update((a, a ^ 1))
            for e in sorted(set(overlaps)):
                assert self.overlapping(e, t)
                self.events.append(GrowthEvent(t, "overlap-onset", self.arcs[2 * e]))
                affected.update((2 * e, 2 * e + 1))
            starts: list[int] = []
            if nxt_merge == t:
                mi += 1
                vs: set[int] = set()
                for ev in by_time[t]:
                    kids_U: set[int] = set()
                    for c in ev.children:
                        if c in self.growing:
                            vs |= self.stop(c, t)
                        if c in self.reach:
                            kids_U |= self.reach[c]
                    self.events.append(GrowthEvent(t, "merge", (ev.children, ev.new)))
                    S = f.sets[ev.new]
                    if self.root not in S.members and t < t_max:
                        vs |= self.start(S.id, kids_U | set(S.members), t)
                        starts.append(S.id)
                affected |= self._around(vs, self.out, self.inc)
            tails = {self.arcs[a][0] for a in new_tight}
            grow_ids = {sid for sid in self.growing if self.reach[sid] & tails} | set(starts)
            added = self.close_reach(grow_ids, t)
            affected |= self._around(added, self.out, self.inc)
            if t >= t_max:
                for sid in sorted(self.growing):
                    self.stop(sid, t)
                self.events.append(GrowthEvent(t, "finished", ()))
                return t, True
            captured = self._capture_check(t)
            if captured and self.halt:
                for sid in sorted(self.growing):
                    self.stop(sid, t)
                for a in range(len(self.arcs)):
                    for sid in sorted(self.contrib[a]):
                        self._close_contrib(sid, a, t)
                return t, False
            for sid in captured:
                affected |= self._around(self.stop(sid, t), self.out, self.inc)
            if affected:
                self.refresh(affected, t)

    def _valid(self, item) -> bool:
        _, kind, key, ver, _ = item
        if kind == _TIGHT:
            return ver == self.version[key] and self.tight_at[key] is None
        return ver == self.edge_version[key]

    def _capture_check(self, t: Fraction) -> list[int]:
        hit = [sid for sid in sorted(self.growing) if self.root in self.reach[sid]]
        for sid in hit:
            self.captures.append(Capture(t, sid, self._collapse(self.reach[sid])))
            self.events.append(GrowthEvent(t, "capture", (sid, self.root)))
        return hit

    def finish_contributions(self, t: Fraction) -> None:
        for a in range(len(self.arcs)):
            for sid in sorted(self.contrib[a]):
                self._close_contrib(sid, a, t)


def run_growth(m: MetricInstance, f: MergeForest | None = None,
               cfg: GrowthConfig | None = None) -> GrowthTrace:
    cfg = cfg or GrowthConfig()
    if len(m.terminals) < 2:
        raise ValueError("growth needs at least two terminals")
    root = m.root if cfg.root is None else cfg.root
    if root not in m.terminals:
        raise ValueError("root must be a terminal")
    f = f or build_merge_forest(m)
    base_graph = m.growth_instance()
    sub = None
    if cfg.mode == "subdivide":
        eps = cfg.epsilon if cfg.epsilon is not None else subdivision_epsilon(base_graph, cfg.eps_prime, m)
        sub = subdivide(base_graph, cfg.eps_prime, epsilon=eps, budget=cfg.segment_budget)
        graph = sub.graph
    else:
        graph = base_graph
    eng = _Engine(graph, m.n, f, root, cfg.delta, frontier=cfg.mode == "continuous",
                  halt=cfg.halt_on_capture)
    horizon, completed = eng.run()
    eng.finish_contributions(horizon)
    tight = {eng.arcs[a]: t for a, t in enumerate(eng.tight_at) if t is not None}
    z = DualAssignment("bcr", eng.z, root)
    return GrowthTrace(
        instance=m, forest=f, config=cfg, graph=graph, base_count=m.n, root=root,
        events=eng.events, intervals=eng.intervals, contributions=eng.contributions,
        tight_time=dict(sorted(tight.items())), z=z, horizon=horizon, completed=completed,
        captures=eng.captures, subdivision=sub, certifying=not eng.captures,
    )


@dataclass(frozen=True)
class DualValue:
    value: Fraction
    scaled: Fraction
    partial: bool


def dual_value(tr: GrowthTrace) -> DualValue:
    v = tr.z.value
    return DualValue(v, (1 + tr.delta) * v, not tr.completed or not tr.certifying)


# reach times and S-tight paths -------------------------------------------

def _minimax(tr: GrowthTrace, sources: Iterable[int], at: Fraction | None = None
             ) -> tuple[dict[int, Fraction], dict[int, int]]:
    """Bottleneck Dijkstra over tight-time labels; ``at`` limits the arcs
    to those tight by that time."""
    adj = tr.out_tight()
    best: dict[int, Fraction] = {}
    pred: dict[int, int] = {}
    heap = [(ZERO, s, -1) for s in sorted(set(sources))]
    heapq.heapify(heap)
    while heap:
        t, v, p = heapq.heappop(heap)
        if v in best:
            continue
        best[v] = t
        if p >= 0:
            pred[v] = p
        for w, tw in adj[v]:
            if w not in best and (at is None or tw <= at):
                heapq.heappush(heap, (max(t, tw), w, v))
    return best, pred


def _members(S: ForestSet | Iterable[int]) -> frozenset[int]:
    return S.members if isinstance(S, ForestSet) else frozenset(S)


def reach_time(tr: GrowthTrace, S: ForestSet | Iterable[int], v: int,
               at: Fraction | None = None) -> Fraction | None:
    """t^{Sv}: the first time v is reachable from S along tight arcs."""
    members = _members(S)
    if v in members:
        return ZERO
    return _minimax(tr, members, at)[0].get(v)


def reach_times(tr: GrowthTrace, S: ForestSet | Iterable[int], at: Fraction | None = None
                ) -> dict[int, Fraction]:
    return _minimax(tr, _members(S), at)[0]


@dataclass(frozen=True)
class TightPath:
    set_members: frozenset[int]
    vertices: tuple[int, ...]
    tight_times: tuple[Fraction, ...]  # per edge
    reach: tuple[Fraction, ...]  # per vertex

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def end(self) -> int:
        return self.vertices[-1]

    @property
    def edges(self) -> list[Arc]:
        return list(zip(self.vertices, self.vertices[1:]))

    def cost(self, graph: Instance) -> Fraction:
        return sum((graph.edge_cost(u, w) for u, w in self.edges), ZERO)

    def to_json(self) -> dict:
        return {"set": sorted(v + 1 for v in self.set_members),
                "vertices": [v + 1 for v in self.vertices],
                "tight_times": [fmt(t) for t in self.tight_times],
                "reach": [fmt(t) for t in self.reach]}


class UnreachableError(ValueError):
    pass


def extract_s_tight_path(tr: GrowthTrace, S: ForestSet | Iterable[int], v: int,
                         at: Fraction | None = None) -> TightPath:
    members = _members(S)
    if v in members:
        return TightPath(members, (v,), (), (ZERO,))
    best, pred = _minimax(tr, members, at)
    if v not in best:
        raise UnreachableError(f"vertex {v + 1} is not reached from the set")
    path = [v]
    while path[-1] not in members:
        path.append(pred[path[-1]])
    path.reverse()
    times = tuple(tr.tight_time[(a, b)] for a, b in zip(path, path[1:]))
    return TightPath(members, tuple(path), times, tuple(best[x] for x in path))


def is_s_tight(tr: GrowthTrace, P: TightPath, at: Fraction | None = None) -> bool:
    best = reach_times(tr, P.set_members, at)
    for (u, w) in P.edges:
        tw = best.get(w)
        tu = best.get(u)
        t_e = tr.tight_time.get((u, w))
        if tw is None or tu is None or t_e is None or t_e > tw or tu > tw:
            return False
    return True


__all__ = ["GrowthConfig", "GrowthTrace", "GrowthEvent", "GrowthInterval", "Capture",
           "run_growth", "dual_value", "DualValue", "reach_time", "reach_times",
           "extract_s_tight_path", "TightPath", "is_s_tight", "UnreachableError",
           "DEFAULT_DELTA", "DEFAULT_EPS_PRIME"]
