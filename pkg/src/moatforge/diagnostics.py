"""Executable audits of the feasibility analysis: per-edge contribution
ledgers, the chain structure of contributing sets, the potential-function
inequality and the path-length bound.  Audits report verdicts; they never
stop the solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .growth import GrowthTrace, TightPath, extract_s_tight_path, reach_times
from .instance import MetricInstance
from .merge import ForestSet, MergeForest, drop_value, merge_time
from .oracles.steiner import subset_steiner_costs
from .rationals import fmt

ZERO = Fraction(0)


@dataclass(frozen=True)
class Constants:
    delta: Fraction = Fraction(429, 50000)
    gamma: Fraction = Fraction(774, 10000)
    beta: Fraction = Fraction(7249, 1000)
    alpha: Fraction = Fraction(2081, 1000)
    lam: Fraction = Fraction(2004, 100000)
    mu: Fraction = Fraction(377, 1000)

    @property
    def M(self) -> Fraction:
        bd = self.beta * self.delta
        head = 2 / (1 + self.gamma) - 1 - bd
        return head / ((1 + bd) ** 2 / (1 - bd) - head)

    def sanity(self) -> dict[str, bool]:
        bd = self.beta * self.delta
        return {
            "M_matches_display": abs(self.M - Fraction(1941792, 10**6)) <= Fraction(1, 10**6),
            "chain_containment": (1 - bd) / (1 + bd) * self.M >= 1,
            "mu_admissible": 1 / (1 + self.gamma) - self.mu >= 0,
            "claim_b_from_a": (1 + self.delta) * (1 + self.lam / self.mu) <= 1 + bd,
        }

    def to_json(self) -> dict:
        return {"delta": fmt(self.delta), "gamma": fmt(self.gamma), "beta": fmt(self.beta),
                "alpha": fmt(self.alpha), "lambda": fmt(self.lam), "mu": fmt(self.mu),
                "M": fmt(self.M)}


def _clip(spans, until: Fraction) -> Fraction:
    return sum((min(b, until) - a for a, b in spans if a < until), ZERO)


def _by_arc(tr: GrowthTrace) -> dict[tuple[int, int], list[tuple[int, list]]]:
    out: dict[tuple[int, int], list[tuple[int, list]]] = {}
    for (sid, arc), spans in tr.contributions.items():
        out.setdefault(arc, []).append((sid, spans))
    return out


def _check_continuous(tr: GrowthTrace) -> None:
    if tr.config.mode != "continuous":
        raise ValueError("audits read whole-edge traces; run growth in continuous mode")


# contribution ledger -----------------------------------------------------

@dataclass(frozen=True)
class EdgeLedger:
    edge: tuple[int, int]
    amounts: dict[int, Fraction]  # forest set id -> load contributed
    threshold: Fraction
    tight: bool
    chain_share: Fraction = ZERO  # z^k_e
    other_share: Fraction = ZERO  # z~_e

    @property
    def total(self) -> Fraction:
        return sum(self.amounts.values(), ZERO)

    def to_json(self) -> dict:
        return {"edge": [self.edge[0] + 1, self.edge[1] + 1],
                "amounts": {str(k): fmt(v) for k, v in self.amounts.items()},
                "threshold": fmt(self.threshold), "tight": self.tight,
                "chain": fmt(self.chain_share), "other": fmt(self.other_share)}


def edge_ledger(tr: GrowthTrace, arc: tuple[int, int], t_star: Fraction | None = None,
                chain: Iterable[int] = ()) -> EdgeLedger:
    """Load each set put on the directed edge ``arc`` before ``t_star``."""
    until = tr.horizon if t_star is None else t_star
    u, w = arc
    if tr.graph.edge_cost(u, w) is None:
        raise ValueError(f"edge {u + 1}-{w + 1} is not in the trace graph")
    chain = set(chain)
    amounts = {}
    for sid, spans in sorted(_by_arc(tr).get(arc, ())):
        x = _clip(spans, until)
        if x:
            amounts[sid] = x
    t = tr.tight_time.get(arc)
    zk = sum((v for k, v in amounts.items() if k in chain), ZERO)
    total = sum(amounts.values(), ZERO)
    return EdgeLedger(arc, amounts, tr.threshold(u, w), t is not None and t <= until,
                      zk, total - zk)


def contribution_ledger(tr: GrowthTrace, P: TightPath, t_star: Fraction | None = None,
                        chain: Iterable[int] = ()) -> list[EdgeLedger]:
    """Per path edge, the load each set put on it before ``t_star``."""
    chain = tuple(chain)
    out = []
    for arc in P.edges:
        if tr.tight_time.get(arc) is None:
            raise ValueError(f"path edge {arc[0] + 1}-{arc[1] + 1} never became tight")
        out.append(edge_ledger(tr, arc, t_star, chain))
    return out


# chain decomposition ----------------------------------------------------

@dataclass(frozen=True)
class ChainDecomposition:
    start: int
    t_star: Fraction
    contributing: tuple[int, ...]  # C, forest set ids
    chains: tuple[tuple[int, ...], ...]  # by increasing merge time, each outermost last
    merge_times: tuple[Fraction, ...]
    passed: bool
    witness: str | None = None

    @property
    def k(self) -> int:
        return len(self.chains)

    @property
    def last_chain(self) -> tuple[int, ...]:
        return self.chains[-1] if self.chains else ()

    def to_json(self) -> dict:
        return {"start": self.start + 1, "t_star": fmt(self.t_star),
                "chains": [list(c) for c in self.chains],
                "merge_times": [fmt(t) for t in self.merge_times],
                "status": "PASS" if self.passed else "FAIL", "witness": self.witness}


def contributing_sets(tr: GrowthTrace, P: TightPath, t_star: Fraction) -> set[int]:
    arcs = _by_arc(tr)
    out = set()
    for e in P.edges:
        for sid, spans in arcs.get(e, ()):
            if _clip(spans, t_star) > 0:
                out.add(sid)
    return out


def chain_decomposition(tr: GrowthTrace, f: MergeForest, P: TightPath,
                        t_star: Fraction | None = None, consts: Constants | None = None
                        ) -> ChainDecomposition:
    """Group the contributors that miss the start terminal by their merge
    time with it and check the chain structure."""
    consts = consts or Constants(delta=tr.delta)
    t_star = P.reach[-1] if t_star is None else t_star
    s0 = P.start
    C = sorted(sid for sid in contributing_sets(tr, P, t_star)
               if s0 not in f.sets[sid].members)
    groups: dict[Fraction, list[int]] = {}
    for sid in C:
        tm = merge_time(f, min(f.sets[sid].members), s0)
        groups.setdefault(tm, []).append(sid)
    times = tuple(sorted(groups))
    chains = tuple(tuple(sorted(groups[t], key=lambda i: len(f.sets[i].members))) for t in times)
    witness = None
    for chain in chains:
        sets = [f.sets[i].members for i in chain]
        for a, b in zip(sets, sets[1:]):
            if not a <= b:
                witness = f"sets {chain} with equal merge time are not nested"
    for i, ci in enumerate(chains):
        for j in range(i + 1, len(chains)):
            for x in ci:
                for y in chains[j]:
                    if f.sets[x].members & f.sets[y].members:
                        witness = witness or f"sets {x} and {y} of different chains intersect"
            if not times[j] > consts.M * times[i]:
                witness = witness or (f"merge times {fmt(times[i])} and {fmt(times[j])} "
                                      f"are not separated by the factor M")
    return ChainDecomposition(s0, t_star, tuple(C), chains, times, witness is None, witness)


# potential ---------------------------------------------------------------

def potential(tr: GrowthTrace, f: MergeForest, chain: Iterable[int], t_star: Fraction
              ) -> dict[int, Fraction]:
    """pi(v) = sum over the chain of max{0, min{t*, d^S} - max{t^{Sv}, a^S}}."""
    pi = {v: ZERO for v in range(tr.graph.vertex_count)}
    for sid in chain:
        S = f.sets[sid]
        top = t_star if S.deactivation is None else min(t_star, S.deactivation)
        reach = reach_times(tr, S, at=t_star)
        for v, t in reach.items():
            gain = top - max(t, S.activation)
            if gain > 0:
                pi[v] += gain
    return pi


@dataclass
class AuditVerdict:
    audit: str
    instance: str
    passed: bool
    checks: int = 0
    worst_ratio: Fraction | None = None
    worst_witness: dict | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        return {"audit": self.audit, "instance": self.instance, "status": self.status,
                "checks": self.checks,
                "worst_ratio": None if self.worst_ratio is None else fmt(self.worst_ratio),
                "worst_witness": self.worst_witness}


def potential_audit(tr: GrowthTrace, f: MergeForest, chain: Iterable[int], t_star: Fraction,
                    verdict: AuditVerdict | None = None) -> AuditVerdict:
    """Check pi(w) - pi(v) <= z~_e - z^k_e on every arc tight by t*."""
    _check_continuous(tr)
    chain = tuple(sorted(chain))
    verdict = verdict or AuditVerdict("potential", tr.instance.base.name, True)
    pi = potential(tr, f, chain, t_star)
    arcs = _by_arc(tr)
    members = set(chain)
    for (v, w), t in tr.tight_time.items():
        if t > t_star:
            continue
        zk = other = ZERO
        for sid, spans in arcs.get((v, w), ()):
            x = _clip(spans, t_star)
            if sid in members:
                zk += x
            else:
                other += x
        lhs, rhs = pi[w] - pi[v], other - zk
        verdict.checks += 1
        slack = rhs - lhs
        if verdict.worst_ratio is None or slack < verdict.worst_ratio:
            verdict.worst_ratio = slack
            verdict.worst_witness = {"edge": [v + 1, w + 1], "t_star": fmt(t_star),
                                     "chain": list(chain), "lhs": fmt(lhs), "rhs": fmt(rhs)}
        if lhs > rhs:
            verdict.passed = False
    return verdict


def potential_sweep(tr: GrowthTrace, f: MergeForest, consts: Constants | None = None
                    ) -> AuditVerdict:
    """Run the potential audit for the last chain of every S-tight path,
    at every event time of the trace."""
    _check_continuous(tr)
    consts = consts or Constants(delta=tr.delta)
    verdict = AuditVerdict("potential", tr.instance.base.name, True)
    done: set[tuple[Fraction, tuple[int, ...]]] = set()
    for t_star in _event_times(tr):
        for S in _active_rootless(tr, f, t_star):
            for w in sorted(reach_times(tr, S, at=t_star)):
                P = extract_s_tight_path(tr, S, w, at=t_star)
                dec = chain_decomposition(tr, f, P, t_star, consts)
                if not dec.passed:
                    verdict.notes.append(dec.witness)
                key = (t_star, dec.last_chain)
                if not dec.chains or key in done:
                    continue
                done.add(key)
                potential_audit(tr, f, dec.last_chain, t_star, verdict)
    if verdict.worst_ratio is not None:
        verdict.worst_ratio = verdict.worst_ratio  # smallest slack seen
    return verdict


def chain_sweep(tr: GrowthTrace, f: MergeForest, consts: Constants | None = None) -> AuditVerdict:
    _check_continuous(tr)
    consts = consts or Constants(delta=tr.delta)
    verdict = AuditVerdict("chains", tr.instance.base.name, True)
    for t_star in _event_times(tr):
        for S in _active_rootless(tr, f, t_star):
            for w in sorted(reach_times(tr, S, at=t_star)):
                dec = chain_decomposition(tr, f, extract_s_tight_path(tr, S, w, at=t_star),
                                          t_star, consts)
                verdict.checks += 1
                if not dec.passed:
                    verdict.passed = False
                    verdict.worst_witness = verdict.worst_witness or dec.to_json()
    return verdict


def _event_times(tr: GrowthTrace) -> list[Fraction]:
    return sorted({e.time for e in tr.events if ZERO < e.time <= tr.horizon})


def _active_rootless(tr: GrowthTrace, f: MergeForest, t: Fraction) -> list[ForestSet]:
    return [S for S in f.sets if tr.root not in S.members and S.activation <= t
            and (S.deactivation is None or t < S.deactivation)]


# distance bound ----------------------------------------------------------

def distance_bound_audit(tr: GrowthTrace, f: MergeForest, consts: Constants | None = None
                         ) -> AuditVerdict:
    """c(P) <= (1 + beta*delta) t^{Sv} for each S-tight path reached before d^S,
    plus the per-edge bound on the load of sets holding the start terminal."""
    _check_continuous(tr)
    consts = consts or Constants(delta=tr.delta)
    limit = 1 + consts.beta * tr.delta
    verdict = AuditVerdict("distance", tr.instance.base.name, True)
    arcs = _by_arc(tr)
    for S in f.sets:
        if tr.root in S.members:
            continue
        end = tr.horizon if S.deactivation is None else min(S.deactivation, tr.horizon)
        reach = reach_times(tr, S)
        for v, t in sorted(reach.items()):
            if v in S.members or not t < end:
                continue
            P = extract_s_tight_path(tr, S, v)
            cost = P.cost(tr.graph)
            ratio = cost / t
            verdict.checks += 1
            if verdict.worst_ratio is None or ratio > verdict.worst_ratio:
                verdict.worst_ratio = ratio
                verdict.worst_witness = {"set": S.id, "vertex": v + 1, "cost": fmt(cost),
                                         "reach": fmt(t), "path": [x + 1 for x in P.vertices]}
            if cost > limit * t:
                verdict.passed = False
            # sets holding the start terminal load each edge by at most the reach gap
            s0 = P.start
            for (a, b), ta, tb in zip(P.edges, P.reach, P.reach[1:]):
                load = sum((_clip(spans, end) for sid, spans in arcs.get((a, b), ())
                            if s0 in f.sets[sid].members), ZERO)
                verdict.checks += 1
                if load > tb - ta:
                    verdict.passed = False
                    verdict.notes.append(f"start-set load {fmt(load)} on {a + 1}->{b + 1} "
                                         f"exceeds {fmt(tb - ta)}")
    return verdict


# local optimality --------------------------------------------------------

def improving_sets(m: MetricInstance, f: MergeForest, gamma: Fraction, h: int
                   ) -> list[tuple[frozenset[int], Fraction, Fraction]]:
    """Terminal sets X (2 <= |X| <= h) with drop(X) >= (1+gamma) * opt(X)."""
    out = []
    for X, cost in sorted(subset_steiner_costs(m, m.terminals, h).items(),
                          key=lambda kv: (len(kv[0]), sorted(kv[0]))):
        drop = drop_value(m, f, X)
        if drop >= (1 + Fraction(gamma)) * cost:
            out.append((X, drop, cost))
    return out


def is_locally_optimal(m: MetricInstance, f: MergeForest, gamma: Fraction, h: int) -> bool:
    return not improving_sets(m, f, gamma, h)


__all__ = ["Constants", "EdgeLedger", "edge_ledger", "contribution_ledger", "ChainDecomposition",
           "chain_decomposition", "contributing_sets", "potential", "potential_audit",
           "potential_sweep", "chain_sweep", "distance_bound_audit", "AuditVerdict",
           "improving_sets", "is_locally_optimal"]
