"""Primal-dual moat growth for the undirected cut relaxation.

Every part S of S^t grows at unit rate from a^S to d^S.  With all moats
growing together, the vertices reachable from S by tight edges at time t
are exactly those within distance t of S, so each moat is a ball and its
boundary only changes when t passes some dist(v, S).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .duals import DualAssignment, is_laminar, verify_dual_feasible
from .instance import Instance, MetricInstance, metric_closure
from .merge import MergeForest, build_merge_forest
from .rationals import fmt

ZERO = Fraction(0)


class NotLaminarError(ValueError):
    pass


class InfeasibleDualError(ValueError):
    def __init__(self, verdict):
        super().__init__("infeasible")
        self.verdict = verdict


@dataclass(frozen=True)
class Moat:
    terminals: frozenset[int]
    start: Fraction
    end: Fraction
    vertices: frozenset[int]


def moat_history(m: MetricInstance, f: MergeForest) -> list[Moat]:
    """Moats of every forest set, one record per constant stretch."""
    out: list[Moat] = []
    for S in f.sets:
        end = f.t_max if S.deactivation is None else S.deactivation
        if S.activation >= end:
            continue
        reach = {v: min(m.dist[s][v] for s in S.members) for v in range(m.n)}
        cuts = sorted({S.activation, end} | {x for x in reach.values()
                                              if S.activation < x < end})
        for lo, hi in zip(cuts, cuts[1:]):
            U = frozenset(v for v, x in reach.items() if x <= lo)
            out.append(Moat(S.members, lo, hi, U))
    return out


def grow_ucr_dual(m: MetricInstance, f: MergeForest | None = None) -> DualAssignment:
    if len(m.terminals) < 2:
        raise ValueError("moat growth needs at least two terminals")
    f = f or build_merge_forest(m)
    entries: dict[frozenset[int], Fraction] = {}
    for moat in moat_history(m, f):
        entries[moat.vertices] = entries.get(moat.vertices, ZERO) + moat.end - moat.start
    return DualAssignment("ucr", entries, m.root)


def restrict_rootless(y: DualAssignment, r: int) -> DualAssignment:
    if y.kind != "ucr":
        raise ValueError("restriction applies to an undirected-cut dual")
    return DualAssignment("bcr", {U: v for U, v in y.entries.items() if r not in U}, r)


def check_ucr_feasible(y: DualAssignment, m: MetricInstance):
    return verify_dual_feasible(y, m)


@dataclass(frozen=True)
class LaminarBoundVerdict:
    passed: bool
    value: Fraction
    bound: Fraction
    opt: Fraction

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        return {"audit": "laminar", "status": self.status, "value": fmt(self.value),
                "bound": fmt(self.bound), "opt": fmt(self.opt)}


def _is_cycle(inst: Instance) -> bool:
    if len(inst.edges) != inst.vertex_count:
        return False
    deg = [0] * inst.vertex_count
    for u, v, _ in inst.edges:
        deg[u] += 1
        deg[v] += 1
    return all(x == 2 for x in deg)  # connected and 2-regular


def audit_laminar_bound(inst: Instance, d: DualAssignment) -> LaminarBoundVerdict:
    """Value of a feasible laminar rooted dual on a cycle is at most n/2 + k."""
    if not _is_cycle(inst):
        raise ValueError("laminar bound audit needs a cycle instance")
    if not d.is_laminar():
        raise NotLaminarError("support is not laminar")
    verdict = verify_dual_feasible(d, metric_closure(inst))
    if not verdict.feasible:
        raise InfeasibleDualError(verdict)
    n, k = inst.vertex_count, len(inst.terminals)
    bound = Fraction(n, 2) + k
    return LaminarBoundVerdict(d.value <= bound, d.value, bound, Fraction((k - 1) * n, k))


__all__ = ["Moat", "moat_history", "grow_ucr_dual", "restrict_rootless", "check_ucr_feasible",
           "audit_laminar_bound", "LaminarBoundVerdict", "NotLaminarError",
           "InfeasibleDualError", "is_laminar"]
