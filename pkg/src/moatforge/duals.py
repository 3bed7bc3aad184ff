"""Dual assignments over vertex sets and exact feasibility checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .instance import MetricInstance
from .rationals import fmt, parse_rational

ZERO = Fraction(0)
KINDS = ("ucr", "bcr")


@dataclass(frozen=True)
class DualAssignment:
    kind: str
    entries: Mapping[frozenset[int], Fraction]
    root: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown dual kind {self.kind!r}")
        clean = {}
        for key, val in self.entries.items():
            val = Fraction(val)
            if val < 0:
                raise ValueError("dual values must be nonnegative")
            if val and key:
                clean[frozenset(key)] = val
        object.__setattr__(self, "entries", dict(sorted(clean.items(), key=_key_order)))

    @property
    def value(self) -> Fraction:
        return sum(self.entries.values(), ZERO)

    def scaled(self, factor: Fraction | int) -> DualAssignment:
        return DualAssignment(self.kind, {U: factor * y for U, y in self.entries.items()},
                              self.root)

    def get(self, U: Iterable[int]) -> Fraction:
        return self.entries.get(frozenset(U), ZERO)

    def is_laminar(self) -> bool:
        return is_laminar(self.entries)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "root": None if self.root is None else self.root + 1,
            "entries": [{"set": sorted(v + 1 for v in U), "value": fmt(y)}
                        for U, y in self.entries.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> DualAssignment:
        root = data.get("root")
        entries: dict[frozenset[int], Fraction] = {}
        for item in data.get("entries", []):
            key = frozenset(v - 1 for v in item["set"])
            entries[key] = entries.get(key, ZERO) + parse_rational(item["value"])
        return cls(data["kind"], entries, None if root is None else root - 1)


def _key_order(item) -> tuple:
    U = item[0]
    return (len(U), sorted(U))


def is_laminar(sets: Iterable[frozenset[int]]) -> bool:
    family = list(sets)
    for A, B in itertools.combinations(family, 2):
        if A & B and not (A <= B or B <= A):
            return False
    return True


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    domain_errors: tuple[str, ...] = ()
    witness: tuple[int, int] | None = None
    load: Fraction | None = None
    capacity: Fraction | None = None
    violations: int = 0
    max_load_ratio: Fraction = ZERO
    checked: int = field(default=0)

    @property
    def status(self) -> str:
        return "FEASIBLE" if self.feasible else "INFEASIBLE"

    def to_json(self) -> dict:
        out = {"status": self.status, "domain_errors": list(self.domain_errors),
               "violations": self.violations, "checked_edges": self.checked,
               "max_load_ratio": fmt(self.max_load_ratio)}
        if self.witness is not None:
            out["witness"] = {"edge": [self.witness[0] + 1, self.witness[1] + 1],
                              "load": fmt(self.load), "cost": fmt(self.capacity)}
        return out


def _domain_errors(d: DualAssignment, m: MetricInstance) -> list[str]:
    errors = []
    R = set(m.terminals)
    n = m.n
    for U in d.entries:
        if any(not 0 <= v < n for v in U):
            errors.append("set has vertex out of range")
        if not U & R:
            errors.append("set contains no terminal")
        if d.kind == "bcr" and d.root in U:
            errors.append("set contains root")
        if d.kind == "ucr" and R <= U:
            errors.append("set contains every terminal")
    return sorted(set(errors))


def verify_dual_feasible(d: DualAssignment, m: MetricInstance, scale: Fraction | int = 1
                         ) -> FeasibilityVerdict:
    """Check every closure constraint of the matching dual LP, exactly.

    bcr: load on (u,v) is the sum over sets with u inside and v outside.
    ucr: load on {u,v} is the sum over sets separating u and v.
    The first violated pair in (u,v) order is the witness.
    """
    if d.kind == "bcr" and d.root is None:
        raise ValueError("bcr assignment needs a root")
    scale = Fraction(scale)
    domain = _domain_errors(d, m)
    items = [(U, scale * y) for U, y in d.entries.items()]
    n = m.n
    witness = load_w = cap_w = None
    violations = 0
    worst = ZERO
    checked = 0
    for u in range(n):
        for v in range(n):
            if u == v or (d.kind == "ucr" and v < u):
                continue
            if d.kind == "bcr":
                load = sum((y for U, y in items if u in U and v not in U), ZERO)
            else:
                load = sum((y for U, y in items if (u in U) != (v in U)), ZERO)
            cap = m.dist[u][v]
            checked += 1
            worst = max(worst, load / cap)
            if load > cap:
                violations += 1
                if witness is None:
                    witness, load_w, cap_w = (u, v), load, cap
    return FeasibilityVerdict(not domain and not violations, tuple(domain), witness,
                              load_w, cap_w, violations, worst, checked)
