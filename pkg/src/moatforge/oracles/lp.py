"""Exact values of the undirected and bidirected cut relaxations.

The covering LP  min c.x  s.t.  x(cut) >= 1  is solved through its packing
dual over cut columns; the optimal prices are the covering solution x.
Cuts are either all enumerated or generated by minimum-cut separation.
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, TextIO

from ..instance import Instance
from ..rationals import fmt, parse_rational
from .simplex import PackingLP

ZERO = Fraction(0)
ONE = Fraction(1)
ENUMERATE_LIMIT = 16
SEPARATE_LIMIT = 200


class LpSizeError(ValueError):
    pass


@dataclass(frozen=True)
class LpSpec:
    relaxation: str  # "UCR" or "BCR"
    root: int | None = None  # BCR only; None means the instance root

    def __post_init__(self) -> None:
        if self.relaxation not in ("UCR", "BCR"):
            raise ValueError(f"unknown relaxation {self.relaxation!r}")


def _variables(inst: Instance, spec: LpSpec) -> list[tuple[int, int, Fraction]]:
    if spec.relaxation == "UCR":
        return [(u, v, c) for u, v, c in inst.edges]
    out = []
    for u, v, c in inst.edges:
        out += [(u, v, c), (v, u, c)]
    return sorted(out)


def _root(inst: Instance, spec: LpSpec) -> int:
    r = inst.root if spec.root is None else spec.root
    if r not in inst.terminals:
        raise ValueError("root must be a terminal")
    return r


def cut_rows(inst: Instance, spec: LpSpec, U: frozenset[int],
             variables: list[tuple[int, int, Fraction]]) -> frozenset[int]:
    if spec.relaxation == "UCR":
        return frozenset(i for i, (u, v, _) in enumerate(variables) if (u in U) != (v in U))
    return frozenset(i for i, (u, v, _) in enumerate(variables) if u in U and v not in U)


def enumerate_cuts(inst: Instance, spec: LpSpec) -> list[frozenset[int]]:
    """Every valid cut set, on the side without the root, in a fixed order."""
    r = _root(inst, spec)
    others = [v for v in range(inst.vertex_count) if v != r]
    R = set(inst.terminals)
    out = []
    for size in range(1, len(others) + 1):
        for combo in itertools.combinations(others, size):
            if R.intersection(combo):
                out.append(frozenset(combo))
    return out


def _max_flow_cut(n: int, arcs: list[tuple[int, int, Fraction]], s: int, t: int
                  ) -> tuple[Fraction, frozenset[int]]:
    """Edmonds–Karp; returns the flow value and the source side of a min cut."""
    cap: dict[tuple[int, int], Fraction] = {}
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v, c in arcs:
        if c:
            cap[(u, v)] = cap.get((u, v), ZERO) + c
            cap.setdefault((v, u), ZERO)
            adj[u].add(v)
            adj[v].add(u)
    order = [sorted(a) for a in adj]
    flow = ZERO
    while True:
        prev = {s: s}
        q = deque([s])
        while q and t not in prev:
            x = q.popleft()
            for y in order[x]:
                if y not in prev and cap[(x, y)] > 0:
                    prev[y] = x
                    q.append(y)
        if t not in prev:
            return flow, frozenset(prev)
        push = None
        y = t
        while y != s:
            x = prev[y]
            push = cap[(x, y)] if push is None else min(push, cap[(x, y)])
            y = x
        y = t
        while y != s:
            x = prev[y]
            cap[(x, y)] -= push
            cap[(y, x)] += push
            y = x
        flow += push


def separate(inst: Instance, spec: LpSpec, x: list[Fraction],
             variables: list[tuple[int, int, Fraction]]) -> list[frozenset[int]]:
    """Violated cuts (capacity below 1) found by terminal-to-root min cuts."""
    r = _root(inst, spec)
    arcs = []
    for (u, v, _), xv in zip(variables, x):
        arcs.append((u, v, xv))
        if spec.relaxation == "UCR":
            arcs.append((v, u, xv))
    found = []
    for t in inst.terminals:
        if t == r:
            continue
        value, side = _max_flow_cut(inst.vertex_count, arcs, t, r)
        if value < 1 and side not in found:
            found.append(side)
    return found


@dataclass
class LpStats:
    value: Fraction
    pivots: int
    cuts_added: int
    x: dict[tuple[int, int], Fraction] = field(default_factory=dict)
    y: dict[frozenset[int], Fraction] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"value": fmt(self.value), "pivots": self.pivots, "cuts_added": self.cuts_added}


def solve_relaxation(inst: Instance, spec: LpSpec, method: str = "enumerate") -> LpStats:
    n = inst.vertex_count
    if method == "enumerate":
        if n > ENUMERATE_LIMIT:
            raise LpSizeError(f"enumeration needs at most {ENUMERATE_LIMIT} vertices")
    elif method == "separate":
        if n > SEPARATE_LIMIT:
            raise LpSizeError(f"separation needs at most {SEPARATE_LIMIT} vertices")
    else:
        raise ValueError(f"unknown method {method!r}")
    variables = _variables(inst, spec)
    lp = PackingLP([c for _, _, c in variables])
    cuts: list[frozenset[int]] = []
    seen: set[frozenset[int]] = set()

    def add(U: frozenset[int]) -> None:
        if U not in seen:
            seen.add(U)
            cuts.append(U)
            lp.add_column(cut_rows(inst, spec, U, variables))

    r = _root(inst, spec)
    if method == "enumerate":
        for U in enumerate_cuts(inst, spec):
            add(U)
        sol = lp.solve()
    else:
        for t in inst.terminals:
            if t != r:
                add(frozenset([t]))
        while True:
            sol = lp.solve()
            new = [U for U in separate(inst, spec, list(sol.prices), variables) if U not in seen]
            if not new:
                break
            for U in new:
                add(U)
    lp.check_optimality(sol)
    x = {(u, v): p for (u, v, _), p in zip(variables, sol.prices) if p}
    y = {U: v for U, v in zip(cuts, sol.y) if v}
    return LpStats(sol.value, sol.pivots, len(cuts), x, y)


def lp_value(inst: Instance, spec: LpSpec, method: str = "enumerate") -> Fraction:
    return solve_relaxation(inst, spec, method).value


# LP text format ----------------------------------------------------------

TERMS_PER_LINE = 8


def _var_name(u: int, v: int) -> str:
    return f"x_{u + 1}_{v + 1}"


def _coef(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else fmt(c)


def _wrap(head: str, terms: list[str], tail: str = "") -> list[str]:
    lines = []
    for i in range(0, len(terms), TERMS_PER_LINE):
        chunk = " + ".join(terms[i:i + TERMS_PER_LINE])
        prefix = head if i == 0 else "   +"
        lines.append(f"{prefix} {chunk}")
    if tail:
        lines[-1] += tail
    return lines


def export_lp(inst: Instance, spec: LpSpec, sink: TextIO) -> int:
    """Write the covering LP with every cut enumerated; returns the line count."""
    if inst.vertex_count > ENUMERATE_LIMIT:
        raise LpSizeError(f"export needs at most {ENUMERATE_LIMIT} vertices")
    variables = _variables(inst, spec)
    names = [_var_name(u, v) for u, v, _ in variables]
    r = _root(inst, spec)
    lines = [f"\\ relaxation {spec.relaxation} root {r + 1}", "Minimize"]
    lines += _wrap(" obj:", [f"{_coef(c)} {nm}" for (_, _, c), nm in zip(variables, names)])
    lines.append("Subject To")
    for U in enumerate_cuts(inst, spec):
        rows = sorted(cut_rows(inst, spec, U, variables))
        label = "cut_" + "_".join(str(v + 1) for v in sorted(U))
        lines += _wrap(f" {label}:", [names[i] for i in rows], " >= 1")
    lines.append("Bounds")
    lines += [f" {nm} >= 0" for nm in names]
    lines.append("End")
    sink.write("\n".join(lines) + "\n")
    return len(lines)


@dataclass(frozen=True)
class LpModel:
    """A covering LP read back from text: min c.x, x(S) >= rhs, x >= 0."""

    header: str
    objective: tuple[tuple[str, Fraction], ...]
    constraints: tuple[tuple[str, tuple[str, ...], Fraction], ...]

    def render(self) -> str:
        lines = [self.header, "Minimize"]
        lines += _wrap(" obj:", [f"{_coef(c)} {v}" for v, c in self.objective])
        lines.append("Subject To")
        for name, vs, rhs in self.constraints:
            lines += _wrap(f" {name}:", list(vs), f" >= {_coef(rhs)}")
        lines.append("Bounds")
        lines += [f" {v} >= 0" for v, _ in self.objective]
        lines.append("End")
        return "\n".join(lines) + "\n"


_TERM = re.compile(r"^(?:(\d+(?:/\d+)?)\s+)?([A-Za-z_][\w.]*)$")


def _parse_terms(text: str) -> list[tuple[str, Fraction]]:
    out = []
    for part in text.split("+"):
        part = part.strip()
        if not part:
            continue
        mt = _TERM.match(part)
        if not mt:
            raise ValueError(f"cannot read LP term {part!r}")
        coef = parse_rational(mt.group(1)) if mt.group(1) else ONE
        out.append((mt.group(2), coef))
    return out


def import_lp(text: str) -> LpModel:
    header = ""
    section = None
    statements: dict[str, list[str]] = {"obj": [], "st": []}
    current: list[str] | None = None
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line:
            continue
        if line.startswith("\\"):
            header = header or line
            continue
        word = line.strip().lower()
        if word in ("minimize", "subject to", "bounds", "end"):
            section = word
            current = None
            continue
        if section == "minimize":
            statements["obj"].append(line)
        elif section == "subject to":
            if line.startswith("   +") and statements["st"]:
                statements["st"][-1] += " " + line.strip()
            else:
                statements["st"].append(line.strip())
        elif section in ("bounds", "end"):
            continue
        else:
            raise ValueError(f"content outside any section: {line!r}")
    obj_text = " ".join(s.strip() for s in statements["obj"])
    if ":" in obj_text:
        obj_text = obj_text.split(":", 1)[1]
    objective = tuple(_parse_terms(obj_text))
    constraints = []
    for stmt in statements["st"]:
        name, body = stmt.split(":", 1)
        lhs, rhs = body.split(">=")
        terms = _parse_terms(lhs)
        if any(c != 1 for _, c in terms):
            raise ValueError("cut constraints must have unit coefficients")
        constraints.append((name.strip(), tuple(v for v, _ in terms), parse_rational(rhs.strip())))
    return LpModel(header, objective, tuple(constraints))


def solve_model(model: LpModel) -> Fraction:
    index = {v: i for i, (v, _) in enumerate(model.objective)}
    lp = PackingLP([c for _, c in model.objective])
    for _, vs, rhs in model.constraints:
        lp.add_column({index[v] for v in vs}, rhs)
    sol = lp.solve()
    lp.check_optimality(sol)
    return sol.value
