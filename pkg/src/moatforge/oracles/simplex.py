"""Exact revised simplex for packing LPs  max 1.y  s.t.  A y <= b, y >= 0.

b must be nonnegative so the slack basis is feasible.  Columns may be added
between solves; the current basis stays feasible and is reused.  Bland's
rule keeps the method finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

ZERO = Fraction(0)
ONE = Fraction(1)


class SimplexError(RuntimeError):
    pass


@dataclass(frozen=True)
class PackingSolution:
    value: Fraction
    y: tuple[Fraction, ...]  # one per column
    prices: tuple[Fraction, ...]  # one per row: the covering-side solution
    pivots: int


class PackingLP:
    def __init__(self, rhs: Sequence[Fraction]):
        self.b = [Fraction(x) for x in rhs]
        if any(x < 0 for x in self.b):
            raise SimplexError("right-hand side must be nonnegative")
        self.m = len(self.b)
        self.columns: list[frozenset[int]] = []  # 0/1 columns by support
        self.gain: list[Fraction] = []  # objective coefficient per column
        # basis[i] = ("slack", row) or ("col", j); binv is B^-1
        self.basis: list[tuple[int, int]] = [(1, i) for i in range(self.m)]
        self.binv = [[ONE if i == j else ZERO for j in range(self.m)] for i in range(self.m)]
        self.xb = list(self.b)
        self.pivots = 0

    def add_column(self, rows, gain: Fraction = ONE) -> int:
        self.columns.append(frozenset(rows))
        self.gain.append(Fraction(gain))
        return len(self.columns) - 1

    def _cost(self, var: tuple[int, int]) -> Fraction:
        return self.gain[var[1]] if var[0] == 0 else ZERO

    def prices(self) -> list[Fraction]:
        cb = [self._cost(v) for v in self.basis]
        return [sum((cb[i] * self.binv[i][j] for i in range(self.m) if cb[i]), ZERO)
                for j in range(self.m)]

    def _direction(self, var: tuple[int, int]) -> list[Fraction]:
        if var[0] == 1:
            return [row[var[1]] for row in self.binv]
        rows = self.columns[var[1]]
        return [sum((row[r] for r in rows), ZERO) for row in self.binv]

    def reduced_cost(self, var: tuple[int, int], pi: Sequence[Fraction]) -> Fraction:
        if var[0] == 1:
            return -pi[var[1]]
        return self.gain[var[1]] - sum((pi[r] for r in self.columns[var[1]]), ZERO)

    def solve(self, max_pivots: int = 10**6) -> PackingSolution:
        while True:
            pi = self.prices()
            basic = set(self.basis)
            entering = None
            for j in range(len(self.columns)):
                if (0, j) not in basic and self.reduced_cost((0, j), pi) > 0:
                    entering = (0, j)
                    break
            if entering is None:
                for i in range(self.m):
                    if (1, i) not in basic and pi[i] < 0:
                        entering = (1, i)
                        break
            if entering is None:
                return self._solution(pi)
            d = self._direction(entering)
            leave = None
            best = None
            for i in range(self.m):
                if d[i] > 0:
                    ratio = self.xb[i] / d[i]
                    key = (ratio, self.basis[i])
                    if best is None or key < best:
                        best, leave = key, i
            if leave is None:
                raise SimplexError("packing LP is unbounded")
            self._pivot(leave, entering, d)
            if self.pivots > max_pivots:
                raise SimplexError("pivot limit reached")

    def _pivot(self, r: int, var: tuple[int, int], d: list[Fraction]) -> None:
        piv = d[r]
        row_r = [x / piv for x in self.binv[r]]
        xr = self.xb[r] / piv
        for i in range(self.m):
            if i == r or not d[i]:
                continue
            f = d[i]
            bi = self.binv[i]
            for j in range(self.m):
                if row_r[j]:
                    bi[j] -= f * row_r[j]
            self.xb[i] -= f * xr
        self.binv[r] = row_r
        self.xb[r] = xr
        self.basis[r] = var
        self.pivots += 1

    def _solution(self, pi: list[Fraction]) -> PackingSolution:
        y = [ZERO] * len(self.columns)
        for i, (kind, j) in enumerate(self.basis):
            if kind == 0:
                y[j] = self.xb[i]
        value = sum((self.gain[j] * y[j] for j in range(len(y))), ZERO)
        return PackingSolution(value, tuple(y), tuple(pi), self.pivots)

    def check_optimality(self, sol: PackingSolution) -> None:
        """Primal and dual feasibility plus complementary slackness, exactly."""
        pi = sol.prices
        if any(p < 0 for p in pi):
            raise SimplexError("negative price")
        loads = [ZERO] * self.m
        for j, rows in enumerate(self.columns):
            yj = sol.y[j]
            if yj < 0:
                raise SimplexError("negative primal value")
            covered = sum((pi[r] for r in rows), ZERO)
            if covered < self.gain[j]:
                raise SimplexError("prices violate a column")
            if yj and covered != self.gain[j]:
                raise SimplexError("complementary slackness fails on a column")
            for r in rows:
                loads[r] += yj
        for i in range(self.m):
            if loads[i] > self.b[i]:
                raise SimplexError("row capacity exceeded")
            if pi[i] and loads[i] != self.b[i]:
                raise SimplexError("complementary slackness fails on a row")
        if sum((p * c for p, c in zip(pi, self.b)), ZERO) != sol.value:
            raise SimplexError("objective values differ")
