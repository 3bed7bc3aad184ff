"""Instance generators: the small gadgets used as fixtures plus the cycle
and random families."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable, Mapping

from .instance import Instance, InstanceError
from .rationals import parse_rational

ONE = Fraction(1)


class FamilyError(InstanceError):
    pass


def _make(labels: list[str], edges, terminals: list[str], root: str, name: str) -> Instance:
    idx = {x: i for i, x in enumerate(labels)}
    return Instance(
        len(labels),
        tuple((idx[a], idx[b], Fraction(c)) for a, b, c in edges),
        tuple(idx[t] for t in terminals),
        idx[root],
        tuple(labels),
        name,
    )


def subdiv_triangle() -> Instance:
    """Six-cycle s1-v1-r-v3-s2-v2 with unit costs: a triangle on the
    three terminals with every side subdivided once."""
    labels = ["s1", "v1", "r", "v3", "s2", "v2"]
    ring = labels + ["s1"]
    edges = [(a, b, ONE) for a, b in zip(ring, ring[1:])]
    return _make(labels, edges, ["s1", "s2", "r"], "r", "subdiv-triangle")


def gap_gadget() -> Instance:
    """Hexagon with cost-2 rim and a center v4 joined to v1, v2, v3 at cost 1."""
    labels = ["s1", "v1", "r", "v3", "s2", "v2", "v4"]
    rim = ["s1", "v1", "r", "v3", "s2", "v2", "s1"]
    edges = [(a, b, 2) for a, b in zip(rim, rim[1:])]
    edges += [("v4", x, 1) for x in ("v1", "v2", "v3")]
    return _make(labels, edges, ["s1", "s2", "r"], "r", "gap-gadget")


def spider(k: int, q: int) -> Instance:
    """Legs s_i-v, the edge v-r and pendant terminals r-sbar_j, all unit cost."""
    if k < 1 or q < 0:
        raise FamilyError("spider needs k >= 1 and q >= 0")
    s = [f"s{i}" for i in range(1, k + 1)]
    sb = [f"sbar{j}" for j in range(1, q + 1)]
    labels = s + ["v", "r"] + sb
    edges = [(x, "v", 1) for x in s] + [("v", "r", 1)] + [("r", y, 1) for y in sb]
    return _make(labels, edges, s + ["r"] + sb, "r", f"spider(k={k},q={q})")


def bipartite_fan(k: int, q: int) -> Instance:
    """Terminals s_i hang off private hubs v_i; every hub sees r and all
    of stilde_1..stilde_k.  Unit costs throughout."""
    if k < 1 or q < 1:
        raise FamilyError("bipartite-fan needs k >= 1 and q >= 1")
    s = [f"s{i}" for i in range(1, q + 1)]
    v = [f"v{i}" for i in range(1, q + 1)]
    st = [f"stilde{j}" for j in range(1, k + 1)]
    labels = s + v + ["r"] + st
    edges = [(a, b, 1) for a, b in zip(s, v)]
    for hub in v:
        edges.append((hub, "r", 1))
        edges += [(hub, y, 1) for y in st]
    return _make(labels, edges, s + ["r"] + st, "r", f"bipartite-fan(k={k},q={q})")


def cycle(n: int, k: int) -> Instance:
    """Unit-cost n-cycle with every (n/k)-th vertex a terminal; root at 0."""
    if k < 2 or n < 3 or n % k:
        raise FamilyError("cycle needs k >= 2, n >= 3 and k dividing n")
    step = n // k
    labels = [f"c{i}" for i in range(n)]
    edges = [(labels[i], labels[(i + 1) % n], 1) for i in range(n)]
    terms = [labels[i] for i in range(0, n, step)]
    return _make(labels, edges, terms, terms[0], f"cycle(n={n},k={k})")


def random_instance(n: int, k: int, seed: int) -> Instance:
    """Random connected graph: a random spanning tree plus about n/2 chords,
    costs p/q with 1 <= p <= 20, 1 <= q <= 4."""
    if n < 2 or not 1 <= k <= n:
        raise FamilyError("random needs n >= 2 and 1 <= k <= n")
    rng = random.Random(seed)

    def cost() -> Fraction:
        return Fraction(rng.randint(1, 20), rng.randint(1, 4))

    edges = {}
    for v in range(1, n):
        u = rng.randrange(v)
        edges[(u, v)] = cost()
    for _ in range(n // 2):
        a, b = rng.sample(range(n), 2)
        key = (min(a, b), max(a, b))
        if key not in edges:
            edges[key] = cost()
    terms = rng.sample(range(n), k)
    labels = tuple(f"x{i + 1}" for i in range(n))
    return Instance(n, tuple((u, v, c) for (u, v), c in edges.items()), tuple(terms),
                    terms[0], labels, f"random(n={n},k={k},seed={seed})")


def potential_gadget(delta: Fraction) -> Instance:
    """Three terminals s, s*, r with a braided ladder between s and s*
    whose rungs cost delta/2; used for the potential audit."""
    d = Fraction(delta)
    if not 0 < d < 2:
        raise FamilyError("potential-gadget needs 0 < delta < 2")
    labels = ["s", "sstar", "r", "a0", "a1", "a2", "b0", "b1", "b2", "c1", "c2"]
    edges = [("s", a, 1 - d / 2) for a in ("a0", "a1", "a2")]
    edges += [(a, b, d / 2) for a, b in
              (("a0", "b0"), ("a1", "b1"), ("a2", "b2"), ("a2", "b1"), ("a1", "b0"))]
    edges += [("b2", "c2", d), ("b1", "c1", 3 * d / 2)]
    edges += [("b0", "sstar", 1), ("c1", "r", 1), ("c2", "r", 1)]
    return _make(labels, edges, ["s", "sstar", "r"], "r", f"potential-gadget(delta={d})")


def _int(params: Mapping, key: str) -> int:
    if key not in params:
        raise FamilyError(f"missing parameter {key!r}")
    try:
        return int(params[key])
    except (TypeError, ValueError):
        raise FamilyError(f"parameter {key!r} must be an integer") from None


FAMILIES: dict[str, Callable[[Mapping], Instance]] = {
    "subdiv-triangle": lambda p: subdiv_triangle(),
    "gap-gadget": lambda p: gap_gadget(),
    "spider": lambda p: spider(_int(p, "k"), _int(p, "q")),
    "bipartite-fan": lambda p: bipartite_fan(_int(p, "k"), _int(p, "q")),
    "cycle": lambda p: cycle(_int(p, "n"), _int(p, "k")),
    "random": lambda p: random_instance(_int(p, "n"), _int(p, "k"), _int(p, "seed")),
    "potential-gadget": lambda p: potential_gadget(parse_rational(str(p.get("delta", "429/50000")))),
}


def generate_family(family: str, params: Mapping | None = None) -> Instance:
    try:
        build = FAMILIES[family]
    except KeyError:
        raise FamilyError(f"unknown family {family!r}") from None
    return build(params or {})
