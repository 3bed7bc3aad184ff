"""Steiner tree instances: validation, text formats, metric closure,
terminal contraction and edge subdivision.

Vertex ids are 0-based internally.  Every text or JSON surface uses
1-based ids, matching the native and STP formats.
"""

from __future__ import annotations

import heapq
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .rationals import fmt

DEFAULT_SEGMENT_BUDGET = 10**6
SEGMENT_BUDGET_ENV = "MOATFORGE_SEGMENT_BUDGET"


class InstanceError(ValueError):
    """Raised for structurally invalid instances."""


class ParseError(InstanceError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SegmentBudgetError(InstanceError):
    """Explicit subdivision would exceed the configured segment budget."""


Edge = tuple[int, int, Fraction]


@dataclass(frozen=True)
class Instance:
    """Undirected graph with positive rational costs, terminals and a root.

    Edges are stored with ``u < v``.  ``labels`` and ``name`` are display
    metadata only and do not take part in equality.
    """

    vertex_count: int
    edges: tuple[Edge, ...]
    terminals: tuple[int, ...]
    root: int
    labels: tuple[str, ...] | None = field(default=None, compare=False)
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        n = self.vertex_count
        if not isinstance(n, int) or n < 1:
            raise InstanceError("vertex count must be a positive integer")
        norm = []
        seen = set()
        for u, v, c in self.edges:
            c = Fraction(c)
            if not (0 <= u < n and 0 <= v < n):
                raise InstanceError(f"edge endpoint out of range: {u + 1} {v + 1}")
            if u == v:
                raise InstanceError(f"self-loop at vertex {u + 1}")
            if c <= 0:
                raise InstanceError(f"nonpositive cost on edge {u + 1} {v + 1}")
            if u > v:
                u, v = v, u
            if (u, v) in seen:
                raise InstanceError(f"duplicate edge {u + 1} {v + 1}")
            seen.add((u, v))
            norm.append((u, v, c))
        object.__setattr__(self, "edges", tuple(norm))
        terms = tuple(self.terminals)
        if len(set(terms)) != len(terms):
            raise InstanceError("duplicate terminal")
        if not terms:
            raise InstanceError("no terminals")
        for t in terms:
            if not 0 <= t < n:
                raise InstanceError(f"terminal out of range: {t + 1}")
        object.__setattr__(self, "terminals", terms)
        if self.root not in terms:
            raise InstanceError("root not a terminal")
        if self.labels is not None and len(self.labels) != n:
            raise InstanceError("label count does not match vertex count")
        if not _connected(n, self.edges):
            raise InstanceError("graph is disconnected")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def label(self, v: int) -> str:
        return self.labels[v] if self.labels else str(v + 1)

    def vertex(self, label: str) -> int:
        """Look up a vertex by display label (or 1-based id string)."""
        if self.labels and label in self.labels:
            return self.labels.index(label)
        try:
            v = int(label) - 1
        except ValueError:
            raise KeyError(label) from None
        if not 0 <= v < self.vertex_count:
            raise KeyError(label)
        return v

    def vertices(self, *labels: str) -> frozenset[int]:
        return frozenset(self.vertex(x) for x in labels)

    def adjacency(self) -> list[list[tuple[int, Fraction]]]:
        adj: list[list[tuple[int, Fraction]]] = [[] for _ in range(self.vertex_count)]
        for u, v, c in self.edges:
            adj[u].append((v, c))
            adj[v].append((u, c))
        return adj

    def edge_cost(self, u: int, v: int) -> Fraction | None:
        if u > v:
            u, v = v, u
        for a, b, c in self.edges:
            if a == u and b == v:
                return c
        return None

    def with_root(self, root: int) -> "Instance":
        return Instance(self.vertex_count, self.edges, self.terminals, root,
                        self.labels, self.name)


def _connected(n: int, edges: Iterable[Edge]) -> bool:
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    parts = n
    for u, v, _ in edges:
        a, b = find(u), find(v)
        if a != b:
            parent[a] = b
            parts -= 1
    return parts == 1


# --------------------------------------------------------------------------
# text formats


def _rational_token(tok: str, lineno: int) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad cost {tok!r}", lineno) from None


def _int_token(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected integer, got {tok!r}", lineno) from None


def _build(n: int | None, edges, terminals, root) -> Instance:
    if n is None:
        raise ParseError("missing node count")
    for u, v, _, ln in edges:
        for x in (u, v):
            if not 1 <= x <= n:
                raise ParseError(f"vertex {x} out of range 1..{n}", ln)
    for t, ln in terminals:
        if not 1 <= t <= n:
            raise ParseError(f"terminal {t} out of range 1..{n}", ln)
    pairs: dict[tuple[int, int], int] = {}
    for u, v, c, ln in edges:
        if u == v:
            raise ParseError("self-loop", ln)
        if c <= 0:
            raise ParseError("nonpositive cost", ln)
        key = (min(u, v), max(u, v))
        if key in pairs:
            raise ParseError(f"duplicate edge {key[0]} {key[1]}", ln)
        pairs[key] = ln
    seen = set()
    for t, ln in terminals:
        if t in seen:
            raise ParseError(f"duplicate terminal {t}", ln)
        seen.add(t)
    if root is None:
        raise ParseError("missing root")
    r, rln = root
    if r not in seen:
        raise ParseError("root not a terminal", rln)
    return Instance(n, tuple((u - 1, v - 1, c) for u, v, c, _ in edges),
                    tuple(t - 1 for t, _ in terminals), r - 1)


def parse_native(text: str) -> Instance:
    n = None
    edges, terminals = [], []
    root = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0].lower()
        if head == "nodes" and len(tok) == 2:
            if n is not None:
                raise ParseError("repeated nodes line", lineno)
            n = _int_token(tok[1], lineno)
            if n < 1:
                raise ParseError("node count must be positive", lineno)
        elif head == "edge" and len(tok) == 4:
            edges.append((_int_token(tok[1], lineno), _int_token(tok[2], lineno),
                          _rational_token(tok[3], lineno), lineno))
        elif head == "terminal" and len(tok) == 2:
            terminals.append((_int_token(tok[1], lineno), lineno))
        elif head == "root" and len(tok) == 2:
            if root is not None:
                raise ParseError("more than one root line", lineno)
            root = (_int_token(tok[1], lineno), lineno)
        else:
            raise ParseError(f"unrecognized line {raw.strip()!r}", lineno)
    return _build(n, edges, terminals, root)


def parse_stp(text: str, root: int | None = None) -> Instance:
    """Parse the SteinLib subset.  ``root`` is a 1-based override."""
    n = None
    edges, terminals = [], []
    stp_root = None
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0].upper()
        if head == "SECTION":
            if len(tok) < 2:
                raise ParseError("SECTION without a name", lineno)
            section = tok[1].lower()
            continue
        if head == "END":
            section = None
            continue
        if head == "EOF":
            break
        if section is None:
            if lineno == 1 or "STP" in line.upper():
                continue
            raise ParseError(f"content outside a section: {raw.strip()!r}", lineno)
        if section == "graph":
            if head == "NODES" and len(tok) == 2:
                n = _int_token(tok[1], lineno)
            elif head in ("EDGES", "ARCS") and len(tok) == 2:
                _int_token(tok[1], lineno)
            elif head == "E" and len(tok) == 4:
                edges.append((_int_token(tok[1], lineno), _int_token(tok[2], lineno),
                              _rational_token(tok[3], lineno), lineno))
            else:
                raise ParseError(f"unrecognized graph line {raw.strip()!r}", lineno)
        elif section == "terminals":
            if head == "TERMINALS" and len(tok) == 2:
                _int_token(tok[1], lineno)
            elif head == "T" and len(tok) == 2:
                terminals.append((_int_token(tok[1], lineno), lineno))
            elif head == "ROOT" and len(tok) == 2:
                stp_root = (_int_token(tok[1], lineno), lineno)
            else:
                raise ParseError(f"unrecognized terminal line {raw.strip()!r}", lineno)
        # other sections (Comment, Coordinates, ...) are skipped
    if root is not None:
        chosen = (root, None)
    elif stp_root is not None:
        chosen = stp_root
    elif terminals:
        chosen = (terminals[0][0], terminals[0][1])
    else:
        raise ParseError("no terminals")
    return _build(n, edges, terminals, chosen)


def parse_instance(text: str, format: str = "native", root: int | None = None) -> Instance:
    """Parse instance text.  ``root`` (1-based) overrides the file's root."""
    if format == "native":
        inst = parse_native(text)
        if root is not None:
            if root - 1 not in inst.terminals:
                raise InstanceError("root not a terminal")
            inst = inst.with_root(root - 1)
        return inst
    if format == "stp":
        return parse_stp(text, root)
    raise InstanceError(f"unknown format {format!r}")


def render_native(inst: Instance) -> str:
    lines = [f"nodes {inst.vertex_count}"]
    lines += [f"edge {u + 1} {v + 1} {fmt(c)}" for u, v, c in inst.edges]
    lines += [f"terminal {t + 1}" for t in inst.terminals]
    lines.append(f"root {inst.root + 1}")
    return "\n".join(lines) + "\n"


def render_stp(inst: Instance) -> str:
    def cost(c: Fraction) -> str:
        return str(c.numerator) if c.denominator == 1 else fmt(c)

    out = ["33D32945 STP File, STP Format Version 1.0", "",
           "SECTION Graph", f"Nodes {inst.vertex_count}", f"Edges {inst.edge_count}"]
    out += [f"E {u + 1} {v + 1} {cost(c)}" for u, v, c in inst.edges]
    out += ["END", "", "SECTION Terminals", f"Terminals {len(inst.terminals)}"]
    # root first so a plain SteinLib reader picks the same root
    order = [inst.root] + [t for t in inst.terminals if t != inst.root]
    out += [f"T {t + 1}" for t in order]
    out += ["END", "", "EOF"]
    return "\n".join(out) + "\n"


def render_instance(inst: Instance, format: str = "native") -> str:
    if format == "native":
        return render_native(inst)
    if format == "stp":
        return render_stp(inst)
    raise InstanceError(f"unknown format {format!r}")


# --------------------------------------------------------------------------
# metric closure


@dataclass(frozen=True)
class MetricInstance:
    base: Instance
    dist: tuple[tuple[Fraction, ...], ...]
    pred: tuple[tuple[int, ...], ...] = field(compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.base.vertex_count

    @property
    def terminals(self) -> tuple[int, ...]:
        return self.base.terminals

    @property
    def root(self) -> int:
        return self.base.root

    def path(self, u: int, v: int) -> list[int]:
        """A shortest u-v path in the base graph (deterministic)."""
        row = self.pred[u]
        out = [v]
        while out[-1] != u:
            out.append(row[out[-1]])
        return out[::-1]

    def path_edges(self, u: int, v: int) -> list[tuple[int, int]]:
        p = self.path(u, v)
        return [(min(a, b), max(a, b)) for a, b in zip(p, p[1:])]

    def shortest_path_edges(self) -> tuple[Edge, ...]:
        """Base edges whose cost equals the distance of their endpoints."""
        return tuple(e for e in self.base.edges if e[2] == self.dist[e[0]][e[1]])

    def growth_instance(self) -> Instance:
        b = self.base
        return Instance(b.vertex_count, self.shortest_path_edges(), b.terminals, b.root,
                        b.labels, b.name)


def dijkstra(n: int, adj, source: int) -> tuple[list[Fraction | None], list[int]]:
    dist: list[Fraction | None] = [None] * n
    pred = [-1] * n
    dist[source] = Fraction(0)
    pred[source] = source
    heap = [(Fraction(0), source)]
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, c in adj[u]:
            nd = d + c
            if dist[v] is None or nd < dist[v] or (nd == dist[v] and not done[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def metric_closure(inst: Instance) -> MetricInstance:
    adj = inst.adjacency()
    dist, pred = [], []
    for s in range(inst.vertex_count):
        d, p = dijkstra(inst.vertex_count, adj, s)
        dist.append(tuple(d))
        pred.append(tuple(p))
    return MetricInstance(inst, tuple(dist), tuple(pred))


def complete_graph(m: MetricInstance) -> Instance:
    """The closure as an explicit complete-graph instance."""
    n = m.n
    edges = tuple((u, v, m.dist[u][v]) for u in range(n) for v in range(u + 1, n))
    b = m.base
    return Instance(n, edges, b.terminals, b.root, b.labels, b.name)


# --------------------------------------------------------------------------
# contraction


def contract_terminals(inst: Instance, X: Iterable[int]) -> tuple[Instance, tuple[int, ...]]:
    """Merge the terminals of ``X`` into one terminal.

    The merged vertex takes the place of the smallest member of ``X``;
    parallel edges keep the cheaper cost and edges inside ``X`` vanish.
    Returns the new instance and the old-to-new id map.
    """
    X = frozenset(X)
    if not X:
        raise InstanceError("empty contraction set")
    if not X <= set(inst.terminals):
        raise InstanceError("contraction set is not a subset of the terminals")
    hub = min(X)
    mapping = []
    nxt = 0
    for v in range(inst.vertex_count):
        if v in X and v != hub:
            mapping.append(-1)
        else:
            mapping.append(nxt)
            nxt += 1
    mapping = [mapping[hub] if v in X else mapping[v] for v in range(inst.vertex_count)]
    best: dict[tuple[int, int], Fraction] = {}
    order: list[tuple[int, int]] = []
    for u, v, c in inst.edges:
        a, b = mapping[u], mapping[v]
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key not in best:
            order.append(key)
            best[key] = c
        elif c < best[key]:
            best[key] = c
    terms = []
    for t in inst.terminals:
        if mapping[t] not in terms:
            terms.append(mapping[t])
    labels = None
    if inst.labels:
        labels = [None] * nxt
        for v in range(inst.vertex_count):
            if v not in X:
                labels[mapping[v]] = inst.labels[v]
        labels[mapping[hub]] = "+".join(inst.labels[x] for x in sorted(X))
        labels = tuple(labels)
    new = Instance(nxt, tuple((a, b, best[(a, b)]) for a, b in order), tuple(terms),
                   mapping[inst.root], labels, inst.name)
    return new, tuple(mapping)


# --------------------------------------------------------------------------
# subdivision


@dataclass(frozen=True)
class SubdividedGraph:
    """G^eps: every base edge replaced by a chain of equal-cost segments.

    Base vertices keep their ids; interior vertices follow.  ``chains[i]``
    lists the vertices along base edge ``i`` from its smaller endpoint.
    ``origin[x]`` is ``(edge index, position)`` for interior vertices and
    ``None`` for base vertices.
    """

    base: Instance
    epsilon: Fraction
    graph: Instance
    chains: tuple[tuple[int, ...], ...]
    segment_costs: tuple[Fraction, ...]
    origin: tuple[tuple[int, int] | None, ...]

    @property
    def segment_count(self) -> int:
        return self.graph.edge_count

    def collapse(self, vertices: Iterable[int]) -> frozenset[int]:
        n = self.base.vertex_count
        return frozenset(v for v in vertices if v < n)


def segment_budget(budget: int | None = None) -> int:
    if budget is not None:
        return budget
    env = os.environ.get(SEGMENT_BUDGET_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise InstanceError(f"{SEGMENT_BUDGET_ENV} must be an integer") from None
    return DEFAULT_SEGMENT_BUDGET


def subdivision_epsilon(inst: Instance, eps_prime: Fraction,
                        m: MetricInstance | None = None) -> Fraction:
    """min over distinct terminal pairs of (eps'/2) * dist."""
    if len(inst.terminals) < 2:
        raise InstanceError("subdivision needs at least two terminals")
    m = m or metric_closure(inst)
    R = inst.terminals
    dmin = min(m.dist[a][b] for i, a in enumerate(R) for b in R[i + 1:])
    return Fraction(eps_prime) / 2 * dmin


def subdivide(inst: Instance, eps_prime: Fraction, epsilon: Fraction | None = None,
              budget: int | None = None) -> SubdividedGraph:
    eps = Fraction(epsilon) if epsilon is not None else subdivision_epsilon(inst, eps_prime)
    if eps <= 0:
        raise InstanceError("epsilon must be positive")
    if len(inst.terminals) < 2:
        raise InstanceError("subdivision needs at least two terminals")
    counts = [math.ceil(c / eps) for _, _, c in inst.edges]
    limit = segment_budget(budget)
    total = sum(counts)
    if total > limit:
        raise SegmentBudgetError(f"subdivision needs {total} segments, budget is {limit}")
    n = inst.vertex_count
    nxt = n
    edges: list[Edge] = []
    chains, costs = [], []
    origin: list[tuple[int, int] | None] = [None] * n
    for i, ((u, v, c), k) in enumerate(zip(inst.edges, counts)):
        seg = c / k
        chain = [u]
        for j in range(1, k):
            chain.append(nxt)
            origin.append((i, j))
            nxt += 1
        chain.append(v)
        for a, b in zip(chain, chain[1:]):
            edges.append((a, b, seg))
        chains.append(tuple(chain))
        costs.append(seg)
    labels = None
    if inst.labels:
        labels = tuple(list(inst.labels) + [f"{inst.labels[inst.edges[i][0]]}~{inst.labels[inst.edges[i][1]]}#{j}"
                                            for i, j in origin[n:]])
    graph = Instance(nxt, tuple(edges), inst.terminals, inst.root, labels, inst.name)
    return SubdividedGraph(inst, eps, graph, tuple(chains), tuple(costs), tuple(origin))


def collapse_assignment(sub: SubdividedGraph, entries) -> dict[frozenset[int], Fraction]:
    out: dict[frozenset[int], Fraction] = {}
    for key, val in entries.items():
        k = sub.collapse(key)
        out[k] = out.get(k, Fraction(0)) + val
    return out


def mst_cost(vertices: Sequence[int], weight) -> Fraction:
    """Prim's algorithm on a complete graph given by ``weight(a, b)``."""
    vs = list(vertices)
    if len(vs) <= 1:
        return Fraction(0)
    best = {v: weight(vs[0], v) for v in vs[1:]}
    total = Fraction(0)
    while best:
        v = min(best, key=lambda x: (best[x], x))
        total += best.pop(v)
        for w in best:
            c = weight(v, w)
            if c < best[w]:
                best[w] = c
    return total
