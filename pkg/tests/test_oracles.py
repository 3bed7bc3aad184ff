import io
import itertools
from fractions import Fraction

import pytest

from conftest import fixtures, random_small
from moatforge.families import bipartite_fan, cycle, gap_gadget, spider, subdiv_triangle
from moatforge.instance import Instance, metric_closure
from moatforge.merge import terminal_mst
from moatforge.oracles import (LpSizeError, LpSpec, TooManyTerminalsError, brute_drop,
                               dreyfus_wagner, expand_edges, export_lp, import_lp, lp_value,
                               random_laminar_dual, solve_model, solve_relaxation)
from moatforge.oracles.simplex import PackingLP
from moatforge.oracles.steiner import subset_steiner_costs

BCR, UCR = LpSpec("BCR"), LpSpec("UCR")


# Dreyfus-Wagner

@pytest.mark.parametrize("inst, opt", [(gap_gadget(), 8), (spider(3, 5), 9)],
                         ids=lambda x: getattr(x, "name", str(x)))
def test_dw_known_optima(inst, opt):
    cost, edges = dreyfus_wagner(metric_closure(inst))
    assert cost == opt  # [PAPER]


def test_dw_two_terminals_is_shortest_path():
    inst = random_small(3, n_max=10)
    m = metric_closure(inst)
    a, b = inst.terminals[:2]
    assert dreyfus_wagner(m, [a, b])[0] == m.dist[a][b]  # [TRIVIAL]


def test_dw_terminal_limit():
    with pytest.raises(TooManyTerminalsError):
        dreyfus_wagner(metric_closure(spider(3, 30)))


def _is_tree_spanning(inst, edges, terminals):
    parent = {}

    def find(x):
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    for u, v in edges:
        a, b = find(u), find(v)
        if a == b:
            return False
        parent[a] = b
    return len({find(t) for t in terminals}) == 1


@pytest.mark.parametrize("seed", range(15))
def test_dw_matches_networkx_bound_and_tree(seed):
    nx = pytest.importorskip("networkx")
    from networkx.algorithms.approximation import steiner_tree
    inst = random_small(seed, n_max=10, k_max=6)
    m = metric_closure(inst)
    cost, closure = dreyfus_wagner(m)
    tree = expand_edges(m, closure)
    assert sum(inst.edge_cost(u, v) for u, v in tree) <= cost
    assert _is_tree_spanning(inst, tree, inst.terminals)
    g = nx.Graph()
    g.add_weighted_edges_from(inst.edges)
    approx = steiner_tree(g, list(inst.terminals), weight="weight")
    assert cost <= sum(d["weight"] for *_, d in approx.edges(data=True))


@pytest.mark.parametrize("seed", range(6))
def test_dw_equals_brute_force_enumeration(seed):
    inst = random_small(seed, n_max=7, k_max=4)
    m = metric_closure(inst)
    steiner = [v for v in range(inst.vertex_count) if v not in inst.terminals]
    best = None
    for size in range(len(steiner) + 1):
        for extra in itertools.combinations(steiner, size):
            nodes = list(inst.terminals) + list(extra)
            # MST of the closure restricted to nodes
            seen, total = {nodes[0]}, Fraction(0)
            while len(seen) < len(nodes):
                c, v = min((m.dist[a][b], b) for a in seen for b in nodes if b not in seen)
                seen.add(v)
                total += c
            best = total if best is None else min(best, total)
    assert dreyfus_wagner(m)[0] == best


def test_subset_costs_match_dw():
    inst = random_small(11, n_max=9, k_max=5)
    m = metric_closure(inst)
    costs = subset_steiner_costs(m, inst.terminals, 4)
    assert {len(X) for X in costs} == {2, 3, 4}
    for X, c in costs.items():
        assert c == dreyfus_wagner(m, X)[0]


# LP values

def test_gap_gadget_bcr():
    assert lp_value(gap_gadget(), BCR) == Fraction(15, 2)  # [PAPER]


def test_triangle_bcr():
    assert lp_value(subdiv_triangle(), BCR) == 4  # [PAPER]


def test_all_terminal_cycle():
    inst = cycle(6, 6)
    assert lp_value(inst, UCR) == 3  # [PAPER]
    assert lp_value(inst, BCR) == 5  # [PAPER]


def test_bipartite_fan_lower_bound():
    assert lp_value(bipartite_fan(2, 3), BCR, "separate") >= Fraction(20, 3)  # [PAPER]


@pytest.mark.parametrize("inst", fixtures()[:6] + [random_small(s) for s in range(8)],
                         ids=lambda i: i.name)
def test_relaxation_sandwich(inst):
    m = metric_closure(inst)
    bcr = lp_value(inst, BCR, "separate")
    opt = dreyfus_wagner(m)[0]
    mst = terminal_mst(m)[1]
    assert lp_value(inst, UCR, "separate") <= bcr <= opt <= mst
    assert mst / 2 <= bcr
    if inst.vertex_count <= 10:
        assert lp_value(inst, BCR, "enumerate") == bcr


@pytest.mark.parametrize("seed", range(8))
def test_lp_matches_scipy(seed):
    scipy_opt = pytest.importorskip("scipy.optimize")
    inst = random_small(seed)
    stats = solve_relaxation(inst, UCR, "enumerate")
    from moatforge.oracles.lp import _variables, cut_rows, enumerate_cuts
    variables = _variables(inst, UCR)
    A, b = [], []
    for U in enumerate_cuts(inst, UCR):
        rows = cut_rows(inst, UCR, U, variables)
        A.append([-1.0 if i in rows else 0.0 for i in range(len(variables))])
        b.append(-1.0)
    res = scipy_opt.linprog([float(c) for *_, c in variables], A_ub=A, b_ub=b,
                            bounds=(0, None), method="highs")
    assert abs(res.fun - float(stats.value)) < 1e-7


def test_root_invariance_small():
    inst = gap_gadget()
    values = {lp_value(inst.with_root(r), BCR) for r in inst.terminals}
    assert values == {Fraction(15, 2)}


def test_enumeration_size_limit():
    with pytest.raises(LpSizeError):
        lp_value(cycle(20, 5), BCR, "enumerate")


def test_simplex_reports_duals():
    # max y1 + y2 s.t. y1 <= 1, y1 + y2 <= 2
    lp = PackingLP([Fraction(1), Fraction(2)])
    lp.add_column({0, 1})
    lp.add_column({1})
    sol = lp.solve()
    assert sol.value == 2
    lp.check_optimality(sol)
    assert sum(p * c for p, c in zip(sol.prices, [1, 2])) == sol.value


# LP text format

def test_export_counts():
    buf = io.StringIO()
    export_lp(subdiv_triangle(), BCR, buf)
    model = import_lp(buf.getvalue())
    assert len(model.objective) == 12  # [TRIVIAL]
    assert len(model.constraints) == 2 ** 5 - 2 ** 3  # subsets of the 5 non-root vertices that hit a terminal


def test_two_vertex_export():
    inst = Instance(2, ((0, 1, Fraction(3)),), (0, 1), 0)
    buf = io.StringIO()
    export_lp(inst, UCR, buf)
    model = import_lp(buf.getvalue())
    assert (len(model.objective), len(model.constraints)) == (1, 1)  # [TRIVIAL]


@pytest.mark.parametrize("inst", [i for i in fixtures() if i.vertex_count <= 12],
                         ids=lambda i: i.name)
@pytest.mark.parametrize("spec", [BCR, UCR], ids=["BCR", "UCR"])
def test_export_round_trip(inst, spec):
    buf = io.StringIO()
    export_lp(inst, spec, buf)
    text = buf.getvalue()
    model = import_lp(text)
    assert model.render() == text
    assert solve_model(model) == lp_value(inst, spec, "separate")


def test_fractional_costs_survive_export():
    inst = Instance(3, ((0, 1, Fraction(3, 7)), (1, 2, Fraction(5, 2))), (0, 2), 0)
    buf = io.StringIO()
    export_lp(inst, BCR, buf)
    assert "3/7 x_1_2" in buf.getvalue()
    assert solve_model(import_lp(buf.getvalue())) == Fraction(3, 7) + Fraction(5, 2)


def test_import_rejects_garbage():
    with pytest.raises(ValueError):
        import_lp("Minimize\n obj: 2 x + y\nSubject To\n c: 3 x >= 1\nEnd\n")


# brute force and random duals

def test_brute_drop_examples():
    sp = spider(2, 2)
    m = metric_closure(sp)
    assert brute_drop(m, sp.vertices("s1", "s2")) == 2  # [DERIVED]
    assert brute_drop(m, sp.vertices("s1")) == 0  # [TRIVIAL]


def test_random_laminar_dual_seed_one():
    inst = cycle(20, 5)
    d = random_laminar_dual(inst, 1)
    assert d.is_laminar() and d.value <= 15  # [DERIVED]


def test_random_laminar_dual_needs_cycle():
    with pytest.raises(ValueError):
        random_laminar_dual(spider(2, 2), 0)
