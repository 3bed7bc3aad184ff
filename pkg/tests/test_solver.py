from fractions import Fraction

import pytest

from conftest import DEFAULT_DELTA, fixtures, random_small
from moatforge.families import bipartite_fan, spider, subdiv_triangle
from moatforge.growth import GrowthConfig, run_growth
from moatforge.instance import Instance, metric_closure
from moatforge.merge import build_merge_forest, drop_value, terminal_mst
from moatforge.oracles import LpSpec, lp_value
from moatforge.solver import (DEFAULT_GAMMA, Component, ContractionLog, assemble_tree,
                              candidate_components, component_for, improvement_test,
                              scale_or_contract, theorem_ratio, trace_candidates, tree_cost)

BOUND = Fraction(19988, 10000)


def test_theorem_ratio_at_defaults():
    d, g = DEFAULT_DELTA, DEFAULT_GAMMA
    value = theorem_ratio(d, g)
    assert value == 2 * (1 + g + d) / ((1 + g) * (1 + d))  # [DERIVED]
    assert value < BOUND  # [PAPER]


def test_theorem_ratio_degenerate():
    assert theorem_ratio(0, 0) == 2  # [TRIVIAL]
    # with gamma = 0 the closed form cancels to exactly 2
    assert theorem_ratio(DEFAULT_DELTA, 0) == 2


def test_theorem_ratio_rejects_negative():
    with pytest.raises(ValueError):
        theorem_ratio(-1, 0)


def captured(inst, delta):
    m = metric_closure(inst)
    f = build_merge_forest(m)
    return m, f, run_growth(m, f, GrowthConfig(delta=delta))


def test_spider_star_candidate():
    inst = spider(3, 30)
    m, f, tr = captured(inst, Fraction(7, 20))
    star = inst.vertices("s1", "s2", "s3", "r")
    hits = [K for K in trace_candidates(m, tr) if K.terminals == star]
    assert hits and hits[0].cost == 4  # [DERIVED]
    assert improvement_test(m, f, hits[0], DEFAULT_GAMMA)  # [DERIVED]
    assert drop_value(m, f, star) == 6


def test_spider_path_is_not_improving():
    inst = spider(3, 30)
    m = metric_closure(inst)
    f = build_merge_forest(m)
    K = component_for(m, inst.vertices("s1", "r"), "test")
    assert K.cost == 2
    assert not improvement_test(m, f, K, DEFAULT_GAMMA)  # [DERIVED]
    single = Component((), inst.vertices("s1"), Fraction(0))
    assert not improvement_test(m, f, single, DEFAULT_GAMMA)  # [TRIVIAL]


def test_bipartite_fan_candidate():
    inst = bipartite_fan(2, 10)
    m, f, tr = captured(inst, Fraction(2, 5))
    X = inst.vertices("s1", "r", "stilde1", "stilde2")
    hits = [K for K in candidate_components(m, tr, 4) if K.terminals == X]
    assert hits and hits[0].cost == 4  # [PAPER]
    hub = inst.vertex("v1")
    assert all(hub in e for e in hits[0].edges)


def test_pair_components_on_triangle():
    inst = subdiv_triangle()
    m = metric_closure(inst)
    Ks = list(candidate_components(m, None, 2))
    assert len(Ks) == 3 and {K.cost for K in Ks} == {2}  # [DERIVED]


def test_triangle_solve():
    r = scale_or_contract(subdiv_triangle())
    assert r.status == "OK" and r.log.entries == []
    assert r.tree_cost == 4  # [DERIVED]
    assert r.dual_bound == (1 + DEFAULT_DELTA) / 2 * 4
    assert r.ratio == 2 / (1 + DEFAULT_DELTA)


def test_single_terminal_solve():
    inst = Instance(2, ((0, 1, Fraction(1)),), (0,), 0)
    r = scale_or_contract(inst)
    assert (r.tree, r.tree_cost, r.ratio) == ([], 0, 1)  # [TRIVIAL]


def test_spider_default_solve():
    inst = spider(3, 30)
    r = scale_or_contract(inst)
    assert r.ok and r.ratio <= BOUND  # [DERIVED]
    assert r.tree_cost <= 36
    assert {v for e in r.tree for v in e} >= set(inst.terminals)


def test_spider_contracts_the_star_when_forced():
    inst = spider(3, 30)
    r = scale_or_contract(inst, GrowthConfig(delta=Fraction(7, 20)))
    assert r.ok and r.ratio <= BOUND
    assert [c.terminals for c in r.log.entries] == [inst.vertices("s1", "s2", "s3", "r")]
    assert r.tree_cost == 34  # the optimum k + q + 1


def test_assemble_tree_without_contractions():
    inst = subdiv_triangle()
    m = metric_closure(inst)
    edges, _ = terminal_mst(m)
    expanded = sorted({e for u, v in edges for e in m.path_edges(u, v)})
    tree = assemble_tree(ContractionLog(), expanded, inst)
    assert len(tree) == 4 and tree_cost(inst, tree) == 4  # [DERIVED]


def test_assemble_tree_prunes_steiner_leaves():
    # path 1-2-3 with a dangling Steiner vertex 4 hanging off 2
    inst = Instance(4, ((0, 1, Fraction(1)), (1, 2, Fraction(1)), (1, 3, Fraction(1))), (0, 2), 0)
    tree = assemble_tree(ContractionLog(), [(0, 1), (1, 2), (1, 3)], inst)
    assert tree == [(0, 1), (1, 2)]


def test_assemble_tree_rejects_foreign_edges():
    with pytest.raises(ValueError):
        assemble_tree(ContractionLog(), [(0, 2)], subdiv_triangle())


def solved(inst):
    return scale_or_contract(inst, GrowthConfig(delta=Fraction(1, 3)), DEFAULT_GAMMA, 4)


@pytest.mark.parametrize("seed", range(12))
def test_contractions_are_improving_and_bounded(seed):
    inst = random_small(seed, n_max=10, k_max=6)
    r = solved(inst)
    assert len(r.log.entries) < len(inst.terminals)
    for c in r.log.entries:
        assert c.drop >= (1 + DEFAULT_GAMMA) * c.cost
    if r.ok:
        assert r.ratio <= theorem_ratio(Fraction(1, 3), DEFAULT_GAMMA)


@pytest.mark.parametrize("inst", fixtures()[:6] + [random_small(s) for s in range(10)],
                         ids=lambda i: i.name)
def test_dual_bound_is_sound(inst):
    r = scale_or_contract(inst)
    assert r.dual_bound <= lp_value(inst, LpSpec("BCR"), "separate")


def test_report_json_without_timing():
    r = scale_or_contract(subdiv_triangle())
    assert "runtime_ms" not in r.to_json(timing=False)
    assert r.to_json(timing=False)["ratio"] == "100000/50429"
