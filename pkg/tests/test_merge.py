import itertools
from fractions import Fraction

import pytest

from conftest import fixtures, random_small
from moatforge.families import spider, subdiv_triangle
from moatforge.instance import Instance, metric_closure
from moatforge.merge import (build_merge_forest, certificate_value, drop_value, forest_integral,
                             max_drop_certificate, merge_time, separates_all, terminal_mst)
from moatforge.oracles import brute_drop, dreyfus_wagner


def forest(inst):
    m = metric_closure(inst)
    return m, build_merge_forest(m)


def test_triangle_forest():
    inst = subdiv_triangle()
    _, f = forest(inst)
    leaves = [S for S in f.sets if len(S.members) == 1]
    assert [S.deactivation for S in leaves] == [1, 1, 1]  # [DERIVED]
    assert f.top.members == frozenset(inst.terminals) and f.top.activation == 1
    assert f.top.deactivation is None
    assert f.t_max == 1
    assert len(f.events) == 1  # one three-way merge


def test_spider_forest():
    inst = spider(2, 2)
    _, f = forest(inst)
    r_group = f.find(inst.vertices("r", "sbar1", "sbar2"))
    assert (r_group.activation, r_group.deactivation) == (Fraction(1, 2), 1)  # [DERIVED]
    for x in ("r", "sbar1", "sbar2"):
        assert f.find(inst.vertices(x)).deactivation == Fraction(1, 2)
    for x in ("s1", "s2"):
        assert f.find(inst.vertices(x)).deactivation == 1
    assert f.t_max == 1


def test_single_pair_forest():
    m, f = forest(Instance(2, ((0, 1, Fraction(6)),), (0, 1), 0))
    assert [S.deactivation for S in f.sets if len(S.members) == 1] == [3, 3]  # [TRIVIAL]
    assert f.t_max == 3


def test_merge_times():
    inst = subdiv_triangle()
    _, f = forest(inst)
    assert merge_time(f, *inst.vertices("s1", "s2")) == 1  # [DERIVED]
    assert merge_time(f, inst.vertex("s1"), inst.vertex("s1")) == 0  # [TRIVIAL]
    sp = spider(2, 2)
    _, g = forest(sp)
    assert merge_time(g, sp.vertex("sbar1"), sp.vertex("r")) == Fraction(1, 2)  # [DERIVED]


@pytest.mark.parametrize("inst, cost", [
    (fixtures()[1], 8),  # gap-gadget [PAPER]
    (spider(3, 5), 11),  # [PAPER]
    (subdiv_triangle(), 4),  # [DERIVED]
])
def test_terminal_mst_costs(inst, cost):
    m, f = forest(inst)
    edges, c = terminal_mst(m, f)
    assert c == cost
    assert len(edges) == len(inst.terminals) - 1


@pytest.mark.parametrize("seed", range(25))
def test_forest_structure(seed):
    m, f = forest(random_small(seed, n_max=10, k_max=6))
    R = m.terminals
    assert forest_integral(f) == terminal_mst(m, f)[1]
    for a, b in itertools.combinations(R, 2):
        tm = merge_time(f, a, b)
        assert m.dist[a][b] >= 2 * tm
        for c in R:  # ultrametric
            assert merge_time(f, a, c) <= max(tm, merge_time(f, b, c))
    for S in f.sets:
        if S.deactivation is None:
            continue
        s1 = min(S.members)
        for s2 in R:
            assert (merge_time(f, s1, s2) < S.deactivation) == (s2 in S.members)


def test_drop_values():
    sp = spider(2, 2)
    m, f = forest(sp)
    X = sp.vertices("s1", "s2")
    assert drop_value(m, f, X) == 2  # [DERIVED]
    assert drop_value(m, f, sp.vertices("s1")) == 0  # [TRIVIAL]
    tri = subdiv_triangle()
    m, f = forest(tri)
    assert drop_value(m, f, tri.terminals) == 4  # [DERIVED]


def test_spider_certificates():
    sp = spider(2, 2)
    m, f = forest(sp)
    X = sp.vertices("s1", "s2")
    cert = max_drop_certificate(f, X)
    assert cert.value == 2 and len(cert.sets) == 1  # [DERIVED]
    assert next(iter(cert.sets)).members in (sp.vertices("s1"), sp.vertices("s2"))
    avoiding = max_drop_certificate(f, X, avoid=sp.vertex("s1"))
    assert [S.members for S in avoiding.sets] == [sp.vertices("s2")]  # [DERIVED]
    assert avoiding.value == 2
    single = max_drop_certificate(f, sp.vertices("s1"))
    assert single.sets == () and single.value == 0  # [TRIVIAL]


def exhaustive_best(f, X, avoid=None):
    best = Fraction(0)
    pool = [S for S in f.sets if S.deactivation is not None
            and (avoid is None or avoid not in S.members)]
    for family in itertools.combinations(pool, len(X) - 1):
        if separates_all(family, X):
            best = max(best, certificate_value(family))
    return best


@pytest.mark.parametrize("seed", range(30))
def test_certificates_are_maximal(seed):
    m, f = forest(random_small(seed, n_max=9, k_max=5))
    R = m.terminals
    for size in range(2, len(R) + 1):
        for X in itertools.combinations(R, size):
            X = frozenset(X)
            cert = max_drop_certificate(f, X)
            assert cert.separates_all()
            assert cert.value == drop_value(m, f, X) == brute_drop(m, X)
            assert cert.value == exhaustive_best(f, X)
            s = min(X)
            assert max_drop_certificate(f, X, avoid=s).value == exhaustive_best(f, X, s)


@pytest.mark.parametrize("seed", range(10))
def test_mst_sandwiches_optimum(seed):
    m, f = forest(random_small(seed))
    opt, _ = dreyfus_wagner(m)
    assert opt <= terminal_mst(m, f)[1] <= 2 * opt
