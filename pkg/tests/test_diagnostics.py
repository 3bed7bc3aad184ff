import random
from dataclasses import replace
from fractions import Fraction

import pytest

from conftest import DEFAULT_DELTA, fixtures
from moatforge.diagnostics import (Constants, chain_decomposition, chain_sweep,
                                   contribution_ledger, distance_bound_audit, edge_ledger,
                                   improving_sets, is_locally_optimal, potential, potential_audit,
                                   potential_sweep)
from moatforge.families import gap_gadget, potential_gadget, random_instance, subdiv_triangle
from moatforge.growth import GrowthConfig, extract_s_tight_path, run_growth
from moatforge.instance import metric_closure
from moatforge.merge import build_merge_forest


def grow(inst, delta=DEFAULT_DELTA):
    m = metric_closure(inst)
    f = build_merge_forest(m)
    return m, f, run_growth(m, f, GrowthConfig(delta=Fraction(delta)))


def random_locally_optimal(count, gamma=Constants().gamma):
    """The first ``count`` random instances (n <= 12) that pass the h = 4 test."""
    seed = 0
    while count:
        rng = random.Random(seed)
        n = rng.randint(5, 12)
        inst = random_instance(n, rng.randint(2, min(8, n)), seed)
        seed += 1
        m = metric_closure(inst)
        f = build_merge_forest(m)
        if is_locally_optimal(m, f, gamma, 4):
            count -= 1
            yield inst


# constants

def test_constants_sanity():
    c = Constants()
    assert all(c.sanity().values())
    assert Fraction(1941791, 10**6) <= c.M <= Fraction(1941793, 10**6)  # [PAPER]
    bd = c.beta * c.delta
    assert (1 - bd) / (1 + bd) * c.M >= 1
    assert 1 / (1 + c.gamma) - c.mu >= 0
    assert (1 + c.delta) * (1 + c.lam / c.mu) <= 1 + bd


def test_constants_are_exact_decimals():
    c = Constants()
    assert c.delta == Fraction("0.00858") and c.beta == Fraction("7.249")
    assert c.to_json()["lambda"] == "501/25000"


# ledger

def test_triangle_single_contributor():
    inst = subdiv_triangle()
    _, f, tr = grow(inst, 1)
    S = f.find(inst.vertices("s1"))
    P = extract_s_tight_path(tr, S, inst.vertex("v1"))
    [entry] = contribution_ledger(tr, P)
    assert entry.amounts == {S.id: Fraction(1, 2)}  # [DERIVED]
    assert entry.tight and entry.total == entry.threshold


def test_gap_gadget_center_edge():
    inst = gap_gadget()
    _, f, tr = grow(inst, Fraction(7, 8))
    arc = (inst.vertex("v2"), inst.vertex("v4"))
    entry = edge_ledger(tr, arc)
    s1, s2 = f.find(inst.vertices("s1")), f.find(inst.vertices("s2"))
    assert entry.amounts == {s1.id: Fraction(4, 15), s2.id: Fraction(4, 15)}  # [DERIVED]
    assert entry.total == Fraction(8, 15) == entry.threshold


def test_untight_edge_has_slack():
    inst = subdiv_triangle()
    _, _, tr = grow(inst, 1)
    arc = (inst.vertex("v1"), inst.vertex("s1"))  # loaded by nobody
    entry = edge_ledger(tr, arc)
    assert not entry.tight and entry.total < entry.threshold  # [TRIVIAL]


def test_ledger_rejects_foreign_edges():
    inst = subdiv_triangle()
    _, _, tr = grow(inst, 1)
    with pytest.raises(ValueError):
        edge_ledger(tr, (inst.vertex("s1"), inst.vertex("r")))


@pytest.mark.parametrize("inst", fixtures(), ids=lambda i: i.name)
@pytest.mark.parametrize("delta", [DEFAULT_DELTA, Fraction(1, 2)])
def test_ledger_conservation(inst, delta):
    _, _, tr = grow(inst, delta)
    for arc, t in tr.tight_time.items():
        assert edge_ledger(tr, arc).total == tr.threshold(*arc)
    for (u, w) in {arc for _, arc in tr.contributions}:
        assert edge_ledger(tr, (u, w)).total <= tr.threshold(u, w)


# chains

def test_only_start_contributors_give_no_chain():
    inst = subdiv_triangle()
    _, f, tr = grow(inst, 1)
    P = extract_s_tight_path(tr, f.find(inst.vertices("s1")), inst.vertex("v1"))
    dec = chain_decomposition(tr, f, P)
    assert dec.k == 0 and dec.contributing == ()  # [TRIVIAL]


def gadget():
    inst = potential_gadget(DEFAULT_DELTA)
    m, f, tr = grow(inst)
    return inst, m, f, tr


def test_gadget_gray_path_and_chain():
    inst, _, f, tr = gadget()
    start = f.find(inst.vertices("sstar"))
    P = extract_s_tight_path(tr, start, inst.vertex("c2"), at=Fraction(1))
    assert [inst.label(v) for v in P.vertices] == ["sstar", "b0", "a1", "b1", "a2", "b2", "c2"]
    dec = chain_decomposition(tr, f, P, Fraction(1))
    assert dec.passed and dec.k == 1
    assert [f.sets[i].members for i in dec.last_chain] == [inst.vertices("s")]


def test_gadget_potential_values():
    inst, _, f, tr = gadget()
    s = f.find(inst.vertices("s"))
    pi = potential(tr, f, [s.id], Fraction(1))
    d = DEFAULT_DELTA
    for x in ("a0", "a1", "a2"):
        assert pi[inst.vertex(x)] == Fraction(3, 2) * d / (1 + d)  # [PAPER]
    for x in ("b0", "b1", "b2"):
        assert pi[inst.vertex(x)] == d / (1 + d)  # [PAPER]
    for x in ("sstar", "r", "c1", "c2"):
        assert pi[inst.vertex(x)] == 0  # [TRIVIAL]
    assert pi[inst.vertex("s")] == 1  # the chain's own terminal keeps its growth time
    assert all(v >= 0 for v in pi.values())


def test_gadget_potential_inequality():
    inst, _, f, tr = gadget()
    s = f.find(inst.vertices("s"))
    v = potential_audit(tr, f, [s.id], Fraction(1))
    assert v.passed and v.checks > 0
    assert v.to_json()["status"] == "PASS"


def test_gadget_sweeps():
    _, _, f, tr = gadget()
    assert potential_sweep(tr, f).passed
    assert chain_sweep(tr, f).passed


@pytest.mark.parametrize("inst", fixtures(), ids=lambda i: i.name)
def test_potential_on_fixtures(inst):
    _, f, tr = grow(inst)
    assert potential_sweep(tr, f).passed  # [DERIVED]


@pytest.mark.parametrize("seed", range(30))
def test_potential_at_half(seed):
    # larger delta makes foreign sets load path edges, so the chains are nonempty
    rng = random.Random(seed)
    n = rng.randint(5, 12)
    inst = random_instance(n, rng.randint(2, min(8, n)), seed)
    _, f, tr = grow(inst, Fraction(1, 2))
    consts = replace(Constants(), delta=Fraction(1, 2))
    assert potential_sweep(tr, f, consts).passed


def test_potential_audit_catches_a_corrupted_ledger():
    inst, _, f, tr = gadget()
    s = f.find(inst.vertices("s"))
    clean = potential_audit(tr, f, [s.id], Fraction(1))
    u, w = (x - 1 for x in clean.worst_witness["edge"])  # zero slack here
    spans = tr.contributions[(s.id, (u, w))]
    forged = dict(tr.contributions)
    forged[(s.id, (u, w))] = spans + [(Fraction(0), Fraction(1, 100))]
    v = potential_audit(replace(tr, contributions=forged), f, [s.id], Fraction(1))
    assert not v.passed
    assert v.worst_witness["edge"] == [u + 1, w + 1]


# distance bound

def test_triangle_distance_audit():
    _, f, tr = grow(subdiv_triangle())
    v = distance_bound_audit(tr, f)
    c = Constants()
    assert v.passed and v.worst_ratio <= 1 + c.beta * c.delta  # [DERIVED]


def test_audits_need_whole_edge_traces():
    inst = subdiv_triangle()
    m = metric_closure(inst)
    f = build_merge_forest(m)
    tr = run_growth(m, f, GrowthConfig(mode="subdivide", epsilon=Fraction(1, 2)))
    with pytest.raises(ValueError):
        distance_bound_audit(tr, f)


@pytest.mark.parametrize("inst", list(random_locally_optimal(20)), ids=lambda i: i.name)
def test_audits_on_locally_optimal_instances(inst):
    _, f, tr = grow(inst)
    assert tr.completed
    assert distance_bound_audit(tr, f).passed  # [DERIVED]
    assert chain_sweep(tr, f).passed  # [DERIVED]
    assert potential_sweep(tr, f).passed


# local optimality

def test_local_optimality():
    m = metric_closure(subdiv_triangle())
    assert is_locally_optimal(m, build_merge_forest(m), Constants().gamma, 4)
    inst = potential_gadget(DEFAULT_DELTA)
    m = metric_closure(inst)
    f = build_merge_forest(m)
    found = improving_sets(m, f, Constants().gamma, 4)
    assert found and not is_locally_optimal(m, f, Constants().gamma, 4)
    for X, drop, cost in found:
        assert drop >= (1 + Constants().gamma) * cost
