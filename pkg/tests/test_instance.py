from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixtures, random_small
from moatforge.families import (FamilyError, cycle, gap_gadget, generate_family, spider,
                                subdiv_triangle)
from moatforge.instance import (Instance, InstanceError, ParseError, SegmentBudgetError,
                                complete_graph, contract_terminals, metric_closure,
                                parse_instance, render_instance, subdivide, subdivision_epsilon)
from moatforge.merge import terminal_mst
from moatforge.rationals import fmt, parse_rational


# rationals

def test_decimal_strings_parse_exactly():
    assert parse_rational("0.00858") == Fraction(429, 50000)  # [TRIVIAL]
    assert parse_rational("7/8") == Fraction(7, 8)
    assert fmt(Fraction(4)) == "4/1"


def test_floats_are_rejected():
    with pytest.raises(TypeError):
        parse_rational(0.5)


# parsing

def test_smallest_native_instance():
    inst = parse_instance("nodes 2\nedge 1 2 5/1\nterminal 1\nterminal 2\nroot 1\n")
    assert (inst.vertex_count, inst.edge_count, len(inst.terminals)) == (2, 1, 2)  # [TRIVIAL]


STP = "\n".join([
    "33D32945 STP File, STP Format Version 1.0",
    "SECTION Graph", "Nodes 3", "Edges 3", "E 1 2 1", "E 2 3 1", "E 1 3 1", "END",
    "SECTION Terminals", "Terminals 2", "T 1", "T 3", "END",
    "EOF", ""])


def test_stp_transcription():
    inst = parse_instance(STP, "stp")
    assert (inst.vertex_count, inst.edge_count, len(inst.terminals)) == (3, 3, 2)  # [TRIVIAL]
    assert inst.root == 0


def test_stp_root_override():
    assert parse_instance(STP, "stp", root=3).root == 2


def test_root_must_be_terminal():
    with pytest.raises(ParseError, match="root not a terminal"):  # [TRIVIAL]
        parse_instance("nodes 7\nedge 1 7 1\nterminal 1\nroot 7\n")


@pytest.mark.parametrize("text, message", [
    ("nodes 2\nedge 1 2 0\nterminal 1\nroot 1\n", "nonpositive"),
    ("nodes 2\nedge 1 2 1\nedge 2 1 3\nterminal 1\nroot 1\n", "duplicate edge"),
    ("nodes 3\nedge 1 2 1\nterminal 1\nroot 1\n", "disconnected"),
    ("nodes 2\nedge 1 2 0.5\nterminal 1\nroot 1\nroot 1\n", "more than one root"),
    ("nodes 2\nedge 1 2 x\nterminal 1\nroot 1\n", "line 2"),
])
def test_parse_rejections(text, message):
    with pytest.raises(InstanceError, match=message):
        parse_instance(text)


@pytest.mark.parametrize("inst", fixtures(), ids=lambda i: i.name)
def test_native_round_trip_is_byte_stable(inst):
    text = render_instance(inst)
    again = parse_instance(text)
    assert again == inst
    assert render_instance(again) == text


@pytest.mark.parametrize("inst", fixtures(), ids=lambda i: i.name)
def test_stp_round_trip(inst):
    again = parse_instance(render_instance(inst, "stp"), "stp")
    # STP lists the root first, so only the terminal set is preserved
    assert (again.vertex_count, again.edges, again.root) == (inst.vertex_count, inst.edges, inst.root)
    assert set(again.terminals) == set(inst.terminals)


# generators

def test_subdiv_triangle_shape():
    inst = subdiv_triangle()
    assert inst.vertex_count == 6 and inst.edge_count == 6  # [PAPER]
    assert {c for _, _, c in inst.edges} == {1}
    assert set(inst.terminals) == inst.vertices("s1", "s2", "r")


def test_spider_shape():
    inst = spider(3, 5)
    assert (inst.vertex_count, inst.edge_count, len(inst.terminals)) == (10, 9, 9)  # [PAPER]


def test_cycle_terminal_positions():
    inst = cycle(20, 5)
    assert sorted(inst.terminals) == [0, 4, 8, 12, 16]  # [PAPER]
    assert inst.edge_count == 20


def test_unknown_family():
    with pytest.raises(FamilyError):
        generate_family("octopus")


def test_random_family_is_seeded():
    a = generate_family("random", {"n": 9, "k": 4, "seed": 3})
    b = generate_family("random", {"n": 9, "k": 4, "seed": 3})
    assert render_instance(a) == render_instance(b)


# metric closure

def test_closure_distances(triangle, gadget):
    t, g = subdiv_triangle(), gap_gadget()
    assert triangle.dist[t.vertex("s1")][t.vertex("s2")] == 2  # [DERIVED]
    assert gadget.dist[g.vertex("s1")][g.vertex("r")] == 4  # [DERIVED]


def test_single_edge_distance():
    m = metric_closure(Instance(2, ((0, 1, Fraction(5)),), (0, 1), 0))
    assert m.dist[0][1] == 5  # [TRIVIAL]


@pytest.mark.parametrize("seed", range(10))
def test_closure_is_idempotent_and_metric(seed):
    m = metric_closure(random_small(seed))
    again = metric_closure(complete_graph(m))
    assert again.dist == m.dist
    n = m.n
    for u in range(n):
        for v in range(n):
            for w in range(n):
                assert m.dist[u][w] <= m.dist[u][v] + m.dist[v][w]


def test_closure_matches_networkx():
    nx = pytest.importorskip("networkx")
    for seed in range(5):
        inst = random_small(seed, n_max=12)
        g = nx.Graph()
        g.add_weighted_edges_from(inst.edges)
        ref = dict(nx.all_pairs_dijkstra_path_length(g))
        m = metric_closure(inst)
        assert all(m.dist[u][v] == ref[u][v] for u in ref for v in ref[u])


# contraction

def test_singleton_contraction_is_identity():
    inst = subdiv_triangle()
    out, mapping = contract_terminals(inst, {inst.vertex("s1")})
    assert out == inst  # [TRIVIAL]
    assert mapping == tuple(range(inst.vertex_count))


def test_contracting_two_legs_of_a_spider():
    inst = spider(2, 2)
    out, _ = contract_terminals(inst, inst.vertices("s1", "s2"))
    assert terminal_mst(metric_closure(out))[1] == 4  # [DERIVED]


def test_full_contraction_leaves_one_terminal():
    inst = subdiv_triangle()
    out, _ = contract_terminals(inst, inst.terminals)
    assert len(out.terminals) == 1  # [TRIVIAL]


# subdivision

def test_triangle_whole_edges_at_unit_eps_prime():
    inst = subdiv_triangle()
    assert subdivision_epsilon(inst, Fraction(1)) == 1  # [DERIVED]
    assert subdivide(inst, Fraction(1)).segment_count == 6


def test_forced_epsilon_ceiling():
    inst = Instance(2, ((0, 1, Fraction(1)),), (0, 1), 0)
    sub = subdivide(inst, Fraction(1), epsilon=Fraction(3, 10))
    assert sub.segment_costs == (Fraction(1, 4),)  # [TRIVIAL]
    assert sub.segment_count == 4


def test_default_eps_prime_exceeds_budget():
    inst = subdiv_triangle()
    assert subdivision_epsilon(inst, Fraction(1, 10**7)) == Fraction(1, 10**7)  # [PAPER]
    with pytest.raises(SegmentBudgetError):
        subdivide(inst, Fraction(1, 10**7))


def test_budget_from_environment(monkeypatch):
    monkeypatch.setenv("MOATFORGE_SEGMENT_BUDGET", "5")
    with pytest.raises(SegmentBudgetError):
        subdivide(subdiv_triangle(), Fraction(1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.fractions(min_value=Fraction(1, 7), max_value=3))
def test_subdivision_preserves_costs(seed, eps):
    inst = random_small(seed)
    sub = subdivide(inst, Fraction(1), epsilon=eps)
    for (u, v, c), chain, seg in zip(inst.edges, sub.chains, sub.segment_costs):
        assert (chain[0], chain[-1]) == (u, v)
        assert seg * (len(chain) - 1) == c
        assert seg <= eps
