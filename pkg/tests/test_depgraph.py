import itertools

from hypothesis import given, settings, strategies as st

from rearrange.depgraph import (
    DependencyGraph, build, components, is_monotone, is_simple_cycle, placement_order, scc,
)
from rearrange.geometry import CheckCounter, collides
from rearrange.model import Action, SG, gen_random, validate_plan

from conftest import disc_instance, k3_plus_one, three_cycle

K3 = DependencyGraph.from_edges(3, [(a, b) for a in range(3) for b in range(3) if a != b])


def test_far_goals_no_edges():
    inst = disc_instance([(2, 2), (2, 5)], [(8, 2), (8, 5)])
    assert build(inst.start, inst.goal, inst).edges == set()


def test_three_cycle_edges():
    inst = three_cycle()
    g = build(inst.start, inst.goal, inst)
    assert g.edges == {(0, 1), (1, 2), (2, 0)}
    assert not is_monotone(g)
    assert is_simple_cycle(g, [0, 1, 2])


def test_own_start_overlap_makes_no_edge():
    inst = disc_instance([(5, 5)], [(5.5, 5)])
    assert build(inst.start, inst.goal, inst).edges == set()


def test_k3_instance_and_components():
    inst = k3_plus_one()
    g = build(inst.start, inst.goal, inst)
    assert g.edges == K3.edges
    assert components(g) == [[0, 1, 2], [3]]
    assert scc(g) == [[0, 1, 2], [3]]
    assert not is_monotone(K3)


def test_empty_graph_components():
    g = DependencyGraph.from_edges(4, [])
    assert is_monotone(g)
    assert components(g) == [[0], [1], [2], [3]]
    assert placement_order(g) == [0, 1, 2, 3]


def test_cycle_plus_isolated():
    g = DependencyGraph.from_edges(4, [(0, 1), (1, 2), (2, 0)])
    assert components(g) == [[0, 1, 2], [3]]
    assert scc(g) == [[0, 1, 2], [3]]
    assert placement_order(g) is None


def test_scc_topological_order():
    # {0,1} -> {2} -> {3,4}
    g = DependencyGraph.from_edges(5, [(0, 1), (1, 0), (1, 2), (2, 3), (3, 4), (4, 3)])
    assert scc(g) == [[0, 1], [2], [3, 4]]


def test_build_matches_pairwise_enumeration_and_check_bound():
    for seed in range(5):
        inst = gen_random(15, 0.4, "rect" if seed % 2 else "disc", seed=seed)
        c = CheckCounter()
        g = build(inst.start, inst.goal, inst, c)
        n = inst.n
        assert c.count <= n * (n - 1)
        shapes = inst.shapes
        expect = {(i, j) for i, j in itertools.permutations(range(n), 2)
                  if collides(shapes[i], inst.goal[i], shapes[j], inst.start[j])}
        assert g.edges == expect


def test_same_arrangement_gives_empty_graph():
    inst = gen_random(20, 0.5, seed=2)
    assert build(inst.start, inst.start, inst).edges == set()


def test_monotone_instance_topological_execution():
    found = 0
    for seed in range(40):
        inst = gen_random(8, 0.2, seed=seed)
        g = build(inst.start, inst.goal, inst)
        if not is_monotone(g):
            continue
        found += 1
        plan = [Action(i, inst.goal[i], SG) for i in placement_order(g)]
        assert validate_plan(plan, inst).ok
    assert found >= 5


def test_dot_dump():
    dot = DependencyGraph.from_edges(2, [(0, 1)]).to_dot()
    assert dot.startswith("digraph") and "0 -> 1;" in dot


@st.composite
def graphs(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return DependencyGraph.from_edges(n, chosen)


@given(graphs())
@settings(max_examples=200, deadline=None)
def test_monotone_iff_topological_order_exists(g):
    order = placement_order(g)
    assert is_monotone(g) == (order is not None)
    if order is not None:
        pos = {v: k for k, v in enumerate(order)}
        assert all(pos[j] < pos[i] for i, j in g.edges)


@given(graphs())
@settings(max_examples=200, deadline=None)
def test_scc_partition_and_order(g):
    comps = scc(g)
    assert sorted(v for c in comps for v in c) == list(range(g.n))
    where = {v: k for k, c in enumerate(comps) for v in c}
    for i, j in g.edges:
        assert where[i] <= where[j]
    # vertices share a component iff mutually reachable
    reach = [[i == j for j in range(g.n)] for i in range(g.n)]
    for i, j in g.edges:
        reach[i][j] = True
    for k in range(g.n):
        for i in range(g.n):
            for j in range(g.n):
                reach[i][j] = reach[i][j] or (reach[i][k] and reach[k][j])
    for i in range(g.n):
        for j in range(g.n):
            assert (where[i] == where[j]) == (reach[i][j] and reach[j][i])
