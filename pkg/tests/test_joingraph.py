import numpy as np
import pytest

from conftest import random_acyclic_schemas, random_connected_graph
from rpt.joingraph import (
    AcyclicityClass,
    DisconnectedGraphError,
    JoinGraphError,
    JoinTree,
    build_join_graph,
    classify_acyclicity,
    derive_schedule,
    gyo_reduce,
    is_join_tree,
    largest_root,
    mst_weight,
    safe_subjoin,
    small2large_schedule,
)
from rpt.oracle import all_spanning_trees, max_spanning_tree_weight

FIG2 = {"R": ("A", "B"), "S": ("A", "C"), "T": ("B", "D")}
COMPOSITE3 = {"R": ("A", "B", "C"), "S": ("A", "B"), "T": ("B", "C")}
CHAIN3 = {"R": ("A", "B"), "S": ("B", "C"), "T": ("C", "D")}
TRIANGLE = {"R": ("A", "B"), "S": ("B", "C"), "T": ("C", "A")}


def weights(g):
    return {(e.u, e.v): e.weight for e in g.edges}


def test_build_join_graph_fig2():
    g = build_join_graph(FIG2)
    assert weights(g) == {("R", "S"): 1, ("R", "T"): 1}


def test_build_join_graph_composite():
    g = build_join_graph(COMPOSITE3)
    assert weights(g) == {("R", "S"): 2, ("R", "T"): 2, ("S", "T"): 1}


def test_build_join_graph_single_relation():
    g = build_join_graph({"R": ("A",)})
    assert g.vertices == ("R",)
    assert g.edges == ()


def test_disconnected_graph_reports_components():
    with pytest.raises(DisconnectedGraphError) as err:
        build_join_graph({"R": ("A",), "S": ("B",)})
    assert sorted(sorted(c) for c in err.value.components) == [["R"], ["S"]]


def test_largest_root_fig2_fixes_small2large():
    g = build_join_graph(FIG2)
    t = largest_root(g, {"R": 5, "S": 8, "T": 10})
    assert t.root == "T"
    assert t.edges == (("R", "T"), ("S", "R"))


def test_largest_root_composite_mst_weight_4():
    g = build_join_graph(COMPOSITE3)
    t = largest_root(g, {"R": 9, "S": 5, "T": 5})
    assert t.root == "R"
    assert set(t.edges) == {("S", "R"), ("T", "R")}
    assert g.total_weight(t.edges) == 4 == max_spanning_tree_weight(g)


def test_largest_root_single_vertex():
    g = build_join_graph({"R": ("A",)})
    t = largest_root(g, {"R": 3})
    assert t.root == "R"
    assert t.edges == ()


def test_is_join_tree_composite_center():
    g = build_join_graph(COMPOSITE3)
    assert is_join_tree(JoinTree("R", (("S", "R"), ("T", "R"))), g)


def test_is_join_tree_rejects_disconnected_attr():
    g = build_join_graph(COMPOSITE3)
    # path S - T - R: attribute A appears in S and R but not T
    assert not is_join_tree(JoinTree("R", (("S", "T"), ("T", "R"))), g)


def test_is_join_tree_single_edge():
    g = build_join_graph({"R": ("A",), "S": ("A",)})
    assert is_join_tree(JoinTree("S", (("R", "S"),)), g)


@pytest.mark.parametrize(
    "schemas,expected",
    [
        (COMPOSITE3, AcyclicityClass.ALPHA_ACYCLIC_ONLY),
        (TRIANGLE, AcyclicityClass.CYCLIC),
        (CHAIN3, AcyclicityClass.GAMMA_ACYCLIC),
        (FIG2, AcyclicityClass.GAMMA_ACYCLIC),
    ],
)
def test_classify_acyclicity(schemas, expected):
    assert classify_acyclicity(build_join_graph(schemas)) is expected


def test_gamma_pattern_needs_all_three_groups():
    # identical schemas carry no x or z group: still gamma-acyclic
    g = build_join_graph({"R": ("A", "B"), "S": ("A", "B"), "T": ("A", "B")})
    assert classify_acyclicity(g) is AcyclicityClass.GAMMA_ACYCLIC


@pytest.mark.parametrize(
    "schemas,expected",
    [(CHAIN3, True), (TRIANGLE, False), ({"R": ("A",)}, True), (COMPOSITE3, True)],
)
def test_gyo_reduce(schemas, expected):
    assert gyo_reduce(build_join_graph(schemas)) is expected


def test_safe_subjoin_composite_instance():
    g = build_join_graph(COMPOSITE3)
    assert safe_subjoin(g, {"R", "S"})
    assert safe_subjoin(g, {"R", "T"})
    assert not safe_subjoin(g, {"S", "T"})
    assert safe_subjoin(g, {"R", "S", "T"})


def test_safe_subjoin_disconnected_subset_rejected():
    g = build_join_graph(CHAIN3)
    with pytest.raises(DisconnectedGraphError):
        safe_subjoin(g, {"R", "T"})


def test_derive_schedule_path():
    g = build_join_graph(COMPOSITE3)
    t = JoinTree("T", (("R", "T"), ("S", "R")))
    sched = derive_schedule(t, g)
    assert [(s.target, s.source) for s in sched.forward] == [("R", "S"), ("T", "R")]
    assert [(s.target, s.source) for s in sched.backward] == [("R", "T"), ("S", "R")]


def test_derive_schedule_star_child_order():
    g = build_join_graph({"F": ("A", "B"), "D1": ("A",), "D2": ("B",)})
    t = JoinTree("F", (("D1", "F"), ("D2", "F")))
    sched = derive_schedule(t, g)
    assert [(s.target, s.source) for s in sched.forward] == [("F", "D1"), ("F", "D2")]
    assert [(s.target, s.source) for s in sched.backward] == [("D1", "F"), ("D2", "F")]


def test_derive_schedule_single_vertex():
    g = build_join_graph({"R": ("A",)})
    sched = derive_schedule(JoinTree("R", ()), g)
    assert sched.forward == () and sched.backward == ()


def test_small2large_fig2_never_connects_s_and_t():
    g = build_join_graph(FIG2)
    sched = small2large_schedule(g, {"R": 5, "S": 8, "T": 10})
    assert [(s.target, s.source) for s in sched.forward] == [("S", "R"), ("T", "R")]
    assert [(s.target, s.source) for s in sched.backward] == [("R", "S"), ("R", "T")]


def test_small2large_two_relations():
    g = build_join_graph({"R": ("A",), "S": ("A",)})
    sched = small2large_schedule(g, {"R": 3, "S": 9})
    assert [(s.target, s.source) for s in sched.forward] == [("S", "R")]
    assert [(s.target, s.source) for s in sched.backward] == [("R", "S")]


def test_small2large_tie_breaks_by_name():
    g = build_join_graph({"R": ("A",), "S": ("A",)})
    sched = small2large_schedule(g, {"R": 5, "S": 5})
    assert [(s.target, s.source) for s in sched.forward] == [("S", "R")]


def _info_flows_everywhere(schedule, vertices) -> bool:
    tokens = {v: {v} for v in vertices}
    for step in list(schedule.forward) + list(schedule.backward):
        tokens[step.target] |= tokens[step.source]
    full = set(vertices)
    return all(tokens[v] == full for v in vertices)


def test_schedule_completeness_on_random_trees():
    rng = np.random.default_rng(5)
    for _ in range(150):
        schemas = random_acyclic_schemas(rng)
        g = build_join_graph(schemas)
        cards = {n: int(rng.integers(1, 100)) for n in g.vertices}
        t = largest_root(g, cards)
        sched = derive_schedule(t, g)
        assert _info_flows_everywhere(sched, g.vertices)
        # each tree edge appears exactly once per pass
        per_pass = [{frozenset((s.target, s.source)) for s in sched.forward},
                    {frozenset((s.target, s.source)) for s in sched.backward}]
        tree_edges = {frozenset(e) for e in t.edges}
        assert per_pass[0] == tree_edges and per_pass[1] == tree_edges
        assert len(sched.forward) == len(tree_edges) == len(sched.backward)


def test_small2large_fig2_info_flow_breaks():
    g = build_join_graph(FIG2)
    sched = small2large_schedule(g, {"R": 5, "S": 8, "T": 10})
    assert not _info_flows_everywhere(sched, g.vertices)


def test_backward_is_level_order_parent_first():
    rng = np.random.default_rng(11)
    for _ in range(50):
        g = build_join_graph(random_acyclic_schemas(rng))
        t = largest_root(g, {n: int(rng.integers(1, 50)) for n in g.vertices})
        sched = derive_schedule(t, g)
        reduced_by_parent = {t.root}
        for step in sched.backward:
            assert step.source in reduced_by_parent
            reduced_by_parent.add(step.target)


def test_mst_equivalence_bruteforce_500_graphs():
    rng = np.random.default_rng(99)
    for _ in range(500):
        g = random_connected_graph(rng)
        cards = {n: int(rng.integers(1, 1000)) for n in g.vertices}
        assert g.total_weight(largest_root(g, cards).edges) == max_spanning_tree_weight(g)


def test_alpha_verdict_agrees_with_gyo_500_graphs():
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(500):
        g = random_connected_graph(rng)
        alpha = classify_acyclicity(g) is not AcyclicityClass.CYCLIC
        assert alpha == gyo_reduce(g)
        agree += 1
    assert agree == 500


def test_join_tree_characterization_on_random_acyclic_graphs():
    # a spanning tree is a join tree iff its weight matches the brute-force MST weight
    rng = np.random.default_rng(21)
    for _ in range(60):
        g = build_join_graph(random_acyclic_schemas(rng, max_relations=6))
        assert classify_acyclicity(g) is not AcyclicityClass.CYCLIC
        best = max_spanning_tree_weight(g)
        for edges in all_spanning_trees(g):
            weight = sum(e.weight for e in edges)
            # orient the tree from an arbitrary root to call is_join_tree
            adj = {}
            for e in edges:
                adj.setdefault(e.u, []).append(e.v)
                adj.setdefault(e.v, []).append(e.u)
            root = g.vertices[0]
            directed, stack, seen = [], [root], {root}
            while stack:
                v = stack.pop()
                for w in adj.get(v, ()):
                    if w not in seen:
                        seen.add(w)
                        directed.append((w, v))
                        stack.append(w)
            tree = JoinTree(root, tuple(directed))
            assert is_join_tree(tree, g) == (weight == best)


def test_safety_characterization_on_random_gamma_acyclic():
    rng = np.random.default_rng(33)
    checked = 0
    while checked < 40:
        g = build_join_graph(random_acyclic_schemas(rng, max_relations=6))
        if classify_acyclicity(g) is not AcyclicityClass.GAMMA_ACYCLIC:
            continue
        checked += 1
        cards = {n: int(rng.integers(1, 50)) for n in g.vertices}
        names = list(g.vertices)
        # every connected subset of a gamma-acyclic query is safe
        for mask in range(1, 2 ** len(names)):
            subset = {names[i] for i in range(len(names)) if mask >> i & 1}
            try:
                assert safe_subjoin(g, subset, cards)
            except DisconnectedGraphError:
                pass


def test_largest_root_tie_breaks_are_deterministic():
    g = build_join_graph({"A": ("X",), "B": ("X",), "C": ("X",)})
    cards = {"A": 5, "B": 5, "C": 5}
    t1 = largest_root(g, cards)
    t2 = largest_root(g, cards)
    assert t1 == t2
    assert t1.root == "C"  # largest name wins the cardinality tie


def test_join_tree_validation():
    with pytest.raises(JoinGraphError):
        JoinTree("R", (("S", "S"),))
    with pytest.raises(JoinGraphError):
        JoinTree("R", (("S", "T"), ("T", "S")))
