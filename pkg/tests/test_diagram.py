from itertools import permutations
import math

import pytest

from peelbound.core.errors import ContractViolation, InstanceError
from peelbound.services.builder import build_structure, weight_phase_one, weight_phase_two
from peelbound.services.diagram import (
    Diagram,
    enumerate_paths,
    export_text,
    filter,
    path_labels,
    peel,
    recompute_bounds,
    refine,
    shortest_path,
    split_node,
)


def permutation_paths(d: Diagram):
    """Label sequences that are permutations, with their weight sums"""
    return {labels: cost for labels, cost in enumerate_paths(d) if len(set(labels)) == len(labels)}


@pytest.fixture
def weighted(grid_factory):
    instance, model, memo = grid_factory(4, seed=1)
    d = build_structure(4, width=64)
    weight_phase_one(d, memo)
    weight_phase_two(d, memo, math.inf)
    return d, memo


def test_structure_holds_every_permutation():
    d = build_structure(3, width=8)
    filter(d)
    paths = permutation_paths(d)
    assert set(paths) == set(permutations([1, 2, 3]))
    assert all(cost == 0.0 for cost in paths.values())
    assert [len(layer) for layer in d.layers] == [1, 3, 3, 3, 1]


def test_structure_needs_two_asteroids():
    with pytest.raises(InstanceError):
        build_structure(1, width=8)


def test_width_must_be_positive():
    with pytest.raises(ContractViolation):
        Diagram(3, 0)


def test_weights_are_lower_bounds_on_tour_costs(weighted):
    d, memo = weighted
    paths = permutation_paths(d)
    assert set(paths) == set(permutations([1, 2, 3, 4]))
    for labels, weight in paths.items():
        cost, _ = memo.trie_evaluate([0, *labels])
        assert weight <= cost + 1e-9


def test_shortest_path_value_matches_enumeration(weighted):
    d, _ = weighted
    path = shortest_path(d)
    weight = sum(d.arcs[a].weight for a in path)
    assert weight == pytest.approx(d.v_star)
    assert d.v_star == pytest.approx(min(cost for _, cost in enumerate_paths(d)))
    assert path_labels(d, path)[0] == 0


def test_split_preserves_permutation_paths(weighted):
    d, _ = weighted
    before = permutation_paths(d)
    node = next(d.nodes[x] for x in d.layers[2] if len(d.nodes[x].in_arcs) >= 2)
    phi = d.nodes[d.arcs[node.in_arcs[0]].tail].label
    twin = split_node(d, node.id, phi)
    assert twin is not None
    filter(d)
    assert permutation_paths(d) == before


def test_split_of_root_is_rejected(weighted):
    d, _ = weighted
    with pytest.raises(ContractViolation):
        split_node(d, d.root, 1)


def test_peel_partitions_paths(weighted):
    d, _ = weighted
    before = permutation_paths(d)
    u = d.layers[1][0]
    label = d.nodes[u].label
    peeled, remainder = peel(d, u)
    through = permutation_paths(peeled)
    rest = permutation_paths(remainder)
    assert set(through).isdisjoint(rest)
    assert {**through, **rest} == before
    assert all(labels[0] == label for labels in through)
    assert peeled.prefix_depth == 1


def test_peel_needs_an_exact_node(weighted):
    d, _ = weighted
    inexact = d.layers[2][0]
    with pytest.raises(ContractViolation):
        peel(d, inexact)


def test_refine_respects_width_and_tightens(weighted):
    d, memo = weighted
    before = permutation_paths(d)
    v_before = d.v_star
    d.width = 6
    splits = refine(d, math.inf, memo)
    assert splits > 0
    assert d.max_width() <= 6
    assert d.v_star >= v_before - 1e-9
    after = permutation_paths(d)
    assert set(after) == set(before)
    for labels, weight in after.items():
        assert weight >= before[labels] - 1e-9
        cost, _ = memo.trie_evaluate([0, *labels])
        assert weight <= cost + 1e-9


def test_filter_with_tiny_incumbent_empties_diagram(weighted):
    d, _ = weighted
    filter(d, incumbent=d.v_star / 2.0)
    assert d.is_empty
    assert shortest_path(d) is None
    assert enumerate_paths(d) == []


def test_copy_is_independent(weighted):
    d, _ = weighted
    other = d.copy()
    other.remove_node(other.layers[1][0])
    assert len(d.layers[1]) == 4


def test_export_text_lists_nodes_and_arcs(weighted):
    d, _ = weighted
    text = export_text(d)
    assert text.startswith("diagram n=4")
    assert text.count("\nnode ") == len(d.nodes)
    assert text.count("\narc ") == len(d.arcs)


def test_recompute_bounds_matches_path_enumeration(weighted):
    d, _ = weighted
    recompute_bounds(d)
    cheapest = min(cost for _, cost in enumerate_paths(d))
    assert d.v_star == pytest.approx(cheapest)
    assert d.nodes[d.root].z_up == pytest.approx(cheapest)
    for layer in d.layers[1:-1]:
        for node_id in layer:
            node = d.nodes[node_id]
            assert node.z_down + node.z_up >= cheapest - 1e-9


def arc_paths(d: Diagram):
    """Every root-terminal path as (arc ids, weight sum)"""
    results = []
    stack = [(d.root, (), 0.0)]
    while stack:
        node_id, arcs, cost = stack.pop()
        if node_id == d.terminal:
            results.append((arcs, cost))
            continue
        for arc_id in d.nodes[node_id].out_arcs:
            stack.append((d.arcs[arc_id].head, arcs + (arc_id,), cost + d.arcs[arc_id].weight))
    return results


@pytest.mark.parametrize("quantile", [0.1, 0.5, 0.9])
def test_filter_survivors_match_enumeration(weighted, quantile):
    d, _ = weighted
    before = permutation_paths(d)
    incumbent = sorted(before.values())[int(quantile * (len(before) - 1))]

    filter(d, incumbent)
    after = permutation_paths(d)
    assert {labels for labels, cost in before.items() if cost <= incumbent} <= set(after)
    assert all(before[labels] == pytest.approx(cost) for labels, cost in after.items())

    paths = arc_paths(d)
    for arc_id in d.arcs:
        cheapest = min(cost for arcs, cost in paths if arc_id in arcs)
        assert cheapest <= incumbent + 1e-6


def three_asteroid_diagram():
    """A=1, B=2, C=3; cheap arcs make the relaxed shortest path A-B-A"""
    d = build_structure(3, width=8)
    for arc in d.arcs.values():
        if arc.head == d.terminal:
            arc.weight = 0.0
        elif arc.tail == d.root:
            arc.weight = 1.0 if arc.label == 1 else 10.0
        else:
            pair = (d.nodes[arc.tail].label, arc.label)
            arc.weight = 1.0 if pair in {(1, 2), (2, 1)} else 10.0
    filter(d)
    return d


def test_split_separates_the_two_routes_through_b():
    d = three_asteroid_diagram()
    b = next(x for x in d.layers[2] if d.nodes[x].label == 2)
    assert {d.nodes[d.arcs[a].tail].label for a in d.nodes[b].in_arcs} == {1, 3}
    assert {d.arcs[a].label for a in d.nodes[b].out_arcs} == {1, 3}
    before = permutation_paths(d)

    twin = split_node(d, b, 1)
    assert twin is not None
    for node_id, came_from, goes_to in [(twin, 1, 3), (b, 3, 1)]:
        node = d.nodes[node_id]
        assert [d.nodes[d.arcs[a].tail].label for a in node.in_arcs] == [came_from]
        assert [d.arcs[a].label for a in node.out_arcs] == [goes_to]
    filter(d)
    assert permutation_paths(d) == before
    assert (1, 2, 1) not in dict(enumerate_paths(d))


def test_refine_lifts_the_bound_past_a_repeated_label():
    d = three_asteroid_diagram()
    assert d.v_star == 3.0
    assert path_labels(d, shortest_path(d)) == [0, 1, 2, 1]

    splits = refine(d)
    assert splits > 0
    assert d.v_star > 3.0
    assert d.v_star == pytest.approx(12.0)
    assert set(permutation_paths(d)) == set(permutations([1, 2, 3]))
