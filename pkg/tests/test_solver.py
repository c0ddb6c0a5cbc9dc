import math

import pytest

from peelbound.core.errors import ContractViolation
from peelbound.schemas.solver import PeelStrategy, QueueOrder, SolverConfig
from peelbound.services.builder import construct, promote_exact
from peelbound.services.diagram import Diagram, peel, shortest_path
from peelbound.services.instance import generate
from peelbound.services.memo import BoundMemo
from peelbound.services.solver import (
    DiagramQueue,
    peel_and_bound,
    select_diagram,
    select_exact_node,
    summarize,
)
from peelbound.services.transfer import LambertTransferModel

from conftest import GridTransferModel, brute_force


def _diagram_with_bound(v_star: float, depth: int = 0) -> Diagram:
    d = Diagram(3, 4)
    d.nodes[d.terminal].z_down = v_star
    d.prefix_depth = depth
    return d


def assert_monotone_trace(trace, tolerance=1e-9):
    assert trace
    for prev, cur in zip(trace, trace[1:]):
        assert cur.lb >= prev.lb
        assert cur.ub <= prev.ub
        assert cur.t_wall >= prev.t_wall
    for record in trace:
        assert record.lb <= record.ub + tolerance


# ==================== QUEUE ====================

def test_worst_bound_queue_pops_smallest_bound_then_oldest():
    queue = DiagramQueue(QueueOrder.WORST_BOUND)
    first, second, third = _diagram_with_bound(7.0), _diagram_with_bound(5.0), _diagram_with_bound(5.0)
    for d in (first, second, third):
        queue.push(d)
    assert queue.min_bound() == 5.0
    assert select_diagram(queue) is second
    assert select_diagram(queue) is third
    assert select_diagram(queue) is first
    assert select_diagram(queue) is None


def test_dfs_queue_pops_deepest_prefix_first():
    queue = DiagramQueue(QueueOrder.DFS)
    shallow, deep, deep_cheap = _diagram_with_bound(1.0, 2), _diagram_with_bound(9.0, 4), _diagram_with_bound(3.0, 4)
    for d in (shallow, deep, deep_cheap):
        queue.push(d)
    assert select_diagram(queue) is deep_cheap
    assert select_diagram(queue) is deep
    assert select_diagram(queue) is shallow


# ==================== NODE SELECTION ====================

def test_both_strategies_pick_a_layer_one_node_on_a_fresh_diagram(grid_factory):
    instance, _, memo = grid_factory(4, seed=5)
    d, _, _, _ = construct(instance, memo, SolverConfig(dd_width=64))
    path_heads = {d.arcs[a].head for a in shortest_path(d)}
    for strategy in PeelStrategy:
        node = select_exact_node(d, strategy)
        assert node in path_heads
        assert d.nodes[node].layer == 1


def test_last_exact_goes_below_a_promoted_prefix(grid_factory):
    instance, _, memo = grid_factory(4, seed=5)
    d, _, _, _ = construct(instance, memo, SolverConfig(dd_width=64))
    peeled, _ = peel(d, select_exact_node(d, PeelStrategy.MAXIMAL))
    promote_exact(peeled, memo)
    path_heads = {peeled.arcs[a].head for a in shortest_path(peeled)}

    maximal = select_exact_node(peeled, PeelStrategy.MAXIMAL)
    last = select_exact_node(peeled, PeelStrategy.LAST_EXACT)
    assert maximal in path_heads and last in path_heads
    assert peeled.nodes[maximal].layer == 2
    assert peeled.nodes[last].layer >= 2
    assert peeled.nodes[last].exact


def test_selection_on_empty_diagram_fails():
    d = Diagram(3, 4)
    with pytest.raises(ContractViolation):
        select_exact_node(d, PeelStrategy.MAXIMAL)


# ==================== PEEL AND BOUND ====================

@pytest.mark.parametrize("n,seed", [(4, 1), (4, 2), (5, 3), (5, 4), (6, 5)])
def test_solver_matches_enumeration(grid_factory, n, seed):
    instance, model, memo = grid_factory(n, seed=seed)
    result = peel_and_bound(instance, SolverConfig(dd_width=64, search_width=400, time_limit=600), model, memo)
    optimum, _ = brute_force(instance, memo)
    assert result.proven_optimal
    assert result.cost == optimum
    assert memo.trie_evaluate(result.tour)[0] == optimum
    assert result.lb == result.cost
    assert_monotone_trace(result.trace)


@pytest.mark.parametrize("peel_strategy", list(PeelStrategy))
@pytest.mark.parametrize("queue_order", list(QueueOrder))
def test_narrow_settings_stay_exact(grid_factory, peel_strategy, queue_order):
    instance, model, memo = grid_factory(5, seed=21)
    config = SolverConfig(
        dd_width=2, search_width=1, peel_strategy=peel_strategy, queue_order=queue_order, time_limit=600,
    )
    result = peel_and_bound(instance, config, model, memo)
    optimum, _ = brute_force(instance, memo)
    assert result.proven_optimal
    assert result.cost == optimum
    assert_monotone_trace(result.trace)


def test_no_relaxed_evaluations_after_construction(grid_factory):
    instance, model, memo = grid_factory(5, seed=7)
    result = peel_and_bound(instance, SolverConfig(dd_width=4, search_width=2, time_limit=600), model, memo)
    n = instance.n
    assert model.bprime_calls == (n * n - n) + result.build.phase2_calls
    assert model.bcapped_calls == 0


def test_est_eat_keeps_the_solver_exact(grid_factory):
    instance, model, memo = grid_factory(5, seed=9)
    config = SolverConfig(dd_width=8, search_width=4, enable_est_eat=True, time_limit=600)
    result = peel_and_bound(instance, config, model, memo)
    optimum, _ = brute_force(instance, memo)
    assert result.proven_optimal
    assert result.cost == optimum


def test_single_asteroid_is_solved_without_a_diagram():
    instance = generate(1, 4)
    model = GridTransferModel(1, 4)
    result = peel_and_bound(instance, SolverConfig(), model)
    assert result.tour == [0, 1]
    assert result.proven_optimal
    assert result.cost == model.black_box(model.query(0, 1, 0.0)).z


def test_two_asteroids_pick_the_better_order(grid_factory):
    instance, model, memo = grid_factory(2, seed=3)
    result = peel_and_bound(instance, SolverConfig(time_limit=600), model, memo)
    forward, _ = memo.trie_evaluate([0, 1, 2])
    backward, _ = memo.trie_evaluate([0, 2, 1])
    assert result.proven_optimal
    assert result.cost == min(forward, backward)
    assert result.iterations <= 2


def test_time_limit_returns_best_so_far(grid_factory):
    instance, model, memo = grid_factory(7, seed=2)
    result = peel_and_bound(instance, SolverConfig(dd_width=4, search_width=1, time_limit=1e-9), model, memo)
    assert result.build.interrupted
    assert result.build.phase2_calls == 0
    assert model.bprime_calls == 7 * 7 - 7
    assert result.proven_optimal == (result.queue_remaining == 0)
    assert result.lb <= result.cost
    assert math.isfinite(result.cost)
    assert_monotone_trace(result.trace)


def test_trace_callback_sees_every_record(grid_factory):
    instance, model, memo = grid_factory(4, seed=1)
    seen = []
    result = peel_and_bound(instance, SolverConfig(time_limit=600), model, memo, on_trace=seen.append)
    assert seen == result.trace


def test_memo_model_drives_the_run(grid_factory):
    instance, model, memo = grid_factory(3, seed=6)
    result = peel_and_bound(instance, SolverConfig(time_limit=600), memo=memo)
    assert result.proven_optimal
    assert result.trace[-1].b_calls == model.b_calls > 0


def test_mismatched_model_and_memo_are_rejected(grid_factory):
    instance, _, memo = grid_factory(3, seed=6)
    with pytest.raises(ContractViolation):
        peel_and_bound(instance, SolverConfig(), GridTransferModel(3, 6), memo)


def test_summary_gap_is_relative_to_upper_bound(grid_factory):
    instance, model, memo = grid_factory(4, seed=1)
    config = SolverConfig(time_limit=600)
    result = peel_and_bound(instance, config, model, memo)
    summary = summarize(result, config)
    assert summary.proven_optimal
    assert summary.gap_percent == 0.0
    assert summary.ub == result.cost
    assert summary.counters["b_calls"] == model.b_calls

    result.proven_optimal = False
    result.lb = 0.9 * result.cost
    assert summarize(result, config).gap_percent == pytest.approx(10.0)


# ==================== LAMBERT END TO END ====================

@pytest.mark.slow
def test_lambert_solver_improves_on_nearest_neighbor():
    instance = generate(3, 42)
    model = LambertTransferModel(instance, multi=1)
    memo = BoundMemo(model)
    result = peel_and_bound(instance, SolverConfig(dd_width=64, search_width=50, time_limit=1800), model, memo)
    assert result.cost <= result.build.initial_ub
    assert result.cost == memo.trie_evaluate(result.tour)[0]
    assert sorted(result.tour) == [0, 1, 2, 3]
    ubs = [record.ub for record in result.trace]
    assert all(a >= b for a, b in zip(ubs, ubs[1:]))


@pytest.mark.slow
@pytest.mark.parametrize("n,seed", [(4, 1), (4, 2), (5, 7)])
def test_lambert_solver_matches_enumeration(n, seed):
    instance = generate(n, seed)
    model = LambertTransferModel(instance, multi=1)
    memo = BoundMemo(model)
    result = peel_and_bound(instance, SolverConfig(dd_width=64, search_width=50, time_limit=3600), model, memo)
    optimum, _ = brute_force(instance, memo)
    assert result.proven_optimal
    assert not result.build.interrupted
    assert result.cost == optimum
    assert_monotone_trace(result.trace)
