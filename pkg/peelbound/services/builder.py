"""
Construction of the initial relaxed diagram

Structure first, then two weighting phases: phase one bounds every ordered pair
once over the whole horizon, phase two re-bounds every arc per layer using the
incumbent to narrow departure windows.
"""

from typing import Dict, List, Optional, Tuple
import logging
import math
import time

import numpy as np

from peelbound.core.errors import InstanceError
from peelbound.schemas.instance import Instance
from peelbound.schemas.solver import BuildReport, SolverConfig
from peelbound.services.diagram import TOL, Diagram, filter, refresh_down
from peelbound.services.memo import BoundMemo, TrieNode
from peelbound.services.orbital import TIME_COST, propagate


logger = logging.getLogger(__name__)

BISECTION_TOL_DAYS = 1e-3
BISECTION_MAX_STEPS = 40


def build_structure(n: int, width: int) -> Diagram:
    """
    Unweighted relaxed diagram encoding every asteroid sequence

    Layers 1..n hold one node per asteroid; consecutive layers are joined by
    arcs between differently labeled nodes; layer n feeds the terminal.

    Raises:
        InstanceError: Fewer than two asteroids
    """
    if n < 2:
        raise InstanceError(f"a diagram needs at least 2 asteroids (got {n})")
    d = Diagram(n, width)
    previous = [d.root]
    for layer in range(1, n + 1):
        current = [d.add_node(layer, label).id for label in range(1, n + 1)]
        for tail in previous:
            tail_label = d.nodes[tail].label
            for head in current:
                if d.nodes[head].label != tail_label:
                    d.add_arc(tail, head)
        previous = current
    for tail in previous:
        d.add_arc(tail, d.terminal, weight=0.0, exact=True)
    return d


def weight_phase_one(d: Diagram, memo: BoundMemo) -> int:
    """
    Exact root arcs and one horizon-wide relaxed bound per ordered pair

    Returns:
        Number of black-box evaluations (B and B')
    """
    model = memo.model
    before = model.b_calls + model.bprime_calls

    est_first: Dict[int, float] = {}
    for node_id in list(d.layers[1]):
        node = d.nodes[node_id]
        child = memo.trie.extend(memo.trie.root, node.label)
        if not math.isfinite(child.total):
            logger.info(f"Root transfer to body {node.label} infeasible; pruning")
            d.remove_node(node_id)
            continue
        arc = d.arcs[node.in_arcs[0]]
        arc.weight, arc.exact = child.leg_cost, True
        node.est, node.exact = child.est, True
        est_first[node.label] = child.est

    tau_f = d.n * model.horizon - model.t_max
    bounds: Dict[Tuple[int, int], Tuple[float, float, float]] = {}
    for a in range(1, d.n + 1):
        others = [est_first[b] + 1.0 for b in est_first if b != a]
        eta = min([est_first.get(a, math.inf)] + others)
        if not math.isfinite(eta):
            continue
        for b in range(1, d.n + 1):
            if b == a:
                continue
            result = model.black_box_relaxed(model.query(a, b, eta, tau_f=tau_f))
            if result.feasible:
                bounds[(a, b)] = (result.z, eta, eta + tau_f)
                memo.bounds_insert((a, b), (eta, eta + tau_f), result.z)

    for layer in d.layers[1:d.n]:
        for node_id in layer:
            node = d.nodes[node_id]
            for arc_id in list(node.out_arcs):
                arc = d.arcs[arc_id]
                entry = bounds.get((node.label, arc.label))
                if entry is None:
                    d.remove_arc(arc_id)
                    continue
                arc.weight, arc.lo, arc.hi = entry

    filter(d)
    return model.b_calls + model.bprime_calls - before


def nearest_neighbor_tour(instance: Instance, memo: BoundMemo) -> Tuple[List[int], float]:
    """
    Greedy tour: always fly to the closest unvisited asteroid at the current epoch

    Returns:
        Tuple (tour starting at Earth, exact cost via the trie)
    """
    tour = [0]
    node: TrieNode = memo.trie.root
    unvisited = list(range(1, instance.n + 1))
    while unvisited:
        if math.isfinite(node.est):
            here = propagate(instance.elements(tour[-1]), node.est).position
            distances = [
                float(np.linalg.norm(propagate(instance.elements(b), node.est).position - here))
                for b in unvisited
            ]
            pick = unvisited[int(np.argmin(distances))]
        else:
            pick = unvisited[0]
        unvisited.remove(pick)
        tour.append(pick)
        node = memo.trie.extend(node, pick)
    return tour, node.total


def weight_phase_two(
    d: Diagram,
    memo: BoundMemo,
    incumbent: float,
    naive: bool = False,
    deadline: Optional[float] = None,
) -> Tuple[int, int, bool]:
    """
    Re-bound every inner arc layer by layer with a narrowed departure window

    The window for arc (u, v) starts at est(u) and ends when no path through
    the arc can still beat the incumbent (tighter when u is exact). Without a
    finite incumbent, or in naive mode, the window ends at the latest possible
    departure from layer i: i*(tau_max + t_max) + tau_max.

    Once the deadline (a time.time() value) passes, the remaining nodes keep
    their phase-one bounds, which are still valid.

    Returns:
        Tuple (B' evaluations, arcs pruned by an empty window, whether every arc was re-bounded)
    """
    model = memo.model
    naive = naive or not math.isfinite(incumbent)
    calls = pruned = 0
    complete = True

    for i in range(1, d.n):
        for u_id in list(d.layers[i]):
            u = d.nodes.get(u_id)
            if u is None:
                continue
            if deadline is not None and time.time() > deadline:
                complete = False
                break
            if not u.in_arcs:
                for arc_id in list(u.out_arcs):
                    d.remove_arc(arc_id)
                continue
            for arc_id in list(u.out_arcs):
                arc = d.arcs[arc_id]
                v = d.nodes[arc.head]
                eta = u.est
                end = i * model.horizon + model.tau_max
                if not naive:
                    end = min(end, (incumbent - v.z_up) / TIME_COST)
                    if u.exact:
                        end = min(end, eta + (incumbent - u.z_down - v.z_up) / TIME_COST)
                tau_f = end - eta
                if tau_f < 0:
                    d.remove_arc(arc_id)
                    pruned += 1
                    continue

                result = model.black_box_relaxed(model.query(u.label, v.label, eta, tau_f=tau_f))
                calls += 1
                if not result.feasible:
                    d.remove_arc(arc_id)
                    pruned += 1
                    continue
                memo.bounds_insert((u.label, v.label), (eta, eta + tau_f), result.z)
                arc.weight = max(arc.weight, result.z)
                arc.lo, arc.hi = eta, eta + tau_f

        for v_id in d.layers[i + 1]:
            refresh_down(d, d.nodes[v_id])
        if not complete:
            logger.info(f"Deadline reached in phase two at layer {i}; later arcs keep phase-one bounds")
            break

    filter(d, incumbent)
    return calls, pruned, complete


def capped_threshold(memo: BoundMemo, src: int, dst: int, eta: float, target: float) -> Optional[float]:
    """
    Largest total time theta known to be too short for the transfer to cost <= target

    Bisects theta over [1, tau_max + t_max] on B~ (non-increasing in theta).

    Returns:
        The lower bisection end, 0.0 when theta = 1 already meets the target,
        or None when even the full horizon cannot meet it
    """
    model = memo.model

    def capped(theta: float) -> float:
        return model.black_box_capped(model.query(src, dst, eta, theta=theta)).z

    lo, hi = 1.0, model.horizon
    if capped(hi) > target + TOL:
        return None
    if capped(lo) <= target:
        return 0.0
    for _ in range(BISECTION_MAX_STEPS):
        if hi - lo <= BISECTION_TOL_DAYS:
            break
        mid = 0.5 * (lo + hi)
        if capped(mid) <= target:
            hi = mid
        else:
            lo = mid
    return lo


def est_eat_refine(d: Diagram, memo: BoundMemo, incumbent: float) -> int:
    """
    Raise earliest start times of single-parent nodes below exact parents

    An arc whose capped transfer cannot fit under the incumbent even with the
    full horizon is pruned.

    Returns:
        Number of updated nodes plus pruned arcs
    """
    if not math.isfinite(incumbent):
        return 0
    updated = 0
    for layer in d.layers[2:d.n + 1]:
        for v_id in list(layer):
            v = d.nodes.get(v_id)
            if v is None or v.exact or len(v.in_arcs) != 1:
                continue
            arc = d.arcs[v.in_arcs[0]]
            u = d.nodes[arc.tail]
            if not u.exact:
                continue
            target = incumbent - u.z_down - v.z_up
            theta = capped_threshold(memo, u.label, v.label, u.est, target)
            if theta is None:
                d.remove_arc(arc.id)
                updated += 1
            elif u.est + theta > v.est:
                v.est = u.est + theta
                updated += 1
    filter(d, incumbent)
    return updated


def promote_exact(d: Diagram, memo: BoundMemo, incumbent: float = math.inf) -> int:
    """
    Turn single-parent children of exact nodes into exact nodes

    The in-arc gets the true leg cost from the trie and the node its true
    arrival epoch. Works top-down, so chains of such nodes are promoted in one call.

    Returns:
        Number of promoted nodes
    """
    trie_nodes: Dict[int, TrieNode] = {d.root: memo.trie.root}
    promoted = 0
    for layer in d.layers[1:d.n + 1]:
        for v_id in list(layer):
            v = d.nodes.get(v_id)
            if v is None or len(v.in_arcs) != 1:
                continue
            arc = d.arcs[v.in_arcs[0]]
            u = d.nodes[arc.tail]
            if not u.exact:
                continue
            if arc.tail not in trie_nodes:
                trie_nodes[arc.tail] = memo.trie.walk(d.prefix(arc.tail))
            if v.exact:
                trie_nodes[v_id] = trie_nodes[arc.tail].children.get(v.label) or memo.trie.walk(d.prefix(v_id))
                continue
            child = memo.trie.extend(trie_nodes[arc.tail], v.label)
            if not math.isfinite(child.total):
                d.remove_arc(arc.id)
                continue
            arc.weight, arc.exact, arc.lo, arc.hi = child.leg_cost, True, u.est, u.est
            v.exact, v.est, v.z_down = True, child.est, child.total
            trie_nodes[v_id] = child
            promoted += 1
    filter(d, incumbent)
    return promoted


def construct(
    instance: Instance,
    memo: BoundMemo,
    config: SolverConfig,
    deadline: Optional[float] = None,
) -> Tuple[Diagram, BuildReport, List[int], float]:
    """
    Build and weight the initial diagram and compute the nearest-neighbor incumbent

    Phase one and the incumbent always complete. Phase two stops at the deadline
    (a time.time() value), the est/eat refinement is then skipped, and the
    diagram is filtered as built with report.interrupted set.

    Returns:
        Tuple (diagram, report, incumbent tour, incumbent cost)
    """
    started = time.time()
    model = memo.model

    d = build_structure(instance.n, config.dd_width)
    phase1 = weight_phase_one(d, memo)
    logger.info(f"Phase one done: {phase1} evaluations, v*={d.v_star:.6f}")

    nn_tour, nn_cost = nearest_neighbor_tour(instance, memo)
    logger.info(f"Nearest-neighbor tour {nn_tour} costs {nn_cost:.6f}")

    before = model.bprime_calls
    if deadline is not None and time.time() > deadline:
        logger.info("Deadline reached after phase one; skipping phase two")
        filter(d, nn_cost)
        pruned, complete = 0, False
    else:
        _, pruned, complete = weight_phase_two(d, memo, nn_cost, deadline=deadline)
        logger.info(
            f"Phase two {'done' if complete else 'interrupted'}: {model.bprime_calls - before} evaluations, "
            f"{pruned} arcs pruned, v*={d.v_star:.6f}"
        )

    updates = 0
    if config.enable_est_eat and complete and (deadline is None or time.time() <= deadline):
        updates = est_eat_refine(d, memo, nn_cost)
        logger.info(f"est/eat refinement updated {updates} nodes or arcs")

    promote_exact(d, memo, nn_cost)

    report = BuildReport(
        phase1_calls=phase1,
        phase2_calls=model.bprime_calls - before,
        phase2_pruned=pruned,
        est_eat_updates=updates,
        interrupted=not complete,
        initial_lb=min(d.v_star, nn_cost),
        initial_ub=nn_cost,
        nn_tour=nn_tour,
        wall_seconds=time.time() - started,
    )
    logger.info(f"Build report: {report.model_dump_json()}")
    return d, report, nn_tour, nn_cost
