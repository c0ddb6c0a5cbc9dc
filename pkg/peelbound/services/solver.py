"""
Peel-and-Bound outer loop

A queue of relaxed diagrams partitions the tours not yet ruled out. Each
iteration peels the paths through one exact node off the most promising
diagram, searches the peeled part for better tours and refines it before
putting it back.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple
import heapq
import itertools
import logging
import math
import time

from peelbound.core.errors import ContractViolation, InstanceError
from peelbound.schemas.instance import Instance
from peelbound.schemas.solver import (
    BuildReport,
    PeelStrategy,
    QueueOrder,
    RunSummary,
    SolverConfig,
    TraceRecord,
)
from peelbound.services.builder import construct, promote_exact
from peelbound.services.diagram import Diagram, filter, path_labels, peel, refine, shortest_path
from peelbound.services.memo import BoundMemo
from peelbound.services.search import embedded_search
from peelbound.services.transfer import LambertTransferModel, TransferModel


logger = logging.getLogger(__name__)


# ==================== QUEUE ====================

class DiagramQueue:
    """Priority queue of diagrams; ties go to the oldest entry"""

    def __init__(self, order: QueueOrder = QueueOrder.WORST_BOUND):
        self.order = order
        self._heap: List[Tuple[tuple, Diagram]] = []
        self._counter = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    def _key(self, d: Diagram) -> tuple:
        if self.order == QueueOrder.DFS:
            return (-d.prefix_depth, d.v_star, next(self._counter))
        return (d.v_star, next(self._counter))

    def push(self, d: Diagram):
        heapq.heappush(self._heap, (self._key(d), d))

    def pop(self) -> Diagram:
        return heapq.heappop(self._heap)[1]

    def min_bound(self) -> float:
        return min((d.v_star for _, d in self._heap), default=math.inf)


def select_diagram(queue: DiagramQueue) -> Optional[Diagram]:
    """
    Next diagram to process

    Returns:
        worst-bound: smallest v*; dfs: deepest root prefix, then smallest v*.
        None when the queue is empty.
    """
    if not len(queue):
        return None
    return queue.pop()


def select_exact_node(d: Diagram, strategy: PeelStrategy) -> int:
    """
    Exact node on the shortest path to peel next

    Only nodes below the diagram's fixed root prefix are candidates.

    Args:
        d: Non-empty diagram
        strategy: maximal picks the first node below the prefix, last-exact the
            deepest node of the exact run starting there

    Returns:
        Node id

    Raises:
        ContractViolation: Empty diagram or no exact node below the prefix
    """
    path = shortest_path(d)
    if path is None:
        raise ContractViolation("cannot select a node in an empty diagram")
    below = [
        d.arcs[a].head for a in path
        if d.arcs[a].head != d.terminal and d.nodes[d.arcs[a].head].layer > d.prefix_depth
    ]
    if not below or not d.nodes[below[0]].exact:
        raise ContractViolation("shortest path has no exact node below the root prefix")
    if strategy == PeelStrategy.MAXIMAL:
        return below[0]

    chosen = below[0]
    for node_id in below[1:]:
        if not d.nodes[node_id].exact:
            break
        chosen = node_id
    return chosen


# ==================== SOLVER ====================

@dataclass
class SolverResult:
    tour: List[int]
    cost: float
    lb: float
    proven_optimal: bool
    iterations: int
    queue_remaining: int
    wall_seconds: float
    counters: Dict[str, int]
    trace: List[TraceRecord] = field(default_factory=list)
    build: Optional[BuildReport] = None


class _Run:
    """Mutable state of one solver run: incumbent, running lower bound and trace"""

    def __init__(
        self,
        model: TransferModel,
        tolerance: float,
        on_trace: Optional[Callable[[TraceRecord], None]] = None,
    ):
        self.model = model
        self.tolerance = tolerance
        self.on_trace = on_trace
        self.started = time.time()
        self.tour: List[int] = []
        self.ub = math.inf
        self.lb = -math.inf
        self.trace: List[TraceRecord] = []

    def elapsed(self) -> float:
        return time.time() - self.started

    def offer(self, tour: List[int], cost: float) -> bool:
        """Take a tour as incumbent if it improves by more than the tolerance"""
        if not math.isfinite(cost) or cost >= self.ub - self.tolerance:
            return False
        logger.info(f"New incumbent {cost:.6f} (was {self.ub:.6f}): {tour}")
        self.tour, self.ub = list(tour), cost
        return True

    def record(self, queue: DiagramQueue, force: bool = False):
        raw = min(queue.min_bound(), self.ub)
        if raw < self.lb - self.tolerance:
            logger.warning(f"Lower bound dipped from {self.lb:.6f} to {raw:.6f}; keeping the larger value")
        lb = max(self.lb, raw)
        previous = self.trace[-1] if self.trace else None
        changed = previous is None or lb != previous.lb or self.ub != previous.ub
        self.lb = lb
        if not changed and not force:
            return
        counters = self.model.counters()
        record = TraceRecord(
            t_wall=self.elapsed(),
            lb=lb,
            ub=self.ub,
            queue_len=len(queue),
            b_calls=counters["b_calls"],
            bprime_calls=counters["bprime_calls"],
        )
        self.trace.append(record)
        if self.on_trace is not None:
            self.on_trace(record)


def peel_and_bound(
    instance: Instance,
    config: Optional[SolverConfig] = None,
    model: Optional[TransferModel] = None,
    memo: Optional[BoundMemo] = None,
    on_trace: Optional[Callable[[TraceRecord], None]] = None,
) -> SolverResult:
    """
    Solve an instance with Peel-and-Bound

    Args:
        instance: Problem instance
        config: Solver settings (environment defaults when omitted)
        model: Transfer model (Lambert model of the instance when omitted)
        memo: Bound memo to reuse (its model is used); a fresh one is created when omitted
        on_trace: Called with every trace record as it is emitted

    Returns:
        SolverResult; proven_optimal is True iff the queue was exhausted

    Raises:
        ContractViolation: model given and different from memo.model
    """
    config = config or SolverConfig()
    if memo is not None:
        if model is not None and model is not memo.model:
            raise ContractViolation("model and memo.model must be the same transfer model")
        model = memo.model
    model = model or LambertTransferModel(instance, multi=config.multi)
    memo = memo or BoundMemo(model)
    run = _Run(model, config.tolerance, on_trace)
    queue = DiagramQueue(config.queue_order)

    if instance.n == 1:
        cost, _ = memo.trie_evaluate([0, 1])
        if not math.isfinite(cost):
            raise InstanceError("the only asteroid cannot be reached")
        run.offer([0, 1], cost)
        run.record(queue, force=True)
        return _result(run, queue, memo, iterations=0, proven=True)

    d, report, nn_tour, nn_cost = construct(instance, memo, config, deadline=run.started + config.time_limit)
    run.offer(nn_tour, nn_cost)
    if not d.is_empty and d.v_star < run.ub - config.tolerance:
        queue.push(d)
    run.record(queue, force=True)

    iterations = 0
    timed_out = False
    while len(queue):
        if run.elapsed() > config.time_limit:
            timed_out = True
            logger.info(f"Time limit of {config.time_limit}s reached with {len(queue)} diagrams queued")
            break

        d = select_diagram(queue)
        if d.is_empty or d.v_star >= run.ub - config.tolerance:
            run.record(queue)
            continue
        iterations += 1

        path = shortest_path(d)
        if all(d.nodes[d.arcs[a].head].exact for a in path[:-1]):
            tour = path_labels(d, path)
            cost, _ = memo.trie_evaluate(tour)
            run.offer(tour, cost)
            run.record(queue)
            continue

        u = select_exact_node(d, config.peel_strategy)
        peeled, remainder = peel(d, u, run.ub)
        if not remainder.is_empty and remainder.v_star < run.ub - config.tolerance:
            queue.push(remainder)

        promote_exact(peeled, memo, run.ub)
        if peeled.is_empty or peeled.v_star >= run.ub - config.tolerance:
            run.record(queue)
            continue

        found = embedded_search(peeled, config.search_width, memo, run.ub)
        if found.tour is not None and run.offer(found.tour, found.cost):
            filter(peeled, run.ub)
        if found.exhaustive:
            logger.debug(f"Iteration {iterations}: peeled node {u} searched exhaustively")
            run.record(queue)
            continue

        splits = refine(peeled, run.ub, memo)
        if not peeled.is_empty and peeled.v_star < run.ub - config.tolerance:
            queue.push(peeled)
        logger.debug(
            f"Iteration {iterations}: peeled node {u}, {splits} splits, "
            f"v*={peeled.v_star:.6f}, queue={len(queue)}"
        )
        run.record(queue)

    proven = not timed_out and not len(queue)
    run.record(queue, force=True)
    result = _result(run, queue, memo, iterations=iterations, proven=proven)
    result.build = report
    logger.info(
        f"Peel-and-Bound finished: ub={result.cost:.6f} lb={result.lb:.6f} "
        f"proven_optimal={proven} iterations={iterations} queue={len(queue)}"
    )
    return result


def _result(run: _Run, queue: DiagramQueue, memo: BoundMemo, iterations: int, proven: bool) -> SolverResult:
    lb = run.ub if proven else min(run.lb, run.ub)
    return SolverResult(
        tour=run.tour,
        cost=run.ub,
        lb=lb,
        proven_optimal=proven,
        iterations=iterations,
        queue_remaining=len(queue),
        wall_seconds=run.elapsed(),
        counters={**memo.model.counters(), "trie_size": memo.trie.size},
        trace=run.trace,
    )


def summarize(result: SolverResult, config: SolverConfig) -> RunSummary:
    """RunSummary of a solver result; the gap is relative to the upper bound"""
    if math.isfinite(result.cost) and result.cost > 0:
        gap = max(0.0, 100.0 * (result.cost - result.lb) / result.cost)
    else:
        gap = 0.0 if result.proven_optimal else math.inf
    return RunSummary(
        lb=result.lb,
        ub=result.cost,
        gap_percent=0.0 if result.proven_optimal else gap,
        wall_seconds=result.wall_seconds,
        queue_remaining=result.queue_remaining,
        proven_optimal=result.proven_optimal,
        iterations=result.iterations,
        tour=result.tour,
        counters=result.counters,
        config=config,
        build=result.build,
    )
