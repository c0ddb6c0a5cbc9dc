"""
Restricted beam search embedded in a relaxed diagram

Every partial tour of the beam shadows ("mirrors") a node of the relaxed
diagram; children are drawn from the mirror's out-arcs, ranked by the bound
z_down(partial) + w(arc) + z_up(child mirror), and only the survivors are
evaluated exactly through the solution trie.
"""

from dataclasses import dataclass
from typing import List, Optional
import logging
import math

from peelbound.core.errors import ContractViolation
from peelbound.services.diagram import TERMINAL, TOL, Diagram, bit
from peelbound.services.memo import BoundMemo, TrieNode


logger = logging.getLogger(__name__)


@dataclass(slots=True)
class RestrictedNode:
    label: int
    z_down: float
    est: float
    parent: Optional["RestrictedNode"]
    mirror: int
    trie: TrieNode
    visited: int

    def tour(self) -> List[int]:
        labels = []
        node: Optional[RestrictedNode] = self
        while node is not None:
            labels.append(node.label)
            node = node.parent
        return labels[::-1]


@dataclass(slots=True)
class SearchResult:
    tour: Optional[List[int]]
    cost: float
    exhaustive: bool
    evaluations: int


def embedded_search(
    d: Diagram,
    omega_s: int,
    memo: BoundMemo,
    incumbent: float = math.inf,
) -> SearchResult:
    """
    Beam search for complete tours inside a relaxed diagram

    Args:
        d: Relaxed diagram with current bounds
        omega_s: Beam width
        memo: Memo whose trie evaluates the survivors
        incumbent: Candidates whose bound exceeds it are dropped

    Returns:
        SearchResult with the cheapest complete tour found (None if none survives),
        whether the beam was never truncated, and the number of new B evaluations
    """
    if omega_s < 1:
        raise ContractViolation("search width must be at least 1")
    if d.is_empty:
        return SearchResult(tour=None, cost=math.inf, exhaustive=True, evaluations=0)

    calls_before = memo.model.b_calls
    truncated = False
    root = d.nodes[d.root]
    beam = [RestrictedNode(
        label=0, z_down=0.0, est=0.0, parent=None, mirror=root.id, trie=memo.trie.root, visited=bit(0),
    )]

    for _ in range(d.n):
        # (bound, label, parent z_down, beam index, head z_down, head id)
        best_per_child = {}
        for order, partial in enumerate(beam):
            mirror = d.nodes[partial.mirror]
            for arc_id in mirror.out_arcs:
                arc = d.arcs[arc_id]
                if arc.label == TERMINAL or bit(arc.label) & partial.visited:
                    continue
                head = d.nodes[arc.head]
                bound = partial.z_down + arc.weight + head.z_up
                if bound > incumbent + TOL:
                    continue
                key = (order, arc.label)
                candidate = (bound, arc.label, partial.z_down, order, head.z_down, head.id)
                if key not in best_per_child or candidate < best_per_child[key]:
                    best_per_child[key] = candidate

        ranked = sorted(best_per_child.values())
        if len(ranked) > omega_s:
            truncated = True
            ranked = ranked[:omega_s]

        next_beam = []
        for bound, label, _, order, _, head_id in ranked:
            partial = beam[order]
            child = memo.trie.extend(partial.trie, label)
            if not math.isfinite(child.total):
                continue
            if child.total + d.nodes[head_id].z_up > incumbent + TOL:
                continue
            next_beam.append(RestrictedNode(
                label=label,
                z_down=child.total,
                est=child.est,
                parent=partial,
                mirror=head_id,
                trie=child,
                visited=partial.visited | bit(label),
            ))
        beam = next_beam
        if not beam:
            break

    complete = [
        partial for partial in beam
        if any(d.arcs[a].head == d.terminal for a in d.nodes[partial.mirror].out_arcs)
    ]
    evaluations = memo.model.b_calls - calls_before
    if not complete:
        return SearchResult(tour=None, cost=math.inf, exhaustive=not truncated, evaluations=evaluations)

    best = min(complete, key=lambda p: (p.z_down, p.tour()))
    logger.debug(f"Embedded search found {best.tour()} at {best.z_down:.6f} ({evaluations} evaluations)")
    return SearchResult(tour=best.tour(), cost=best.z_down, exhaustive=not truncated, evaluations=evaluations)

