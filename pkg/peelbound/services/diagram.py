"""
Layered decision diagrams over asteroid permutations

Node labels are body indices (0 = Earth at the root, 1..n asteroids, -1 at the
terminal). Label sets are int bitmasks with bit k standing for body k.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging
import math

from peelbound.core.errors import ContractViolation


logger = logging.getLogger(__name__)

TERMINAL = -1
TOL = 1e-9


def bit(label: int) -> int:
    return 0 if label < 0 else 1 << label


def popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(slots=True)
class DDNode:
    id: int
    layer: int
    label: int
    in_arcs: List[int] = field(default_factory=list)
    out_arcs: List[int] = field(default_factory=list)
    z_down: float = math.inf
    z_up: float = math.inf
    est: float = 0.0
    all_down: int = 0
    some_down: int = 0
    all_up: int = 0
    some_up: int = 0
    exact: bool = False


@dataclass(slots=True)
class DDArc:
    id: int
    tail: int
    head: int
    label: int
    weight: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    exact: bool = False


class Diagram:
    """Layered multigraph: layer 0 holds the root, layer n+1 the terminal"""

    def __init__(self, n: int, width: int):
        if width < 1:
            raise ContractViolation("diagram width must be at least 1")
        self.n = n
        self.width = width
        self.nodes: Dict[int, DDNode] = {}
        self.arcs: Dict[int, DDArc] = {}
        self.layers: List[List[int]] = [[] for _ in range(n + 2)]
        self.prefix_depth = 0
        self._next_node = 0
        self._next_arc = 0
        self.root = self.add_node(0, 0).id
        self.terminal = self.add_node(n + 1, TERMINAL).id
        root = self.nodes[self.root]
        root.z_down, root.est, root.exact = 0.0, 0.0, True
        root.all_down = root.some_down = bit(0)

    @property
    def asteroid_mask(self) -> int:
        return ((1 << (self.n + 1)) - 1) & ~1

    @property
    def v_star(self) -> float:
        """Shortest root-terminal path length"""
        return self.nodes[self.terminal].z_down

    @property
    def is_empty(self) -> bool:
        return not self.nodes[self.terminal].in_arcs

    # ---------- mutation ----------

    def add_node(self, layer: int, label: int) -> DDNode:
        node = DDNode(id=self._next_node, layer=layer, label=label)
        self._next_node += 1
        self.nodes[node.id] = node
        self.layers[layer].append(node.id)
        return node

    def add_arc(self, tail: int, head: int, weight: float = 0.0, lo: float = 0.0, hi: float = 0.0,
                exact: bool = False) -> DDArc:
        arc = DDArc(
            id=self._next_arc, tail=tail, head=head, label=self.nodes[head].label,
            weight=weight, lo=lo, hi=hi, exact=exact,
        )
        self._next_arc += 1
        self.arcs[arc.id] = arc
        self.nodes[tail].out_arcs.append(arc.id)
        self.nodes[head].in_arcs.append(arc.id)
        return arc

    def remove_arc(self, arc_id: int):
        arc = self.arcs.pop(arc_id)
        self.nodes[arc.tail].out_arcs.remove(arc_id)
        self.nodes[arc.head].in_arcs.remove(arc_id)

    def remove_node(self, node_id: int):
        node = self.nodes[node_id]
        for arc_id in list(node.in_arcs) + list(node.out_arcs):
            self.remove_arc(arc_id)
        del self.nodes[node_id]
        self.layers[node.layer].remove(node_id)

    def clear(self):
        """Drop every node between root and terminal"""
        for layer in self.layers[1:-1]:
            for node_id in list(layer):
                self.remove_node(node_id)
        for arc_id in list(self.nodes[self.root].out_arcs):
            self.remove_arc(arc_id)
        self.nodes[self.terminal].z_down = math.inf
        self.nodes[self.root].z_up = math.inf

    def purge(self) -> int:
        """Remove inner nodes lacking in- or out-arcs until none remain"""
        removed = 0
        changed = True
        while changed:
            changed = False
            for layer in self.layers[1:-1]:
                for node_id in list(layer):
                    node = self.nodes[node_id]
                    if not node.in_arcs or not node.out_arcs:
                        self.remove_node(node_id)
                        removed += 1
                        changed = True
        if not self.nodes[self.root].out_arcs or not self.nodes[self.terminal].in_arcs:
            if any(self.layers[1:-1]):
                removed += sum(len(layer) for layer in self.layers[1:-1])
            self.clear()
        return removed

    # ---------- queries ----------

    def max_width(self) -> int:
        return max(len(layer) for layer in self.layers)

    def prefix(self, node_id: int) -> List[int]:
        """Labels on the single-in-arc chain from the root to an exact node"""
        labels = []
        node = self.nodes[node_id]
        while node.id != self.root:
            if len(node.in_arcs) != 1:
                raise ContractViolation(f"node {node.id} is not on an exact chain")
            labels.append(node.label)
            node = self.nodes[self.arcs[node.in_arcs[0]].tail]
        labels.append(0)
        return labels[::-1]

    def copy(self) -> "Diagram":
        other = Diagram.__new__(Diagram)
        other.n = self.n
        other.width = self.width
        other.nodes = {
            k: DDNode(
                id=v.id, layer=v.layer, label=v.label, in_arcs=list(v.in_arcs), out_arcs=list(v.out_arcs),
                z_down=v.z_down, z_up=v.z_up, est=v.est, all_down=v.all_down, some_down=v.some_down,
                all_up=v.all_up, some_up=v.some_up, exact=v.exact,
            )
            for k, v in self.nodes.items()
        }
        other.arcs = {
            k: DDArc(id=a.id, tail=a.tail, head=a.head, label=a.label, weight=a.weight, lo=a.lo, hi=a.hi,
                     exact=a.exact)
            for k, a in self.arcs.items()
        }
        other.layers = [list(layer) for layer in self.layers]
        other.prefix_depth = self.prefix_depth
        other._next_node = self._next_node
        other._next_arc = self._next_arc
        other.root = self.root
        other.terminal = self.terminal
        return other


# ==================== BOUNDS ====================

def recompute_bounds(d: Diagram):
    """
    Recompute z_down, z_up, est floors, label sets and exactness

    Raises:
        ContractViolation: An inner node lost all in- or out-arcs without being purged
    """
    root = d.nodes[d.root]
    root.z_down, root.exact = 0.0, True
    root.all_down = root.some_down = bit(0)

    for layer in d.layers[1:]:
        for node_id in layer:
            node = d.nodes[node_id]
            if not node.in_arcs:
                if node_id == d.terminal:
                    node.z_down, node.exact = math.inf, False
                    node.all_down = node.some_down = 0
                    continue
                raise ContractViolation(f"node {node_id} on layer {node.layer} has no in-arcs")
            refresh_down(d, node)

    terminal = d.nodes[d.terminal]
    terminal.z_up, terminal.all_up, terminal.some_up = 0.0, 0, 0
    for layer in reversed(d.layers[:-1]):
        for node_id in layer:
            node = d.nodes[node_id]
            if not node.out_arcs:
                if node_id == d.root:
                    node.z_up = math.inf
                    node.all_up = node.some_up = 0
                    continue
                raise ContractViolation(f"node {node_id} on layer {node.layer} has no out-arcs")
            z_up = math.inf
            all_up, some_up = -1, 0
            for arc_id in node.out_arcs:
                arc = d.arcs[arc_id]
                head = d.nodes[arc.head]
                z_up = min(z_up, arc.weight + head.z_up)
                all_up &= head.all_up | bit(head.label)
                some_up |= head.some_up | bit(head.label)
            node.z_up = z_up
            node.all_up = all_up
            node.some_up = some_up


def _arc_infeasible(d: Diagram, arc: DDArc, incumbent: float) -> bool:
    tail = d.nodes[arc.tail]
    head = d.nodes[arc.head]
    mask = d.asteroid_mask
    if arc.label != TERMINAL:
        label = bit(arc.label)
        if label & tail.all_down or label & head.all_up:
            return True
        if popcount(tail.some_down & mask) == tail.layer and label & tail.some_down:
            return True
        remaining = d.n - head.layer
        if popcount(head.some_up & mask) == remaining and label & head.some_up:
            return True
    coverage = (tail.some_down | bit(arc.label) | head.some_up) & mask
    if popcount(coverage) < d.n:
        return True
    return tail.z_down + arc.weight + head.z_up > incumbent + TOL


def _node_infeasible(d: Diagram, node: DDNode, incumbent: float) -> bool:
    if node.z_down + node.z_up > incumbent + TOL:
        return True
    mask = d.asteroid_mask
    if popcount(node.some_down & mask) < node.layer:
        return True
    return popcount(node.some_up & mask) < d.n - node.layer


def filter(d: Diagram, incumbent: float = math.inf) -> int:
    """
    Remove label-infeasible and cost-dominated arcs and nodes to a fixed point

    Args:
        d: Diagram with weights set
        incumbent: Cost of the best known tour

    Returns:
        Number of removed arcs and nodes
    """
    removed = d.purge()
    while True:
        if d.is_empty:
            return removed
        recompute_bounds(d)
        doomed_arcs = [a.id for a in d.arcs.values() if _arc_infeasible(d, a, incumbent)]
        doomed_nodes = [
            node_id
            for layer in d.layers[1:-1]
            for node_id in layer
            if _node_infeasible(d, d.nodes[node_id], incumbent)
        ]
        if not doomed_arcs and not doomed_nodes:
            return removed
        for arc_id in doomed_arcs:
            d.remove_arc(arc_id)
        for node_id in doomed_nodes:
            d.remove_node(node_id)
        removed += len(doomed_arcs) + len(doomed_nodes) + d.purge()
        if d.is_empty:
            recompute_bounds(d)
            return removed


# ==================== PATHS ====================

def shortest_path(d: Diagram) -> Optional[List[int]]:
    """Arc ids of a shortest root-terminal path (ties on smaller arc id), None if empty"""
    if d.is_empty or math.isinf(d.v_star):
        return None
    path = []
    node = d.nodes[d.terminal]
    while node.id != d.root:
        best = min(
            node.in_arcs,
            key=lambda a: (d.nodes[d.arcs[a].tail].z_down + d.arcs[a].weight, a),
        )
        path.append(best)
        node = d.nodes[d.arcs[best].tail]
    return path[::-1]


def path_labels(d: Diagram, path: List[int]) -> List[int]:
    """Tour (starting at Earth) spelled by an arc path"""
    return [0] + [d.arcs[a].label for a in path if d.arcs[a].label != TERMINAL]


def enumerate_paths(d: Diagram) -> List[Tuple[Tuple[int, ...], float]]:
    """
    Every root-terminal path as (asteroid label sequence, weight sum)

    Exponential; meant for tests and debugging on small diagrams.
    """
    results: List[Tuple[Tuple[int, ...], float]] = []
    if d.is_empty:
        return results
    stack: List[Tuple[int, Tuple[int, ...], float]] = [(d.root, (), 0.0)]
    while stack:
        node_id, labels, cost = stack.pop()
        if node_id == d.terminal:
            results.append((labels, cost))
            continue
        for arc_id in d.nodes[node_id].out_arcs:
            arc = d.arcs[arc_id]
            step = labels if arc.label == TERMINAL else labels + (arc.label,)
            stack.append((arc.head, step, cost + arc.weight))
    results.sort()
    return results


def export_text(d: Diagram) -> str:
    """Plain-text dump: one node or arc per line"""
    lines = [f"diagram n={d.n} width={d.width} prefix={d.prefix_depth} v*={d.v_star:.6f}"]
    for layer in d.layers:
        for node_id in layer:
            node = d.nodes[node_id]
            lines.append(
                f"node {node.id} layer={node.layer} label={node.label} z_down={node.z_down:.6f} "
                f"z_up={node.z_up:.6f} est={node.est:.3f} exact={int(node.exact)}"
            )
    for arc_id in sorted(d.arcs):
        arc = d.arcs[arc_id]
        lines.append(
            f"arc {arc.id} {arc.tail}->{arc.head} label={arc.label} w={arc.weight:.6f} "
            f"interval=[{arc.lo:.3f},{arc.hi:.3f}] exact={int(arc.exact)}"
        )
    return "\n".join(lines) + "\n"


# ==================== SPLIT / PEEL / REFINE ====================

def refresh_down(d: Diagram, node: DDNode):
    """Recompute the top-down data of one node from its in-arcs"""
    if not node.in_arcs:
        node.z_down, node.exact = math.inf, False
        return
    z_down, est_floor, all_down, some_down = math.inf, math.inf, -1, 0
    for arc_id in node.in_arcs:
        arc = d.arcs[arc_id]
        tail = d.nodes[arc.tail]
        z_down = min(z_down, tail.z_down + arc.weight)
        est_floor = min(est_floor, tail.est + 1.0)
        all_down &= tail.all_down
        some_down |= tail.some_down
    node.z_down = z_down
    node.all_down = all_down | bit(node.label)
    node.some_down = some_down | bit(node.label)
    node.est = max(node.est, est_floor)
    node.exact = False
    if len(node.in_arcs) == 1:
        arc = d.arcs[node.in_arcs[0]]
        node.exact = arc.exact and d.nodes[arc.tail].exact


def split_node(d: Diagram, u: int, phi: int, memo=None) -> Optional[int]:
    """
    Split a node on label phi

    In-arcs whose tail has visited phi on every path (or that are labeled phi)
    move to a fresh copy; out-arcs are duplicated with their weights. Copied
    out-arcs are upgraded from the bound memo when it holds a stronger bound for
    the copy's tighter departure window.

    Args:
        d: Diagram
        u: Node to split (not root or terminal)
        phi: Label the in-arcs are partitioned on
        memo: Optional BoundMemo consulted for weight upgrades

    Returns:
        Id of the new node, or None if the split is vacuous
    """
    node = d.nodes[u]
    if u in (d.root, d.terminal):
        raise ContractViolation("root and terminal cannot be split")
    if len(node.in_arcs) < 2:
        return None

    moving = [
        a for a in node.in_arcs
        if bit(phi) & d.nodes[d.arcs[a].tail].all_down or d.arcs[a].label == phi
    ]
    if not moving or len(moving) == len(node.in_arcs):
        return None

    twin = d.add_node(node.layer, node.label)
    twin.est = node.est
    for arc_id in moving:
        arc = d.arcs[arc_id]
        node.in_arcs.remove(arc_id)
        twin.in_arcs.append(arc_id)
        arc.head = twin.id
    for arc_id in list(node.out_arcs):
        arc = d.arcs[arc_id]
        d.add_arc(twin.id, arc.head, arc.weight, arc.lo, arc.hi, arc.exact)

    for target in (node, twin):
        refresh_down(d, target)
        for arc_id in list(target.out_arcs):
            arc = d.arcs[arc_id]
            if arc.label != TERMINAL and bit(arc.label) & target.all_down:
                d.remove_arc(arc_id)
                continue
            if memo is not None and arc.label != TERMINAL and not arc.exact:
                lo = max(arc.lo, target.est)
                if arc.hi >= lo:
                    bound = memo.bounds_query((target.label, arc.label), (lo, arc.hi))
                    if bound is not None and bound > arc.weight:
                        arc.weight = bound
    return twin.id


def peel(d: Diagram, u: int, incumbent: float = math.inf) -> Tuple[Diagram, Diagram]:
    """
    Separate the paths through an exact node

    The peeled diagram keeps the exact root chain down to u plus everything
    reachable from u; d itself becomes the remainder with u removed. Weights and
    intervals are copied, never re-evaluated.

    Returns:
        Tuple (peeled, remainder), both filtered against the incumbent

    Raises:
        ContractViolation: u is not exact
    """
    if u not in d.nodes:
        raise ContractViolation(f"node {u} is not in the diagram")
    node = d.nodes[u]
    if not node.exact or u in (d.root, d.terminal):
        raise ContractViolation(f"node {u} is not an exact inner node")

    keep = set()
    chain_arcs = []
    walker = node
    while walker.id != d.root:
        keep.add(walker.id)
        chain_arcs.append(walker.in_arcs[0])
        walker = d.nodes[d.arcs[walker.in_arcs[0]].tail]
    keep.add(d.root)

    below_arcs = []
    frontier = [u]
    while frontier:
        current = frontier.pop()
        for arc_id in d.nodes[current].out_arcs:
            below_arcs.append(arc_id)
            head = d.arcs[arc_id].head
            if head not in keep:
                keep.add(head)
                frontier.append(head)

    peeled = d.copy()
    kept_arcs = set(chain_arcs) | set(below_arcs)
    for arc_id in [a for a in peeled.arcs if a not in kept_arcs]:
        peeled.remove_arc(arc_id)
    for layer in peeled.layers[1:-1]:
        for node_id in [x for x in layer if x not in keep]:
            peeled.remove_node(node_id)
    peeled.prefix_depth = node.layer

    d.remove_node(u)
    filter(peeled, incumbent)
    filter(d, incumbent)
    return peeled, d


def refine(d: Diagram, incumbent: float = math.inf, memo=None) -> int:
    """
    Split nodes along the shortest path until it is exact or layers are full

    Each sweep walks the current shortest path top-down below the fixed prefix and
    splits every inexact node on the label of its predecessor on the path; the
    diagram is filtered between sweeps.

    Returns:
        Number of splits performed
    """
    splits = 0
    while True:
        path = shortest_path(d)
        if path is None:
            return splits
        if all(d.nodes[d.arcs[a].head].exact for a in path[:-1]):
            return splits

        progressed = False
        arc_id = path[0]
        while arc_id is not None:
            arc = d.arcs[arc_id]
            head = d.nodes[arc.head]
            if head.id == d.terminal:
                break
            next_head = d.arcs[path[head.layer]].head if head.layer < len(path) else None
            current = head.id
            if (head.layer > d.prefix_depth and not head.exact
                    and len(d.layers[head.layer]) < d.width):
                phi = d.nodes[arc.tail].label
                twin = split_node(d, head.id, phi, memo)
                if twin is not None:
                    splits += 1
                    progressed = True
                    current = twin
            arc_id = None
            if next_head is not None:
                for candidate in d.nodes[current].out_arcs:
                    if d.arcs[candidate].head == next_head:
                        arc_id = candidate
                        break

        if not progressed:
            return splits
        filter(d, incumbent)
