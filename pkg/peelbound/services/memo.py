"""
Caches that spare black-box evaluations

- SolutionTrie: exact cost and arrival epoch of every evaluated tour prefix
- IntervalTree: per ordered pair of bodies, relaxed bounds keyed by departure window
- BoundMemo: both caches plus a binary snapshot
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union
import logging
import math
import struct

import orjson

from peelbound.core.errors import ContractViolation, SnapshotError
from peelbound.services.transfer import TransferModel


logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"PBMEMO\x00\x00"
SNAPSHOT_VERSION = 1
MONOTONICITY_TOL = 1e-6


# ==================== SOLUTION TRIE ====================

@dataclass(slots=True)
class TrieNode:
    label: int
    leg_cost: float
    total: float
    est: float
    children: Dict[int, "TrieNode"] = field(default_factory=dict)


class SolutionTrie:
    """Prefix tree of evaluated tours rooted at Earth (body 0, cost 0, epoch 0)"""

    def __init__(self, model: TransferModel):
        self.model = model
        self.root = TrieNode(label=0, leg_cost=0.0, total=0.0, est=0.0)
        self.size = 1

    def extend(self, node: TrieNode, label: int) -> TrieNode:
        """
        Child of node for the next body, evaluating B on a miss

        Infeasible prefixes propagate +inf without further evaluations.
        """
        child = node.children.get(label)
        if child is not None:
            return child

        if math.isinf(node.total):
            child = TrieNode(label=label, leg_cost=math.inf, total=math.inf, est=math.inf)
        else:
            result = self.model.black_box(self.model.query(node.label, label, node.est))
            child = TrieNode(
                label=label,
                leg_cost=result.z,
                total=node.total + result.z,
                est=node.est + result.tau + result.t if result.feasible else math.inf,
            )
        node.children[label] = child
        self.size += 1
        return child

    def walk(self, sequence: Sequence[int]) -> TrieNode:
        """Node for a sequence starting at Earth, extending the trie as needed"""
        if not sequence or sequence[0] != 0:
            raise ContractViolation("sequence must start at Earth (0)")
        if len(set(sequence)) != len(sequence):
            raise ContractViolation(f"sequence repeats a body: {list(sequence)}")
        node = self.root
        for label in sequence[1:]:
            node = self.extend(node, label)
        return node

    def lookup(self, sequence: Sequence[int]) -> Optional[TrieNode]:
        """Node for a sequence if already evaluated, without any evaluation"""
        node = self.root
        for label in sequence[1:]:
            node = node.children.get(label)
            if node is None:
                return None
        return node

    def evaluate(self, sequence: Sequence[int]) -> Tuple[float, float]:
        node = self.walk(sequence)
        return node.total, node.est

    def items(self) -> Iterator[Tuple[Tuple[int, ...], TrieNode]]:
        """Depth-first (path, node) pairs, root excluded"""
        stack: List[Tuple[Tuple[int, ...], TrieNode]] = [((0,), self.root)]
        while stack:
            path, node = stack.pop()
            for label in sorted(node.children, reverse=True):
                child = node.children[label]
                child_path = path + (label,)
                yield child_path, child
                stack.append((child_path, child))


# ==================== INTERVAL TREE ====================

class IntervalNode:
    """AVL node augmented with subtree min start, max end and max z"""
    __slots__ = ["start", "end", "z", "left", "right", "height", "min_start", "max_end", "max_z"]

    def __init__(self, start: float, end: float, z: float):
        self.start = start
        self.end = end
        self.z = z
        self.left: Optional["IntervalNode"] = None
        self.right: Optional["IntervalNode"] = None
        self.height = 1
        self.min_start = start
        self.max_end = end
        self.max_z = z


def _height(node: Optional[IntervalNode]) -> int:
    return node.height if node else 0


def _update(node: IntervalNode):
    node.height = 1 + max(_height(node.left), _height(node.right))
    node.min_start, node.max_end, node.max_z = node.start, node.end, node.z
    for child in (node.left, node.right):
        if child:
            node.min_start = min(node.min_start, child.min_start)
            node.max_end = max(node.max_end, child.max_end)
            node.max_z = max(node.max_z, child.max_z)


def _rotate_left(x: IntervalNode) -> IntervalNode:
    y = x.right
    x.right = y.left
    y.left = x
    _update(x)
    _update(y)
    return y


def _rotate_right(y: IntervalNode) -> IntervalNode:
    x = y.left
    y.left = x.right
    x.right = y
    _update(y)
    _update(x)
    return x


def _rebalance(node: IntervalNode) -> IntervalNode:
    _update(node)
    balance = _height(node.left) - _height(node.right)
    if balance > 1:
        if _height(node.left.left) < _height(node.left.right):
            node.left = _rotate_left(node.left)
        return _rotate_right(node)
    if balance < -1:
        if _height(node.right.right) < _height(node.right.left):
            node.right = _rotate_right(node.right)
        return _rotate_left(node)
    return node


class IntervalTree:
    """Balanced interval tree answering 'strongest bound among containing intervals'"""

    def __init__(self):
        self.root: Optional[IntervalNode] = None
        self.size = 0

    def insert(self, start: float, end: float, z: float):
        def _insert(node: Optional[IntervalNode]) -> IntervalNode:
            if node is None:
                return IntervalNode(start, end, z)
            if (start, end) < (node.start, node.end):
                node.left = _insert(node.left)
            else:
                node.right = _insert(node.right)
            return _rebalance(node)

        self.root = _insert(self.root)
        self.size += 1

    def max_containing(self, start: float, end: float) -> Optional[float]:
        """Maximum z over stored intervals [s, e] with s <= start and e >= end"""
        best = -math.inf

        def _search(node: Optional[IntervalNode]):
            nonlocal best
            if node is None or node.min_start > start or node.max_end < end or node.max_z <= best:
                return
            if node.start <= start and node.end >= end:
                best = max(best, node.z)
            _search(node.left)
            if node.start <= start:
                _search(node.right)

        _search(self.root)
        return best if best > -math.inf else None

    def items(self) -> Iterator[Tuple[float, float, float]]:
        stack: List[IntervalNode] = [self.root] if self.root else []
        while stack:
            node = stack.pop()
            yield node.start, node.end, node.z
            stack.extend(child for child in (node.right, node.left) if child)


# ==================== BOUND MEMO ====================

class BoundMemo:
    """Exact-solution trie plus per-pair bound trees for one instance"""

    def __init__(self, model: TransferModel):
        self.model = model
        self.trie = SolutionTrie(model)
        self.trees: Dict[Tuple[int, int], IntervalTree] = {}

    def trie_evaluate(self, sequence: Sequence[int]) -> Tuple[float, float]:
        """
        Exact cumulative cost and arrival epoch of a tour prefix

        Args:
            sequence: Body indices starting with Earth (0), no repeats

        Returns:
            Tuple (total_cost, est_at_end)
        """
        return self.trie.evaluate(sequence)

    def bounds_insert(self, pair: Tuple[int, int], interval: Tuple[float, float], z: float):
        lo, hi = interval
        if not hi >= lo:
            raise ContractViolation(f"empty interval {interval}")
        if not math.isfinite(z):
            raise ContractViolation("only finite bounds are stored")

        tree = self.trees.setdefault(pair, IntervalTree())
        container = tree.max_containing(lo, hi)
        if container is not None and container > z + MONOTONICITY_TOL:
            logger.warning(
                f"Bound monotonicity violated for {pair} on [{lo:.3f}, {hi:.3f}]: "
                f"container bound {container:.6f} exceeds {z:.6f}"
            )
        tree.insert(lo, hi, z)

    def bounds_query(self, pair: Tuple[int, int], interval: Tuple[float, float]) -> Optional[float]:
        lo, hi = interval
        if not hi >= lo:
            raise ContractViolation(f"empty interval {interval}")
        tree = self.trees.get(pair)
        if tree is None:
            return None
        return tree.max_containing(lo, hi)

    # ---------- snapshot ----------

    def _records(self) -> Iterator[dict]:
        for path, node in self.trie.items():
            yield {"k": "trie", "path": list(path), "cost": node.leg_cost, "total": node.total, "est": node.est}
        for (a, b), tree in sorted(self.trees.items()):
            for lo, hi, z in tree.items():
                yield {"k": "bound", "a": a, "b": b, "lo": lo, "hi": hi, "z": z}

    def save_snapshot(self, path: Union[str, Path]) -> int:
        """
        Write both caches to a binary snapshot

        Format: 8-byte magic, uint16 version, then records of uint32 length + JSON payload.

        Returns:
            Number of records written
        """
        count = 0
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(struct.pack("<H", SNAPSHOT_VERSION))
            for record in self._records():
                payload = orjson.dumps(record)
                fh.write(struct.pack("<I", len(payload)))
                fh.write(payload)
                count += 1
        logger.info(f"Saved memo snapshot with {count} records to {path}")
        return count

    def load_snapshot(self, path: Union[str, Path]) -> int:
        """
        Merge a snapshot written by save_snapshot into this memo

        Raises:
            SnapshotError: Wrong magic, unsupported version or truncated record
        """
        data = Path(path).read_bytes()
        header = len(SNAPSHOT_MAGIC) + 2
        if data[:len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
            raise SnapshotError(f"{path} is not a memo snapshot")
        (version,) = struct.unpack("<H", data[len(SNAPSHOT_MAGIC):header])
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")

        offset, count = header, 0
        while offset < len(data):
            if offset + 4 > len(data):
                raise SnapshotError("truncated record header")
            (length,) = struct.unpack("<I", data[offset:offset + 4])
            offset += 4
            if offset + length > len(data):
                raise SnapshotError("truncated record payload")
            try:
                record = orjson.loads(data[offset:offset + length])
            except orjson.JSONDecodeError as e:
                raise SnapshotError(f"corrupt record at byte {offset}: {e}") from e
            offset += length
            self._restore(record)
            count += 1
        logger.info(f"Loaded memo snapshot with {count} records from {path}")
        return count

    def _restore(self, record: dict):
        finite: Callable[[Optional[float]], float] = lambda v: math.inf if v is None else float(v)
        if record.get("k") == "trie":
            path = record["path"]
            node = self.trie.root
            for label in path[1:-1]:
                if label not in node.children:
                    raise SnapshotError(f"trie record {path} precedes its parent")
                node = node.children[label]
            if path[-1] not in node.children:
                node.children[path[-1]] = TrieNode(
                    label=path[-1],
                    leg_cost=finite(record["cost"]),
                    total=finite(record["total"]),
                    est=finite(record["est"]),
                )
                self.trie.size += 1
        elif record.get("k") == "bound":
            self.trees.setdefault((record["a"], record["b"]), IntervalTree()).insert(
                float(record["lo"]), float(record["hi"]), float(record["z"])
            )
        else:
            raise SnapshotError(f"unknown record kind {record.get('k')!r}")
