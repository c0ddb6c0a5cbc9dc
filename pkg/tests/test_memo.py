import math
import random

import pytest

from peelbound.core.errors import ContractViolation, SnapshotError
from peelbound.services.memo import SNAPSHOT_MAGIC, BoundMemo, IntervalTree


def test_interval_tree_matches_brute_force():
    rng = random.Random(5)
    tree = IntervalTree()
    stored = []
    for step in range(10000):
        if step % 2 == 0:
            lo = rng.uniform(0, 100)
            hi = lo + rng.uniform(0, 50)
            z = rng.uniform(0, 10)
            tree.insert(lo, hi, z)
            stored.append((lo, hi, z))
        else:
            lo = rng.uniform(0, 100)
            hi = lo + rng.uniform(0, 30)
            expected = max((z for s, e, z in stored if s <= lo and e >= hi), default=None)
            assert tree.max_containing(lo, hi) == expected
    assert tree.size == len(stored)


def test_interval_tree_stays_balanced():
    tree = IntervalTree()
    for k in range(1024):
        tree.insert(float(k), float(k) + 1.0, 1.0)
    assert tree.root.height <= 1.45 * math.log2(1024 + 2)


def test_interval_tree_containment_is_inclusive():
    tree = IntervalTree()
    tree.insert(1.0, 5.0, 3.0)
    assert tree.max_containing(1.0, 5.0) == 3.0
    assert tree.max_containing(0.5, 5.0) is None
    assert tree.max_containing(2.0, 5.5) is None


def test_trie_evaluates_each_prefix_once(small_grid):
    _, model, memo = small_grid
    rng = random.Random(9)
    prefixes = set()
    for _ in range(1000):
        perm = list(range(1, 5))
        rng.shuffle(perm)
        tour = [0] + perm[:rng.randint(1, 4)]
        memo.trie_evaluate(tour)
        prefixes.update(tuple(tour[:k]) for k in range(2, len(tour) + 1))
    assert model.b_calls == len(prefixes)
    assert memo.trie.size == len(prefixes) + 1


def test_trie_chains_arrival_epochs(small_grid):
    _, model, memo = small_grid
    total, est = memo.trie_evaluate([0, 2, 1, 3])
    eta, expected = 0.0, 0.0
    for src, dst in [(0, 2), (2, 1), (1, 3)]:
        leg = model.black_box(model.query(src, dst, eta))
        expected += leg.z
        eta += leg.tau + leg.t
    assert total == pytest.approx(expected)
    assert est == eta


def test_trie_rejects_bad_sequences(small_grid):
    _, _, memo = small_grid
    with pytest.raises(ContractViolation):
        memo.trie_evaluate([1, 2])
    with pytest.raises(ContractViolation):
        memo.trie_evaluate([0, 1, 1])


def test_trie_lookup_does_not_evaluate(small_grid):
    _, model, memo = small_grid
    assert memo.trie.lookup([0, 1, 2]) is None
    assert model.b_calls == 0
    memo.trie_evaluate([0, 1, 2])
    assert memo.trie.lookup([0, 1, 2]).label == 2


def test_bounds_query_returns_strongest_container(small_grid):
    _, _, memo = small_grid
    memo.bounds_insert((1, 2), (0.0, 10.0), 3.0)
    memo.bounds_insert((1, 2), (2.0, 8.0), 4.0)
    assert memo.bounds_query((1, 2), (3.0, 7.0)) == 4.0
    assert memo.bounds_query((1, 2), (1.0, 7.0)) == 3.0
    assert memo.bounds_query((2, 1), (3.0, 7.0)) is None


def test_bounds_insert_rejects_bad_input(small_grid):
    _, _, memo = small_grid
    with pytest.raises(ContractViolation):
        memo.bounds_insert((1, 2), (5.0, 4.0), 1.0)
    with pytest.raises(ContractViolation):
        memo.bounds_insert((1, 2), (1.0, 4.0), math.inf)


def test_bounds_insert_warns_on_monotonicity_violation(small_grid, caplog):
    _, _, memo = small_grid
    memo.bounds_insert((1, 2), (0.0, 10.0), 5.0)
    memo.bounds_insert((1, 2), (2.0, 8.0), 4.0)
    assert "monotonicity" in caplog.text


def test_snapshot_restores_both_caches(small_grid, grid_factory, tmp_path):
    _, _, memo = small_grid
    memo.trie_evaluate([0, 1, 2, 3])
    memo.trie_evaluate([0, 2, 4])
    memo.bounds_insert((1, 2), (0.0, 10.0), 3.0)
    path = tmp_path / "memo.bin"
    written = memo.save_snapshot(path)

    _, fresh_model, fresh = grid_factory(4, seed=3)
    assert fresh.load_snapshot(path) == written
    assert fresh.trie_evaluate([0, 1, 2, 3]) == memo.trie_evaluate([0, 1, 2, 3])
    assert fresh_model.b_calls == 0
    assert fresh.bounds_query((1, 2), (1.0, 9.0)) == 3.0


def test_snapshot_rejects_foreign_files(small_grid, tmp_path):
    _, _, memo = small_grid
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a snapshot")
    with pytest.raises(SnapshotError):
        memo.load_snapshot(path)


def test_snapshot_rejects_truncated_records(small_grid, tmp_path):
    _, _, memo = small_grid
    memo.trie_evaluate([0, 1])
    path = tmp_path / "memo.bin"
    memo.save_snapshot(path)
    data = path.read_bytes()
    assert data.startswith(SNAPSHOT_MAGIC)
    path.write_bytes(data[:-3])
    with pytest.raises(SnapshotError):
        BoundMemo(memo.model).load_snapshot(path)
