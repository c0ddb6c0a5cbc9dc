"""
Shared fixtures

GridTransferModel is a deterministic analytic transfer model minimized by
exhaustive search over an integer (tau, t) lattice. Every epoch it produces is an
integer, so relaxed bounds are provably below exact costs and brute-force
enumeration of all tours is an exact oracle for the solver.
"""

from itertools import permutations
import math

import numpy as np
import pytest

from peelbound.schemas.instance import Instance
from peelbound.schemas.transfer import TransferResult
from peelbound.services.instance import generate
from peelbound.services.memo import BoundMemo
from peelbound.services.orbital import TIME_COST
from peelbound.services.transfer import INFEASIBLE, TransferModel


class GridTransferModel(TransferModel):
    def __init__(self, n: int, seed: int = 0, tau_max: float = 12.0, t_max: float = 12.0, multi: int = 1):
        super().__init__(tau_max=tau_max, t_max=t_max, multi=multi, grid_days=1.0)
        rng = np.random.default_rng(seed)
        size = n + 1
        self.base = rng.uniform(1.0, 5.0, size=(size, size))
        self.phase = rng.uniform(0.0, 2.0 * math.pi, size=(size, size))
        self.t_opt = rng.integers(1, int(t_max) + 1, size=(size, size)).astype(float)

    def inner_cost_grid(self, src, dst, eta, taus, ts, waiting_free=False):
        taus, ts = np.broadcast_arrays(
            np.atleast_1d(np.asarray(taus, dtype=float)),
            np.atleast_1d(np.asarray(ts, dtype=float)),
        )
        depart = eta + taus
        dv = (
            self.base[src, dst]
            + 1.5 * (1.0 + np.sin(0.4 * depart + self.phase[src, dst]))
            + 0.25 * np.abs(ts - self.t_opt[src, dst])
        )
        elapsed = ts if waiting_free else taus + ts
        return dv + TIME_COST * elapsed, dv

    def _minimize(self, src, dst, eta, tau_hi, t_hi, theta, waiting_free, multi):
        taus = np.arange(0.0, math.floor(tau_hi + 1e-9) + 1.0)
        ts = np.arange(1.0, math.floor(t_hi + 1e-9) + 1.0)
        if taus.size == 0 or ts.size == 0:
            return INFEASIBLE
        tau_grid, t_grid = np.meshgrid(taus, ts, indexing="ij")
        z, dv = self.inner_cost_grid(src, dst, eta, tau_grid.ravel(), t_grid.ravel(), waiting_free)
        if theta is not None:
            z = np.where(tau_grid.ravel() + t_grid.ravel() <= theta + 1e-12, z, np.inf)
        k = int(np.argmin(z))
        if not math.isfinite(z[k]):
            return INFEASIBLE
        return TransferResult(
            tau=float(tau_grid.ravel()[k]), t=float(t_grid.ravel()[k]), z=float(z[k]), delta_v=float(dv[k]),
        )


def brute_force(instance: Instance, memo: BoundMemo):
    """Cheapest tour by enumerating every permutation through the trie"""
    best = (math.inf, None)
    for perm in permutations(range(1, instance.n + 1)):
        tour = [0, *perm]
        cost, _ = memo.trie_evaluate(tour)
        best = min(best, (cost, tour))
    return best


@pytest.fixture
def grid_factory():
    def make(n: int, seed: int = 0, **kwargs):
        instance = generate(n, seed)
        model = GridTransferModel(n, seed, **kwargs)
        return instance, model, BoundMemo(model)
    return make


@pytest.fixture
def small_grid(grid_factory):
    return grid_factory(4, seed=3)
