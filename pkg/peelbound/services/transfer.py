"""
Black-box transfer functions B, B' and B~

Each one minimizes the inner two-impulse objective over waiting time tau and travel
time t with a deterministic multistart: a lattice scan seeds the starts (the lattice
minimum first, then van der Corput points along the waiting axis) and every start is
polished with scipy.
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Tuple
import logging
import math

import numpy as np
from scipy.optimize import minimize

from peelbound.core.config import Settings, get_settings
from peelbound.core.errors import ContractViolation
from peelbound.schemas.instance import Instance
from peelbound.schemas.transfer import TransferQuery, TransferResult
from peelbound.services.orbital import DAY_SECONDS, TIME_COST, lambert_batch, propagate


logger = logging.getLogger(__name__)

PENALTY = 1e6
INFEASIBLE = TransferResult(tau=0.0, t=1.0, z=math.inf, delta_v=math.inf, feasible=False)

# (z, tau, t, delta_v)
Candidate = Tuple[float, float, float, float]


def van_der_corput(k: int, base: int = 2) -> float:
    """k-th element of the van der Corput sequence in [0, 1)"""
    value, denom = 0.0, 1.0
    while k > 0:
        k, digit = divmod(k, base)
        denom *= base
        value += digit / denom
    return value


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    count = int(math.ceil((hi - lo) / step - 1e-9)) + 1
    return np.linspace(lo, hi, count)


def _key(c: Candidate) -> Tuple[float, float, float]:
    return (c[0], c[1], c[2])


class TransferModel(ABC):
    """
    Common surface of every transfer model: the three black boxes, query validation
    and evaluation counters. Subclasses supply the inner objective on a lattice.
    """

    def __init__(
        self,
        tau_max: float = 730.0,
        t_max: float = 730.0,
        multi: int = 1,
        grid_days: float = 30.0,
        max_iter: int = 100,
        fd_step: float = 1e-3,
    ):
        if multi < 1:
            raise ContractViolation("multi must be at least 1")
        self.tau_max = float(tau_max)
        self.t_max = float(t_max)
        self.multi = multi
        self.grid_days = grid_days
        self.max_iter = max_iter
        self.fd_step = fd_step

        self.b_calls = 0
        self.bprime_calls = 0
        self.bcapped_calls = 0

    @property
    def horizon(self) -> float:
        return self.tau_max + self.t_max

    def counters(self) -> Dict[str, int]:
        return {
            "b_calls": self.b_calls,
            "bprime_calls": self.bprime_calls,
            "bcapped_calls": self.bcapped_calls,
        }

    # ---------- inner objective ----------

    @abstractmethod
    def inner_cost_grid(
        self,
        src: int,
        dst: int,
        eta: float,
        taus: np.ndarray,
        ts: np.ndarray,
        waiting_free: bool = False,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Inner cost z and delta-v at each (tau, t) pair; failures carry +inf"""

    def inner_cost(
        self,
        src: int,
        dst: int,
        eta: float,
        tau: float,
        t: float,
        waiting_free: bool = False,
    ) -> Tuple[float, float]:
        """
        Inner cost of one departure/arrival choice

        Args:
            src, dst: Body indices
            eta: Earliest departure epoch (days)
            tau: Waiting time (days), >= 0
            t: Travel time (days), >= 1
            waiting_free: Drop the cost of waiting

        Returns:
            Tuple (z, delta_v); (inf, inf) when the Lambert arc fails
        """
        if tau < 0 or t < 1:
            raise ContractViolation(f"inner_cost needs tau >= 0 and t >= 1 (tau={tau}, t={t})")
        z, dv = self.inner_cost_grid(src, dst, eta, np.array([tau]), np.array([t]), waiting_free)
        return float(z[0]), float(dv[0])

    # ---------- black boxes ----------

    def query(
        self,
        src: int,
        dst: int,
        eta: float,
        tau_f: Optional[float] = None,
        theta: Optional[float] = None,
        multi: Optional[int] = None,
    ) -> TransferQuery:
        return TransferQuery(
            src=src,
            dst=dst,
            eta=eta,
            tau_max=self.tau_max,
            t_max=self.t_max,
            tau_f=tau_f,
            theta=theta,
            multi=multi or self.multi,
        )

    def black_box(self, q: TransferQuery) -> TransferResult:
        """B: full cost over tau in [0, tau_max], t in [1, t_max]"""
        if q.tau_f is not None or q.theta is not None:
            raise ContractViolation("black_box takes neither tau_f nor theta")
        self.b_calls += 1
        return self._minimize(q.src, q.dst, q.eta, q.tau_max, q.t_max, None, False, q.multi)

    def black_box_relaxed(self, q: TransferQuery) -> TransferResult:
        """B': waiting-free cost over tau in [0, tau_f], t in [1, t_max]"""
        if q.tau_f is None:
            raise ContractViolation("black_box_relaxed needs tau_f")
        self.bprime_calls += 1
        return self._minimize(q.src, q.dst, q.eta, q.tau_f, q.t_max, None, True, q.multi)

    def black_box_capped(self, q: TransferQuery) -> TransferResult:
        """B~: full cost with tau + t <= theta"""
        if q.theta is None:
            raise ContractViolation("black_box_capped needs theta")
        self.bcapped_calls += 1
        if q.theta >= q.tau_max + q.t_max:
            return self._minimize(q.src, q.dst, q.eta, q.tau_max, q.t_max, None, False, q.multi)
        if q.theta < 1.0:
            return INFEASIBLE
        return self._minimize(
            q.src, q.dst, q.eta,
            min(q.tau_max, q.theta - 1.0), min(q.t_max, q.theta),
            q.theta, False, q.multi,
        )

    def evaluate(self, q: TransferQuery) -> TransferResult:
        """Dispatch to B, B' or B~ depending on which optional bound is set"""
        if q.tau_f is not None:
            return self.black_box_relaxed(q)
        if q.theta is not None:
            return self.black_box_capped(q)
        return self.black_box(q)

    # ---------- multistart ----------

    def _minimize(
        self,
        src: int,
        dst: int,
        eta: float,
        tau_hi: float,
        t_hi: float,
        theta: Optional[float],
        waiting_free: bool,
        multi: int,
    ) -> TransferResult:
        taus = _axis(0.0, tau_hi, self.grid_days)
        ts = _axis(1.0, t_hi, self.grid_days)
        tau_grid, t_grid = np.meshgrid(taus, ts, indexing="ij")
        z_flat, _ = self.inner_cost_grid(src, dst, eta, tau_grid.ravel(), t_grid.ravel(), waiting_free)
        z_grid = z_flat.reshape(tau_grid.shape)
        if theta is not None:
            z_grid = np.where(tau_grid + t_grid <= theta + 1e-12, z_grid, np.inf)

        if not np.isfinite(z_grid).any():
            return INFEASIBLE

        best: Optional[Candidate] = None
        for x0 in self._starts(taus, ts, z_grid, tau_hi, theta, multi):
            candidate = self._polish(src, dst, eta, x0, tau_hi, t_hi, theta, waiting_free)
            if candidate is not None and (best is None or _key(candidate) < _key(best)):
                best = candidate

        if best is None or not math.isfinite(best[0]):
            return INFEASIBLE
        z, tau, t, dv = best
        return TransferResult(tau=tau, t=t, z=z, delta_v=dv, feasible=True)

    def _starts(
        self,
        taus: np.ndarray,
        ts: np.ndarray,
        z_grid: np.ndarray,
        tau_hi: float,
        theta: Optional[float],
        multi: int,
    ) -> List[Tuple[float, float]]:
        i, j = np.unravel_index(int(np.argmin(z_grid)), z_grid.shape)
        starts = [(float(taus[i]), float(ts[j]))]
        for k in range(1, multi):
            tau0 = van_der_corput(k) * tau_hi
            column = int(np.argmin(np.abs(taus - tau0)))
            t0 = float(ts[int(np.argmin(z_grid[column]))])
            if theta is not None:
                t0 = max(1.0, min(t0, theta - tau0))
            starts.append((tau0, t0))
        return starts

    def _polish(
        self,
        src: int,
        dst: int,
        eta: float,
        x0: Tuple[float, float],
        tau_hi: float,
        t_hi: float,
        theta: Optional[float],
        waiting_free: bool,
    ) -> Optional[Candidate]:
        """Local descent from one start; returns the better of start and end point"""
        z0, dv0 = self.inner_cost(src, dst, eta, x0[0], x0[1], waiting_free)
        if not math.isfinite(z0):
            return None
        start: Candidate = (z0, x0[0], x0[1], dv0)
        if tau_hi <= 0.0 and t_hi <= 1.0:
            return start

        lower = np.array([0.0, 1.0])
        upper = np.array([max(tau_hi, 0.0), t_hi])
        h = self.fd_step

        def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
            x = np.clip(x, lower, upper)
            offsets = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]], dtype=float)
            pts = np.clip(x + offsets, lower, upper)
            z, _ = self.inner_cost_grid(src, dst, eta, pts[:, 0], pts[:, 1], waiting_free)
            f0 = z[0] if math.isfinite(z[0]) else PENALTY
            grad = np.zeros(2)
            for axis in range(2):
                zp, zm = z[1 + 2 * axis], z[2 + 2 * axis]
                xp, xm = pts[1 + 2 * axis, axis], pts[2 + 2 * axis, axis]
                if math.isfinite(zp) and math.isfinite(zm) and xp > xm:
                    grad[axis] = (zp - zm) / (xp - xm)
                elif math.isfinite(zp) and xp > x[axis] and math.isfinite(z[0]):
                    grad[axis] = (zp - z[0]) / (xp - x[axis])
                elif math.isfinite(zm) and xm < x[axis] and math.isfinite(z[0]):
                    grad[axis] = (z[0] - zm) / (x[axis] - xm)
            return float(f0), grad

        bounds = list(zip(lower, upper))
        if theta is None:
            result = minimize(
                objective, np.array(x0), jac=True, method="L-BFGS-B", bounds=bounds,
                options={"maxiter": self.max_iter, "ftol": 1e-10, "gtol": 1e-8},
            )
        else:
            result = minimize(
                objective, np.array(x0), jac=True, method="SLSQP", bounds=bounds,
                constraints=[{
                    "type": "ineq",
                    "fun": lambda x: theta - x[0] - x[1],
                    "jac": lambda x: np.array([-1.0, -1.0]),
                }],
                options={"maxiter": self.max_iter, "ftol": 1e-10},
            )

        tau, t = (float(v) for v in np.clip(result.x, lower, upper))
        if theta is not None and tau + t > theta:
            t = max(1.0, theta - tau)
            tau = min(tau, theta - t)
        z, dv = self.inner_cost(src, dst, eta, tau, t, waiting_free)
        end: Candidate = (z, tau, t, dv)
        return end if _key(end) < _key(start) else start


class LambertTransferModel(TransferModel):
    """Transfer model of an instance: two-body ephemerides and single-revolution Lambert arcs"""

    def __init__(self, instance: Instance, multi: Optional[int] = None, settings: Optional[Settings] = None):
        settings = settings or get_settings()
        super().__init__(
            tau_max=instance.tau_max,
            t_max=instance.t_max,
            multi=multi or settings.MULTI,
            grid_days=settings.TRANSFER_GRID_DAYS,
            max_iter=settings.INNER_MAX_ITER,
            fd_step=settings.FINITE_DIFF_STEP_DAYS,
        )
        self.instance = instance

    def inner_cost_grid(
        self,
        src: int,
        dst: int,
        eta: float,
        taus: np.ndarray,
        ts: np.ndarray,
        waiting_free: bool = False,
    ) -> Tuple[np.ndarray, np.ndarray]:
        taus, ts = np.broadcast_arrays(
            np.atleast_1d(np.asarray(taus, dtype=float)),
            np.atleast_1d(np.asarray(ts, dtype=float)),
        )
        depart = eta + taus
        arrive = depart + ts
        origin = propagate(self.instance.elements(src), depart)
        target = propagate(self.instance.elements(dst), arrive)

        v1, v2, ok = lambert_batch(origin.position, target.position, ts * DAY_SECONDS)
        with np.errstate(invalid="ignore"):
            dv = np.linalg.norm(v1 - origin.velocity, axis=1) + np.linalg.norm(target.velocity - v2, axis=1)
        dv = np.where(ok, dv, np.inf)

        elapsed = ts if waiting_free else taus + ts
        return dv + TIME_COST * elapsed, dv
