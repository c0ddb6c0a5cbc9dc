"""
Two-body dynamics: Kepler's equation, element propagation and the Lambert problem

Everything inside this module works in km, km/s and seconds; the public surface
takes epochs in days and converts them through DAY_SECONDS.
"""

from fractions import Fraction
from typing import Tuple, Union
import logging
import math

import numpy as np

from peelbound.core.errors import DegenerateGeometryError, NumericalError
from peelbound.schemas.orbital import BodyState, LambertSolution, OrbitalElements


logger = logging.getLogger(__name__)


# ==================== CONSTANTS ====================

MU_SUN = 1.32712440018e11          # km^3/s^2
DAY_SECONDS = 86400.0              # s/day
AU_KM = 1.495978707e8              # km
TIME_COST_RATE = Fraction(2, 30)   # km/s per day of mission time
TIME_COST = float(TIME_COST_RATE)

TWO_PI = 2.0 * math.pi

KEPLER_MAX_ITER = 50
KEPLER_TOL = 1e-12

LAMBERT_MAX_ITER = 60
LAMBERT_TOL = 1e-12
DEGENERATE_SIN = 1e-12

# Lambert status codes
_OK, _DEGENERATE, _NO_CONVERGENCE = 0, 1, 2

ArrayLike = Union[float, np.ndarray]


# ==================== KEPLER ====================

def solve_kepler(mean_anomaly: ArrayLike, e: float) -> ArrayLike:
    """
    Solve Kepler's equation E - e*sin(E) = M with a bracketed Newton iteration

    The mean anomaly is reduced to [0, 2*pi) where the residual is monotone on
    [0, 2*pi]; Newton steps leaving the bracket fall back to bisection.

    Args:
        mean_anomaly: Mean anomaly in radians, scalar or array
        e: Eccentricity, 0 <= e < 1

    Returns:
        Eccentric anomaly with the shape of the input

    Raises:
        NumericalError: If the residual is still above tolerance after the iteration cap
    """
    scalar = np.ndim(mean_anomaly) == 0
    M = np.mod(np.asarray(mean_anomaly, dtype=float), TWO_PI)
    E = M + e * np.sin(M) if e < 0.8 else np.full_like(M, math.pi)
    lo = np.zeros_like(M)
    hi = np.full_like(M, TWO_PI)

    residual = E - e * np.sin(E) - M
    for _ in range(KEPLER_MAX_ITER):
        if np.all(np.abs(residual) <= KEPLER_TOL):
            break
        lo = np.where(residual < 0, E, lo)
        hi = np.where(residual > 0, E, hi)
        step = E - residual / (1.0 - e * np.cos(E))
        outside = (step <= lo) | (step >= hi)
        E = np.where(outside, 0.5 * (lo + hi), step)
        residual = E - e * np.sin(E) - M

    worst = float(np.max(np.abs(residual))) if residual.size else 0.0
    if worst > KEPLER_TOL:
        raise NumericalError("Kepler iteration did not converge", residual=worst)

    return float(E) if scalar else E


# ==================== PROPAGATION ====================

def _perifocal_axes(elements: OrbitalElements) -> Tuple[np.ndarray, np.ndarray]:
    cos_O, sin_O = math.cos(elements.raan), math.sin(elements.raan)
    cos_w, sin_w = math.cos(elements.arg_periapsis), math.sin(elements.arg_periapsis)
    cos_i, sin_i = math.cos(elements.inclination), math.sin(elements.inclination)
    p_hat = np.array([
        cos_O * cos_w - sin_O * sin_w * cos_i,
        sin_O * cos_w + cos_O * sin_w * cos_i,
        sin_w * sin_i,
    ])
    q_hat = np.array([
        -cos_O * sin_w - sin_O * cos_w * cos_i,
        -sin_O * sin_w + cos_O * cos_w * cos_i,
        cos_w * sin_i,
    ])
    return p_hat, q_hat


def orbital_period(elements: OrbitalElements) -> float:
    """Orbital period in days"""
    a = elements.semi_major_axis
    return TWO_PI * math.sqrt(a ** 3 / MU_SUN) / DAY_SECONDS


def propagate(elements: OrbitalElements, epoch: ArrayLike) -> BodyState:
    """
    Heliocentric Cartesian state of a body at one or many epochs

    Args:
        elements: Keplerian elements of the body
        epoch: Epoch in days, scalar or 1-D array

    Returns:
        BodyState whose position/velocity are (3,) for a scalar epoch, (k, 3) otherwise
    """
    epochs = np.asarray(epoch, dtype=float)
    a = elements.semi_major_axis
    e = elements.eccentricity

    mean_motion = math.sqrt(MU_SUN / a ** 3)
    M = elements.mean_anomaly_at_epoch + mean_motion * (epochs - elements.epoch) * DAY_SECONDS
    E = np.asarray(solve_kepler(M, e))

    cos_E, sin_E = np.cos(E), np.sin(E)
    b = math.sqrt(1.0 - e * e)
    r = a * (1.0 - e * cos_E)

    x = a * (cos_E - e)
    y = a * b * sin_E
    v_scale = math.sqrt(MU_SUN * a) / r
    vx = -v_scale * sin_E
    vy = v_scale * b * cos_E

    p_hat, q_hat = _perifocal_axes(elements)
    position = x[..., None] * p_hat + y[..., None] * q_hat
    velocity = vx[..., None] * p_hat + vy[..., None] * q_hat

    return BodyState(
        position=position,
        velocity=velocity,
        epoch=epochs,
    )


def _stumpff(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stumpff functions C(z), S(z); series near zero, half-angle form for z > 0"""
    pos = z > 1e-3
    neg = z < -1e-3
    with np.errstate(all="ignore"):
        sz = np.sqrt(np.where(pos, z, 1.0))
        c_pos = 2.0 * np.sin(0.5 * sz) ** 2 / np.where(pos, z, 1.0)
        s_pos = (sz - np.sin(sz)) / sz ** 3
        sn = np.sqrt(np.where(neg, -z, 1.0))
        c_neg = (np.cosh(sn) - 1.0) / np.where(neg, -z, 1.0)
        s_neg = (np.sinh(sn) - sn) / sn ** 3
    c_small = 0.5 - z / 24.0 + z ** 2 / 720.0 - z ** 3 / 40320.0
    s_small = 1.0 / 6.0 - z / 120.0 + z ** 2 / 5040.0 - z ** 3 / 362880.0
    C = np.where(pos, c_pos, np.where(neg, c_neg, c_small))
    S = np.where(pos, s_pos, np.where(neg, s_neg, s_small))
    return C, S


def propagate_cartesian(r0: np.ndarray, v0: np.ndarray, dt_seconds: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Propagate a Cartesian state along its conic with universal variables

    Args:
        r0: Initial position (km)
        v0: Initial velocity (km/s)
        dt_seconds: Elapsed time (s)

    Returns:
        Tuple of final position and velocity

    Raises:
        NumericalError: If the universal-anomaly iteration does not converge
    """
    r0 = np.asarray(r0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    r0n = float(np.linalg.norm(r0))
    vr0 = float(np.dot(r0, v0)) / r0n
    alpha = 2.0 / r0n - float(np.dot(v0, v0)) / MU_SUN
    sqmu = math.sqrt(MU_SUN)

    chi = sqmu * abs(alpha) * dt_seconds
    if chi == 0.0:
        chi = sqmu * dt_seconds / r0n
    target = sqmu * dt_seconds
    residual = math.inf
    for _ in range(LAMBERT_MAX_ITER):
        z = np.array(alpha * chi * chi)
        C, S = (float(v) for v in _stumpff(z))
        F = (r0n * vr0 / sqmu) * chi * chi * C + (1.0 - alpha * r0n) * chi ** 3 * S + r0n * chi - target
        dF = (r0n * vr0 / sqmu) * chi * (1.0 - alpha * chi * chi * S) + (1.0 - alpha * r0n) * chi * chi * C + r0n
        residual = abs(F) / max(abs(target), 1.0)
        if residual <= LAMBERT_TOL:
            break
        chi -= F / dF
    else:
        raise NumericalError("Universal Kepler iteration did not converge", residual=residual)

    z = np.array(alpha * chi * chi)
    C, S = (float(v) for v in _stumpff(z))
    f = 1.0 - chi * chi / r0n * C
    g = dt_seconds - chi ** 3 * S / sqmu
    r = f * r0 + g * v0
    rn = float(np.linalg.norm(r))
    f_dot = sqmu / (rn * r0n) * (alpha * chi ** 3 * S - chi)
    g_dot = 1.0 - chi * chi / rn * C
    v = f_dot * r0 + g_dot * v0
    return r, v


# ==================== LAMBERT ====================

def _time_residual(z, A, r1n, r2n, target):
    """Universal-variable time equation F(z) and dF/dz; y <= 0 marks the too-short side"""
    C, S = _stumpff(z)
    with np.errstate(all="ignore"):
        y = r1n + r2n + A * (z * S - 1.0) / np.sqrt(C)
        y_ok = y > 0
        ys = np.where(y_ok, y, 1.0)
        chi3 = (ys / C) ** 1.5
        F = chi3 * S + A * np.sqrt(ys) - target
        near_zero = np.abs(z) < 1e-6
        zs = np.where(near_zero, 1.0, z)
        dF_general = chi3 * ((C - 1.5 * S / C) / (2.0 * zs) + 0.75 * S * S / C) \
            + A / 8.0 * (3.0 * S / C * np.sqrt(ys) + A * np.sqrt(C / ys))
        dF_zero = math.sqrt(2.0) / 40.0 * ys ** 1.5 + A / 8.0 * (np.sqrt(ys) + A * np.sqrt(1.0 / (2.0 * ys)))
    dF = np.where(near_zero, dF_zero, dF_general)
    return F, dF, y_ok, y


def _lambert_kernel(r1: np.ndarray, r2: np.ndarray, tof: np.ndarray, prograde: bool):
    """Vectorized single-revolution Lambert solver; returns v1, v2, status, residual"""
    count = r1.shape[0]
    r1n = np.linalg.norm(r1, axis=1)
    r2n = np.linalg.norm(r2, axis=1)
    cross = np.cross(r1, r2)

    with np.errstate(all="ignore"):
        sin_abs = np.linalg.norm(cross, axis=1) / (r1n * r2n)
        cos_t = np.clip(np.sum(r1 * r2, axis=1) / (r1n * r2n), -1.0, 1.0)
        long_way = cross[:, 2] < 0 if prograde else cross[:, 2] >= 0
        sin_t = np.where(long_way, -sin_abs, sin_abs)
        A = sin_t * np.sqrt(r1n * r2n / np.maximum(1.0 - cos_t, 1e-300))

    degenerate = ~(sin_abs >= DEGENERATE_SIN) | ~(tof > 0) | ~(r1n > 0) | ~(r2n > 0)
    target = math.sqrt(MU_SUN) * np.where(tof > 0, tof, 1.0)

    lo = np.full(count, -1e4)
    hi = np.full(count, 4.0 * math.pi ** 2 - 1e-6)

    # the root must be bracketed: F < 0 (or y <= 0) at lo and F > 0 at hi
    F_lo, _, ylo_ok, _ = _time_residual(lo, A, r1n, r2n, target)
    F_hi, _, yhi_ok, _ = _time_residual(hi, A, r1n, r2n, target)
    bracketed = (~ylo_ok | (F_lo < 0)) & yhi_ok & (F_hi > 0)

    active = ~degenerate & bracketed
    converged = np.zeros(count, dtype=bool)
    z = np.zeros(count)
    F = np.full(count, np.inf)

    for _ in range(LAMBERT_MAX_ITER):
        F, dF, y_ok, _ = _time_residual(z, A, r1n, r2n, target)
        short = ~y_ok | (F < 0)
        lo = np.where(active & short, z, lo)
        hi = np.where(active & ~short, z, hi)

        done = y_ok & ((np.abs(F) <= LAMBERT_TOL * target) | (hi - lo <= 1e-14 * (1.0 + np.abs(z))))
        converged |= active & done
        active &= ~done
        if not active.any():
            break

        with np.errstate(all="ignore"):
            step = z - F / dF
        bad = ~y_ok | ~np.isfinite(step) | (step <= lo) | (step >= hi)
        z = np.where(active, np.where(bad, 0.5 * (lo + hi), step), z)

    F, _, _, y = _time_residual(z, A, r1n, r2n, target)
    residual = np.abs(F) / target

    status = np.full(count, _OK)
    status[~converged] = _NO_CONVERGENCE
    status[degenerate] = _DEGENERATE

    ok = status == _OK
    with np.errstate(all="ignore"):
        f = 1.0 - y / r1n
        g = A * np.sqrt(np.where(ok, y, 1.0) / MU_SUN)
        g_dot = 1.0 - y / r2n
        v1 = (r2 - f[:, None] * r1) / g[:, None]
        v2 = (g_dot[:, None] * r2 - r1) / g[:, None]
    v1[~ok] = np.nan
    v2[~ok] = np.nan
    return v1, v2, status, residual


def lambert(r1: np.ndarray, r2: np.ndarray, tof: float, prograde: bool = True) -> LambertSolution:
    """
    Single-revolution Lambert problem

    Args:
        r1: Departure position (km)
        r2: Arrival position (km)
        tof: Time of flight (s)
        prograde: Take the transfer whose angular momentum has a positive z component

    Returns:
        LambertSolution with departure and arrival velocities (km/s)

    Raises:
        DegenerateGeometryError: Transfer angle of 0 or pi, or non-positive tof
        NumericalError: Iteration did not converge
    """
    r1 = np.asarray(r1, dtype=float).reshape(1, 3)
    r2 = np.asarray(r2, dtype=float).reshape(1, 3)
    v1, v2, status, residual = _lambert_kernel(r1, r2, np.array([float(tof)]), prograde)

    if status[0] == _DEGENERATE:
        raise DegenerateGeometryError("Transfer plane undefined for collinear position vectors")
    if status[0] == _NO_CONVERGENCE:
        raise NumericalError("Lambert iteration did not converge", residual=float(residual[0]))

    return LambertSolution(v_depart=v1[0], v_arrive=v2[0])


def lambert_batch(
    r1: np.ndarray,
    r2: np.ndarray,
    tof: ArrayLike,
    prograde: bool = True,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Solve many Lambert problems at once

    Args:
        r1: Departure positions, shape (k, 3)
        r2: Arrival positions, shape (k, 3)
        tof: Times of flight in seconds, scalar or shape (k,)
        prograde: Transfer direction, as in lambert()

    Returns:
        Tuple (v_depart, v_arrive, ok); failed rows are NaN and ok is False there
    """
    r1 = np.atleast_2d(np.asarray(r1, dtype=float))
    r2 = np.atleast_2d(np.asarray(r2, dtype=float))
    r1, r2 = np.broadcast_arrays(r1, r2)
    tof = np.broadcast_to(np.asarray(tof, dtype=float), (r1.shape[0],))
    v1, v2, status, _ = _lambert_kernel(r1, r2, tof, prograde)
    return v1, v2, status == _OK
