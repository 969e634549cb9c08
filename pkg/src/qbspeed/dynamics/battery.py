"""
Cyclic evolution of a battery under a time-independent probing Hamiltonian.

F(t) = Tr(U_t rho U_t^dagger H0) is the instantaneous extractable energy. The
speed, the Hellinger work distance and the arcsin work formulas are all written
in terms of F (not of the work difference F(0) - F(t)), which is the reading
under which the speed formula follows from the distance and integrates to the
arcsin expressions.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson

from qbspeed.core.hamiltonians import complement
from qbspeed.core.linalg import (
    DensityMatrix,
    HermitianOperator,
    StateLike,
    commutator,
    density_of,
    matrix_exponential,
)
from qbspeed.errors import (
    BoundarySingularityError,
    DegenerateBareHamiltonianError,
    DimensionMismatchError,
    InvalidSpecError,
    MonotonicityViolationError,
    NumericalFailureError,
)
from qbspeed.utils import write_csv

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-12
DERIVATIVE_TOL = 1e-9
MONOTONE_TOL = 1e-9
MONOTONE_GRID = 256
MIN_STEPS = 100


@dataclass(frozen=True)
class SpeedSample:
    t: float
    F: float
    F_complement: float
    v: float
    at_boundary: bool = False


@dataclass(frozen=True)
class EnergyTrajectory:
    """Energies and speeds sampled on an ascending time grid."""
    times: np.ndarray
    energies: np.ndarray
    complements: np.ndarray
    speeds: np.ndarray
    boundary: np.ndarray
    trace_H0: float
    unit_energy: float = 1.0

    def __post_init__(self):
        if len(self.times) != len(self.energies):
            raise DimensionMismatchError("times and energies must have the same length")
        if np.any(np.diff(self.times) < 0):
            raise InvalidSpecError("Trajectory times must be ascending")

    def rows(self) -> List[Tuple[float, float, float, float, int]]:
        scale = self.unit_energy
        return [(float(t), float(F) / scale, float(c), float(v), int(bool(flag)))
                for t, F, c, v, flag in zip(self.times, self.energies, self.complements, self.speeds, self.boundary)]

    @property
    def boundary_times(self) -> List[float]:
        return [float(t) for t, flag in zip(self.times, self.boundary) if flag]


TRAJECTORY_HEADER = ('t', 'F', 'F_complement', 'v', 'boundary')


def _check(rho: StateLike, H: HermitianOperator, H0: HermitianOperator = None) -> None:
    if rho.dim != H.dim or (H0 is not None and H0.dim != H.dim):
        raise DimensionMismatchError(
            f"Dimension mismatch: state {rho.dim}, probing {H.dim}, bare {None if H0 is None else H0.dim}")


def bare_trace(H0: HermitianOperator) -> float:
    """
    Tr H0, which normalizes every energy quantity.

    Raises:
        DegenerateBareHamiltonianError: Tr H0 <= 0
    """
    tr = H0.trace()
    if tr <= 0:
        raise DegenerateBareHamiltonianError(f"Bare Hamiltonian must have positive trace, got {tr}")
    return tr


def _evolved_matrix(rho: StateLike, H: HermitianOperator, t: float) -> np.ndarray:
    u = matrix_exponential(H, t).matrix
    return u @ density_of(rho) @ u.conj().T


def evolve(rho: StateLike, H: HermitianOperator, t: float) -> DensityMatrix:
    """
    rho(t) = U_t rho U_t^dagger with U_t = exp(-i t H).

    Args:
        rho: Initial state (pure states are promoted to density matrices)
        H: Probing Hamiltonian
        t: Evolution time

    Returns:
        Evolved DensityMatrix
    """
    _check(rho, H)
    return DensityMatrix(_evolved_matrix(rho, H, t))


def _trace_product(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.sum(a * b.T)))


def extractable_energy(rho: StateLike, H: HermitianOperator, t: float, H0: HermitianOperator) -> float:
    """E_{U_t}(rho; H0) = Tr(U_t rho U_t^dagger H0); at t = 0 this is Tr(rho H0)."""
    _check(rho, H, H0)
    return _trace_product(_evolved_matrix(rho, H, t), H0.matrix)


def complement_energy(rho: StateLike, H: HermitianOperator, t: float, H0: HermitianOperator) -> float:
    """E_{U_t}(rho; complement(H0))."""
    _check(rho, H, H0)
    return _trace_product(_evolved_matrix(rho, H, t), complement(H0).matrix)


def _energy_pair(rho_t: np.ndarray, H0: HermitianOperator, trace_H0: float) -> Tuple[float, float]:
    F = _trace_product(rho_t, H0.matrix)
    return F, 1.0 - F / trace_H0


def hellinger_from_energies(F: float, F_prime: float, Fc: float, Fc_prime: float, trace_H0: float) -> float:
    """
    Hellinger work distance from two (energy, complement energy) pairs.

    Raises:
        NumericalFailureError: a radicand is negative beyond rounding
    """
    values = [F, F_prime, Fc, Fc_prime]
    if min(values) < -1e-12 * max(1.0, trace_H0):
        raise NumericalFailureError(f"Negative energy inside Hellinger radicand: {values}")
    F, F_prime, Fc, Fc_prime = (max(x, 0.0) for x in values)
    first = (math.sqrt(F) - math.sqrt(F_prime)) ** 2 / trace_H0
    second = (math.sqrt(Fc) - math.sqrt(Fc_prime)) ** 2
    return math.sqrt(first + second)


def hellinger_distance(rho: StateLike, H: HermitianOperator, t: float, t_prime: float,
                       H0: HermitianOperator) -> float:
    """
    Hellinger distance between the energy pairs reached at times t and t'.

    Zero exactly when t == t'; symmetric in (t, t').
    """
    _check(rho, H, H0)
    if t == t_prime:
        return 0.0
    tr = bare_trace(H0)
    F, Fc = _energy_pair(_evolved_matrix(rho, H, t), H0, tr)
    Fp, Fcp = _energy_pair(_evolved_matrix(rho, H, t_prime), H0, tr)
    return hellinger_from_energies(F, Fp, Fc, Fcp, tr)


def energy_derivative(rho: StateLike, H: HermitianOperator, t: float, H0: HermitianOperator) -> float:
    """dF/dt = i Tr(U_t rho U_t^dagger [H, H0])."""
    _check(rho, H, H0)
    rho_t = _evolved_matrix(rho, H, t)
    return float(np.real(1j * np.trace(rho_t @ commutator(H.matrix, H0.matrix))))


def energy_second_derivative(rho: StateLike, H: HermitianOperator, t: float, H0: HermitianOperator) -> float:
    """d2F/dt2 = Tr(U_t rho U_t^dagger [[H, H0], H])."""
    _check(rho, H, H0)
    rho_t = _evolved_matrix(rho, H, t)
    double = commutator(commutator(H.matrix, H0.matrix), H.matrix)
    return float(np.real(np.trace(rho_t @ double)))


def speed_from_derivatives(F: float, dF: float, d2F: float, trace_H0: float,
                           derivative_scale: float = 1.0) -> Tuple[float, bool]:
    """
    Speed |dF| / (2 sqrt(F (TrH0 - F))) with the boundary policy.

    At F in {0, TrH0} with dF = 0 the two-sided limit sqrt(+-d2F / (2 TrH0))
    is returned and flagged.

    Returns:
        (speed, at_boundary)

    Raises:
        BoundarySingularityError: boundary energy with non-vanishing derivative
    """
    lower = F / trace_H0
    upper = 1.0 - lower
    if lower > BOUNDARY_TOL and upper > BOUNDARY_TOL:
        return abs(dF) / (2.0 * math.sqrt(F * (trace_H0 - F))), False

    if abs(dF) <= DERIVATIVE_TOL * max(1.0, derivative_scale):
        curvature = d2F if lower <= BOUNDARY_TOL else -d2F
        return math.sqrt(max(curvature, 0.0) / (2.0 * trace_H0)), True

    denominator = F * (trace_H0 - F)
    if denominator > 0:
        return abs(dF) / (2.0 * math.sqrt(denominator)), True
    raise BoundarySingularityError(
        f"Energy sits at the boundary (F={F:.3e}, TrH0={trace_H0}) with dF/dt={dF:.3e}",
        details={'F': F, 'dF': dF},
    )


def speed_sample(rho: StateLike, H: HermitianOperator, t: float, H0: HermitianOperator) -> SpeedSample:
    """Energy, complement energy and speed at time t."""
    _check(rho, H, H0)
    trace_H0 = bare_trace(H0)
    rho_t = _evolved_matrix(rho, H, t)
    comm = commutator(H.matrix, H0.matrix)
    F, Fc = _energy_pair(rho_t, H0, trace_H0)
    dF = float(np.real(1j * np.trace(rho_t @ comm)))
    d2F = float(np.real(np.trace(rho_t @ commutator(comm, H.matrix))))
    v, flagged = speed_from_derivatives(F, dF, d2F, trace_H0, float(np.max(np.abs(comm))))
    if flagged:
        logger.warning(f"Boundary limit used for speed at t={t}: F={F:.3e}, v={v:.6g}")
    return SpeedSample(t=float(t), F=F, F_complement=Fc, v=v, at_boundary=flagged)


def speed_at(rho: StateLike, H: HermitianOperator, t: float, H0: HermitianOperator) -> float:
    """
    Instantaneous energy-exchange speed v(t) = |dF/dt| / (2 sqrt(F (TrH0 - F))).
    """
    return speed_sample(rho, H, t, H0).v


def finite_difference_speed(rho: StateLike, H: HermitianOperator, t: float, H0: HermitianOperator,
                            h: float = 1e-3) -> float:
    """
    Speed from the Hellinger distance alone: central difference D(t-h, t+h)/2h
    refined by a Richardson pair (h, h/2).
    """
    def central(step: float) -> float:
        return hellinger_distance(rho, H, t - step, t + step, H0) / (2 * step)
    return (4.0 * central(h / 2) - central(h)) / 3.0


def check_monotone(rho: StateLike, H: HermitianOperator, H0: HermitianOperator,
                   t0: float, t1: float, sign: int, grid: int = MONOTONE_GRID) -> None:
    """
    Verify sign * dF/dt >= -tol on a uniform grid over [t0, t1].

    Raises:
        MonotonicityViolationError: the energy turns around inside the interval
    """
    lo, hi = min(t0, t1), max(t0, t1)
    if lo == hi:
        return
    for t in np.linspace(lo, hi, grid):
        dF = energy_derivative(rho, H, float(t), H0)
        if sign * dF < -MONOTONE_TOL:
            raise MonotonicityViolationError(
                f"Energy is not {'non-decreasing' if sign > 0 else 'non-increasing'} on "
                f"[{lo}, {hi}]: dF/dt={dF:.3e} at t={t:.6g}; split the interval",
                details={'t': float(t), 'dF': dF},
            )


def _arcsin_energy(F: float, trace_H0: float) -> float:
    return math.asin(math.sqrt(min(max(F / trace_H0, 0.0), 1.0)))


def charging_work(rho: StateLike, H: HermitianOperator, t_end: float, H0: HermitianOperator) -> float:
    """
    Operational charging work arcsin sqrt(F(t_end)/TrH0) - arcsin sqrt(F(0)/TrH0).

    Raises:
        MonotonicityViolationError: F decreases somewhere on [0, t_end]
    """
    check_monotone(rho, H, H0, 0.0, t_end, +1)
    tr = bare_trace(H0)
    return _arcsin_energy(extractable_energy(rho, H, t_end, H0), tr) - \
        _arcsin_energy(extractable_energy(rho, H, 0.0, H0), tr)


def extracting_work(rho: StateLike, H: HermitianOperator, t_end: float, H0: HermitianOperator) -> float:
    """
    Operational extracting work arcsin sqrt(F(0)/TrH0) - arcsin sqrt(F(t_end)/TrH0).

    Raises:
        MonotonicityViolationError: F increases somewhere on [0, t_end]
    """
    check_monotone(rho, H, H0, 0.0, t_end, -1)
    tr = bare_trace(H0)
    return _arcsin_energy(extractable_energy(rho, H, 0.0, H0), tr) - \
        _arcsin_energy(extractable_energy(rho, H, t_end, H0), tr)


def integrate_speed(rho: StateLike, H: HermitianOperator, t0: float, t1: float,
                    H0: HermitianOperator, steps: int = 1000) -> float:
    """
    Composite Simpson integral of the speed over [t0, t1].

    A reversed interval gives the negated value. Nodes hitting an unresolved
    boundary singularity are replaced by the mean of two nearby evaluations.

    Raises:
        InvalidSpecError: fewer than 100 steps
        BoundarySingularityError: a node cannot be resolved by refinement
    """
    if steps < MIN_STEPS:
        raise InvalidSpecError(f"integrate_speed needs at least {MIN_STEPS} steps, got {steps}")
    if t0 == t1:
        return 0.0
    if t1 < t0:
        return -integrate_speed(rho, H, t1, t0, H0, steps)
    if steps % 2:
        steps += 1
    times = np.linspace(t0, t1, steps + 1)
    delta = (t1 - t0) / steps * 1e-3
    values = np.empty_like(times)
    for n, t in enumerate(times):
        try:
            values[n] = speed_at(rho, H, float(t), H0)
        except BoundarySingularityError:
            logger.warning(f"Refining singular node t={t:.6g}")
            left = speed_at(rho, H, float(max(t - delta, t0)), H0)
            right = speed_at(rho, H, float(min(t + delta, t1)), H0)
            values[n] = 0.5 * (left + right)
    return float(simpson(values, x=times))


def sample_trajectory(rho: StateLike, H: HermitianOperator, H0: HermitianOperator,
                      times: Sequence[float], unit_energy: float = 1.0, jobs: int = 1) -> EnergyTrajectory:
    """
    Evaluate F, its complement and the speed on a time grid.

    Grid points are independent; with jobs > 1 they run on a thread pool and are
    reassembled in grid order.
    """
    _check(rho, H, H0)
    grid = [float(t) for t in times]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(lambda t: speed_sample(rho, H, t, H0), grid))
    else:
        samples = [speed_sample(rho, H, t, H0) for t in grid]
    return EnergyTrajectory(
        times=np.array(grid),
        energies=np.array([s.F for s in samples]),
        complements=np.array([s.F_complement for s in samples]),
        speeds=np.array([s.v for s in samples]),
        boundary=np.array([s.at_boundary for s in samples]),
        trace_H0=bare_trace(H0),
        unit_energy=unit_energy,
    )


def trajectory_to_csv(trajectory: EnergyTrajectory, path: Path) -> Path:
    """
    Write a trajectory as CSV with header t,F,F_complement,v,boundary (F in units of E).

    boundary is 1 on rows whose speed is the boundary limit, 0 elsewhere.
    """
    flagged = trajectory.boundary_times
    if flagged:
        logger.warning(f"{len(flagged)} trajectory rows use the boundary limit: {flagged}")
    return write_csv(path, TRAJECTORY_HEADER, trajectory.rows())
