"""
Fully separable ceilings for the homogeneous Ising probing model.

Two closed-form branches are evaluated side by side: the small coupling
expansion with every <sigma_u> equal to s ~ gamma, and the large coupling
configuration with one polarized site per block of k. The crossing point is
the smallest positive root of their difference.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qbspeed.bounds.classical import separable_bound_optimize
from qbspeed.bounds.optimizer import OptimizerConfig
from qbspeed.core.hamiltonians import IsingSpec, build_ising
from qbspeed.errors import InvalidSpecError

logger = logging.getLogger(__name__)

SMALL_GAMMA = 'small_gamma'
LARGE_GAMMA = 'large_gamma'
GRID_POINTS = 1000
ISING_SWEEP_HEADER = ('gamma', 'v_fs_closed', 'v_fs_oracle', 'branch', 'gamma_c')


def _validate(N: int, k: int, a: float) -> None:
    if N < 2:
        raise InvalidSpecError(f"Ising model needs N >= 2, got {N}")
    if not 1 <= k <= N - 1:
        raise InvalidSpecError(f"Ising range k={k} outside [1, {N - 1}]")
    if not 0 <= a <= 1:
        raise InvalidSpecError(f"Ising field a={a} outside [0, 1]")


def small_gamma_coefficient(N: int, k: int, a: float) -> float:
    """a_0 = (8(N-k+1)ka - Nka^2 + N + k^2) / (4Nk)."""
    return (8 * (N - k + 1) * k * a - N * k * a * a + N + k * k) / (4 * N * k)


def small_gamma_branch(N: int, k: int, a: float, gamma: float, E: float) -> float:
    return N * E / 4 * (a * a + small_gamma_coefficient(N, k, a) * gamma ** 2)


def large_gamma_branch(N: int, k: int, a: float, gamma: float, E: float) -> float:
    return N * E / 4 * (a * a / k + a * gamma + (1 / k + k / N) * gamma ** 2)


def ising_gamma_c(N: int, k: int, a: float) -> float:
    """
    Smallest positive coupling where the large branch catches up with the small one.

    Returns:
        The crossing point, or inf when the branches never cross for gamma > 0
    """
    _validate(N, k, a)
    c1 = 1 / k + k / N - small_gamma_coefficient(N, k, a)
    c2 = a
    c3 = a * a * (1 / k - 1)
    roots = np.roots([c1, c2, c3]) if abs(c1) > 1e-15 else (
        np.array([-c3 / c2]) if abs(c2) > 1e-15 else np.array([]))
    positive = [float(r.real) for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and r.real > 1e-12]
    return min(positive) if positive else math.inf


def ising_fs_closed(N: int, k: int, a: float, gamma: float, E: float) -> Tuple[float, str, float]:
    """
    Larger of the two closed-form branches at gamma.

    The branch name says which expression supplied the value, not which coupling
    regime gamma lies in: for N=8, k=1, a=1 the small_gamma expression is the
    larger one for every gamma above gamma_c ~ 1.103.

    Args:
        N: Number of sites
        k: Coupling range
        a: Local field strength in [0, 1]
        gamma: Coupling factor
        E: Unit energy

    Returns:
        (v_fs^2, branch name, gamma_c)

    Raises:
        InvalidSpecError: N, k or a out of range
    """
    _validate(N, k, a)
    small = small_gamma_branch(N, k, a, gamma, E)
    large = large_gamma_branch(N, k, a, gamma, E)
    if small >= large:
        return small, SMALL_GAMMA, ising_gamma_c(N, k, a)
    return large, LARGE_GAMMA, ising_gamma_c(N, k, a)


def ising_nu_parametrized(N: int, k: int, a: float, s: float, E: float) -> Tuple[float, float, float]:
    nu1 = N * E / 4 * a * a * (1 - s * s)
    nu2 = E / 2 * a * (N - k + 1) * (s - s ** 3)
    nu3 = E / 4 * ((N + k * k) / (4 * k)
                   + ((1 - 1 / (2 * k)) * N - 5 * k / 6 - 1) * s ** 2
                   - ((1 - 1 / (4 * k)) * N - 7 * k / 12 - 9 / 8) * s ** 4)
    return nu1, nu2, nu3


def ising_fs_parametrized(N: int, k: int, a: float, gamma: float, s: float, E: float) -> float:
    """Separable speed with every <sigma_u> equal to s."""
    _validate(N, k, a)
    nu1, nu2, nu3 = ising_nu_parametrized(N, k, a, s, E)
    return nu1 + nu2 * gamma + nu3 * gamma ** 2


def ising_fs_grid_optimum(N: int, k: int, a: float, gamma: float, E: float,
                          points: int = GRID_POINTS) -> Tuple[float, float]:
    """
    Maximize the s-parametrized expression on a uniform grid over s in [-1, 1].

    Returns:
        (best value, arg-max s)
    """
    _validate(N, k, a)
    grid = np.linspace(-1.0, 1.0, points)
    values = np.array([ising_fs_parametrized(N, k, a, gamma, float(s), E) for s in grid])
    best = int(np.argmax(values))
    return float(values[best]), float(grid[best])


def ising_gamma_c_printed(N: int, k: int, a: float, s: float = 0.0) -> float:
    """
    Crossing point from the printed c1, c2, c3 coefficients at a given s.

    Returns nan when c1 vanishes or the discriminant is negative.
    """
    _validate(N, k, a)
    c1 = (-3 / (4 * k) - 3 * k / (4 * N)
          + ((1 - 1 / (2 * k)) * N - 5 * k / 6 - 1) * s ** 2 / N
          - ((1 - 1 / (4 * k)) * N - 7 * k / 12 - 9 / 8) * s ** 4 / N
          - 1 / k - k / N)
    c2 = a * (2 * (s - s ** 3) * (N - k + 1) - 1)
    c3 = a * a * ((k - 1) / k - s * s)
    disc = c2 * c2 - 4 * c1 * c3
    if c1 == 0 or disc < 0:
        return math.nan
    return -c2 / (2 * c1) + math.sqrt(disc) / (2 * c1)


def ising_asymptote(N: int, k: int, gamma: float, E: float) -> float:
    """Leading large-coupling behaviour N E gamma^2 / (4k)."""
    return N * E * gamma ** 2 / (4 * k)


def ising_sweep(N: int, k: int, a: float, gammas: Sequence[float], E: float,
                config: Optional[OptimizerConfig] = None, with_oracle: bool = True,
                direction: Optional[Sequence[float]] = None) -> List[Tuple[float, float, float, str, float]]:
    """
    Closed form and separable oracle on a coupling grid.

    Grid points are independent and run on a thread pool when config.jobs > 1;
    rows come back in grid order.

    Returns:
        Rows (gamma, v_fs_closed, v_fs_oracle, branch, gamma_c); the oracle
        column is nan when with_oracle is False
    """
    _validate(N, k, a)
    config = config or OptimizerConfig()
    inner = OptimizerConfig(restarts=config.restarts, seed=config.seed, tol=config.tol,
                            max_iter=config.max_iter, jobs=1)

    def row(gamma: float) -> Tuple[float, float, float, str, float]:
        closed, branch, gamma_c = ising_fs_closed(N, k, a, gamma, E)
        oracle = math.nan
        if with_oracle:
            spec = build_ising(IsingSpec(N=N, k=k, a=a, gamma=gamma,
                                         direction=tuple(direction) if direction else None))
            oracle = separable_bound_optimize(spec, E, config=inner).oracle_value
        return float(gamma), closed, oracle, branch, gamma_c

    grid = [float(g) for g in gammas]
    if config.jobs > 1 and with_oracle:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(row, grid))
    else:
        rows = [row(g) for g in grid]
    logger.info(f"Ising sweep N={N} k={k} a={a}: {len(rows)} coupling values")
    return rows
