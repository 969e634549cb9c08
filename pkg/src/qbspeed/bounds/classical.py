"""
Classical ceilings on the energy-exchange speed.

Closed forms are reproduced as printed; the enumeration and optimization
oracles are authoritative. Every BoundReport carries both values and their
difference so that disagreements are reported rather than hidden.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from qbspeed.bounds.optimizer import (
    OptimizerConfig,
    ProductOptimum,
    maximize_product_variance,
    permute_sites,
)
from qbspeed.core.hamiltonians import (
    ProbingHamiltonianSpec,
    axis_direction,
    build_probing,
)
from qbspeed.core.linalg import (
    HermitianOperator,
    StateLike,
    direction_operator,
    expectation,
    gell_mann_generators,
    variance,
)
from qbspeed.errors import (
    DimensionMismatchError,
    EnumerationTooLargeError,
    InvalidDimensionError,
    InvalidSpecError,
)
from qbspeed.utils import MAX_ENUMERATION

logger = logging.getLogger(__name__)

CORRELATOR_TOL = 1e-9
MAX_SEPARABLE_DIM = 2 ** 12
MAX_BISEPARABLE_SITES = 8

CLASS_TAGS = ('incoherent', 'fully_separable', 'biseparable')


@dataclass(frozen=True)
class ProductStateCorrelators:
    """Single-site expectations s_i = <sigma_v_i>, s_u_i = <sigma_u_i> and overlaps v_i . u_i."""
    s: Tuple[float, ...]
    s_u: Tuple[float, ...]
    overlaps: Tuple[float, ...]

    def __post_init__(self):
        if not len(self.s) == len(self.s_u) == len(self.overlaps):
            raise DimensionMismatchError("Correlator vectors must have equal length")
        for name, values in (('s', self.s), ('s_u', self.s_u)):
            if any(abs(x) > 1 + CORRELATOR_TOL for x in values):
                raise InvalidSpecError(f"Correlators {name} must lie in [-1, 1]: {values}")

    def to_dict(self) -> Dict[str, Any]:
        return {'s': list(self.s), 's_u': list(self.s_u), 'overlaps': list(self.overlaps)}


@dataclass(frozen=True)
class BoundReport:
    closed_form: Optional[float]
    oracle_value: float
    optimizer_state: Dict[str, Any] = field(default_factory=dict)
    class_tag: str = 'incoherent'

    def __post_init__(self):
        if self.class_tag not in CLASS_TAGS:
            raise InvalidSpecError(f"Unknown class tag '{self.class_tag}'")
        if self.oracle_value < 0:
            raise InvalidSpecError(f"Oracle value must be non-negative, got {self.oracle_value}")

    @property
    def discrepancy(self) -> Optional[float]:
        if self.closed_form is None:
            return None
        return self.closed_form - self.oracle_value

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class_tag': self.class_tag,
            'closed_form': self.closed_form,
            'oracle_value': self.oracle_value,
            'discrepancy': self.discrepancy,
            'optimizer_state': self.optimizer_state,
        }


# Moments ---------------------------------------------------------------------

def nu_decomposition(state: StateLike, H1: HermitianOperator, H2: HermitianOperator,
                     E: float) -> Tuple[float, float, float]:
    """
    Moment coefficients of E * Var(H1 + gamma H2) = nu1 + gamma nu2 + gamma^2 nu3.

    Returns:
        (E Var(H1), E(<{H1, H2}> - 2<H1><H2>), E Var(H2))
    """
    if not state.dim == H1.dim == H2.dim:
        raise DimensionMismatchError(f"Dimension mismatch: state {state.dim}, H1 {H1.dim}, H2 {H2.dim}")
    anti = HermitianOperator(H1.matrix @ H2.matrix + H2.matrix @ H1.matrix)
    nu1 = E * variance(state, H1)
    nu2 = E * (expectation(state, anti) - 2 * expectation(state, H1) * expectation(state, H2))
    nu3 = E * variance(state, H2)
    return nu1, nu2, nu3


def correlators_from_product(local_states: Sequence[Sequence[complex]],
                             spec: ProbingHamiltonianSpec) -> ProductStateCorrelators:
    """
    Correlators of a product state given one local vector per site.

    Raises:
        DimensionMismatchError: wrong number of sites or local dimension
    """
    if len(local_states) != spec.N:
        raise DimensionMismatchError(f"Expected {spec.N} local states, got {len(local_states)}")
    basis = gell_mann_generators(spec.d)
    s, s_u, overlaps = [], [], []
    for i, vec in enumerate(local_states):
        psi = np.asarray(vec, dtype=np.complex128)
        if psi.shape != (spec.d,):
            raise DimensionMismatchError(f"Local state {i} has shape {psi.shape}, expected ({spec.d},)")
        psi = psi / np.linalg.norm(psi)
        sig_v = direction_operator(basis, spec.v[i]).matrix
        sig_u = direction_operator(basis, spec.u[i]).matrix
        s.append(float(np.real(np.vdot(psi, sig_v @ psi))))
        s_u.append(float(np.real(np.vdot(psi, sig_u @ psi))))
        overlaps.append(float(np.dot(spec.v[i], spec.u[i])))
    return ProductStateCorrelators(s=tuple(s), s_u=tuple(s_u), overlaps=tuple(overlaps))


def nu_closed(spec: ProbingHamiltonianSpec, corr: ProductStateCorrelators,
              E: float) -> Tuple[float, float, float]:
    """
    The three printed closed-form coefficients for a product state.

    The site index paired with alpha in the cross term is the k-tuple slot t
    whose factor is replaced by the overlap term. Shared and unshared sites in
    the correlated term are taken as set intersection and symmetric difference.
    """
    d, k = spec.d, spec.k
    s, s_u = corr.s, corr.s_u
    nu1 = E / d ** 2 * sum(a * a * (1 - x * x) for a, x in zip(spec.alpha, s))

    ordered = spec.ordered_beta()
    total2 = 0.0
    for sites, b in ordered:
        for t, site in enumerate(sites):
            rest = np.prod([s_u[j] for ell, j in enumerate(sites) if ell != t])
            total2 += spec.alpha[site] * b * (corr.overlaps[site] - s[site] ** 2) * rest
    nu2 = 4 * E / d ** (k + 1) * total2

    total3 = 0.0
    for sites_i, b_i in ordered:
        total3 += b_i ** 2 * (1 - np.prod([s_u[j] for j in sites_i]) ** 2)
    for sites_i, b_i in ordered:
        set_i = set(sites_i)
        for sites_j, b_j in ordered:
            if sites_i == sites_j:
                continue
            set_j = set(sites_j)
            shared = np.prod([s_u[j] ** 2 for j in set_i & set_j])
            unshared = np.prod([s_u[j] for j in set_i ^ set_j])
            total3 += b_i * b_j * (1 - shared) * unshared
    nu3 = E / d ** (2 * k) * total3
    return float(nu1), float(nu2), float(nu3)


def incoherent_bound_closed(spec: ProbingHamiltonianSpec, corr: ProductStateCorrelators, E: float) -> float:
    """nu1 + gamma nu2 + gamma^2 nu3 from the printed closed forms."""
    if len(corr.s) != spec.N:
        raise InvalidSpecError(f"Correlators cover {len(corr.s)} sites, spec has {spec.N}")
    nu1, nu2, nu3 = nu_closed(spec, corr, E)
    g = spec.gamma
    return nu1 + g * nu2 + g * g * nu3


def _basis_digits(index: int, N: int, d: int) -> List[int]:
    return [int(x) for x in np.unravel_index(index, (d,) * N)]


def _basis_local_states(digits: Sequence[int], d: int) -> List[np.ndarray]:
    return [np.eye(d, dtype=np.complex128)[x] for x in digits]


def incoherent_bound_enumerate(spec: ProbingHamiltonianSpec, E: float,
                               max_states: int = MAX_ENUMERATION) -> BoundReport:
    """
    Exact maximum of E * Var(H) over all computational product states.

    For a basis state |n>, Var(H) = sum_m |H_nm|^2 - H_nn^2.

    Raises:
        EnumerationTooLargeError: d^N exceeds max_states
    """
    if spec.dim > max_states:
        raise EnumerationTooLargeError(
            f"Enumerating {spec.d}^{spec.N} = {spec.dim} basis states exceeds the limit {max_states}",
            details={'states': spec.dim, 'limit': max_states},
        )
    variances = basis_variances(build_probing(spec).matrix)
    best = int(np.argmax(variances))
    oracle = E * float(variances[best])
    digits = _basis_digits(best, spec.N, spec.d)
    corr = correlators_from_product(_basis_local_states(digits, spec.d), spec)
    closed = incoherent_bound_closed(spec, corr, E)
    logger.info(f"Incoherent enumeration over {spec.dim} states: max {oracle:.10g} at {digits}")
    return BoundReport(
        closed_form=closed,
        oracle_value=oracle,
        optimizer_state={'basis_index': best, 'digits': digits, 'correlators': corr.to_dict()},
        class_tag='incoherent',
    )


def basis_variances(H: np.ndarray) -> np.ndarray:
    """Var(H) on every computational basis state: sum_m |H_nm|^2 - H_nn^2."""
    return np.clip(np.sum(np.abs(H) ** 2, axis=1) - np.real(np.diag(H)) ** 2, 0.0, None)


def incoherent_bound_operator(H: HermitianOperator, N: int, d: int, E: float,
                              max_states: int = MAX_ENUMERATION) -> BoundReport:
    """Enumerated incoherent maximum for an arbitrary operator on N d-level sites."""
    _check_sites(H, N, d)
    if H.dim > max_states:
        raise EnumerationTooLargeError(
            f"Enumerating {d}^{N} = {H.dim} basis states exceeds the limit {max_states}",
            details={'states': H.dim, 'limit': max_states},
        )
    variances = basis_variances(H.matrix)
    best = int(np.argmax(variances))
    return BoundReport(
        closed_form=None,
        oracle_value=E * float(variances[best]),
        optimizer_state={'basis_index': best, 'digits': _basis_digits(best, N, d)},
        class_tag='incoherent',
    )


def separable_bound_operator(H: HermitianOperator, N: int, d: int, E: float,
                             restarts: Optional[int] = None,
                             config: Optional[OptimizerConfig] = None) -> BoundReport:
    """Separable multi-start maximum for an arbitrary operator on N d-level sites."""
    _check_sites(H, N, d)
    if H.dim > MAX_SEPARABLE_DIM:
        raise InvalidDimensionError(f"Separable search needs d^N <= {MAX_SEPARABLE_DIM}, got {H.dim}")
    optimum = _separable_optimum(H.matrix, N, d, _config_with(config, restarts))
    return BoundReport(
        closed_form=None,
        oracle_value=E * optimum.variance,
        optimizer_state={
            'local_states': [[[float(z.real), float(z.imag)] for z in b] for b in optimum.blocks],
            'restarts': optimum.restarts,
        },
        class_tag='fully_separable',
    )


def _check_sites(H: HermitianOperator, N: int, d: int) -> None:
    if H.dim != d ** N:
        raise DimensionMismatchError(f"Operator dimension {H.dim} != {d}^{N}")


def _separable_optimum(matrix: np.ndarray, N: int, d: int, config: OptimizerConfig) -> ProductOptimum:
    warm = _basis_local_states(_basis_digits(int(np.argmax(basis_variances(matrix))), N, d), d)
    return maximize_product_variance(matrix, [d] * N, config, warm_starts=[warm])


def _config_with(config: Optional[OptimizerConfig], restarts: Optional[int]) -> OptimizerConfig:
    config = config or OptimizerConfig()
    if restarts is not None and restarts != config.restarts:
        config = OptimizerConfig(restarts=restarts, seed=config.seed, tol=config.tol,
                                 max_iter=config.max_iter, jobs=config.jobs)
    return config


def separable_bound_optimize(spec: ProbingHamiltonianSpec, E: float, restarts: Optional[int] = None,
                             config: Optional[OptimizerConfig] = None) -> BoundReport:
    """
    Multi-start maximum of E * Var(H) over fully separable pure states.

    The best computational basis state is the first start, so the result never
    falls below the incoherent oracle.

    Args:
        spec: Probing Hamiltonian parameters
        E: Unit energy
        restarts: Random restarts (overrides config.restarts)
        config: Seed, tolerance and worker count

    Returns:
        BoundReport with the arg-max local states and their correlators

    Raises:
        InvalidDimensionError: total dimension beyond dense feasibility
        OptimizerNotConvergedError: every restart failed
    """
    if spec.dim > MAX_SEPARABLE_DIM:
        raise InvalidDimensionError(f"Separable search needs d^N <= {MAX_SEPARABLE_DIM}, got {spec.dim}")
    config = _config_with(config, restarts)
    optimum = _separable_optimum(build_probing(spec).matrix, spec.N, spec.d, config)
    corr = correlators_from_product(optimum.blocks, spec)
    closed = incoherent_bound_closed(spec, corr, E) if spec.d == 2 else None
    oracle = E * optimum.variance
    logger.info(f"Separable search N={spec.N} d={spec.d}: max {oracle:.10g} "
                f"({optimum.successes}/{optimum.restarts} local searches converged)")
    return BoundReport(
        closed_form=closed,
        oracle_value=oracle,
        optimizer_state={
            'local_states': [[[float(z.real), float(z.imag)] for z in b] for b in optimum.blocks],
            'correlators': corr.to_dict(),
            'restarts': optimum.restarts,
        },
        class_tag='fully_separable',
    )


def bipartitions(N: int) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """All 2^(N-1) - 1 unordered cuts S1|S2; site N-1 is always in S2."""
    cuts = []
    for mask in range(1, 2 ** (N - 1)):
        s1 = tuple(i for i in range(N) if mask >> i & 1)
        s2 = tuple(i for i in range(N) if not mask >> i & 1)
        cuts.append((s1, s2))
    return cuts


def biseparable_bound(H: HermitianOperator, N: int, d: int, E: float, restarts: Optional[int] = None,
                      config: Optional[OptimizerConfig] = None) -> BoundReport:
    """
    Maximum of E * Var(H) over pure states that are product across some cut.

    Each cut is searched with the fully separable optimum as its first start, so
    the result never falls below the separable value. Cuts run on a thread pool
    when config.jobs > 1.

    Raises:
        InvalidDimensionError: more than 8 sites or H not on d^N
        OptimizerNotConvergedError: every restart failed on some cut
    """
    if N < 2 or N > MAX_BISEPARABLE_SITES:
        raise InvalidDimensionError(f"Biseparable search needs 2 <= N <= {MAX_BISEPARABLE_SITES}, got {N}")
    if H.dim != d ** N:
        raise DimensionMismatchError(f"Operator dimension {H.dim} != {d}^{N}")
    config = _config_with(config, restarts)
    inner = OptimizerConfig(restarts=config.restarts, seed=config.seed, tol=config.tol,
                            max_iter=config.max_iter, jobs=1)
    separable = _separable_optimum(H.matrix, N, d, inner)

    def search(cut: Tuple[Tuple[int, ...], Tuple[int, ...]]):
        s1, s2 = cut
        matrix = permute_sites(H.matrix, s1 + s2, d)
        warm = [_kron_sites(separable.blocks, s1), _kron_sites(separable.blocks, s2)]
        return maximize_product_variance(matrix, [d ** len(s1), d ** len(s2)], inner, warm_starts=[warm])

    cuts = bipartitions(N)
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(search, cuts))
    else:
        results = [search(cut) for cut in cuts]

    best = int(np.argmax([r.variance for r in results]))
    s1, s2 = cuts[best]
    oracle = E * results[best].variance
    logger.info(f"Biseparable search over {len(cuts)} cuts: max {oracle:.10g} at {list(s1)}|{list(s2)}")
    return BoundReport(
        closed_form=None,
        oracle_value=oracle,
        optimizer_state={
            'partition': [list(s1), list(s2)],
            'cuts': len(cuts),
            'per_cut': [E * r.variance for r in results],
        },
        class_tag='biseparable',
    )


def _kron_sites(local: Sequence[np.ndarray], sites: Sequence[int]) -> np.ndarray:
    out = np.ones(1, dtype=np.complex128)
    for s in sites:
        out = np.kron(out, local[s])
    return out


# Printed closed forms ---------------------------------------------------------

def inhomogeneous_upper_bound(alpha: Sequence[float], gamma: float, N: int, E: float) -> float:
    """
    (E/4) sum alpha_i^2 + (E alpha_0 / 4) gamma + (N E / 8) gamma^2.

    alpha_0 is the larger of the sums over odd and even sites, counted from 1.

    Raises:
        InvalidSpecError: alpha outside [0, 1] or of the wrong length
    """
    alpha = [float(a) for a in alpha]
    if len(alpha) != N:
        raise InvalidSpecError(f"alpha has {len(alpha)} entries, expected {N}")
    if any(a < 0 or a > 1 for a in alpha):
        raise InvalidSpecError(f"alpha entries must lie in [0, 1]: {alpha}")
    alpha0 = max(sum(alpha[0::2]), sum(alpha[1::2]))
    return E / 4 * sum(a * a for a in alpha) + E * alpha0 / 4 * gamma + N * E / 8 * gamma ** 2


def example1_closed(spec: ProbingHamiltonianSpec, E: float) -> float:
    """
    (E/8) sum_{v_i != z} alpha_i^2 + (E/4) sum_{v_i = z} alpha_i^2 for a qubit spec at gamma = 0.

    Raises:
        InvalidSpecError: not qubits or gamma != 0
    """
    if spec.d != 2 or spec.gamma != 0.0:
        raise InvalidSpecError("The constant-Hamiltonian closed form needs qubits and gamma = 0")
    z = np.array(axis_direction(2, 'z'))
    along_z = [float(np.max(np.abs(np.array(v) - z))) < 1e-10 for v in spec.v]
    return sum((E / 4 if is_z else E / 8) * a * a for a, is_z in zip(spec.alpha, along_z))
