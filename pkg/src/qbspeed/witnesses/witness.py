"""
Coherence and genuine-entanglement witnesses built from projector probing
Hamiltonians, plus verdicts against the classical ceilings.

A state is witnessed when its speed under H strictly exceeds the largest speed
any member of the tested class reaches under the same H.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from qbspeed.bounds.classical import (
    CLASS_TAGS,
    BoundReport,
    biseparable_bound,
    bipartitions,
    incoherent_bound_operator,
    separable_bound_operator,
)
from qbspeed.bounds.optimizer import OptimizerConfig
from qbspeed.core.hamiltonians import ProbingHamiltonianSpec, axis_direction, build_probing, tensor_power_spec
from qbspeed.core.linalg import HermitianOperator, PureState, StateLike, random_pure_state
from qbspeed.dynamics.speed import pure_state_speed, sld_speed
from qbspeed.errors import InvalidDimensionError, InvalidSpecError, UselessWitnessError
from qbspeed.witnesses.states import dicke_state, plus_product

logger = logging.getLogger(__name__)

WITNESS_MARGIN = 1e-9
SOUNDNESS_SLACK = 1e-6
OVERLAP_TARGET = 0.5
OVERLAP_TOL = 1e-10
SOUNDNESS_HEADER = ('sample_id', 'speed', 'ceiling')

Partition = Tuple[Tuple[int, ...], Tuple[int, ...]]


@dataclass(frozen=True)
class WitnessVerdict:
    state_speed: float
    classical_ceiling: float
    ceiling_class: str
    witnessed: bool
    probing_spec: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'state_speed': self.state_speed,
            'classical_ceiling': self.classical_ceiling,
            'ceiling_class': self.ceiling_class,
            'witnessed': self.witnessed,
            'margin': WITNESS_MARGIN,
            'probing_spec': self.probing_spec,
        }


def sites_of(dim: int, d: int) -> int:
    """Number of d-level sites in a space of the given dimension."""
    N = int(round(math.log(dim) / math.log(d)))
    if d ** N != dim:
        raise InvalidDimensionError(f"Dimension {dim} is not a power of {d}")
    return N


def local_probing(N: int, axis: str = 'z', a: float = 1.0, d: int = 2) -> HermitianOperator:
    """(a/d) sum_i sigma_axis^(i)."""
    direction = axis_direction(d, axis)
    spec = ProbingHamiltonianSpec(N=N, d=d, alpha=tuple([a] * N), v=tuple([direction] * N))
    return build_probing(spec)


# Coherence ---------------------------------------------------------------------

def coherence_witness_hamiltonian(phi: PureState, basis_index: int) -> Tuple[HermitianOperator, float]:
    """
    Projector |b><b| onto a computational basis state.

    Every incoherent basis state has <H> in {0, 1} and zero variance, while phi
    reaches E * lambda * (1 - lambda) with lambda = |<b|phi>|^2.

    Raises:
        UselessWitnessError: lambda is 0 or 1, choose another basis state
    """
    if not 0 <= basis_index < phi.dim:
        raise InvalidDimensionError(f"Basis index {basis_index} out of range for dimension {phi.dim}")
    lam = float(abs(phi.amplitudes[basis_index]) ** 2)
    if lam <= 1e-12 or lam >= 1 - 1e-12:
        raise UselessWitnessError(
            f"Overlap with basis state {basis_index} is {lam:.3e}; the projector cannot witness coherence",
            details={'basis_index': basis_index, 'lambda': lam},
        )
    H = np.zeros((phi.dim, phi.dim), dtype=np.complex128)
    H[basis_index, basis_index] = 1.0
    return HermitianOperator(H), lam


def best_coherence_basis_index(phi: PureState) -> int:
    """Basis state maximizing lambda (1 - lambda)."""
    weights = np.abs(phi.amplitudes) ** 2
    scores = weights * (1 - weights)
    best = int(np.argmax(scores))
    if scores[best] <= 1e-12:
        raise UselessWitnessError("State is incoherent: every basis overlap is 0 or 1")
    return best


# Entanglement -----------------------------------------------------------------

def _block_matrix(phi: PureState, partition: Partition, d: int) -> np.ndarray:
    s1, s2 = tuple(partition[0]), tuple(partition[1])
    N = sites_of(phi.dim, d)
    if sorted(s1 + s2) != list(range(N)) or not s1 or not s2:
        raise InvalidSpecError(f"{partition} is not a bipartition of {N} sites")
    tensor = phi.amplitudes.reshape((d,) * N).transpose(list(s1) + list(s2))
    return tensor.reshape(d ** len(s1), d ** len(s2))


def _restore_order(vec: np.ndarray, order: Sequence[int], d: int) -> np.ndarray:
    N = len(order)
    return vec.reshape((d,) * N).transpose(np.argsort(order)).reshape(-1)


def schmidt_weights(phi: PureState, partition: Partition, d: int = 2) -> np.ndarray:
    """Squared Schmidt coefficients across S1|S2, descending."""
    return np.linalg.svd(_block_matrix(phi, partition, d), compute_uv=False) ** 2


def entanglement_witness_hamiltonian(phi: PureState, partition: Partition,
                                     d: int = 2) -> Tuple[HermitianOperator, float]:
    """
    Projector onto a product state across S1|S2 with overlap 1/2 with phi.

    The product state is (cos t |a1> + sin t |a2>) |b1> from the two leading
    left Schmidt vectors; its overlap mu_max cos^2 t is solved for 1/2. When
    mu_max < 1/2 the target is unreachable and the projector onto |a1 b1> is
    returned with overlap mu_max.

    Returns:
        (H, overlap) where overlap = |<phi_bs|phi>|^2
    """
    s1, s2 = tuple(partition[0]), tuple(partition[1])
    u, sigma, vh = np.linalg.svd(_block_matrix(phi, partition, d))
    mu_max = float(sigma[0] ** 2)
    a1, a2, b1 = u[:, 0], u[:, 1], vh[0]

    if mu_max < OVERLAP_TARGET - OVERLAP_TOL:
        logger.warning(f"Overlap 1/2 unreachable across {list(s1)}|{list(s2)}: best {mu_max:.6f}")
        theta = 0.0
    elif mu_max - OVERLAP_TARGET <= OVERLAP_TOL:
        theta = 0.0
    else:
        theta = brentq(lambda x: mu_max * math.cos(x) ** 2 - OVERLAP_TARGET, 0.0, math.pi / 2, xtol=1e-14)

    left = math.cos(theta) * a1 + math.sin(theta) * a2
    product = _restore_order(np.kron(left, b1), list(s1) + list(s2), d)
    overlap = float(abs(np.vdot(product, phi.amplitudes)) ** 2)
    return HermitianOperator(np.outer(product, product.conj())), overlap


def best_entanglement_partition(phi: PureState, d: int = 2) -> Tuple[Partition, float]:
    """Bipartition with the largest leading Schmidt weight."""
    N = sites_of(phi.dim, d)
    if N < 2:
        raise InvalidDimensionError("Entanglement needs at least two sites")
    scored = [(float(schmidt_weights(phi, cut, d)[0]), cut) for cut in bipartitions(N)]
    mu, cut = max(scored, key=lambda item: item[0])
    return cut, mu


# Example checks -----------------------------------------------------------------

def dicke_speed_check(N: int, m: int, E: float, axis: str = 'x') -> Tuple[float, float, float]:
    """
    Dicke-state speed under (1/2) sum sigma_axis against E((m+2)N - m^2)/2.

    Returns:
        (oracle, printed formula, formula - oracle)
    """
    oracle = pure_state_speed(dicke_state(N, m), local_probing(N, axis), E)
    printed = E * ((m + 2) * N - m * m) / 2
    if abs(printed - oracle) > 1e-9:
        logger.warning(f"Dicke N={N} m={m}: printed {printed:.10g} vs oracle {oracle:.10g}")
    return oracle, printed, printed - oracle


def sigma_z_power_claim(N: int, a: float, E: float) -> Tuple[float, float, float]:
    """
    Speed of |+>^N under sigma_z^(x)N against the claimed N^2 a^2 E / 4.

    Returns:
        (oracle, claim, claim - oracle)
    """
    if N < 2:
        raise InvalidDimensionError(f"Tensor power needs N >= 2, got {N}")
    H = build_probing(tensor_power_spec(N))
    oracle = pure_state_speed(plus_product(N), H, E)
    claim = E * N * N * a * a / 4
    return oracle, claim, claim - oracle


# Verdicts -----------------------------------------------------------------------

def classical_ceiling(H: HermitianOperator, ceiling_class: str, E: float, d: int = 2,
                      config: Optional[OptimizerConfig] = None) -> BoundReport:
    """Oracle maximum of E * Var(H) over the given state class."""
    N = sites_of(H.dim, d)
    if ceiling_class == 'incoherent':
        return incoherent_bound_operator(H, N, d, E)
    if ceiling_class == 'fully_separable':
        return separable_bound_operator(H, N, d, E, config=config)
    if ceiling_class == 'biseparable':
        return biseparable_bound(H, N, d, E, config=config)
    raise InvalidSpecError(f"Unknown ceiling class '{ceiling_class}' (expected one of {CLASS_TAGS})")


def state_speed(state: StateLike, H: HermitianOperator, E: float) -> float:
    if isinstance(state, PureState):
        return pure_state_speed(state, H, E)
    return sld_speed(state, H, E)


def witness_report(state: StateLike, H: HermitianOperator, ceiling_class: str, E: float,
                   d: int = 2, config: Optional[OptimizerConfig] = None,
                   label: Optional[str] = None) -> WitnessVerdict:
    """
    Compare a state's speed with the classical ceiling for H.

    Args:
        state: Pure state (variance speed) or density matrix (SLD speed)
        H: Probing Hamiltonian
        ceiling_class: incoherent, fully_separable or biseparable
        E: Unit energy
        d: Local dimension
        config: Optimizer settings for the separable and biseparable oracles
        label: Human-readable name of H for the report

    Returns:
        WitnessVerdict, witnessed iff speed > ceiling + 1e-9
    """
    speed = state_speed(state, H, E)
    ceiling = classical_ceiling(H, ceiling_class, E, d, config).oracle_value
    witnessed = speed > ceiling + WITNESS_MARGIN
    logger.info(f"Witness vs {ceiling_class}: speed {speed:.10g}, ceiling {ceiling:.10g}, witnessed={witnessed}")
    return WitnessVerdict(
        state_speed=speed,
        classical_ceiling=ceiling,
        ceiling_class=ceiling_class,
        witnessed=witnessed,
        probing_spec={'label': label or 'custom', 'dim': H.dim, 'sites': sites_of(H.dim, d), 'd': d},
    )


def random_class_member(ceiling_class: str, N: int, rng: np.random.Generator, d: int = 2) -> PureState:
    """Draw a random pure state from the given class."""
    dim = d ** N
    if ceiling_class == 'incoherent':
        return PureState.basis(int(rng.integers(dim)), dim)
    if ceiling_class == 'fully_separable':
        vec = np.ones(1, dtype=np.complex128)
        for _ in range(N):
            vec = np.kron(vec, random_pure_state(d, rng).amplitudes)
        return PureState.from_amplitudes(vec)
    if ceiling_class == 'biseparable':
        cuts = bipartitions(N)
        s1, s2 = cuts[int(rng.integers(len(cuts)))]
        block = np.kron(random_pure_state(d ** len(s1), rng).amplitudes,
                        random_pure_state(d ** len(s2), rng).amplitudes)
        return PureState.from_amplitudes(_restore_order(block, list(s1) + list(s2), d))
    raise InvalidSpecError(f"Unknown ceiling class '{ceiling_class}'")


def soundness_sweep(ceiling_class: str, H: HermitianOperator, samples: int, E: float, seed: int,
                    d: int = 2, config: Optional[OptimizerConfig] = None
                    ) -> Tuple[List[Tuple[int, float, float]], int]:
    """
    Speeds of random in-class states against the class ceiling.

    Each sample draws from its own generator seeded by (seed, sample_id).

    Returns:
        (rows of (sample_id, speed, ceiling), number of samples above ceiling + 1e-6)
    """
    N = sites_of(H.dim, d)
    ceiling = classical_ceiling(H, ceiling_class, E, d, config).oracle_value
    rows = []
    violations = 0
    for sample_id in range(samples):
        rng = np.random.default_rng([seed, sample_id])
        speed = pure_state_speed(random_class_member(ceiling_class, N, rng, d), H, E)
        if speed > ceiling + SOUNDNESS_SLACK:
            violations += 1
            logger.warning(f"Sample {sample_id} in class {ceiling_class} exceeds the ceiling: "
                           f"{speed:.10g} > {ceiling:.10g}")
        rows.append((sample_id, speed, ceiling))
    logger.info(f"Soundness sweep {ceiling_class}: {samples} samples, {violations} above ceiling")
    return rows, violations
