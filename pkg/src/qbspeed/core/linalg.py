"""
Dense complex linear algebra for finite-dimensional batteries.

Hermitian/unitary operators, pure states and density matrices are thin frozen
wrappers around numpy arrays that enforce their invariants at construction.
Everything here is a pure function of immutable inputs; hbar = 1 and time is
dimensionless.
"""
import logging
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from qbspeed.errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidOperatorError,
    NumericalFailureError,
)

logger = logging.getLogger(__name__)

HERMITIAN_REJECT_TOL = 1e-8
UNITARY_TOL = 1e-10
NORM_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_FLOOR = -1e-10
IMAG_TOL = 1e-10
DIRECTION_TOL = 1e-10


def _as_square(matrix: np.ndarray, name: str) -> np.ndarray:
    m = np.array(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidDimensionError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidOperatorError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix, symmetrized as (M + M^dagger)/2 on construction."""
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_square(self.matrix, 'HermitianOperator')
        asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if asym > HERMITIAN_REJECT_TOL:
            raise InvalidOperatorError(f"Matrix is not Hermitian (asymmetry {asym:.3e})")
        m = (m + m.conj().T) / 2
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other: 'HermitianOperator') -> 'HermitianOperator':
        _check_dims(self.dim, other.dim)
        return HermitianOperator(self.matrix + other.matrix)

    def scaled(self, factor: float) -> 'HermitianOperator':
        return HermitianOperator(float(factor) * self.matrix)

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


@dataclass(frozen=True)
class UnitaryOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_square(self.matrix, 'UnitaryOperator')
        err = np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0])))
        if err > UNITARY_TOL:
            raise InvalidOperatorError(f"Matrix is not unitary (error {err:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PureState:
    """Normalized state vector."""
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise InvalidOperatorError("PureState needs finite, non-empty amplitudes")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidOperatorError(f"PureState is not normalized (norm {norm:.15f})")
        v.setflags(write=False)
        object.__setattr__(self, 'amplitudes', v)

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex]) -> 'PureState':
        """Normalize arbitrary non-zero amplitudes."""
        v = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InvalidOperatorError("Cannot normalize the zero vector")
        return cls(v / norm)

    @classmethod
    def basis(cls, index: int, dim: int) -> 'PureState':
        if not 0 <= index < dim:
            raise InvalidDimensionError(f"Basis index {index} out of range for dimension {dim}")
        v = np.zeros(dim, dtype=np.complex128)
        v[index] = 1.0
        return cls(v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""
    matrix: np.ndarray

    def __post_init__(self):
        m = HermitianOperator(self.matrix).matrix.copy()
        tr = np.real(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL * max(1.0, m.shape[0] ** 0.5):
            raise InvalidOperatorError(f"Density matrix trace is {tr:.15f}, expected 1")
        lowest = np.linalg.eigvalsh(m)[0]
        if lowest < EIGEN_FLOOR:
            raise InvalidOperatorError(f"Density matrix has negative eigenvalue {lowest:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @classmethod
    def from_pure(cls, state: PureState) -> 'DensityMatrix':
        return cls(state.projector())

    @classmethod
    def maximally_mixed(cls, dim: int) -> 'DensityMatrix':
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    @classmethod
    def mixture(cls, weights: Sequence[float], states: Sequence['StateLike']) -> 'DensityMatrix':
        m = sum(float(w) * density_of(s) for w, s in zip(weights, states))
        return cls(m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


StateLike = Union[PureState, DensityMatrix]


@dataclass(frozen=True)
class GellMannBasis:
    local_dim: int
    generators: Tuple[HermitianOperator, ...]

    def __len__(self) -> int:
        return len(self.generators)


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatchError(f"Dimension mismatch: {a} vs {b}")


def density_of(state: StateLike) -> np.ndarray:
    """Density matrix array of a pure or mixed state."""
    if isinstance(state, PureState):
        return state.projector()
    return state.matrix


def gell_mann_generators(d: int) -> GellMannBasis:
    """
    Generalized Gell-Mann matrices for a d-level system.

    Ordered symmetric family (j<k), antisymmetric family (j<k), then the
    diagonal family, so d=2 yields (sigma_x, sigma_y, sigma_z).
    Normalization Tr(G_a G_b) = 2 delta_ab.

    Args:
        d: Local dimension, at least 2

    Returns:
        GellMannBasis with d^2 - 1 generators
    """
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise InvalidDimensionError(f"Gell-Mann generators need d >= 2, got {d}")
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    mats = []
    for j, k in pairs:
        g = np.zeros((d, d), dtype=np.complex128)
        g[j, k] = g[k, j] = 1.0
        mats.append(g)
    for j, k in pairs:
        g = np.zeros((d, d), dtype=np.complex128)
        g[j, k] = -1j
        g[k, j] = 1j
        mats.append(g)
    for level in range(1, d):
        diag = np.zeros(d, dtype=np.complex128)
        diag[:level] = 1.0
        diag[level] = -level
        mats.append(np.sqrt(2.0 / (level * (level + 1))) * np.diag(diag))
    return GellMannBasis(local_dim=int(d), generators=tuple(HermitianOperator(g) for g in mats))


def direction_operator(basis: GellMannBasis, u: Sequence[float]) -> HermitianOperator:
    """
    sigma_u = sum_a u_a G_a for a unit vector u on the Gell-Mann sphere.

    Raises:
        InvalidDimensionError: wrong vector length
        InvalidOperatorError: u is not unit norm
    """
    vec = np.asarray(u, dtype=float).reshape(-1)
    if vec.size != len(basis):
        raise InvalidDimensionError(
            f"Direction vector has length {vec.size}, expected {len(basis)} for d={basis.local_dim}")
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > DIRECTION_TOL:
        raise InvalidOperatorError(f"Direction vector is not unit norm (|u| = {norm:.12f})")
    m = sum(c * g.matrix for c, g in zip(vec, basis.generators))
    return HermitianOperator(m)


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def embed_local(op: HermitianOperator, site: int, N: int) -> HermitianOperator:
    """
    Identity on every site except `site` (0-based), where `op` acts.

    Args:
        op: Local operator on d levels
        site: Target site, 0 <= site < N
        N: Number of particles

    Returns:
        Operator on the d^N dimensional space
    """
    if N < 1 or not 0 <= site < N:
        raise InvalidDimensionError(f"Site {site} out of range for N={N}")
    eye = np.eye(op.dim, dtype=np.complex128)
    return HermitianOperator(kron_all([op.matrix if i == site else eye for i in range(N)]))


def embed_product(local_ops: dict, N: int, d: int) -> np.ndarray:
    """Tensor product with the given {site: matrix} factors and identities elsewhere."""
    eye = np.eye(d, dtype=np.complex128)
    return kron_all([local_ops.get(i, eye) for i in range(N)])


def eigh(H: HermitianOperator) -> Tuple[np.ndarray, UnitaryOperator]:
    """
    Spectral decomposition H = V diag(lambda) V^dagger, eigenvalues ascending.

    Raises:
        NumericalFailureError: eigensolver did not converge
    """
    try:
        evals, evecs = scipy.linalg.eigh(H.matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"Eigensolver failed on {H.dim}x{H.dim} operator: {e}")
        raise NumericalFailureError(f"Eigendecomposition failed: {e}") from e
    return evals, UnitaryOperator(evecs)


def matrix_exponential(H: HermitianOperator, t: float, hbar: float = 1.0) -> UnitaryOperator:
    """
    U_t = exp(-i t H / hbar) through the spectral decomposition of H.

    Args:
        H: Generator
        t: Evolution time (finite)
        hbar: Reduced Planck constant, 1 throughout the toolkit

    Returns:
        UnitaryOperator
    """
    if not np.isfinite(t):
        raise NumericalFailureError(f"Evolution time must be finite, got {t}")
    if t == 0:
        return UnitaryOperator(np.eye(H.dim, dtype=np.complex128))
    evals, evecs = eigh(H)
    v = evecs.matrix
    phases = np.exp(-1j * t * evals / hbar)
    return UnitaryOperator((v * phases) @ v.conj().T)


def expectation(state: StateLike, op: HermitianOperator) -> float:
    """
    Tr(rho op) for a density matrix or <psi|op|psi> for a pure state.

    Raises:
        DimensionMismatchError: dimensions differ
        NumericalFailureError: non-negligible imaginary part
    """
    _check_dims(state.dim, op.dim)
    if isinstance(state, PureState):
        value = np.vdot(state.amplitudes, op.matrix @ state.amplitudes)
    else:
        value = np.trace(state.matrix @ op.matrix)
    scale = max(1.0, float(np.max(np.abs(op.matrix))) * op.dim)
    if abs(value.imag) > IMAG_TOL * scale:
        raise NumericalFailureError(f"Expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def variance(state: StateLike, op: HermitianOperator) -> float:
    """
    <op^2> - <op>^2, clamped to zero when negative within tolerance.
    """
    mean = expectation(state, op)
    second = expectation(state, HermitianOperator(op.matrix @ op.matrix))
    var = second - mean ** 2
    if var < 0:
        if var < EIGEN_FLOOR * max(1.0, abs(second)):
            raise NumericalFailureError(f"Variance is negative beyond tolerance: {var:.3e}")
        return 0.0
    return var


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianOperator:
    """Gaussian (GUE-like) Hermitian operator."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return HermitianOperator(scale * (a + a.conj().T) / 2)


def random_pure_state(dim: int, rng: np.random.Generator) -> PureState:
    """Haar-random pure state."""
    return PureState.from_amplitudes(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    """Random mixed state from a Ginibre matrix of the given rank."""
    r = rank or dim
    g = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
    m = g @ g.conj().T
    return DensityMatrix(m / np.real(np.trace(m)))
