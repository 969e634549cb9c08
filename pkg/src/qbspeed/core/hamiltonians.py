"""
Bare Hamiltonians, their complements, and the k-body probing Hamiltonian family.

Site indices are 0-based. The k-body tensor beta is stored sparsely, keyed by
sorted tuples of pairwise-distinct sites; the builder multiplies each stored
term by k! so the result equals the ordered sum over all k-tuples.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from qbspeed.core.linalg import (
    HermitianOperator,
    UnitaryOperator,
    direction_operator,
    embed_product,
    gell_mann_generators,
)
from qbspeed.errors import (
    ConfigError,
    DegenerateBareHamiltonianError,
    InvalidDimensionError,
    InvalidSpecError,
)

logger = logging.getLogger(__name__)

BETA_SYMMETRY_TOL = 1e-12
DIRECTION_TOL = 1e-10

Direction = Tuple[float, ...]
BetaTensor = Dict[Tuple[int, ...], float]


def axis_direction(d: int, axis: str) -> Direction:
    """
    Unit vector selecting a single Gell-Mann generator.

    'x' and 'y' pick the symmetric/antisymmetric generator on levels (0, 1) and
    'z' the first diagonal generator, so for qubits they are the Pauli axes.
    """
    n = d * d - 1
    offsets = {'x': 0, 'y': d * (d - 1) // 2, 'z': d * (d - 1)}
    if axis not in offsets:
        raise InvalidSpecError(f"Unknown axis '{axis}' (expected x, y or z)")
    vec = [0.0] * n
    vec[offsets[axis]] = 1.0
    return tuple(vec)


@dataclass(frozen=True)
class BareHamiltonianSpec:
    """H0 = sum_j lambda_j E |lambda_j><lambda_j| with lambda_0 = 0 <= ... ascending."""
    dim: int
    eigenvalues: Tuple[float, ...]
    unit_energy: float = 1.0
    eigenbasis: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        lam = tuple(float(x) for x in self.eigenvalues)
        object.__setattr__(self, 'eigenvalues', lam)
        if self.dim < 1 or len(lam) != self.dim:
            raise InvalidSpecError(f"Expected {self.dim} eigenvalues, got {len(lam)}")
        if any(b < a for a, b in zip(lam, lam[1:])):
            raise InvalidSpecError(f"Eigenvalues must be sorted ascending: {lam}")
        if abs(lam[0]) > 1e-12:
            raise InvalidSpecError(f"Lowest eigenvalue must be 0, got {lam[0]}")
        if not self.unit_energy > 0:
            raise InvalidSpecError(f"Unit energy must be positive, got {self.unit_energy}")
        if self.eigenbasis is not None:
            basis = UnitaryOperator(self.eigenbasis)
            if basis.dim != self.dim:
                raise InvalidDimensionError(f"Eigenbasis dimension {basis.dim} != {self.dim}")
            object.__setattr__(self, 'eigenbasis', basis.matrix)


@dataclass(frozen=True)
class ProbingHamiltonianSpec:
    """
    Parameters of H = (1/d) sum_i alpha_i sigma_{v_i}^(i)
                    + (gamma/d^k) sum_{i1..ik} beta_{i1..ik} sigma_{u_i1}^(i1)...sigma_{u_ik}^(ik).
    """
    N: int
    d: int
    alpha: Tuple[float, ...]
    v: Tuple[Direction, ...]
    k: int = 2
    beta: BetaTensor = field(default_factory=dict)
    u: Optional[Tuple[Direction, ...]] = None
    gamma: float = 0.0

    def __post_init__(self):
        if self.N < 1 or self.d < 2:
            raise InvalidDimensionError(f"Need N >= 1 and d >= 2, got N={self.N}, d={self.d}")
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != self.N:
            raise InvalidSpecError(f"alpha has {len(alpha)} entries, expected {self.N}")
        if any(a < 0 or a > 1 for a in alpha):
            raise InvalidSpecError(f"alpha entries must lie in [0, 1]: {alpha}")
        v = _check_directions(self.v, self.N, self.d, 'v')
        u = v if self.u is None else _check_directions(self.u, self.N, self.d, 'u')
        if self.k < 2:
            raise InvalidSpecError(f"Correlation order k must be >= 2, got {self.k}")
        beta = normalize_beta(self.beta, self.k, self.N)
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'v', v)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'gamma', float(self.gamma))

    @property
    def dim(self) -> int:
        return self.d ** self.N

    def ordered_beta(self) -> List[Tuple[Tuple[int, ...], float]]:
        """Expand the sparse tensor into (ordered tuple, value) pairs."""
        out = []
        for key, value in sorted(self.beta.items()):
            for perm in permutations(key):
                out.append((perm, value))
        return out


@dataclass(frozen=True)
class IsingSpec:
    """Homogeneous Ising probing model with k-range pairwise coupling V_ij = 1/(2k)."""
    N: int
    k: int = 1
    a: float = 1.0
    gamma: float = 0.0
    direction: Optional[Direction] = None
    d: int = 2


def _check_directions(vectors: Sequence[Sequence[float]], N: int, d: int, name: str) -> Tuple[Direction, ...]:
    vecs = tuple(tuple(float(x) for x in vec) for vec in vectors)
    if len(vecs) != N:
        raise InvalidSpecError(f"{name} has {len(vecs)} directions, expected {N}")
    for i, vec in enumerate(vecs):
        if len(vec) != d * d - 1:
            raise InvalidDimensionError(f"{name}[{i}] has length {len(vec)}, expected {d * d - 1}")
        norm = math.sqrt(sum(x * x for x in vec))
        if abs(norm - 1.0) > DIRECTION_TOL:
            raise InvalidSpecError(f"{name}[{i}] is not unit norm (|{name}| = {norm:.12f})")
    return vecs


def normalize_beta(entries: Any, k: int, N: int) -> BetaTensor:
    """
    Fold beta entries onto sorted keys, checking permutation symmetry.

    Accepts a {tuple: value} mapping or a list of {"sites": [...], "value": x}.
    Tuples with repeated sites are skipped.

    Raises:
        InvalidSpecError: wrong arity, site out of range, or asymmetric values
    """
    if isinstance(entries, dict):
        items = [(tuple(key), value) for key, value in entries.items()]
    else:
        items = [(tuple(e['sites']), e['value']) for e in entries]
    beta: BetaTensor = {}
    for sites, value in items:
        sites = tuple(int(s) for s in sites)
        if len(sites) != k:
            raise InvalidSpecError(f"beta key {sites} has arity {len(sites)}, expected {k}")
        if any(s < 0 or s >= N for s in sites):
            raise InvalidSpecError(f"beta key {sites} has a site outside [0, {N})")
        if len(set(sites)) != k:
            logger.warning(f"Skipping beta entry with repeated sites {sites}")
            continue
        key = tuple(sorted(sites))
        value = float(value)
        if key in beta and abs(beta[key] - value) > BETA_SYMMETRY_TOL:
            raise InvalidSpecError(
                f"beta is not permutation symmetric on {key}: {beta[key]} vs {value}")
        beta[key] = value
    return beta


def build_bare(spec: BareHamiltonianSpec) -> HermitianOperator:
    """
    Build H0 = sum_j lambda_j E |lambda_j><lambda_j|.

    Returns:
        HermitianOperator with eigenvalues lambda_j * E
    """
    energies = np.asarray(spec.eigenvalues) * spec.unit_energy
    if spec.eigenbasis is None:
        return HermitianOperator(np.diag(energies).astype(np.complex128))
    v = spec.eigenbasis
    return HermitianOperator((v * energies) @ v.conj().T)


def complement(H0: HermitianOperator) -> HermitianOperator:
    """
    Complement Hamiltonian 1 - H0 / Tr H0.

    Raises:
        DegenerateBareHamiltonianError: Tr H0 <= 0
    """
    tr = H0.trace()
    if tr <= 0:
        raise DegenerateBareHamiltonianError(f"Complement needs Tr H0 > 0, got {tr}")
    return HermitianOperator(np.eye(H0.dim, dtype=np.complex128) - H0.matrix / tr)


def _site_operators(directions: Sequence[Direction], d: int) -> List[np.ndarray]:
    basis = gell_mann_generators(d)
    cache: Dict[Direction, np.ndarray] = {}
    out = []
    for vec in directions:
        if vec not in cache:
            cache[vec] = direction_operator(basis, vec).matrix
        out.append(cache[vec])
    return out


def split_probing(spec: ProbingHamiltonianSpec) -> Tuple[HermitianOperator, HermitianOperator]:
    """
    Local and correlated parts (H1, H2) with H = H1 + gamma * H2.
    """
    dim = spec.dim
    sig_v = _site_operators(spec.v, spec.d)
    h1 = np.zeros((dim, dim), dtype=np.complex128)
    for i, a in enumerate(spec.alpha):
        if a != 0.0:
            h1 += a * embed_product({i: sig_v[i]}, spec.N, spec.d)
    h1 /= spec.d

    h2 = np.zeros((dim, dim), dtype=np.complex128)
    if spec.beta:
        sig_u = _site_operators(spec.u, spec.d)
        multiplicity = math.factorial(spec.k)
        for key, value in spec.beta.items():
            if value == 0.0:
                continue
            h2 += multiplicity * value * embed_product({s: sig_u[s] for s in key}, spec.N, spec.d)
        h2 /= spec.d ** spec.k
    return HermitianOperator(h1), HermitianOperator(h2)


def build_probing(spec: ProbingHamiltonianSpec) -> HermitianOperator:
    """
    Build the k-body probing Hamiltonian of a ProbingHamiltonianSpec.
    """
    h1, h2 = split_probing(spec)
    if spec.gamma == 0.0:
        return h1
    return HermitianOperator(h1.matrix + spec.gamma * h2.matrix)


def ising_coupling(N: int, k: int) -> BetaTensor:
    """V_ij = 1/(2k) for 0 < |i - j| <= k, keyed by sorted pairs."""
    return {(i, j): 1.0 / (2 * k) for i, j in combinations(range(N), 2) if j - i <= k}


def build_ising(spec: IsingSpec) -> ProbingHamiltonianSpec:
    """
    Translate an IsingSpec into the general probing spec (correlation order 2, v = u).

    Raises:
        InvalidSpecError: N < 2 or k outside [1, N-1]
    """
    if spec.N < 2:
        raise InvalidSpecError(f"Ising model needs N >= 2, got {spec.N}")
    if not 1 <= spec.k <= spec.N - 1:
        raise InvalidSpecError(f"Ising range k={spec.k} outside [1, {spec.N - 1}]")
    direction = spec.direction or axis_direction(spec.d, 'z')
    dirs = tuple(tuple(direction) for _ in range(spec.N))
    return ProbingHamiltonianSpec(
        N=spec.N, d=spec.d, alpha=tuple([spec.a] * spec.N), v=dirs, k=2,
        beta=ising_coupling(spec.N, spec.k), u=dirs, gamma=spec.gamma,
    )


def tensor_power_spec(N: int, direction: Optional[Direction] = None, d: int = 2) -> ProbingHamiltonianSpec:
    """
    The N-body product sigma_u^{(x)N} expressed as a probing spec (k = N, single tuple).
    """
    if N < 2:
        raise InvalidSpecError(f"Tensor power probing needs N >= 2, got {N}")
    direction = tuple(direction) if direction is not None else axis_direction(d, 'z')
    dirs = tuple(direction for _ in range(N))
    weight = d ** N / math.factorial(N)
    return ProbingHamiltonianSpec(
        N=N, d=d, alpha=tuple([0.0] * N), v=dirs, k=N,
        beta={tuple(range(N)): weight}, u=dirs, gamma=1.0,
    )


# JSON (de)serialization ------------------------------------------------------

def _complex_matrix_to_list(m: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _complex_matrix_from_list(rows: Iterable) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)


def bare_to_dict(spec: BareHamiltonianSpec) -> Dict[str, Any]:
    body = {
        'dim': spec.dim,
        'eigenvalues': list(spec.eigenvalues),
        'unit_energy': spec.unit_energy,
    }
    if spec.eigenbasis is not None:
        body['eigenbasis'] = _complex_matrix_to_list(spec.eigenbasis)
    return body


def bare_from_dict(body: Dict[str, Any]) -> BareHamiltonianSpec:
    try:
        basis = body.get('eigenbasis')
        return BareHamiltonianSpec(
            dim=int(body.get('dim', len(body['eigenvalues']))),
            eigenvalues=tuple(body['eigenvalues']),
            unit_energy=float(body.get('unit_energy', 1.0)),
            eigenbasis=None if basis is None else _complex_matrix_from_list(basis),
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"Invalid bare Hamiltonian document: {e}") from e


def _parse_direction(value: Any, d: int) -> Direction:
    if isinstance(value, str):
        return axis_direction(d, value)
    return tuple(float(x) for x in value)


def probing_to_dict(spec: ProbingHamiltonianSpec) -> Dict[str, Any]:
    return {
        'N': spec.N,
        'd': spec.d,
        'alpha': list(spec.alpha),
        'v': [list(x) for x in spec.v],
        'k': spec.k,
        'beta': [{'sites': list(key), 'value': value} for key, value in sorted(spec.beta.items())],
        'u': [list(x) for x in spec.u],
        'gamma': spec.gamma,
    }


def probing_from_dict(body: Dict[str, Any]) -> ProbingHamiltonianSpec:
    """
    Parse a probing spec document. Directions may be arrays or axis names ('x', 'y', 'z');
    a single direction is broadcast to all sites.
    """
    try:
        N = int(body['N'])
        d = int(body.get('d', 2))
        alpha = body.get('alpha', [0.0] * N)
        if isinstance(alpha, (int, float)):
            alpha = [float(alpha)] * N
        v = _parse_directions(body.get('v', 'z'), N, d)
        u = _parse_directions(body['u'], N, d) if 'u' in body else None
        return ProbingHamiltonianSpec(
            N=N, d=d, alpha=tuple(alpha), v=v, k=int(body.get('k', 2)),
            beta=body.get('beta', []), u=u, gamma=float(body.get('gamma', 0.0)),
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"Invalid probing Hamiltonian document: {e}") from e


def _parse_directions(value: Any, N: int, d: int) -> Tuple[Direction, ...]:
    if isinstance(value, str) or (value and not isinstance(value[0], (list, tuple, str))):
        one = _parse_direction(value, d)
        return tuple(one for _ in range(N))
    return tuple(_parse_direction(x, d) for x in value)


def ising_from_dict(body: Dict[str, Any]) -> IsingSpec:
    try:
        d = int(body.get('d', 2))
        direction = body.get('direction')
        return IsingSpec(
            N=int(body['N']), k=int(body.get('k', 1)), a=float(body.get('a', 1.0)),
            gamma=float(body.get('gamma', 0.0)), d=d,
            direction=None if direction is None else _parse_direction(direction, d),
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"Invalid Ising document: {e}") from e
