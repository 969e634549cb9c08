"""
Maximal energy-exchange speed.

The mixed-state speed uses the standard symmetric logarithmic derivative
L (rho_dot = (L rho + rho L) / 2) with v^2 = (E/4) Tr(rho L^2) = (E/4) QFI.
Under this normalization the pure-state value is E * Var(H).
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from qbspeed.bounds.optimizer import OptimizerConfig, draw_starts, maximize
from qbspeed.core.linalg import (
    DensityMatrix,
    HermitianOperator,
    PureState,
    StateLike,
    commutator,
    density_of,
    matrix_exponential,
    variance,
)
from qbspeed.errors import DimensionMismatchError, InvalidOperatorError, NumericalFailureError

logger = logging.getLogger(__name__)

SPECTRAL_CUTOFF = 1e-12
SLD_RESIDUAL_TOL = 1e-8
BOUNDARY_SKIP = 1e-12
SLD_SLACK = 1e-6


@dataclass(frozen=True)
class SldOperator:
    dim: int
    matrix: HermitianOperator
    support_rank: int


@dataclass(frozen=True)
class SpeedReport:
    """Supremum of the speed over rank-one bare Hamiltonians E|lambda><lambda|."""
    v_squared: float
    achieving_bare_state: PureState
    saturation_ratio: float
    sld_bound: float
    restarts: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'v_squared': self.v_squared,
            'saturation_ratio': self.saturation_ratio,
            'sld_bound': self.sld_bound,
            'restarts': self.restarts,
            'achieving_state': [[float(z.real), float(z.imag)] for z in self.achieving_bare_state.amplitudes],
        }


def _check(rho: StateLike, H: HermitianOperator) -> None:
    if rho.dim != H.dim:
        raise DimensionMismatchError(f"Dimension mismatch: state {rho.dim}, generator {H.dim}")


def _spectral(rho: StateLike) -> Tuple[np.ndarray, np.ndarray]:
    p, vecs = np.linalg.eigh(density_of(rho))
    return np.clip(p, 0.0, None), vecs


def sld_operator(rho: StateLike, H: HermitianOperator) -> SldOperator:
    """
    Symmetric logarithmic derivative of rho along rho_dot = -i[H, rho].

    In the eigenbasis of rho, L_jk = 2 i (p_j - p_k) H_jk / (p_j + p_k) for
    p_j + p_k above the spectral cutoff and 0 on the kernel-kernel block.

    Raises:
        DimensionMismatchError: state and generator dimensions differ
        NumericalFailureError: the Lyapunov residual on the support is too large
    """
    _check(rho, H)
    p, vecs = _spectral(rho)
    h = vecs.conj().T @ H.matrix @ vecs
    sums = p[:, None] + p[None, :]
    diffs = p[:, None] - p[None, :]
    support = sums > SPECTRAL_CUTOFF
    l_eig = np.zeros_like(h)
    l_eig[support] = 2j * diffs[support] * h[support] / sums[support]

    rho_dot = 1j * diffs * h
    residual = rho_dot - l_eig * sums / 2
    worst = float(np.max(np.abs(residual[support]))) if support.any() else 0.0
    if worst > SLD_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(h)))):
        raise NumericalFailureError(f"SLD residual {worst:.3e} exceeds tolerance")

    matrix = vecs @ l_eig @ vecs.conj().T
    return SldOperator(dim=H.dim, matrix=HermitianOperator(matrix),
                       support_rank=int(np.sum(p > SPECTRAL_CUTOFF)))


def quantum_fisher_information(rho: StateLike, H: HermitianOperator) -> float:
    """QFI = sum_{j,k} 2 (p_j - p_k)^2 / (p_j + p_k) |H_jk|^2 in the eigenbasis of rho."""
    _check(rho, H)
    p, vecs = _spectral(rho)
    h = vecs.conj().T @ H.matrix @ vecs
    sums = p[:, None] + p[None, :]
    diffs = p[:, None] - p[None, :]
    support = sums > SPECTRAL_CUTOFF
    terms = 2.0 * diffs[support] ** 2 / sums[support] * np.abs(h[support]) ** 2
    return float(np.sum(terms))


def pure_state_speed(phi: PureState, H: HermitianOperator, E: float) -> float:
    """
    Squared maximal speed of a pure state, E * Var(H).

    Args:
        phi: Normalized state
        H: Probing Hamiltonian
        E: Unit energy

    Returns:
        E times the variance of H in phi
    """
    _check(phi, H)
    return E * variance(phi, H)


def sld_speed(rho: StateLike, H: HermitianOperator, E: float) -> float:
    """(E/4) * QFI(rho; H); equals pure_state_speed on pure states."""
    return E / 4.0 * quantum_fisher_information(rho, H)


def _bare_state_from_params(params: np.ndarray) -> np.ndarray:
    half = params.shape[0] // 2
    vec = params[:half] + 1j * params[half:]
    return vec / np.linalg.norm(vec)


def maximize_over_bare(rho: StateLike, H: HermitianOperator, t: float, E: float,
                       optimizer_config: OptimizerConfig = None) -> SpeedReport:
    """
    Supremum of the squared speed over bare Hamiltonians H0 = E|lambda><lambda|.

    With p = <lambda|rho_t|lambda>, speed_at with H0 = E|lambda><lambda| gives
    v^2 = p_dot^2 / (4 p (1 - p)) whatever E is. The reported value is
    E * v^2, on the same energy scale as sld_speed and pure_state_speed. Bare
    states giving a boundary energy are skipped. The search is a derivative-free
    multi-start over the real and imaginary parts of |lambda>.

    Args:
        rho: Initial state
        H: Probing Hamiltonian
        t: Time of the trajectory point
        E: Unit energy
        optimizer_config: Restarts, seed and tolerance

    Returns:
        SpeedReport with the best value, its bare state and saturation ratio

    Raises:
        OptimizerNotConvergedError: every restart failed
        NumericalFailureError: the supremum exceeds the SLD bound
    """
    _check(rho, H)
    config = optimizer_config or OptimizerConfig()
    u = matrix_exponential(H, t).matrix
    rho_t = u @ density_of(rho) @ u.conj().T
    rho_dot = -1j * commutator(H.matrix, rho_t)

    def objective(params: np.ndarray) -> float:
        norm = np.linalg.norm(params)
        if norm == 0 or not np.isfinite(norm):
            return 0.0
        lam = _bare_state_from_params(params)
        p = float(np.real(np.vdot(lam, rho_t @ lam)))
        if p <= BOUNDARY_SKIP or p >= 1.0 - BOUNDARY_SKIP:
            return 0.0
        p_dot = float(np.real(np.vdot(lam, rho_dot @ lam)))
        return E * p_dot ** 2 / (4.0 * p * (1.0 - p))

    starts = draw_starts(config, 2 * H.dim)
    result = maximize(objective, starts, config, method='Powell')
    bound = sld_speed(DensityMatrix(rho_t), H, E)
    v_squared = max(result.value, 0.0)

    if v_squared > bound * (1 + SLD_SLACK) + 1e-12:
        raise NumericalFailureError(
            f"Bare-state supremum {v_squared:.10g} exceeds the SLD bound {bound:.10g}",
            details={'v_squared': v_squared, 'sld_bound': bound},
        )
    if bound <= 1e-14:
        ratio = 1.0 if v_squared <= 1e-14 else math.inf
    else:
        ratio = v_squared / bound

    norm = np.linalg.norm(result.x)
    lam = _bare_state_from_params(result.x) if norm > 0 else np.eye(H.dim)[0]
    logger.info(f"Bare-state search at t={t}: v^2={v_squared:.10g}, SLD bound={bound:.10g}, "
                f"ratio={ratio:.6f} over {result.restarts} restarts")
    return SpeedReport(v_squared=v_squared, achieving_bare_state=PureState.from_amplitudes(lam),
                       saturation_ratio=ratio, sld_bound=bound, restarts=result.restarts)


def convexity_probe(states: Sequence[Tuple[float, StateLike]], H: HermitianOperator,
                    E: float) -> Tuple[float, float]:
    """
    Compare the speed of a mixture with the mixture of speeds.

    Returns:
        (lhs, rhs) with lhs = sld_speed(sum w_i rho_i), rhs = sum w_i sld_speed(rho_i)

    Raises:
        InvalidOperatorError: weights are negative or do not sum to one
    """
    if not states:
        raise InvalidOperatorError("convexity_probe needs at least one state")
    weights: List[float] = [float(w) for w, _ in states]
    if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-12:
        raise InvalidOperatorError(f"Invalid mixture weights {weights}")
    mixture = DensityMatrix.mixture(weights, [s for _, s in states])
    lhs = sld_speed(mixture, H, E)
    rhs = sum(w * sld_speed(s, H, E) for w, s in states)
    return lhs, rhs
