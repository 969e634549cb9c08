"""
Multi-start maximization engine shared by the bound oracles and the bare
Hamiltonian search.

Starting points are drawn sequentially from one seeded generator, so a run with
2n restarts repeats the first n starts of a run with n restarts and its maximum
can only grow.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from qbspeed.errors import DimensionMismatchError, InvalidSpecError, OptimizerNotConvergedError
from qbspeed.utils import DEFAULT_JOBS, DEFAULT_RESTARTS, DEFAULT_SEED, make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    """Restart count, seed and tolerances for a multi-start search."""
    restarts: int = DEFAULT_RESTARTS
    seed: int = DEFAULT_SEED
    tol: float = 1e-8
    max_iter: int = 2000
    jobs: int = DEFAULT_JOBS

    def __post_init__(self):
        if self.restarts < 1:
            raise InvalidSpecError(f"restarts must be >= 1, got {self.restarts}")
        if self.jobs < 1:
            raise InvalidSpecError(f"jobs must be >= 1, got {self.jobs}")


@dataclass(frozen=True)
class MultiStartResult:
    value: float
    x: np.ndarray
    restarts: int
    successes: int
    values: List[float] = field(default_factory=list)


def draw_starts(config: OptimizerConfig, size: int, scale: float = 1.0) -> List[np.ndarray]:
    rng = make_rng(config.seed)
    return [scale * rng.normal(size=size) for _ in range(config.restarts)]


def maximize(objective: Callable, starts: Sequence[np.ndarray], config: OptimizerConfig,
             method: str = 'Powell', jac: bool = False) -> MultiStartResult:
    """
    Maximize an objective from each starting point and keep the best.

    Args:
        objective: f(x) -> float, or f(x) -> (float, gradient) when jac is True
        starts: Initial points, one local search each
        config: Tolerances and worker count
        method: scipy.optimize.minimize method
        jac: Whether the objective also returns its gradient

    Returns:
        MultiStartResult with the best value over all starts

    Raises:
        OptimizerNotConvergedError: no start produced a finite value
    """
    if jac:
        def negated(x):
            value, grad = objective(x)
            return -value, -grad
    else:
        def negated(x):
            return -objective(x)

    options = {'maxiter': config.max_iter}
    if method == 'Powell':
        options.update(xtol=config.tol, ftol=config.tol)

    def run(x0: np.ndarray) -> Tuple[float, np.ndarray, bool]:
        try:
            res = minimize(negated, x0, method=method, jac=jac or None, tol=config.tol, options=options)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
            logger.warning(f"Local search failed from one start: {e}")
            return float('nan'), x0, False
        return float(-res.fun), np.asarray(res.x), bool(res.success)

    if config.jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(x0) for x0 in starts]

    finite = [(v, x) for v, x, _ in outcomes if np.isfinite(v)]
    if not finite:
        raise OptimizerNotConvergedError(
            f"All {len(starts)} restarts failed to produce a finite objective",
            details={'restarts': len(starts), 'method': method},
        )
    # first occurrence wins ties, which keeps the arg-max stable as restarts grow
    best_index = int(np.argmax([v for v, _ in finite]))
    successes = sum(1 for _, _, ok in outcomes if ok)
    if successes < len(outcomes):
        logger.debug(f"{len(outcomes) - successes}/{len(outcomes)} local searches hit their iteration cap")
    value, x = finite[best_index]
    return MultiStartResult(value=value, x=x, restarts=len(starts), successes=successes,
                            values=[v for v, _, _ in outcomes])


# Product states -------------------------------------------------------------

def permute_sites(matrix: np.ndarray, order: Sequence[int], d: int) -> np.ndarray:
    """
    Reorder the tensor factors of an operator on N d-level sites.

    The returned operator acts on sites order[0], order[1], ... in that order.
    """
    N = len(order)
    tensor = matrix.reshape((d,) * (2 * N))
    axes = list(order) + [N + s for s in order]
    return tensor.transpose(axes).reshape(d ** N, d ** N)


def _split_params(params: np.ndarray, block_dims: Sequence[int]) -> List[np.ndarray]:
    blocks = []
    offset = 0
    for dim in block_dims:
        re = params[offset:offset + dim]
        im = params[offset + dim:offset + 2 * dim]
        blocks.append(re + 1j * im)
        offset += 2 * dim
    return blocks


def params_from_blocks(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Inverse of the block split: stacked real and imaginary parts."""
    parts = []
    for b in blocks:
        b = np.asarray(b, dtype=np.complex128)
        parts.extend([b.real, b.imag])
    return np.concatenate(parts)


def product_vector(blocks: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=np.complex128)
    for b in blocks:
        out = np.kron(out, b)
    return out


class ProductVariance:
    """
    Variance of an operator over unnormalized product vectors x_1 (x) ... (x) x_B.

    Parameters are the stacked real and imaginary parts of each block; the
    value is scale-invariant per block, so no normalization constraint is needed.
    """

    def __init__(self, matrix: np.ndarray, block_dims: Sequence[int]):
        self.matrix = matrix
        self.square = matrix @ matrix
        self.block_dims = tuple(block_dims)
        if int(np.prod(self.block_dims)) != matrix.shape[0]:
            raise DimensionMismatchError(
                f"Block dims {self.block_dims} do not match operator dimension {matrix.shape[0]}")

    @property
    def n_params(self) -> int:
        return 2 * sum(self.block_dims)

    def value_and_gradient(self, params: np.ndarray) -> Tuple[float, np.ndarray]:
        blocks = _split_params(params, self.block_dims)
        x = product_vector(blocks)
        norm = float(np.real(np.vdot(x, x)))
        if norm < 1e-300:
            return 0.0, np.zeros_like(params)
        hx = self.matrix @ x
        h2x = self.square @ x
        a = float(np.real(np.vdot(x, hx))) / norm
        b = float(np.real(np.vdot(x, h2x))) / norm
        value = b - a * a
        g = (h2x - b * x - 2 * a * (hx - a * x)) / norm

        grad = np.empty_like(params)
        g_tensor = g.reshape(self.block_dims)
        offset = 0
        for index, dim in enumerate(self.block_dims):
            partial = g_tensor
            # contract every other block with its conjugated local vector, last axis first
            for other in reversed(range(len(self.block_dims))):
                if other == index:
                    continue
                partial = np.tensordot(partial, blocks[other].conj(), axes=([other], [0]))
            grad[offset:offset + dim] = 2 * partial.real
            grad[offset + dim:offset + 2 * dim] = 2 * partial.imag
            offset += 2 * dim
        return value, grad

    def value(self, params: np.ndarray) -> float:
        return self.value_and_gradient(params)[0]

    def normalized_blocks(self, params: np.ndarray) -> List[np.ndarray]:
        out = []
        for b in _split_params(params, self.block_dims):
            n = np.linalg.norm(b)
            out.append(b / n if n > 0 else b)
        return out


@dataclass(frozen=True)
class ProductOptimum:
    variance: float
    blocks: Tuple[np.ndarray, ...]
    restarts: int
    successes: int


def maximize_product_variance(matrix: np.ndarray, block_dims: Sequence[int],
                              config: Optional[OptimizerConfig] = None,
                              warm_starts: Sequence[Sequence[np.ndarray]] = ()) -> ProductOptimum:
    """
    Maximize <H^2> - <H>^2 over product states with the given block dimensions.

    Uses L-BFGS-B with the analytic gradient from config.restarts seeded starts.
    Warm starts (lists of block vectors) are tried first.

    Raises:
        OptimizerNotConvergedError: every restart failed
    """
    config = config or OptimizerConfig()
    problem = ProductVariance(matrix, block_dims)
    starts = [params_from_blocks(blocks) for blocks in warm_starts] + draw_starts(config, problem.n_params)
    result = maximize(problem.value_and_gradient, starts, config, method='L-BFGS-B', jac=True)
    logger.debug(f"Product variance over blocks {tuple(block_dims)}: {result.value:.10g} "
                 f"({result.successes}/{result.restarts} converged)")
    return ProductOptimum(
        variance=max(result.value, 0.0),
        blocks=tuple(problem.normalized_blocks(result.x)),
        restarts=result.restarts,
        successes=result.successes,
    )
