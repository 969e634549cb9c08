"""
Cross-module invariant suites behind the `verify` experiment.

Every suite draws from its own generator seeded by (seed, suite position) and
runs at desk scale (N <= 4). A suite passes when none of its checks fail and it
raises no toolkit error. Fault injection is a test hook: it corrupts one input
on purpose so the suite must report a failure.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from qbspeed.bounds.classical import (
    biseparable_bound,
    incoherent_bound_operator,
    nu_decomposition,
    separable_bound_operator,
)
from qbspeed.bounds.optimizer import OptimizerConfig
from qbspeed.core.linalg import (
    DensityMatrix,
    HermitianOperator,
    PureState,
    random_density_matrix,
    random_hermitian,
    random_pure_state,
    variance,
)
from qbspeed.dynamics.battery import (
    charging_work,
    complement_energy,
    energy_derivative,
    extractable_energy,
    extracting_work,
    finite_difference_speed,
    hellinger_distance,
    hellinger_from_energies,
    integrate_speed,
    speed_at,
)
from qbspeed.dynamics.speed import convexity_probe, maximize_over_bare, pure_state_speed, sld_speed
from qbspeed.errors import ConfigError, MonotonicityViolationError, QBSpeedError, VerificationFailure
from qbspeed.witnesses.states import ghz_state, plus_product
from qbspeed.witnesses.witness import (
    coherence_witness_hamiltonian,
    entanglement_witness_hamiltonian,
    local_probing,
    soundness_sweep,
)

logger = logging.getLogger(__name__)

FAULTS = ('hermiticity', 'speed-scale')
SUITE_RESTARTS = 8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)

Checks = Tuple[int, List[str]]


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checks: int
    failures: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'passed': self.passed, 'checks': self.checks,
                'failures': self.failures[:10]}


def _bare(dim: int, rng: np.random.Generator) -> HermitianOperator:
    """Random bare Hamiltonian with ground energy 0 and a random eigenbasis."""
    levels = np.concatenate([[0.0], np.sort(rng.uniform(0.2, 2.0, dim - 1))])
    _, basis = np.linalg.eigh(random_hermitian(dim, rng).matrix)
    return HermitianOperator((basis * levels) @ basis.conj().T)


def _close(a: float, b: float, rel: float, floor: float = 1.0) -> bool:
    return abs(a - b) <= rel * max(abs(a), abs(b), floor)


def _optimizer(seed: int) -> OptimizerConfig:
    return OptimizerConfig(restarts=SUITE_RESTARTS, seed=seed)


# Suites ------------------------------------------------------------------------

def suite_energy_identity(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    dims = (2, 3, 4, 8, 9)
    for n in range(100):
        dim = dims[n % len(dims)]
        matrix = random_hermitian(dim, rng).matrix
        if fault == 'hermiticity':
            matrix = matrix.copy()
            matrix[0, 1] += 1e-3
        H = HermitianOperator(matrix)
        H0 = _bare(dim, rng)
        rho = random_density_matrix(dim, rng)
        t = float(rng.uniform(0, 5))
        tr = H0.trace()
        lhs = extractable_energy(rho, H, t, H0) + tr * complement_energy(rho, H, t, H0)
        if abs(lhs - tr) >= 1e-10 * max(1.0, tr):
            failures.append(f"dim={dim} t={t:.4f}: F + T*Fc - T = {lhs - tr:.3e}")
    return 100, failures


def suite_hellinger(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    for n in range(40):
        dim = int(rng.integers(2, 5))
        H, H0, rho = random_hermitian(dim, rng), _bare(dim, rng), random_density_matrix(dim, rng)
        t, tp = (float(x) for x in rng.uniform(0, 4, 2))
        if hellinger_distance(rho, H, t, t, H0) != 0.0:
            failures.append(f"D(t, t) != 0 at t={t:.4f}")
        forward, backward = hellinger_distance(rho, H, t, tp, H0), hellinger_distance(rho, H, tp, t, H0)
        if abs(forward - backward) > 1e-12:
            failures.append(f"D not symmetric: {forward:.15g} vs {backward:.15g}")
        if forward > math.sqrt(2) + 1e-12:
            failures.append(f"D={forward:.6f} exceeds sqrt(2)")
    extreme = hellinger_from_energies(0.0, 2.0, 1.0, 0.0, 2.0)
    if abs(extreme - math.sqrt(2)) > 1e-12:
        failures.append(f"opposite ends give {extreme:.15g}, expected sqrt(2)")
    return 121, failures


def suite_work_vs_integral(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    rabi_state = PureState.basis(0, 2)
    rabi_H = HermitianOperator(SIGMA_X / 2)
    rabi_H0 = HermitianOperator(np.diag([0.0, 1.0]))
    work = charging_work(rabi_state, rabi_H, math.pi / 2, rabi_H0)
    integral = integrate_speed(rabi_state, rabi_H, 0.0, math.pi / 2, rabi_H0)
    if abs(work - math.pi / 4) > 1e-9 or abs(integral - math.pi / 4) > 1e-9:
        failures.append(f"Rabi work {work:.12f}, integral {integral:.12f}, expected pi/4")

    checks, attempts = 1, 0
    while checks < 21 and attempts < 200:
        attempts += 1
        dim = int(rng.integers(2, 5))
        H, H0, rho = random_hermitian(dim, rng), _bare(dim, rng), random_density_matrix(dim, rng)
        t_end = float(rng.uniform(0.05, 0.3))
        sign = 1 if energy_derivative(rho, H, 0.0, H0) >= 0 else -1
        try:
            work = charging_work(rho, H, t_end, H0) if sign > 0 else extracting_work(rho, H, t_end, H0)
        except MonotonicityViolationError:
            continue
        checks += 1
        integral = integrate_speed(rho, H, 0.0, t_end, H0, steps=400)
        if not _close(work, integral, 1e-6, floor=1e-3):
            failures.append(f"dim={dim} [0, {t_end:.3f}]: work {work:.10g} vs integral {integral:.10g}")
    return checks, failures


def suite_speed_finite_difference(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    scale = 1.01 if fault == 'speed-scale' else 1.0
    for _ in range(30):
        dim = int(rng.integers(2, 5))
        H, H0, rho = random_hermitian(dim, rng), _bare(dim, rng), random_density_matrix(dim, rng)
        t = float(rng.uniform(0.1, 3.0))
        analytic = scale * speed_at(rho, H, t, H0)
        numeric = finite_difference_speed(rho, H, t, H0)
        if not _close(analytic, numeric, 1e-6):
            failures.append(f"dim={dim} t={t:.4f}: analytic {analytic:.10g} vs finite difference {numeric:.10g}")
    rabi = speed_at(PureState.basis(0, 2), HermitianOperator(SIGMA_X / 2), 1.0,
                    HermitianOperator(np.diag([0.0, 1.0])))
    if abs(scale * rabi - 0.5) > 1e-9:
        failures.append(f"Rabi speed {scale * rabi:.12f}, expected 0.5")
    return 31, failures


def suite_bare_saturation(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    config = OptimizerConfig(restarts=16, seed=int(rng.integers(2 ** 31)))
    for _ in range(4):
        dim = int(rng.integers(2, 4))
        phi, H = random_pure_state(dim, rng), random_hermitian(dim, rng)
        report = maximize_over_bare(phi, H, float(rng.uniform(0, 2)), 1.0, config)
        ceiling = variance(phi, H)
        if report.saturation_ratio < 0.99:
            failures.append(f"dim={dim}: saturation {report.saturation_ratio:.4f} below 0.99")
        if report.v_squared > ceiling + 1e-6:
            failures.append(f"dim={dim}: v^2 {report.v_squared:.10g} exceeds Var(H) {ceiling:.10g}")
    return 8, failures


def suite_sld(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    for _ in range(20):
        dim = int(rng.integers(2, 6))
        H = random_hermitian(dim, rng)
        phi = random_pure_state(dim, rng)
        pure, mixed = pure_state_speed(phi, H, 1.0), sld_speed(DensityMatrix.from_pure(phi), H, 1.0)
        if not _close(pure, mixed, 1e-9):
            failures.append(f"dim={dim}: pure {pure:.12g} vs SLD {mixed:.12g}")

        rho = random_density_matrix(dim, rng)
        lam = random_pure_state(dim, rng)
        v = speed_at(rho, H, float(rng.uniform(0, 2)), HermitianOperator(lam.projector()))
        bound = sld_speed(rho, H, 1.0)
        if v * v > bound + 1e-8 * max(1.0, bound):
            failures.append(f"dim={dim}: v^2 {v * v:.10g} above SLD speed {bound:.10g}")

        weights = rng.dirichlet(np.ones(3))
        weights = weights / weights.sum()
        lhs, rhs = convexity_probe([(float(w), random_density_matrix(dim, rng)) for w in weights], H, 1.0)
        if lhs > rhs + 1e-9:
            failures.append(f"dim={dim}: mixture speed {lhs:.10g} above mixed speeds {rhs:.10g}")
    return 60, failures


def suite_nu_identity(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    for _ in range(50):
        dim = int(rng.integers(2, 9))
        state = random_density_matrix(dim, rng) if rng.random() < 0.5 else random_pure_state(dim, rng)
        H1, H2 = random_hermitian(dim, rng), random_hermitian(dim, rng)
        gamma, E = float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 2))
        nu1, nu2, nu3 = nu_decomposition(state, H1, H2, E)
        direct = E * variance(state, H1 + H2.scaled(gamma))
        if not _close(direct, nu1 + gamma * nu2 + gamma ** 2 * nu3, 1e-9):
            failures.append(f"dim={dim} gamma={gamma:.3f}: direct {direct:.12g}")
    return 50, failures


def suite_class_nesting(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    for n in range(4):
        N = 2 + n % 2
        H = random_hermitian(2 ** N, rng)
        config = _optimizer(int(rng.integers(2 ** 31)))
        inc = incoherent_bound_operator(H, N, 2, 1.0).oracle_value
        sep = separable_bound_operator(H, N, 2, 1.0, config=config).oracle_value
        bis = biseparable_bound(H, N, 2, 1.0, config=config).oracle_value
        if not inc <= sep + 1e-6 <= bis + 2e-6:
            failures.append(f"N={N}: incoherent {inc:.8g}, separable {sep:.8g}, biseparable {bis:.8g}")
    return 4, failures


def suite_coherence_witness(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    for N in range(1, 5):
        phi = plus_product(N)
        H, lam = coherence_witness_hamiltonian(phi, 0)
        speed = pure_state_speed(phi, H, 1.0)
        if abs(speed - lam * (1 - lam)) > 1e-12 or speed <= 0:
            failures.append(f"N={N}: speed {speed:.15g} vs lambda(1-lambda) {lam * (1 - lam):.15g}")
        ceiling = incoherent_bound_operator(H, N, 2, 1.0).oracle_value
        if ceiling != 0.0:
            failures.append(f"N={N}: incoherent ceiling {ceiling:.3e}, expected 0")
    return 8, failures


def suite_entanglement_witness(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    config = _optimizer(int(rng.integers(2 ** 31)))
    for N in range(2, 5):
        phi = ghz_state(N)
        H, overlap = entanglement_witness_hamiltonian(phi, ((0,), tuple(range(1, N))))
        speed = pure_state_speed(phi, H, 1.0)
        if abs(overlap - 0.5) > 1e-10 or abs(speed - 0.25) > 1e-10:
            failures.append(f"GHZ({N}): overlap {overlap:.12f}, speed {speed:.12f}")
        ceiling = biseparable_bound(H, N, 2, 1.0, config=config).oracle_value
        if ceiling > 0.25 + 1e-6:
            failures.append(f"GHZ({N}): biseparable ceiling {ceiling:.10g} above 1/4")
    return 6, failures


def suite_quadratic_speedup(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    config = _optimizer(int(rng.integers(2 ** 31)))
    for N in range(2, 5):
        H = local_probing(N, 'z')
        speed = pure_state_speed(ghz_state(N), H, 1.0)
        if abs(speed - N * N / 4) > 1e-9:
            failures.append(f"GHZ({N}): speed {speed:.12g}, expected {N * N / 4}")
        separable = separable_bound_operator(H, N, 2, 1.0, config=config).oracle_value
        if abs(separable - N / 4) > 1e-6:
            failures.append(f"N={N}: separable ceiling {separable:.10g}, expected {N / 4}")
    return 6, failures


def suite_soundness(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    seed = int(rng.integers(2 ** 31))
    config = _optimizer(seed)
    phi = ghz_state(3)
    cases = (
        ('incoherent', coherence_witness_hamiltonian(plus_product(3), 0)[0]),
        ('fully_separable', local_probing(3, 'z')),
        ('biseparable', entanglement_witness_hamiltonian(phi, ((0,), (1, 2)))[0]),
    )
    for ceiling_class, H in cases:
        _, violations = soundness_sweep(ceiling_class, H, 100, 1.0, seed, config=config)
        if violations:
            failures.append(f"{ceiling_class}: {violations} in-class samples above the ceiling")
    return 300, failures


def suite_determinism(rng: np.random.Generator, fault: Optional[str]) -> Checks:
    failures = []
    H = random_hermitian(8, rng)
    seed = int(rng.integers(2 ** 31))
    first = separable_bound_operator(H, 3, 2, 1.0, config=_optimizer(seed)).oracle_value
    second = separable_bound_operator(H, 3, 2, 1.0, config=_optimizer(seed)).oracle_value
    doubled = separable_bound_operator(H, 3, 2, 1.0, restarts=2 * SUITE_RESTARTS,
                                       config=_optimizer(seed)).oracle_value
    if first != second:
        failures.append(f"same seed gave {first!r} and {second!r}")
    if doubled < first:
        failures.append(f"doubling restarts lowered the optimum: {doubled!r} < {first!r}")
    return 2, failures


SUITES: Sequence[Tuple[str, Callable[[np.random.Generator, Optional[str]], Checks]]] = (
    ('energy_identity', suite_energy_identity),
    ('hellinger_distance', suite_hellinger),
    ('work_vs_integral', suite_work_vs_integral),
    ('speed_finite_difference', suite_speed_finite_difference),
    ('bare_saturation', suite_bare_saturation),
    ('sld_bounds', suite_sld),
    ('nu_identity', suite_nu_identity),
    ('class_nesting', suite_class_nesting),
    ('coherence_witness', suite_coherence_witness),
    ('entanglement_witness', suite_entanglement_witness),
    ('quadratic_speedup', suite_quadratic_speedup),
    ('soundness', suite_soundness),
    ('determinism', suite_determinism),
)


def run_suites(seed: int, fault: Optional[str] = None, only: Optional[Sequence[str]] = None) -> List[SuiteResult]:
    """
    Run the invariant suites.

    Args:
        seed: Base seed; suite i draws from default_rng([seed, i])
        fault: Optional fault to inject (one of FAULTS)
        only: Optional subset of suite names

    Returns:
        One SuiteResult per suite, in declaration order

    Raises:
        ConfigError: unknown fault or suite name
    """
    if fault is not None and fault not in FAULTS:
        raise ConfigError(f"Unknown fault '{fault}' (expected one of {', '.join(FAULTS)})")
    names = [name for name, _ in SUITES]
    unknown = sorted(set(only or ()) - set(names))
    if unknown:
        raise ConfigError(f"Unknown verify suites: {', '.join(unknown)}")

    results = []
    for index, (name, suite) in enumerate(SUITES):
        if only and name not in only:
            continue
        rng = np.random.default_rng([seed, index])
        try:
            checks, failures = suite(rng, fault)
        except QBSpeedError as e:
            logger.error(f"Suite {name} raised {e.code}: {e.message}")
            checks, failures = 0, [f"{e.code}: {e.message}"]
        result = SuiteResult(name=name, passed=not failures, checks=checks, failures=failures)
        logger.info(f"Suite {name}: {'pass' if result.passed else 'FAIL'} ({checks} checks)")
        results.append(result)
    return results


def format_table(results: Sequence[SuiteResult]) -> str:
    lines = ["=" * 60, "Invariant suites", "=" * 60]
    for r in results:
        mark = '✓' if r.passed else '✗'
        lines.append(f"{mark} {r.name:<28} {r.checks:>5} checks  {len(r.failures)} failures")
        for failure in r.failures[:3]:
            lines.append(f"    {failure}")
    passed = sum(r.passed for r in results)
    lines += ["=" * 60, f"{passed}/{len(results)} suites passed"]
    return "\n".join(lines)


def raise_on_failure(results: Sequence[SuiteResult]) -> None:
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise VerificationFailure(f"{len(failed)} verify suite(s) failed: {', '.join(failed)}",
                                  details={'failed': failed})
