"""
Tests for the classical ceilings and the multi-start engine behind them.

Tests cover:
- Moment decomposition and the printed closed forms
- Incoherent enumeration, separable and biseparable searches
- Determinism and restart monotonicity of the optimizer
"""
import numpy as np
import pytest

from qbspeed.bounds.classical import (
    BoundReport,
    ProductStateCorrelators,
    biseparable_bound,
    bipartitions,
    correlators_from_product,
    example1_closed,
    incoherent_bound_closed,
    incoherent_bound_enumerate,
    incoherent_bound_operator,
    inhomogeneous_upper_bound,
    nu_closed,
    nu_decomposition,
    separable_bound_operator,
    separable_bound_optimize,
)
from qbspeed.bounds.optimizer import (
    OptimizerConfig,
    ProductVariance,
    maximize,
    permute_sites,
    product_vector,
)
from qbspeed.core.hamiltonians import (
    IsingSpec,
    ProbingHamiltonianSpec,
    axis_direction,
    build_ising,
    build_probing,
    split_probing,
)
from qbspeed.core.linalg import HermitianOperator, PureState, random_hermitian, random_pure_state
from qbspeed.errors import (
    EnumerationTooLargeError,
    InvalidDimensionError,
    InvalidSpecError,
    OptimizerNotConvergedError,
)
from qbspeed.witnesses.states import plus_product
from qbspeed.witnesses.witness import local_probing

from conftest import SIGMA_X, SIGMA_Z

Z = axis_direction(2, 'z')
X = axis_direction(2, 'x')
I2 = np.eye(2)


def local_spec(alpha, direction=Z):
    return ProbingHamiltonianSpec(N=len(alpha), d=2, alpha=tuple(alpha), v=tuple([direction] * len(alpha)))


def random_local_states(N, rng):
    return [random_pure_state(2, rng).amplitudes for _ in range(N)]


class TestMoments:
    """Exact and printed moment coefficients."""

    def test_no_correlated_part(self, rng):
        phi, H1 = random_pure_state(4, rng), random_hermitian(4, rng)
        nu1, nu2, nu3 = nu_decomposition(phi, H1, HermitianOperator(np.zeros((4, 4))), 2.0)
        assert nu1 == pytest.approx(2.0 * float(np.real(
            np.vdot(phi.amplitudes, H1.matrix @ H1.matrix @ phi.amplitudes)
            - np.vdot(phi.amplitudes, H1.matrix @ phi.amplitudes) ** 2)))
        assert nu2 == pytest.approx(0.0, abs=1e-12)
        assert nu3 == pytest.approx(0.0, abs=1e-12)

    def test_plus_pair(self):
        H1 = HermitianOperator(0.5 * (np.kron(SIGMA_Z, I2) + np.kron(I2, SIGMA_Z)))
        H2 = HermitianOperator(0.25 * 2 * np.kron(SIGMA_Z, SIGMA_Z))
        nu = nu_decomposition(plus_product(2), H1, H2, 1.0)
        assert nu == pytest.approx((0.5, 0.0, 0.25), abs=1e-12)

    def test_polynomial_identity(self, rng):
        for _ in range(20):
            phi = random_pure_state(6, rng)
            H1, H2 = random_hermitian(6, rng), random_hermitian(6, rng)
            gamma = float(rng.uniform(-2, 2))
            nu1, nu2, nu3 = nu_decomposition(phi, H1, H2, 1.3)
            direct = nu_decomposition(phi, H1 + H2.scaled(gamma), HermitianOperator(np.zeros((6, 6))), 1.3)[0]
            assert direct == pytest.approx(nu1 + gamma * nu2 + gamma ** 2 * nu3, rel=1e-9, abs=1e-12)

    def test_closed_forms_against_product_moments(self, rng):
        spec = build_ising(IsingSpec(N=4, k=2, a=0.7, gamma=0.9))
        local = random_local_states(4, rng)
        phi = PureState.from_amplitudes(product_vector(local))
        H1, H2 = split_probing(spec)
        exact = nu_decomposition(phi, H1, H2, 1.0)
        printed = nu_closed(spec, correlators_from_product(local, spec), 1.0)
        assert printed[0] == pytest.approx(exact[0], abs=1e-12)
        assert printed[1] == pytest.approx(2 * exact[1], abs=1e-12)
        assert printed[2] == pytest.approx(exact[2], abs=1e-12)

    def test_correlators_out_of_range(self):
        with pytest.raises(InvalidSpecError):
            ProductStateCorrelators(s=(1.5,), s_u=(0.0,), overlaps=(1.0,))


class TestIncoherent:
    """Enumeration over computational basis states."""

    def test_z_field_has_no_incoherent_speed(self):
        assert incoherent_bound_enumerate(local_spec([1, 1, 1]), 1.0).oracle_value == 0.0

    def test_x_field(self):
        alpha = [1.0, 0.5, 0.2]
        report = incoherent_bound_enumerate(local_spec(alpha, X), 2.0)
        assert report.oracle_value == pytest.approx(2.0 / 4 * sum(a * a for a in alpha))
        assert report.discrepancy == pytest.approx(0.0, abs=1e-12)

    def test_closed_form_on_basis_state(self):
        spec = local_spec([1.0])
        corr = correlators_from_product([np.array([1, 0])], spec)
        assert incoherent_bound_closed(spec, corr, 1.0) == 0.0

    def test_tensor_power_vanishes(self):
        H = HermitianOperator(np.kron(np.kron(SIGMA_Z, SIGMA_Z), SIGMA_Z))
        assert incoherent_bound_operator(H, 3, 2, 1.0).oracle_value == 0.0

    def test_enumeration_limit(self):
        with pytest.raises(EnumerationTooLargeError):
            incoherent_bound_enumerate(local_spec([1] * 5), 1.0, max_states=16)

    def test_argmax_digits_are_site_ordered(self):
        H = HermitianOperator(np.kron(np.diag([0.0, 1.0]), 3 * SIGMA_X))
        report = incoherent_bound_operator(H, 2, 2, 1.0)
        assert report.optimizer_state['digits'][0] == 1


class TestSeparable:
    """Multi-start search over fully separable states."""

    def test_homogeneous_z_field(self, optimizer_config):
        a = 0.8
        report = separable_bound_optimize(local_spec([a] * 3), 1.0, config=optimizer_config)
        assert report.oracle_value == pytest.approx(3 * a * a / 4, abs=1e-7)
        assert report.discrepancy == pytest.approx(0.0, abs=1e-6)

    def test_inhomogeneous_field(self, optimizer_config):
        alpha = [1.0, 0.3, 0.6]
        report = separable_bound_optimize(local_spec(alpha, X), 1.0, config=optimizer_config)
        assert report.oracle_value == pytest.approx(sum(a * a for a in alpha) / 4, abs=1e-7)

    def test_never_below_incoherent(self, rng, optimizer_config):
        for _ in range(3):
            H = random_hermitian(8, rng)
            inc = incoherent_bound_operator(H, 3, 2, 1.0).oracle_value
            sep = separable_bound_operator(H, 3, 2, 1.0, config=optimizer_config).oracle_value
            assert inc <= sep + 1e-9

    def test_dimension_checked(self):
        with pytest.raises(InvalidDimensionError):
            separable_bound_optimize(local_spec([1] * 13), 1.0)

    def test_same_seed_same_value(self, rng):
        H = random_hermitian(8, rng)
        first = separable_bound_operator(H, 3, 2, 1.0, config=OptimizerConfig(restarts=6, seed=11))
        second = separable_bound_operator(H, 3, 2, 1.0, config=OptimizerConfig(restarts=6, seed=11))
        assert first.oracle_value == second.oracle_value

    def test_more_restarts_never_lower(self, rng):
        H = random_hermitian(8, rng)
        config = OptimizerConfig(restarts=4, seed=5)
        few = separable_bound_operator(H, 3, 2, 1.0, config=config).oracle_value
        many = separable_bound_operator(H, 3, 2, 1.0, restarts=8, config=config).oracle_value
        assert many >= few

    def test_threaded_restarts_match_serial(self, rng):
        H = random_hermitian(4, rng)
        serial = separable_bound_operator(H, 2, 2, 1.0, config=OptimizerConfig(restarts=6, seed=2))
        threaded = separable_bound_operator(H, 2, 2, 1.0, config=OptimizerConfig(restarts=6, seed=2, jobs=3))
        assert serial.oracle_value == threaded.oracle_value


class TestBiseparable:
    """Search over states that factor across some cut."""

    def test_cut_enumeration(self):
        cuts = bipartitions(4)
        assert len(cuts) == 7
        assert all(3 in s2 for _, s2 in cuts)

    def test_two_sites_equal_separable(self, optimizer_config):
        H = local_probing(2, 'z')
        bis = biseparable_bound(H, 2, 2, 1.0, config=optimizer_config).oracle_value
        sep = separable_bound_operator(H, 2, 2, 1.0, config=optimizer_config).oracle_value
        assert bis == pytest.approx(sep, abs=1e-7)

    def test_ghz_pair_inside_a_block(self, optimizer_config):
        report = biseparable_bound(local_probing(3, 'z'), 3, 2, 1.0, config=optimizer_config)
        assert report.oracle_value == pytest.approx(1.25, abs=1e-6)
        assert report.optimizer_state['cuts'] == 3

    def test_projector_onto_biseparable_state(self, rng, optimizer_config):
        block = random_pure_state(4, rng).amplitudes
        single = random_pure_state(2, rng).amplitudes
        vec = np.kron(block, single)
        H = HermitianOperator(np.outer(vec, vec.conj()))
        report = biseparable_bound(H, 3, 2, 1.0, config=optimizer_config)
        assert report.oracle_value == pytest.approx(0.25, abs=1e-6)

    def test_nesting(self, rng, optimizer_config):
        for N in (2, 3):
            H = random_hermitian(2 ** N, rng)
            inc = incoherent_bound_operator(H, N, 2, 1.0).oracle_value
            sep = separable_bound_operator(H, N, 2, 1.0, config=optimizer_config).oracle_value
            bis = biseparable_bound(H, N, 2, 1.0, config=optimizer_config).oracle_value
            assert inc <= sep + 1e-6
            assert sep <= bis + 1e-6

    def test_site_limit(self):
        with pytest.raises(InvalidDimensionError):
            biseparable_bound(HermitianOperator(np.eye(2)), 1, 2, 1.0)


class TestPrintedForms:
    """Closed-form ceilings evaluated as printed."""

    def test_upper_bound_zero(self):
        assert inhomogeneous_upper_bound([0, 0, 0], 0.0, 3, 1.0) == 0.0

    def test_upper_bound_local_only(self):
        assert inhomogeneous_upper_bound([1] * 5, 0.0, 5, 2.0) == pytest.approx(5 * 2.0 / 4)

    def test_upper_bound_alternating_field(self):
        # 1/2 from the field, 2/4 from the cross term, 4/8 from the coupling
        assert inhomogeneous_upper_bound([1, 0, 1, 0], 1.0, 4, 1.0) == pytest.approx(1.5)

    def test_upper_bound_rejects_bad_alpha(self):
        with pytest.raises(InvalidSpecError):
            inhomogeneous_upper_bound([1.2, 0], 0.0, 2, 1.0)

    @pytest.mark.parametrize('direction,per_site', [(Z, 1 / 4), (X, 1 / 8)])
    def test_constant_hamiltonian_form(self, direction, per_site):
        a, N = 0.6, 4
        assert example1_closed(local_spec([a] * N, direction), 1.0) == pytest.approx(N * a * a * per_site)

    def test_constant_hamiltonian_zero_field(self):
        assert example1_closed(local_spec([0, 0]), 1.0) == 0.0

    def test_constant_hamiltonian_needs_zero_gamma(self):
        with pytest.raises(InvalidSpecError):
            example1_closed(build_ising(IsingSpec(N=3, gamma=0.5)), 1.0)

    def test_bound_report_serializes(self):
        body = BoundReport(closed_form=1.0, oracle_value=0.75, class_tag='fully_separable').to_dict()
        assert body['discrepancy'] == pytest.approx(0.25)
        assert body['class_tag'] == 'fully_separable'


class TestOptimizerEngine:
    """Product-variance objective and multi-start driver."""

    def test_gradient_matches_finite_difference(self, rng):
        H = random_hermitian(12, rng).matrix
        problem = ProductVariance(H, [2, 3, 2])
        x = rng.normal(size=problem.n_params)
        _, grad = problem.value_and_gradient(x)
        step = 1e-6
        numeric = np.array([
            (problem.value(x + step * e) - problem.value(x - step * e)) / (2 * step)
            for e in np.eye(problem.n_params)
        ])
        assert np.max(np.abs(grad - numeric)) < 1e-6

    def test_permute_sites(self):
        H = np.kron(np.kron(SIGMA_X, SIGMA_Z), I2)
        swapped = permute_sites(H, (2, 0, 1), 2)
        assert np.allclose(swapped, np.kron(np.kron(I2, SIGMA_X), SIGMA_Z))

    def test_all_restarts_fail(self):
        def broken(x):
            raise ValueError("singular")

        with pytest.raises(OptimizerNotConvergedError):
            maximize(broken, [np.zeros(2)], OptimizerConfig(restarts=1))

    @pytest.mark.parametrize('kwargs', [{'restarts': 0}, {'jobs': 0}])
    def test_config_validation(self, kwargs):
        with pytest.raises(InvalidSpecError):
            OptimizerConfig(**kwargs)
