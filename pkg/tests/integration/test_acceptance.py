"""
Acceptance runs of the shipped experiment presets.

These tests run every preset in config/ at full restart counts, then repeat the
randomized identity and witness checks at their full sample counts. They take
minutes, not seconds.
Run with: RUN_INTEGRATION_TESTS=true pytest tests/integration -v
"""
import csv
import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from qbspeed.bounds.classical import biseparable_bound, nu_decomposition, separable_bound_operator
from qbspeed.bounds.optimizer import OptimizerConfig
from qbspeed.cli.main import main
from qbspeed.core.linalg import (
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
    integrate_speed,
    speed_at,
)
from qbspeed.dynamics.speed import pure_state_speed
from qbspeed.errors import MonotonicityViolationError
from qbspeed.witnesses.states import ghz_state, plus_product
from qbspeed.witnesses.witness import (
    coherence_witness_hamiltonian,
    entanglement_witness_hamiltonian,
    local_probing,
    soundness_sweep,
)

# Skip integration tests if not in integration test mode
pytestmark = [
    pytest.mark.integration,
    pytest.mark.skipif(
        os.environ.get('RUN_INTEGRATION_TESTS') != 'true',
        reason="Integration tests disabled. Set RUN_INTEGRATION_TESTS=true to run."
    ),
]

CONFIG_DIR = Path(__file__).resolve().parents[2] / 'config'
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def run_preset(name: str, out: Path) -> int:
    return main([str(CONFIG_DIR / name), '--output', str(out)])


class TestPresets:
    """Every preset runs to completion and writes its outputs."""

    def test_rabi_speed(self, tmp_path):
        assert run_preset('rabi_speed.json', tmp_path) == 0
        with open(tmp_path / 'trajectory.csv', newline='') as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 101
        assert all(abs(float(r['v']) - 0.5) < 1e-9 for r in rows)

    def test_bounds_ising(self, tmp_path):
        assert run_preset('bounds_ising.json', tmp_path) == 0
        report = json.loads((tmp_path / 'bounds.json').read_text())
        assert report['incoherent']['oracle_value'] <= report['fully_separable']['oracle_value'] + 1e-9
        assert report['fully_separable']['oracle_value'] <= report['biseparable']['oracle_value'] + 1e-9

    def test_ising_sweep(self, tmp_path):
        assert run_preset('ising_sweep.json', tmp_path) == 0
        with open(tmp_path / 'ising_sweep.csv', newline='') as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 61
        assert float(rows[0]['v_fs_oracle']) == pytest.approx(2.0, abs=1e-7)
        assert float(rows[0]['gamma_c']) == pytest.approx(1 / 0.90625)

    def test_witness_ghz(self, tmp_path):
        assert run_preset('witness_ghz.json', tmp_path) == 0
        verdict = json.loads((tmp_path / 'witness.json').read_text())
        assert verdict['witnessed'] is True
        assert verdict['state_speed'] == pytest.approx(4.0)

    def test_witness_entanglement(self, tmp_path):
        assert run_preset('witness_entanglement.json', tmp_path) == 0
        verdict = json.loads((tmp_path / 'witness.json').read_text())
        assert verdict['soundness_violations'] == 0
        assert not math.isnan(verdict['classical_ceiling'])

    def test_examples(self, tmp_path):
        assert run_preset('examples.json', tmp_path) == 0
        rows = json.loads((tmp_path / 'examples.json').read_text())
        assert {r['quantity'] for r in rows} >= {'ghz_speed', 'dicke_m2_speed', 'sigma_z_power_on_plus'}

    def test_full_verify(self, tmp_path):
        assert run_preset('verify.json', tmp_path) == 0
        report = json.loads((tmp_path / 'verify_report.json').read_text())
        assert len(report['suites']) == 13
        assert all(s['passed'] for s in report['suites'])


class TestBiseparableScaling:
    """GHZ-type block in the larger side of the best cut."""

    def test_four_sites(self):
        report = biseparable_bound(local_probing(4, 'z'), 4, 2, 1.0, config=OptimizerConfig(restarts=32, seed=1))
        assert report.oracle_value == pytest.approx((4 - 1) ** 2 / 4 + 1 / 4, abs=1e-6)


def random_bare(dim, rng):
    """Bare Hamiltonian with ground energy 0 in a random eigenbasis."""
    levels = np.concatenate([[0.0], np.sort(rng.uniform(0.2, 2.0, dim - 1))])
    _, basis = np.linalg.eigh(random_hermitian(dim, rng).matrix)
    return HermitianOperator((basis * levels) @ basis.conj().T)


class TestAcceptanceScale:
    """Randomized identities and witness checks at their full sample counts."""

    def test_energy_identity_500_instances(self):
        rng = np.random.default_rng(101)
        dims = (2, 3, 4, 8, 9, 27)
        for n in range(500):
            dim = dims[n % len(dims)]
            H, H0, rho = random_hermitian(dim, rng), random_bare(dim, rng), random_density_matrix(dim, rng)
            t = float(rng.uniform(0, 5))
            tr = H0.trace()
            total = extractable_energy(rho, H, t, H0) + tr * complement_energy(rho, H, t, H0)
            assert abs(total - tr) < 1e-10 * max(1.0, tr)

    def test_work_matches_integrated_speed_on_100_intervals(self):
        rabi = (PureState.basis(0, 2), HermitianOperator(SIGMA_X / 2), HermitianOperator(np.diag([0.0, 1.0])))
        assert charging_work(rabi[0], rabi[1], math.pi / 2, rabi[2]) == pytest.approx(math.pi / 4, abs=1e-9)

        rng = np.random.default_rng(102)
        checked = 0
        for _ in range(2000):
            if checked == 100:
                break
            dim = int(rng.integers(2, 5))
            H, H0, rho = random_hermitian(dim, rng), random_bare(dim, rng), random_density_matrix(dim, rng)
            t_end = float(rng.uniform(0.05, 0.3))
            charging = energy_derivative(rho, H, 0.0, H0) >= 0
            try:
                work = charging_work(rho, H, t_end, H0) if charging else extracting_work(rho, H, t_end, H0)
            except MonotonicityViolationError:
                continue
            integral = integrate_speed(rho, H, 0.0, t_end, H0, steps=400)
            assert abs(work - integral) <= 1e-6 * max(abs(work), abs(integral), 1e-3)
            checked += 1
        assert checked == 100

    def test_speed_matches_finite_difference_at_100_points(self):
        rabi = speed_at(PureState.basis(0, 2), HermitianOperator(SIGMA_X / 2), 1.0,
                        HermitianOperator(np.diag([0.0, 1.0])))
        assert rabi == pytest.approx(0.5, abs=1e-9)

        rng = np.random.default_rng(103)
        for _ in range(100):
            dim = int(rng.integers(2, 5))
            H, H0, rho = random_hermitian(dim, rng), random_bare(dim, rng), random_density_matrix(dim, rng)
            t = float(rng.uniform(0.1, 3.0))
            analytic, numeric = speed_at(rho, H, t, H0), finite_difference_speed(rho, H, t, H0)
            assert abs(analytic - numeric) <= 1e-6 * max(abs(analytic), abs(numeric), 1.0)

    def test_moment_identity_200_instances(self):
        rng = np.random.default_rng(104)
        for _ in range(200):
            dim = int(rng.integers(2, 9))
            state = random_density_matrix(dim, rng) if rng.random() < 0.5 else random_pure_state(dim, rng)
            H1, H2 = random_hermitian(dim, rng), random_hermitian(dim, rng)
            gamma, E = float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 2))
            nu1, nu2, nu3 = nu_decomposition(state, H1, H2, E)
            direct = E * variance(state, H1 + H2.scaled(gamma))
            assert direct == pytest.approx(nu1 + gamma * nu2 + gamma ** 2 * nu3, rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize('N', range(2, 9))
    def test_quadratic_speedup(self, N):
        H = local_probing(N, 'z')
        assert pure_state_speed(ghz_state(N), H, 1.0) == pytest.approx(N * N / 4, abs=1e-9)
        separable = separable_bound_operator(H, N, 2, 1.0, config=OptimizerConfig(restarts=8, seed=N))
        assert separable.oracle_value == pytest.approx(N / 4, abs=1e-6)

    @pytest.mark.parametrize('ceiling_class,hamiltonian', [
        ('incoherent', lambda: coherence_witness_hamiltonian(plus_product(4), 0)[0]),
        ('fully_separable', lambda: local_probing(4, 'z')),
        ('biseparable', lambda: entanglement_witness_hamiltonian(ghz_state(4), ((0,), (1, 2, 3)))[0]),
    ])
    def test_soundness_1000_states_per_class(self, ceiling_class, hamiltonian):
        rows, violations = soundness_sweep(ceiling_class, hamiltonian(), 1000, 1.0, seed=2024,
                                           config=OptimizerConfig(restarts=16, seed=2024))
        assert len(rows) == 1000
        assert violations == 0
