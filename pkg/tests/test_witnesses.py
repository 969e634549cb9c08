"""
Tests for named states, coherence and entanglement witnesses, and verdicts.
"""
import logging
import math

import numpy as np
import pytest

from qbspeed.bounds.classical import bipartitions
from qbspeed.core.linalg import DensityMatrix, HermitianOperator, PureState
from qbspeed.dynamics.speed import pure_state_speed
from qbspeed.errors import ConfigError, InvalidDimensionError, InvalidSpecError, UselessWitnessError
from qbspeed.witnesses.states import basis_product, dicke_state, ghz_state, plus_product, state_from_dict
from qbspeed.witnesses.witness import (
    best_coherence_basis_index,
    best_entanglement_partition,
    coherence_witness_hamiltonian,
    dicke_speed_check,
    entanglement_witness_hamiltonian,
    local_probing,
    random_class_member,
    schmidt_weights,
    sigma_z_power_claim,
    sites_of,
    soundness_sweep,
    witness_report,
)


class TestStates:
    """Named state constructors."""

    def test_dicke_support(self):
        phi = dicke_state(4, 2)
        assert np.count_nonzero(np.abs(phi.amplitudes) > 0) == 6
        assert np.abs(phi.amplitudes[0b0011]) == pytest.approx(1 / math.sqrt(6))

    def test_dicke_single_excitation_puts_site_zero_first(self):
        assert np.abs(dicke_state(3, 1).amplitudes[0b100]) > 0

    def test_dicke_range(self):
        with pytest.raises(InvalidSpecError):
            dicke_state(3, 4)

    def test_ghz(self):
        amps = ghz_state(3).amplitudes
        assert amps[0] == pytest.approx(1 / math.sqrt(2))
        assert amps[7] == pytest.approx(1 / math.sqrt(2))

    def test_plus_product_is_uniform(self):
        assert np.allclose(plus_product(2).amplitudes, 0.5)

    def test_basis_product_index(self):
        assert basis_product([1, 0, 1]).amplitudes[5] == 1.0
        assert basis_product([2, 1], d=3).amplitudes[7] == 1.0

    @pytest.mark.parametrize('body', [
        {'name': 'ghz', 'N': 3},
        {'name': 'dicke', 'N': 3, 'm': 1},
        {'name': 'plus-product', 'N': 3},
        {'name': 'basis', 'digits': [0, 1, 1]},
        {'amplitudes': [[1, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 1]]},
    ])
    def test_state_from_dict(self, body):
        assert state_from_dict(body).dim == 8

    @pytest.mark.parametrize('body', [{'name': 'w-state', 'N': 3}, {'name': 'ghz'}])
    def test_state_from_dict_rejects(self, body):
        with pytest.raises(ConfigError):
            state_from_dict(body)

    def test_sites_of(self):
        assert sites_of(27, 3) == 3
        with pytest.raises(InvalidDimensionError):
            sites_of(6, 2)


class TestCoherenceWitness:
    """Basis-projector probing Hamiltonians."""

    def test_single_plus_state(self):
        H, lam = coherence_witness_hamiltonian(plus_product(1), 0)
        assert lam == pytest.approx(0.5)
        assert pure_state_speed(plus_product(1), H, 1.0) == pytest.approx(0.25)

    def test_plus_product(self):
        H, lam = coherence_witness_hamiltonian(plus_product(3), 0)
        assert lam == pytest.approx(1 / 8)
        assert pure_state_speed(plus_product(3), H, 1.0) == pytest.approx(7 / 64)

    def test_incoherent_state_is_useless(self):
        with pytest.raises(UselessWitnessError):
            coherence_witness_hamiltonian(PureState.basis(2, 4), 2)

    def test_best_basis_index(self):
        phi = PureState.from_amplitudes([0.1, 0.7, 0.7, 0.1])
        assert best_coherence_basis_index(phi) in (1, 2)

    def test_best_basis_index_on_basis_state(self):
        with pytest.raises(UselessWitnessError):
            best_coherence_basis_index(PureState.basis(0, 2))


class TestEntanglementWitness:
    """Projectors onto biseparable states with overlap one half."""

    @pytest.mark.parametrize('N', [2, 3, 4])
    def test_ghz_overlap(self, N):
        H, overlap = entanglement_witness_hamiltonian(ghz_state(N), ((0,), tuple(range(1, N))))
        assert overlap == pytest.approx(0.5, abs=1e-10)
        assert pure_state_speed(ghz_state(N), H, 1.0) == pytest.approx(0.25, abs=1e-10)

    def test_weakly_entangled_pair_reaches_half(self):
        phi = PureState.from_amplitudes([math.sqrt(0.8), 0, 0, math.sqrt(0.2)])
        _, overlap = entanglement_witness_hamiltonian(phi, ((0,), (1,)))
        assert overlap == pytest.approx(0.5, abs=1e-10)

    def test_interleaved_partition(self):
        plus = [1, 1]
        vec = np.kron(np.kron([1, 0], plus), [0, 1]) + np.kron(np.kron([0, 1], plus), [1, 0])
        phi = PureState.from_amplitudes(vec)
        _, overlap = entanglement_witness_hamiltonian(phi, ((0, 2), (1,)))
        assert overlap == pytest.approx(0.5, abs=1e-10)

    def test_qutrit_overlap_unreachable(self, caplog):
        amps = np.zeros(9)
        amps[[0, 4, 8]] = 1
        with caplog.at_level(logging.WARNING):
            _, overlap = entanglement_witness_hamiltonian(PureState.from_amplitudes(amps), ((0,), (1,)), d=3)
        assert overlap == pytest.approx(1 / 3, abs=1e-10)
        assert 'unreachable' in caplog.text

    def test_bad_partition(self):
        with pytest.raises(InvalidSpecError):
            entanglement_witness_hamiltonian(ghz_state(3), ((0,), (1,)))

    def test_schmidt_weights_of_product_state(self):
        weights = schmidt_weights(plus_product(3), ((1,), (0, 2)))
        assert weights[0] == pytest.approx(1.0)

    def test_best_partition(self):
        cut, mu = best_entanglement_partition(ghz_state(3))
        assert cut in bipartitions(3)
        assert mu == pytest.approx(0.5)


class TestExampleChecks:
    """Printed example values against the variance oracle."""

    def test_dicke_pair(self):
        oracle, printed, diff = dicke_speed_check(2, 1, 1.0)
        assert oracle == pytest.approx(1.0)
        assert printed == pytest.approx(2.5)
        assert diff == pytest.approx(1.5)

    def test_dicke_without_excitations(self):
        oracle, _, _ = dicke_speed_check(5, 0, 2.0)
        assert oracle == pytest.approx(5 * 2.0 / 4)

    def test_sigma_z_power(self):
        oracle, claim, _ = sigma_z_power_claim(3, 1.0, 1.0)
        assert oracle == pytest.approx(1.0)
        assert claim == pytest.approx(9 / 4)


class TestVerdicts:
    """Witness reports and soundness sweeps."""

    def test_ghz_beats_separable(self, optimizer_config):
        verdict = witness_report(ghz_state(4), local_probing(4, 'z'), 'fully_separable', 1.0,
                                 config=optimizer_config)
        assert verdict.state_speed == pytest.approx(4.0)
        assert verdict.classical_ceiling == pytest.approx(1.0, abs=1e-7)
        assert verdict.witnessed

    def test_plus_product_beats_incoherent(self):
        verdict = witness_report(plus_product(3), local_probing(3, 'z'), 'incoherent', 1.0)
        assert verdict.classical_ceiling == 0.0
        assert verdict.witnessed

    def test_product_state_is_not_witnessed(self, optimizer_config):
        verdict = witness_report(plus_product(2), local_probing(2, 'x'), 'fully_separable', 1.0,
                                 config=optimizer_config)
        assert not verdict.witnessed

    def test_mixed_state_uses_sld(self):
        rho = DensityMatrix.maximally_mixed(4)
        verdict = witness_report(rho, local_probing(2, 'x'), 'incoherent', 1.0)
        assert verdict.state_speed == 0.0
        assert not verdict.witnessed

    def test_unknown_class(self):
        with pytest.raises(InvalidSpecError):
            witness_report(plus_product(1), HermitianOperator(np.eye(2)), 'entangled', 1.0)

    def test_verdict_serializes(self):
        body = witness_report(plus_product(2), local_probing(2, 'z'), 'incoherent', 1.0, label='local-z').to_dict()
        assert body['probing_spec']['label'] == 'local-z'
        assert body['margin'] == 1e-9

    @pytest.mark.parametrize('ceiling_class', ['incoherent', 'fully_separable', 'biseparable'])
    def test_soundness(self, ceiling_class, optimizer_config):
        rows, violations = soundness_sweep(ceiling_class, local_probing(3, 'x'), 40, 1.0, seed=9,
                                           config=optimizer_config)
        assert len(rows) == 40
        assert violations == 0

    def test_soundness_is_reproducible(self, optimizer_config):
        H = local_probing(2, 'z')
        first, _ = soundness_sweep('fully_separable', H, 5, 1.0, seed=4, config=optimizer_config)
        second, _ = soundness_sweep('fully_separable', H, 5, 1.0, seed=4, config=optimizer_config)
        assert first == second

    def test_biseparable_members_factor(self, rng):
        phi = random_class_member('biseparable', 3, rng)
        best = max(schmidt_weights(phi, cut)[0] for cut in (((0,), (1, 2)), ((1,), (0, 2)), ((2,), (0, 1))))
        assert best == pytest.approx(1.0)
