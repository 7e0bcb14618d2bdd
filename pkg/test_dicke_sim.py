"""
Test suite for the dicke_sim library and command-line runner.
"""

import unittest
import tempfile
import json
import math
import os
import shutil
import sys
from pathlib import Path
from unittest import mock

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import expm
from scipy.optimize import OptimizeResult

from dicke_sim.quantum import (
    DensityMatrix, Ket, Operator, basis, destroy, embed, expect, identity, ket_to_dm, partial_trace,
    sigma_minus, sigma_z, tensor, validate_density_matrix,
)
from dicke_sim.cqed import (
    IDLE_DETUNING_MHZ, SystemParams, build_hamiltonian, coupled_basis_decompose, decay_schedule,
    ideal_params, mhz, named_preparation, named_two_qubit_state, measured_params, prepare_state,
    recompose_coupled_basis, superposition_preparation, system_operators, to_mhz, two_qubit_state, PulseSchedule,
)
from dicke_sim.dynamics import (
    IntegratorConfig, TimeTrace, collapse_operators, emitted_photons, evolve, flux_tail_fraction, lindblad_rhs,
    liouvillian,
)
from dicke_sim.oracles import (
    DECAY_INTEGRALS, DecayCase, coupled_populations, decay_power, dip_depth, dip_width,
    extract_dip_metrics, fidelity, mean_purcell_rate, output_field_state, purcell_rate, qubit_purcell_rate,
    rate_equation_power, single_qubit_map, transmission, vacuum_rabi_doublet,
)
from dicke_sim.detection import (
    DetectionConfig, QuadratureRecordSet, export_records_binary, export_records_csv, filter_response,
    husimi_q, load_records_binary, power_trace, synthesize_single_mode_records, synthesize_time_records,
)
from dicke_sim.tomography import (
    MomentTable, deconvolve_noise, estimate_raw_moments, exact_moments, export_json, moment_pairs,
    reconstruct, reconvolve_noise, rotate_moments,
)
from dicke_sim.runner import (
    ExperimentConfig, apply_overrides, fit_scale, normalization_constant, run, run_sweep,
)
from dicke_sim.exporters import plot_columns
from dicke_sim.parallel import THREADS_ENV, worker_count
from dicke_sim.cli import main
from dicke_sim.exceptions import (
    ConvergenceError, DimensionError, NonHermitianError, NormError, SamplingError, ValidationError,
)


def pure_dm(amplitudes):
    return ket_to_dm(Ket(amplitudes, (len(amplitudes),)))


def rho_plus():
    return output_field_state(*coupled_basis_decompose(named_two_qubit_state('plus_plus')))


def rho_minus():
    return output_field_state(*coupled_basis_decompose(named_two_qubit_state('plus_minus')))


def noise_table(n_noise, max_order=3):
    """Exact moments <(S*)^k S^k> of a phase-insensitive Gaussian mode with <|S|^2> = 1 + n_noise."""
    moments = {p: 0.0 for p in moment_pairs(max_order)}
    for k in range(max_order + 1):
        moments[(k, k)] = math.factorial(k) * (1.0 + n_noise) ** k
    return MomentTable(max_order, moments)


def run_decay(params, state, duration, sample_dt=0.002, **integrator):
    schedule = decay_schedule(params, state, duration)
    psi = prepare_state(schedule.prep, int(params.n_max), two_qubit=schedule.initial_state)
    return evolve(ket_to_dm(psi), schedule, params, IntegratorConfig(sample_dt=sample_dt, **integrator))


PRESETS_DIR = Path(__file__).resolve().parent / 'settings' / 'experiments'


class TestQuantumCore(unittest.TestCase):
    """Test operators, states and partial traces."""

    def test_destroy_lowers_fock_state(self):
        a = destroy(3)
        out = a.elements @ basis(4, 2).amplitudes
        np.testing.assert_allclose(out, math.sqrt(2) * basis(4, 1).amplitudes)

    def test_commutator_on_truncated_space(self):
        a = destroy(2)
        comm = a @ a.dag() - a.dag() @ a
        np.testing.assert_allclose(np.diag(comm.elements).real, [1, 1, -2])

    def test_sigma_z_expectation(self):
        self.assertAlmostEqual(expect(basis(2, 1), sigma_z()).real, 1.0)
        self.assertAlmostEqual(expect(basis(2, 0), sigma_z()).real, -1.0)

    def test_tensor_concatenates_space_tags(self):
        op = tensor(sigma_minus(), identity(2), destroy(2))
        self.assertEqual(op.space_tag, (2, 2, 3))
        self.assertEqual(op.dim, 12)

    def test_tensor_rejects_mixed_kinds(self):
        with self.assertRaises(ValidationError):
            tensor(sigma_z(), basis(2, 0))

    def test_tensor_algebra(self):
        rng = np.random.default_rng(11)
        a, b, c, d = (Operator(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)), (2,))
                      for _ in range(4))
        np.testing.assert_allclose(tensor(tensor(a, b), c).elements, tensor(a, tensor(b, c)).elements,
                                   atol=1e-12)
        np.testing.assert_allclose((tensor(a, b) @ tensor(c, d)).elements, tensor(a @ c, b @ d).elements,
                                   atol=1e-12)

    def test_expectation_of_identity_is_trace(self):
        rho = tensor(pure_dm([0.6, 0.8j]), pure_dm([1.0, 0.0, 0.0]))
        self.assertAlmostEqual(expect(rho, identity(rho.space_tag)), rho.trace(), places=12)
        self.assertAlmostEqual(expect(rho, identity(rho.space_tag)).real, 1.0, places=12)

    def test_embed_checks_slot_dimension(self):
        with self.assertRaises(DimensionError):
            embed(destroy(2), 0, (2, 2, 3))

    def test_partial_trace_of_product_state(self):
        a = pure_dm([0.6, 0.8])
        b = pure_dm([1.0, 0.0, 0.0])
        joint = tensor(a, b)
        np.testing.assert_allclose(partial_trace(joint, 0).elements, a.elements, atol=1e-14)
        np.testing.assert_allclose(partial_trace(joint, [1]).elements, b.elements, atol=1e-14)
        self.assertEqual(partial_trace(tensor(a, b, a), [0, 2]).space_tag, (2, 2))

    def test_partial_trace_rejects_bad_index(self):
        with self.assertRaises(DimensionError):
            partial_trace(tensor(pure_dm([1, 0]), pure_dm([1, 0])), 2)

    def test_operator_space_mismatch(self):
        with self.assertRaises(DimensionError):
            _ = sigma_z() + destroy(1).dag() @ destroy(1) + identity(3)

    def test_validate_density_matrix(self):
        with self.assertRaises(NormError):
            validate_density_matrix(DensityMatrix(np.eye(2), (2,)))
        with self.assertRaises(ValidationError):
            validate_density_matrix(DensityMatrix(np.diag([1.5, -0.5]), (2,)))
        validate_density_matrix(pure_dm([0.6, 0.8j]))

    def test_ket_normalization(self):
        with self.assertRaises(NormError):
            Ket([0, 0], (2,)).normalized()
        with self.assertRaises(NormError):
            Ket([1, 1], (2,)).check_norm()
        self.assertAlmostEqual(Ket([1, 1], (2,)).normalized().norm(), 1.0)

    def test_values_are_immutable(self):
        op = sigma_z()
        with self.assertRaises(ValueError):
            op.elements[0, 0] = 5


class TestCavityModel(unittest.TestCase):
    """Test parameters, Hamiltonian and state preparation."""

    def test_purcell_rates_of_measured_parameters(self):
        p = measured_params(25.0)
        self.assertAlmostEqual(to_mhz(qubit_purcell_rate(p, 'A')), 0.4845, places=3)
        self.assertAlmostEqual(to_mhz(qubit_purcell_rate(p, 'B')), 0.5414, places=3)

    def test_invalid_parameters_report_pointers(self):
        with self.assertRaises(ValidationError) as ctx:
            SystemParams(g_a=1.0, g_b=1.0, kappa=-1.0, gamma_nr_a=-0.1)
        pointers = [p for p, _ in ctx.exception.errors]
        self.assertIn('/params/kappa_mhz', pointers)
        self.assertIn('/params/gamma_nr_a_mhz', pointers)

    def test_from_dict_rejects_unknown_keys(self):
        with self.assertRaises(ValidationError) as ctx:
            SystemParams.from_dict({'kappa': 43})
        self.assertEqual(ctx.exception.errors[0][0], '/params/kappa')

    def test_dict_round_trip(self):
        p = measured_params(25.0)
        q = SystemParams.from_dict(p.to_dict())
        for name in ('g_a', 'g_b', 'kappa', 'gamma_phi_b', 'delta_a'):
            self.assertAlmostEqual(getattr(p, name), getattr(q, name), places=12)

    def test_ideal_params_use_identical_couplings(self):
        p = ideal_params(25.0)
        self.assertEqual(p.g_a, p.g_b)
        self.assertAlmostEqual(to_mhz(p.g_a), 3.6)
        self.assertEqual(p.gamma2('A'), 0.0)

    def test_hamiltonian_is_hermitian(self):
        h = build_hamiltonian(measured_params(25.0))
        self.assertTrue(h.is_hermitian())
        self.assertEqual(h.dim, 24)

    def test_coupled_basis(self):
        self.assertEqual(coupled_basis_decompose(named_two_qubit_state('ee'))[3], 1.0)
        alpha, delta, beta, gamma = coupled_basis_decompose(named_two_qubit_state('ge'))
        self.assertAlmostEqual(abs(delta) ** 2, 0.5)
        self.assertAlmostEqual(abs(beta) ** 2, 0.5)
        psi = two_qubit_state(superposition_preparation(1.1))
        back = recompose_coupled_basis(*coupled_basis_decompose(psi))
        np.testing.assert_allclose(back.amplitudes, psi.amplitudes, atol=1e-14)

    def test_dark_state_is_antisymmetric(self):
        psi = named_two_qubit_state('dark')
        np.testing.assert_allclose(psi.amplitudes, [0, 1 / math.sqrt(2), -1 / math.sqrt(2), 0], atol=1e-15)

    def test_unknown_state_name(self):
        with self.assertRaises(ValidationError):
            named_preparation('psi')

    def test_schedule_needs_segments(self):
        with self.assertRaises(ValidationError):
            PulseSchedule(prep=[], segments=[])

    def test_single_qubit_reference_parks_spectator(self):
        p = measured_params(25.0)
        seg = decay_schedule(p, 'single_A', 1.0).segments[0]
        self.assertEqual(seg.delta_a, p.delta_a)
        self.assertAlmostEqual(seg.delta_b, mhz(IDLE_DETUNING_MHZ['B']))

    def test_one_excitation_spectrum_on_resonance(self):
        p = SystemParams.from_dict({'n_max': 2}, measured_params(0.0))
        h = build_hamiltonian(p).elements
        manifold = [1, 3, 6]  # |gg1>, |ge0>, |eg0>
        levels = np.linalg.eigvalsh(h[np.ix_(manifold, manifold)])
        g_eff = math.hypot(p.g_a, p.g_b)
        np.testing.assert_allclose(levels, [-g_eff, 0.0, g_eff], atol=1e-9)
        self.assertAlmostEqual(to_mhz(g_eff), 5.0931, places=3)
        ops = system_operators(2)
        excitations = ops['n'] + ops['sm_a'].dag() @ ops['sm_a'] + ops['sm_b'].dag() @ ops['sm_b']
        commutator = h @ excitations.elements - excitations.elements @ h
        np.testing.assert_allclose(commutator, 0.0, atol=1e-12)

    def test_dark_state_couples_only_through_unequal_couplings(self):
        one_photon = tensor(basis(2, 0), basis(2, 0), basis(3, 1)).amplitudes
        dark = tensor(named_two_qubit_state('dark'), basis(3, 0)).amplitudes
        bright = tensor(named_two_qubit_state('bright'), basis(3, 0)).amplitudes
        for p in (SystemParams.from_dict({'n_max': 2}, measured_params(0.0)), ideal_params(0.0, n_max=2)):
            h = build_hamiltonian(p).elements
            self.assertAlmostEqual(abs(np.vdot(one_photon, h @ dark)), abs(p.g_b - p.g_a) / math.sqrt(2), places=12)
            self.assertAlmostEqual(abs(np.vdot(one_photon, h @ bright)), (p.g_a + p.g_b) / math.sqrt(2), places=12)
            self.assertAlmostEqual(abs(np.vdot(bright, h @ dark)), 0.0, places=12)
        split = ideal_params(0.0, n_max=2).with_detunings(mhz(25.0), mhz(30.0))
        h = build_hamiltonian(split).elements
        self.assertAlmostEqual(abs(np.vdot(bright, h @ dark)), mhz(2.5), places=12)


class TestMasterEquation(unittest.TestCase):
    """Test the Lindblad generator and the integrator."""

    def setUp(self):
        self.params = ideal_params(25.0, n_max=2)
        rng = np.random.default_rng(3)
        x = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
        gram = x @ x.conj().T
        self.rho = DensityMatrix(gram / np.trace(gram), self.params.dims)

    def test_liouvillian_matches_rhs(self):
        p = measured_params(25.0)
        p = SystemParams.from_dict({'n_max': 2}, p)
        h = build_hamiltonian(p)
        cs = collapse_operators(p)
        rhs = lindblad_rhs(self.rho, h, cs)
        sup = liouvillian(h, cs)
        np.testing.assert_allclose(sup @ self.rho.elements.reshape(-1), rhs.reshape(-1), atol=1e-10)
        self.assertAlmostEqual(abs(np.trace(rhs)), 0.0, places=10)

    def test_zero_rates_are_skipped(self):
        labels = [c.label for c in collapse_operators(self.params)]
        self.assertEqual(labels, ['kappa'])

    def test_non_hermitian_hamiltonian(self):
        a = destroy(2)
        bad = Operator(np.kron(np.eye(4), a.elements), self.params.dims)
        with self.assertRaises(NonHermitianError):
            lindblad_rhs(self.rho, bad, [])

    def test_segment_grid(self):
        psi = prepare_state(named_preparation('ge'), 2)
        schedule = PulseSchedule(segments=[
            decay_schedule(self.params, 'ge', 0.1).segments[0],
            decay_schedule(self.params, 'ge', 0.15).segments[0],
        ])
        trace, final = evolve(ket_to_dm(psi), schedule, self.params, IntegratorConfig(sample_dt=0.01),
                              {'a': embed(destroy(2), 2, (2, 2, 3))})
        self.assertEqual(trace.t.size, 26)
        self.assertAlmostEqual(trace.t[-1], 0.25)
        np.testing.assert_allclose(trace.metadata['segment_boundaries_us'], [0.0, 0.1, 0.25])
        self.assertTrue(np.iscomplexobj(trace['a']))
        self.assertFalse(np.iscomplexobj(trace['flux']))
        self.assertAlmostEqual(final.trace().real, 1.0, places=9)

    def test_observable_dimension_mismatch(self):
        psi = prepare_state(named_preparation('ge'), 2)
        with self.assertRaises(DimensionError):
            evolve(ket_to_dm(psi), decay_schedule(self.params, 'ge', 0.1), self.params,
                   observables={'bad': destroy(2)})

    def test_emitted_photons_warns_on_truncated_tail(self):
        t = np.linspace(0, 1, 101)
        with self.assertLogs('dicke_sim.dynamics', level='WARNING'):
            value = emitted_photons(TimeTrace(t, {'flux': np.ones_like(t)}))
        self.assertAlmostEqual(value, 1.0)

    def test_time_trace_validation(self):
        with self.assertRaises(ValidationError):
            TimeTrace(np.array([0.0, 0.0, 1.0]))
        with self.assertRaises(ValidationError):
            TimeTrace(np.array([0.0, 1.0]), {'x': np.zeros(3)})

    def test_dephasing_damps_coherence_at_its_rate(self):
        p = SystemParams.from_dict({'n_max': 2}, measured_params(25.0))
        cs = [c for c in collapse_operators(p) if c.label == 'gamma_phi_a']
        zero = Operator(np.zeros((12, 12)), p.dims)
        plus = Ket([1 / math.sqrt(2), 1 / math.sqrt(2)], (2,))
        rho = ket_to_dm(tensor(plus, basis(2, 0), basis(3, 0)))
        drho = lindblad_rhs(rho, zero, cs)
        self.assertAlmostEqual((drho[6, 0] / rho.elements[6, 0]).real, -p.gamma_phi_a, places=12)
        self.assertAlmostEqual(abs(drho[0, 0]), 0.0, places=14)
        self.assertAlmostEqual(abs(drho[6, 6]), 0.0, places=14)

    def test_cavity_loss_alone_decays_photon_number(self):
        zero = Operator(np.zeros((12, 12)), self.params.dims)
        cs = [c for c in collapse_operators(self.params) if c.label == 'kappa']
        sup = liouvillian(zero, cs)
        rho0 = ket_to_dm(tensor(basis(2, 0), basis(2, 0), basis(3, 2)))
        n_op = system_operators(2)['n']
        kappa = self.params.kappa
        for t in (0.5 / kappa, 1 / kappa, 3 / kappa):
            rho = (expm(sup * t) @ rho0.elements.reshape(-1)).reshape(12, 12)
            self.assertAlmostEqual(np.trace(rho @ n_op.elements).real, 2 * math.exp(-kappa * t), places=9)

    def test_closed_system_without_hamiltonian_is_static(self):
        zero = Operator(np.zeros((12, 12)), self.params.dims)
        np.testing.assert_allclose(lindblad_rhs(self.rho, zero, []), 0.0, atol=1e-15)

    def test_closed_system_conserves_purity(self):
        sup = liouvillian(build_hamiltonian(self.params), [])
        psi = prepare_state(named_preparation('plus_minus'), 2)
        rho = (expm(sup * 0.37) @ ket_to_dm(psi).elements.reshape(-1)).reshape(12, 12)
        self.assertAlmostEqual(np.trace(rho @ rho).real, 1.0, places=9)
        self.assertAlmostEqual(np.trace(rho).real, 1.0, places=9)


class TestSuperradiantDecay(unittest.TestCase):
    """Master-equation decay runs against the conservation laws and closed forms."""

    @classmethod
    def setUpClass(cls):
        cls.ideal = ideal_params(25.0, n_max=2)
        cls.gamma = mean_purcell_rate(cls.ideal)
        cls.traces = {state: run_decay(cls.ideal, state, 2.0)[0]
                      for state in ('ee', 'ge', 'plus_plus', 'dark', 'single_A')}

    def test_both_excited_emits_two_photons(self):
        self.assertAlmostEqual(emitted_photons(self.traces['ee']), 2.0, delta=0.01)

    def test_in_phase_superposition_emits_one_photon(self):
        self.assertAlmostEqual(emitted_photons(self.traces['plus_plus']), 1.0, delta=0.01)

    def test_one_excitation_is_half_trapped(self):
        self.assertAlmostEqual(emitted_photons(self.traces['ge']), 0.5, delta=0.005)

    def test_dark_state_does_not_emit(self):
        self.assertLess(emitted_photons(self.traces['dark']), 0.005)

    def test_integrator_invariants(self):
        for state, trace in self.traces.items():
            self.assertLessEqual(trace.metadata['trace_deviation'], 1e-8, state)
            self.assertGreaterEqual(trace.metadata['min_eigenvalue'], -1e-7, state)

    def test_flux_follows_closed_forms_after_build_up(self):
        cases = {'ee': DecayCase.BOTH_EXCITED, 'ge': DecayCase.ONE_EXCITED,
                 'plus_plus': DecayCase.IN_PHASE_SUPERPOSITION, 'single_A': DecayCase.SINGLE_QUBIT}
        for state, case in cases.items():
            trace = self.traces[state]
            mask = trace.t >= 10 / self.ideal.kappa
            flux = trace['flux']
            analytic = decay_power(case, self.gamma, trace.t)
            self.assertLess(np.max(np.abs(flux[mask] - analytic[mask])), 0.05 * np.max(flux), state)

    def test_single_qubit_flux_decays_at_purcell_rate(self):
        trace = self.traces['single_A']
        mask = trace.t >= 10 / self.ideal.kappa
        slope = np.polyfit(trace.t[mask], np.log(trace['flux'][mask]), 1)[0]
        rate = qubit_purcell_rate(self.ideal, 'A')
        self.assertLess(abs(-slope - rate) / rate, 0.03)
        self.assertAlmostEqual(emitted_photons(trace), 1.0, delta=0.01)

    def test_emitted_photons_insensitive_to_tolerance(self):
        tight, _ = run_decay(self.ideal, 'ee', 2.0, rel_tol=5e-9)
        self.assertLess(abs(emitted_photons(tight) - emitted_photons(self.traces['ee'])), 1e-4)

    def test_superradiant_crossing(self):
        trace = self.traces['ee']
        mask = trace.t >= 10 / self.ideal.kappa
        diff = trace['flux'][mask] - 2 * decay_power(DecayCase.SINGLE_QUBIT, self.gamma, trace.t[mask])
        self.assertGreater(diff[0], 0)
        self.assertLess(diff[-1], 0)
        self.assertEqual(int(np.sum(np.diff(np.sign(diff)) != 0)), 1)

    def test_measured_parameters_release_most_of_the_trapped_excitation(self):
        p = SystemParams.from_dict({'n_max': 2}, measured_params(25.0))
        trace, _ = run_decay(p, 'ge', 6.0, sample_dt=0.005)
        self.assertLessEqual(flux_tail_fraction(trace), 1e-3)
        self.assertAlmostEqual(emitted_photons(trace), 0.869, delta=0.005)

    def test_trapping_without_dephasing(self):
        p = SystemParams.from_dict({'n_max': 2, 'gamma_phi_a_mhz': 0.0, 'gamma_phi_b_mhz': 0.0},
                                   measured_params(25.0))
        trace, _ = run_decay(p, 'ge', 6.0, sample_dt=0.005)
        self.assertAlmostEqual(emitted_photons(trace), 0.505, delta=0.01)


class TestAnalyticOracles(unittest.TestCase):
    """Test spectra, decay laws and output-field states."""

    def setUp(self):
        self.params = measured_params(0.0)

    def test_dip_closed_forms(self):
        self.assertAlmostEqual(dip_depth(self.params, 'A'), 0.1916, places=3)
        self.assertAlmostEqual(to_mhz(dip_width(self.params, 'A')), 1.694, delta=0.001)

    def test_extracted_dip(self):
        probe = mhz(1.0) * np.linspace(-10, 10, 2001)
        t = transmission(probe, self.params, 'A')
        metrics = extract_dip_metrics(probe, t)
        g2 = self.params.gamma2('A')
        half_purcell = 2 * self.params.g_a ** 2 / self.params.kappa
        self.assertAlmostEqual(metrics.depth, g2 / (g2 + half_purcell), delta=1e-3)
        width = dip_width(self.params, 'A')
        self.assertLess(abs(metrics.fwhm - width) / width, 0.05)

    def test_transmission_without_qubits_far_off(self):
        far = measured_params(0.0).with_detunings(mhz(5000.0), mhz(5000.0))
        t0 = transmission(0.0, far, 'AB')
        self.assertAlmostEqual(abs(t0), 1.0, places=3)
        with self.assertRaises(ValidationError):
            transmission(0.0, far, 'C')

    def test_vacuum_rabi_doublet(self):
        narrow, broad = vacuum_rabi_doublet(self.params, 'A')
        total = self.params.kappa / 2 + self.params.gamma2('A')
        self.assertAlmostEqual(narrow.decay_rate + broad.decay_rate, total, places=9)
        width = dip_width(self.params, 'A')
        self.assertLess(abs(2 * narrow.decay_rate - width) / width, 0.03)

    def test_decay_integrals(self):
        gamma = 3.0
        t = np.linspace(0, 20, 200001)
        for case, photons in DECAY_INTEGRALS.items():
            self.assertAlmostEqual(trapezoid(decay_power(case, gamma, t), t), photons, places=4)

    def test_rate_equations_reproduce_decay_laws(self):
        gamma = 2.0
        t = np.linspace(0, 3, 301)
        ee = rate_equation_power(*coupled_populations(named_two_qubit_state('ee')), gamma, t)
        np.testing.assert_allclose(ee, decay_power(DecayCase.BOTH_EXCITED, gamma, t), atol=1e-12)
        pp = rate_equation_power(*coupled_populations(named_two_qubit_state('plus_plus')), gamma, t)
        np.testing.assert_allclose(pp, decay_power(DecayCase.IN_PHASE_SUPERPOSITION, gamma, t), atol=1e-12)
        ge = rate_equation_power(*coupled_populations(named_two_qubit_state('ge')), gamma, t)
        np.testing.assert_allclose(ge, decay_power(DecayCase.ONE_EXCITED, gamma, t), atol=1e-12)

    def test_decay_law_rejects_negative_time(self):
        with self.assertRaises(ValidationError):
            decay_power(DecayCase.SINGLE_QUBIT, 1.0, [-1.0])

    def test_superradiant_crossing_of_closed_forms(self):
        gamma = 1.0
        t = np.linspace(0.001, 5, 50000)
        diff = (decay_power(DecayCase.BOTH_EXCITED, gamma, t)
                - 2 * decay_power(DecayCase.SINGLE_QUBIT, gamma, t))
        crossings = np.flatnonzero(np.diff(np.sign(diff)) != 0)
        self.assertEqual(crossings.size, 1)
        self.assertAlmostEqual(t[crossings[0]], 1.2564, places=3)

    def test_output_field_states(self):
        r = 1 / (2 * math.sqrt(2))
        expected_plus = np.array([[0.25, r, 0.25], [r, 0.5, r], [0.25, r, 0.25]])
        expected_minus = np.array([[0.75, 0, -0.25], [0, 0, 0], [-0.25, 0, 0.25]])
        np.testing.assert_allclose(rho_plus().elements, expected_plus, atol=1e-12)
        np.testing.assert_allclose(rho_minus().elements, expected_minus, atol=1e-12)

    def test_output_field_fidelity(self):
        self.assertAlmostEqual(fidelity(rho_plus(), rho_minus()), 0.125, delta=1e-7)
        self.assertAlmostEqual(fidelity(rho_minus(), rho_plus()), 0.125, delta=1e-7)
        self.assertAlmostEqual(fidelity(rho_minus(), rho_minus()), 1.0, places=9)

    def test_output_state_needs_normalized_coefficients(self):
        with self.assertRaises(NormError):
            output_field_state(1, 1, 0, 0)

    def test_output_field_state_is_a_density_matrix(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            c /= np.linalg.norm(c)
            rho = output_field_state(*c, n_max=3)
            self.assertAlmostEqual(rho.trace().real, 1.0, places=12)
            self.assertGreaterEqual(rho.min_eigenvalue(), -1e-12)
            np.testing.assert_allclose(rho.elements, rho.elements.conj().T, atol=1e-15)

    def test_single_qubit_map(self):
        psi = single_qubit_map(0.6, 0.8j, n_max=3)
        self.assertEqual(psi.space_tag, (4,))
        np.testing.assert_allclose(psi.amplitudes, [0.6, 0.8j, 0, 0])
        with self.assertRaises(NormError):
            single_qubit_map(1.0, 1.0)

    def test_purcell_rate_is_even_and_falls_with_detuning(self):
        g, kappa = mhz(3.5), mhz(43.0)
        deltas = mhz(1.0) * np.linspace(0, 100, 101)
        rates = np.array([purcell_rate(g, kappa, d) for d in deltas])
        mirrored = np.array([purcell_rate(g, kappa, -d) for d in deltas])
        np.testing.assert_allclose(rates, mirrored, rtol=1e-14)
        self.assertTrue(np.all(np.diff(rates) < 0))
        self.assertAlmostEqual(rates[0], 4 * g * g / kappa, places=9)

    def test_both_excited_flux_starts_flat(self):
        gamma, h = 2.0, 1e-6
        both = decay_power(DecayCase.BOTH_EXCITED, gamma, [0.0, h])
        self.assertLess(abs(both[1] - both[0]) / h, 1e-3)
        single = decay_power(DecayCase.SINGLE_QUBIT, gamma, [0.0, h])
        self.assertAlmostEqual((single[1] - single[0]) / h, -gamma ** 2, delta=1e-3)


class TestDetectionChain(unittest.TestCase):
    """Test record synthesis and the acquisition filter."""

    def setUp(self):
        self.cfg = DetectionConfig(rng_seed=5)
        self.vacuum = pure_dm([1.0, 0.0, 0.0])

    def test_filter_period_constraint(self):
        with self.assertRaises(ValidationError):
            DetectionConfig(if_freq=20.0)

    def test_filter_response(self):
        response = np.abs(filter_response(self.cfg, np.array([0.0, 25.0, 50.0])))
        self.assertAlmostEqual(response[0], 1.0)
        self.assertLess(response[1], 1e-12)
        self.assertLess(response[2], 1e-12)

    def test_husimi_of_vacuum(self):
        self.assertAlmostEqual(float(husimi_q(self.vacuum, 0.0)), 1 / math.pi)
        self.assertAlmostEqual(float(husimi_q(self.vacuum, 1.0)), math.exp(-1) / math.pi)

    def test_vacuum_quadrature_variance(self):
        rec = synthesize_single_mode_records(self.vacuum, 100000, self.cfg)
        self.assertEqual(rec.records.shape, (100000, 1))
        self.assertAlmostEqual(float(np.var(rec.records.real)), 0.5, delta=0.02)

    def test_amplifier_noise_adds_photons(self):
        cfg = DetectionConfig(n_noise=5.0, rng_seed=6)
        rec = synthesize_single_mode_records(self.vacuum, 100000, cfg)
        self.assertAlmostEqual(float(np.mean(np.abs(rec.records) ** 2)), 6.0, delta=0.1)

    def test_coherent_amplitude_of_output_field(self):
        rec = synthesize_single_mode_records(rho_plus(), 20000, self.cfg)
        mean = complex(np.mean(rec.records))
        self.assertAlmostEqual(mean.real, 0.85355, delta=0.03)
        self.assertAlmostEqual(mean.imag, 0.0, delta=0.03)

    def test_sampling_cutoff_limit(self):
        big = np.zeros((14, 14))
        big[0, 0] = 1.0
        with self.assertRaises(SamplingError):
            synthesize_single_mode_records(DensityMatrix(big, (14,)), 10, self.cfg)

    def test_records_independent_of_worker_count(self):
        cfg = DetectionConfig(rng_seed=9, chunk_shots=1000)
        with mock.patch.dict(os.environ, {THREADS_ENV: '1'}):
            serial = synthesize_single_mode_records(rho_plus(), 5000, cfg)
        with mock.patch.dict(os.environ, {THREADS_ENV: '4'}):
            threaded = synthesize_single_mode_records(rho_plus(), 5000, cfg)
        np.testing.assert_array_equal(serial.records, threaded.records)

    def test_signal_and_off_streams_differ(self):
        sig = synthesize_single_mode_records(self.vacuum, 2000, self.cfg, 'signal')
        off = synthesize_single_mode_records(self.vacuum, 2000, self.cfg, 'off')
        self.assertFalse(np.array_equal(sig.records, off.records))

    def _constant_trace(self, amplitude, n_bins=100):
        t = np.arange(n_bins) * self.cfg.sample_dt
        kappa = 1.0 / self.cfg.sample_dt
        a = np.full(n_bins, amplitude, dtype=complex)
        return TimeTrace(t, {'flux': kappa * np.abs(a) ** 2, 'a': a}), kappa

    def test_zero_field_records_have_zero_mean(self):
        trace, kappa = self._constant_trace(0.0)
        rec = synthesize_time_records(trace, 2000, self.cfg, kappa)
        self.assertLess(abs(complex(np.mean(rec.records))), 0.02)

    def test_coherent_time_records(self):
        trace, kappa = self._constant_trace(1.0)
        sig = synthesize_time_records(trace, 5000, self.cfg, kappa, 'signal')
        off = synthesize_time_records(trace, 5000, self.cfg, kappa, 'off')
        settled = slice(self.cfg.filter_len - 1, None)
        self.assertAlmostEqual(float(np.mean(np.abs(sig.records[:, settled]) ** 2)), 1.5, delta=0.03)
        self.assertAlmostEqual(float(np.mean(np.abs(off.records[:, settled]) ** 2)), 0.5, delta=0.02)
        power = power_trace(sig, off)
        self.assertAlmostEqual(float(np.mean(power['flux'][settled])), 100.0, delta=2.0)
        self.assertIn('flux_sem', power.labels)

    def test_decaying_incoherent_flux_is_recovered_without_bias(self):
        n_bins = 150
        t = np.arange(n_bins) * self.cfg.sample_dt
        flux = 40.0 * np.exp(-t / 0.3)
        trace = TimeTrace(t, {'flux': flux, 'a': np.zeros(n_bins, dtype=complex)})
        sig = synthesize_time_records(trace, 40000, self.cfg, 1.0, 'signal')
        off = synthesize_time_records(trace, 40000, self.cfg, 1.0, 'off')
        power = power_trace(sig, off)
        taps = self.cfg.filter_len
        smoothed = np.convolve(flux, np.ones(taps) / taps)[:n_bins]
        settled = slice(taps - 1, None)
        z = (power['flux'][settled] - smoothed[settled]) / power['flux_sem'][settled]
        self.assertLess(float(np.max(np.abs(z))), 5.0)
        self.assertLess(abs(float(np.mean(z))), 1.0)
        self.assertAlmostEqual(trapezoid(power['flux'][settled], t[settled]),
                               trapezoid(smoothed[settled], t[settled]), delta=0.5)

    def test_time_records_need_matching_grid(self):
        t = np.arange(10) * 0.02
        trace = TimeTrace(t, {'flux': np.zeros(10), 'a': np.zeros(10, dtype=complex)})
        with self.assertRaises(DimensionError):
            synthesize_time_records(trace, 10, self.cfg, 1.0)

    def test_power_trace_needs_matching_chain(self):
        trace, kappa = self._constant_trace(0.0, n_bins=20)
        sig = synthesize_time_records(trace, 10, self.cfg, kappa)
        off = synthesize_time_records(trace, 10, DetectionConfig(n_noise=1.0), kappa, 'off')
        with self.assertRaises(ValidationError):
            power_trace(sig, off)


class TestRecordExport(unittest.TestCase):
    """Test record export formats."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.records = QuadratureRecordSet(np.array([[1 + 2j, 3 - 1j], [0.5j, -2.0]]), DetectionConfig(), 'off')

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_csv_export(self):
        path = export_records_csv(self.records, Path(self.temp_dir) / 'records.csv')
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'shot,bin,re_s,im_s')
        self.assertEqual(len(lines), 5)
        self.assertEqual(lines[2], '0,1,3,-1')

    def test_binary_export(self):
        path = export_records_binary(self.records, Path(self.temp_dir) / 'records.npz')
        loaded = load_records_binary(path)
        np.testing.assert_array_equal(loaded.records, self.records.records)
        self.assertEqual(loaded.kind, 'off')
        self.assertEqual(loaded.config, self.records.config)


class TestTomography(unittest.TestCase):
    """Test moment estimation, noise deconvolution and reconstruction."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_moment_table_invariants(self):
        moments = exact_moments(rho_plus())
        self.assertEqual(moments[(0, 0)], 1.0)
        self.assertAlmostEqual(moments[(1, 1)].real, 1.0)
        bad = dict(moments.moments)
        bad[(0, 0)] = 2.0
        with self.assertRaises(ValidationError):
            MomentTable(3, bad)
        bad = dict(moments.moments)
        bad[(0, 1)] = 5.0
        with self.assertRaises(ValidationError):
            MomentTable(3, bad)

    def test_raw_moments_of_vacuum_records(self):
        rec = synthesize_single_mode_records(pure_dm([1.0, 0.0]), 50000, DetectionConfig(rng_seed=2))
        table = estimate_raw_moments(rec, max_order=2)
        self.assertEqual(table[(0, 0)], 1.0)
        self.assertLess(abs(table[(1, 1)].real - 1.0), 5 * table.std_errors[(1, 1)])
        self.assertAlmostEqual(table[(1, 0)], table[(0, 1)].conjugate())

    def test_raw_moments_need_enough_shots(self):
        rec = synthesize_single_mode_records(pure_dm([1.0, 0.0]), 500, DetectionConfig())
        with self.assertRaises(ValidationError):
            estimate_raw_moments(rec)

    def test_deconvolution_of_pure_noise(self):
        noise = noise_table(2.0)
        field = deconvolve_noise(noise, noise)
        for pair, value in field.moments.items():
            self.assertAlmostEqual(abs(value), 1.0 if pair == (0, 0) else 0.0, places=10)

    def test_reconvolution_round_trip(self):
        noise = noise_table(1.5)
        field = exact_moments(rho_plus())
        raw = reconvolve_noise(field, noise)
        self.assertAlmostEqual(raw[(0, 1)], field[(0, 1)])
        self.assertAlmostEqual(raw[(1, 1)].real, field[(1, 1)].real + 2.5)
        back = deconvolve_noise(raw, noise)
        for pair in field.moments:
            self.assertLess(abs(back[pair] - field[pair]), 1e-10)
        again = reconvolve_noise(back, noise)
        for pair in raw.moments:
            self.assertLess(abs(again[pair] - raw[pair]), 1e-10)

    def test_vacuum_reconstruction(self):
        result = reconstruct(exact_moments(pure_dm([1.0, 0.0, 0.0, 0.0])), n_max=3)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(result.rho.elements, expected, atol=1e-8)
        self.assertTrue(result.converged)

    def test_output_field_reconstruction(self):
        result = reconstruct(exact_moments(rho_plus()), n_max=3)
        target = np.zeros((4, 4), dtype=complex)
        target[:3, :3] = rho_plus().elements
        self.assertGreaterEqual(fidelity(result.rho, DensityMatrix(target, (4,))), 1 - 1e-6)
        validate_density_matrix(result.rho)

    def test_reconstruction_is_phase_covariant(self):
        theta = math.pi / 2
        moments = exact_moments(rho_plus())
        base = reconstruct(moments, n_max=3).rho.elements
        rotated = reconstruct(rotate_moments(moments, theta), n_max=3).rho.elements
        n = np.arange(4)
        expected = base * np.exp(-1j * theta * (n[:, None] - n[None, :]))
        np.testing.assert_allclose(rotated, expected, atol=1e-5)

    def test_reconstruction_is_positive_for_perturbed_moments(self):
        rng = np.random.default_rng(4)
        moments = exact_moments(rho_minus())
        noisy = {}
        for (n, m), value in moments.moments.items():
            if n < m:
                noisy[(n, m)] = value + 0.05 * complex(rng.standard_normal(), rng.standard_normal())
                noisy[(m, n)] = noisy[(n, m)].conjugate()
            elif n == m and n > 0:
                noisy[(n, m)] = value + 0.05 * rng.standard_normal()
        noisy[(0, 0)] = 1.0
        table = MomentTable(3, noisy, {p: 0.05 for p in noisy})
        rho = reconstruct(table, n_max=3).rho
        self.assertGreaterEqual(rho.min_eigenvalue(), -1e-12)
        self.assertAlmostEqual(rho.trace().real, 1.0, places=12)

    def test_cutoff_needs_enough_moments(self):
        with self.assertRaises(ValidationError):
            reconstruct(exact_moments(rho_plus(), max_order=2), n_max=3)

    def test_record_round_trip(self):
        cfg = DetectionConfig(n_noise=0.5, rng_seed=21)
        sig = synthesize_single_mode_records(rho_plus(), 100000, cfg, 'signal')
        off = synthesize_single_mode_records(pure_dm([1.0, 0.0, 0.0]), 100000, cfg, 'off')
        field = deconvolve_noise(estimate_raw_moments(sig), estimate_raw_moments(off))
        self.assertLess(abs(field[(1, 1)].real - 1.0), 5 * field.std_errors[(1, 1)] + 0.02)
        result = reconstruct(field, n_max=3)
        target = np.zeros((4, 4), dtype=complex)
        target[:3, :3] = rho_plus().elements
        self.assertGreaterEqual(fidelity(result.rho, DensityMatrix(target, (4,))), 0.9)

    def test_record_round_trip_of_both_output_fields(self):
        cfg = DetectionConfig(rng_seed=31)
        off = synthesize_single_mode_records(pure_dm([1.0, 0.0, 0.0]), 200000, cfg, 'off')
        noise = estimate_raw_moments(off, max_order=2)
        for name, target in (('minus', rho_minus()), ('plus', rho_plus())):
            sig = synthesize_single_mode_records(target, 200000, cfg, 'signal')
            field = deconvolve_noise(estimate_raw_moments(sig, max_order=2), noise)
            self.assertLess(field.std_errors[(2, 2)], 0.1, name)
            self.assertLess(abs(field[(2, 2)].real - exact_moments(target, max_order=2)[(2, 2)].real),
                            5 * field.std_errors[(2, 2)], name)
            result = reconstruct(field, n_max=2)
            self.assertGreaterEqual(fidelity(result.rho, target), 0.95, name)

    def test_line_search_failure_is_restarted_then_flagged(self):
        def stalled(fun, x0, **kwargs):
            return OptimizeResult(x=np.asarray(x0), nit=3, status=2, success=False,
                                  message='ABNORMAL_TERMINATION_IN_LNSRCH')

        with mock.patch('dicke_sim.tomography.minimize', side_effect=stalled) as fake:
            with self.assertLogs('dicke_sim.tomography', level='WARNING'):
                result = reconstruct(exact_moments(rho_plus()), n_max=3)
        self.assertEqual(fake.call_count, 2)
        self.assertFalse(result.converged)
        self.assertEqual(result.iterations, 6)
        self.assertIn('ABNORMAL', result.termination)

    def test_exact_moments_fit_converges(self):
        result = reconstruct(exact_moments(rho_minus()), n_max=3)
        self.assertTrue(result.converged)
        self.assertTrue(result.termination)

    def test_json_export(self):
        result = reconstruct(exact_moments(pure_dm([1.0, 0.0, 0.0, 0.0])), n_max=3)
        path = export_json(result, Path(self.temp_dir) / 'rho.json')
        data = json.loads(path.read_text())
        self.assertEqual(data['n_max'], 3)
        self.assertEqual(data['rho'][0][0], [1.0, 0.0])


class TestRunner(unittest.TestCase):
    """Test configs, runs, sweeps and the scale fit."""

    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        self.spectrum = {'kind': 'spectrum', 'detuning_mhz': 0.0,
                         'spectrum': {'qubit': 'A', 'n_points': 2001}}

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_fit_scale(self):
        t = np.linspace(0, 1, 50)
        model = TimeTrace(t, {'flux': np.exp(-t)})
        self.assertAlmostEqual(fit_scale(model, model), 1.0)
        for s in (0.9, 1.07):
            self.assertAlmostEqual(fit_scale(TimeTrace(t, {'flux': s * np.exp(-t)}), model), s)
        with self.assertRaises(ValidationError):
            fit_scale(model, TimeTrace(t, {'flux': np.zeros(50)}))

    def test_normalization_constant(self):
        t = np.linspace(0, 20, 2001)
        measured = TimeTrace(t, {'flux': 2 * np.exp(-t)})
        expected = trapezoid(np.exp(-t), t)
        self.assertAlmostEqual(normalization_constant(measured, expected), 2.0, places=9)

    def test_overrides(self):
        data = apply_overrides({'kind': 'decay'}, ['params.kappa_mhz=40', 'name=hello', 'reports.png=true'])
        self.assertEqual(data['params']['kappa_mhz'], 40)
        self.assertEqual(data['name'], 'hello')
        self.assertIs(data['reports']['png'], True)
        with self.assertRaises(ValidationError):
            apply_overrides({}, ['novalue'])

    def test_config_errors_carry_pointers(self):
        with self.assertRaises(ValidationError) as ctx:
            ExperimentConfig.from_dict({'kind': 'decay', 'bogus': 1, 'schema_version': 2,
                                        'params': {'kappa_mhz': -1}})
        pointers = {p for p, _ in ctx.exception.errors}
        self.assertTrue({'/initial_state', '/duration_us', '/bogus', '/schema_version',
                         '/params/kappa_mhz'} <= pointers)

    def test_resolved_config_materializes_defaults(self):
        cfg = ExperimentConfig.from_dict({'kind': 'tomo', 'initial_state': 'plus_minus'})
        data = cfg.to_dict()
        self.assertEqual(data['detection']['n_shots'], 100000)
        self.assertEqual(data['tomo'], {'n_max': 3, 'max_order': 3})
        self.assertEqual(data['params']['n_max'], 5)
        again = ExperimentConfig.from_dict(data).to_dict()
        for key in data:
            if key != 'params':
                self.assertEqual(again[key], data[key], key)

    def test_spectrum_run(self):
        result = run(self.spectrum, self.temp_dir)
        self.assertAlmostEqual(result.summary['dip_depth'], 0.1916, places=3)
        width = result.summary['dip_width_mhz']
        self.assertLess(abs(result.summary['extracted_fwhm_mhz'] - width) / width, 0.05)
        header = (self.temp_dir / 'spectrum.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'probe_detuning_mhz,transmittance,phase_rad')
        manifest = json.loads(result.manifest.read_text())
        self.assertEqual(manifest['kind'], 'spectrum')
        names = {a['path'] for a in manifest['artifacts']}
        self.assertEqual(names, {'spectrum.csv', 'summary.json'})

    def test_decay_run_with_detection_and_measured_trace(self):
        config = {'kind': 'decay', 'param_set': 'ideal', 'initial_state': 'ge', 'duration_us': 1.0,
                  'params': {'n_max': 2}, 'detection': {'n_shots': 2000}}
        result = run(config, self.temp_dir / 'first')
        self.assertAlmostEqual(result.summary['emitted_photons'], 0.5, delta=0.01)
        lines = (self.temp_dir / 'first' / 'decay.csv').read_text().splitlines()
        self.assertEqual(lines[0], 't_us,p_me,p_analytic,delta_p,p_mean_single,p_detected,p_detected_sem')

        rows = [line.split(',') for line in lines[1:]]
        measured = self.temp_dir / 'measured.csv'
        measured.write_text('t_us,p\n' + ''.join(f'{r[0]},{0.9 * float(r[1]):.17g}\n' for r in rows))
        config.update(measured=str(measured), detection={'n_shots': 0})
        second = run(config, self.temp_dir / 'second')
        self.assertAlmostEqual(second.summary['fitted_scale_s'], 0.9, places=6)
        header = (self.temp_dir / 'second' / 'decay.csv').read_text().splitlines()[0]
        self.assertIn('p_measured', header)
        self.assertIn('p_me_scaled', header)

    def test_tomo_runs_are_byte_identical(self):
        config = {'kind': 'tomo', 'initial_state': 'plus_plus',
                  'detection': {'n_shots': 5000, 'n_noise': 0.5, 'rng_seed': 3}}
        first = run(config, self.temp_dir / 'a')
        run(config, self.temp_dir / 'b')
        for name in ('rho.json', 'moments.json', 'summary.json', 'manifest.json'):
            self.assertEqual((self.temp_dir / 'a' / name).read_bytes(),
                             (self.temp_dir / 'b' / name).read_bytes(), name)
        self.assertGreater(first.summary['fidelity'], 0.5)

    def test_truncated_decay_window_is_flagged(self):
        config = {'kind': 'decay', 'initial_state': 'ge', 'duration_us': 0.9, 'params': {'n_max': 2}}
        with self.assertLogs('dicke_sim.dynamics', level='WARNING'):
            result = run(config, self.temp_dir)
        self.assertFalse(result.summary['emission_converged'])
        self.assertGreater(result.summary['flux_tail_fraction'], 0.01)

    def test_trapped_excitation_preset_converges(self):
        config = json.loads((PRESETS_DIR / 'decay_ge.json').read_text())
        result = run(config, self.temp_dir)
        self.assertTrue(result.summary['emission_converged'])
        self.assertAlmostEqual(result.summary['emitted_photons'], 0.869, delta=0.005)

    def test_detected_both_excited_run_counts_two_photons(self):
        config = {'kind': 'decay', 'param_set': 'ideal', 'initial_state': 'ee', 'duration_us': 1.5,
                  'params': {'n_max': 2}, 'detection': {'n_shots': 40000, 'rng_seed': 12}}
        result = run(config, self.temp_dir)
        self.assertAlmostEqual(result.summary['emitted_photons_detected'],
                               result.summary['emitted_photons'], delta=0.3)
        self.assertAlmostEqual(result.summary['emitted_photons'], 2.0, delta=0.05)

    def test_detected_decay_runs_are_byte_identical(self):
        config = {'kind': 'decay', 'param_set': 'ideal', 'initial_state': 'plus_plus', 'duration_us': 0.5,
                  'params': {'n_max': 2}, 'detection': {'n_shots': 2000, 'rng_seed': 7}}
        run(config, self.temp_dir / 'a')
        run(config, self.temp_dir / 'b')
        for name in ('decay.csv', 'summary.json', 'manifest.json'):
            self.assertEqual((self.temp_dir / 'a' / name).read_bytes(),
                             (self.temp_dir / 'b' / name).read_bytes(), name)

    def test_sweep(self):
        config = ExperimentConfig.from_dict({**self.spectrum,
                                             'sweep': {'field': 'spectrum.qubit', 'values': ['A', 'B', 'C']}})
        index = run_sweep(config, self.temp_dir)
        statuses = [entry['status'] for entry in index['runs']]
        self.assertEqual(statuses, ['completed', 'completed', 'failed'])
        self.assertEqual(index['runs'][2]['exit_code'], 2)
        self.assertTrue((self.temp_dir / 'index.json').exists())
        self.assertTrue((self.temp_dir / 'run_001' / 'spectrum.csv').exists())

    def test_threaded_sweep_writes_every_plot(self):
        config = ExperimentConfig.from_dict({**self.spectrum, 'spectrum': {'qubit': 'A', 'n_points': 401},
                                             'reports': {'png': True},
                                             'sweep': {'field': 'spectrum.qubit', 'values': ['A', 'B', 'A', 'B']}})
        with mock.patch.dict(os.environ, {THREADS_ENV: '2'}):
            index = run_sweep(config, self.temp_dir)
        self.assertEqual([entry['status'] for entry in index['runs']], ['completed'] * 4)
        for i in range(4):
            png = (self.temp_dir / f'run_{i:03d}' / 'spectrum.png').read_bytes()
            self.assertTrue(png.startswith(b'\x89PNG'), i)

    def test_plot_does_not_need_pyplot(self):
        with mock.patch.dict(sys.modules, {'matplotlib.pyplot': None}):
            png = plot_columns([0.0, 1.0, 2.0], {'flux': [1.0, 0.5, 0.25]}, title='decay', x_label='t (us)')
        self.assertTrue(png.startswith(b'\x89PNG'))

    def test_worker_count_fallback(self):
        with mock.patch.dict(os.environ, {THREADS_ENV: 'many'}):
            with self.assertLogs('dicke_sim.parallel', level='WARNING'):
                self.assertGreaterEqual(worker_count(), 1)
        with mock.patch.dict(os.environ, {THREADS_ENV: '3'}):
            self.assertEqual(worker_count(), 3)


class TestCommandLine(unittest.TestCase):
    """Test exit codes of the dicke-sim entry point."""

    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        self.config = self.temp_dir / 'spectrum.json'
        self.config.write_text(json.dumps({'schema_version': 1, 'kind': 'spectrum', 'detuning_mhz': 0.0}))

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_success(self):
        code = main(['spectrum', '--config', str(self.config), '--out', str(self.temp_dir / 'out'),
                     '--set', 'spectrum.n_points=501', '--seed', '4'])
        self.assertEqual(code, 0)
        manifest = json.loads((self.temp_dir / 'out' / 'manifest.json').read_text())
        self.assertEqual(manifest['seed'], 4)
        self.assertEqual(manifest['resolved_config']['spectrum']['n_points'], 501)

    def test_validation_error(self):
        code = main(['spectrum', '--config', str(self.config), '--out', str(self.temp_dir / 'out'),
                     '--set', 'params.kappa_mhz=-3'])
        self.assertEqual(code, 2)

    def test_kind_mismatch(self):
        code = main(['decay', '--config', str(self.config), '--out', str(self.temp_dir / 'out')])
        self.assertEqual(code, 2)

    def test_missing_config(self):
        code = main(['spectrum', '--config', str(self.temp_dir / 'none.json'), '--out', str(self.temp_dir)])
        self.assertEqual(code, 2)

    def test_convergence_error(self):
        with mock.patch('dicke_sim.cli.run', side_effect=ConvergenceError('stalled', time_stamp=0.5)):
            code = main(['spectrum', '--config', str(self.config), '--out', str(self.temp_dir / 'out')])
        self.assertEqual(code, 3)


if __name__ == '__main__':
    # Create test suite
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    # Add test cases
    test_classes = [
        TestQuantumCore,
        TestCavityModel,
        TestMasterEquation,
        TestSuperradiantDecay,
        TestAnalyticOracles,
        TestDetectionChain,
        TestRecordExport,
        TestTomography,
        TestRunner,
        TestCommandLine,
    ]

    for test_class in test_classes:
        tests = loader.loadTestsFromTestCase(test_class)
        suite.addTests(tests)

    # Run tests
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    # Print summary
    print(f"\n{'='*60}")
    print(f"Tests run: {result.testsRun}")
    print(f"Failures: {len(result.failures)}")
    print(f"Errors: {len(result.errors)}")
    print(f"Success rate: {((result.testsRun - len(result.failures) - len(result.errors)) / result.testsRun * 100):.1f}%")
    print(f"{'='*60}")
