#!/usr/bin/env python3
"""
Example usage of the dicke_sim library.

This script demonstrates the main features of dicke_sim:
- Transmission spectra and the closed-form dip metrics
- Master-equation decay of two qubits into a bad cavity
- Superradiant versus single-qubit decay laws
- Synthetic heterodyne detection with noise subtraction
- Moment-based tomography of the emitted field
- Config-driven runs with CSV/JSON artifacts
"""

import os

import numpy as np
from scipy.integrate import trapezoid

from dicke_sim import ValidationError, measured_params, ideal_params, run
from dicke_sim.cqed import coupled_basis_decompose, decay_schedule, mhz, named_two_qubit_state, prepare_state, system_operators, to_mhz
from dicke_sim.detection import DetectionConfig, power_trace, synthesize_single_mode_records, synthesize_time_records
from dicke_sim.dynamics import IntegratorConfig, emitted_photons, evolve
from dicke_sim.oracles import (
    DecayCase, decay_power, dip_depth, dip_width, extract_dip_metrics, fidelity, mean_purcell_rate,
    output_field_state, qubit_purcell_rate, transmission,
)
from dicke_sim.quantum import DensityMatrix, ket_to_dm
from dicke_sim.tomography import deconvolve_noise, estimate_raw_moments, reconstruct


def example_1_spectrum():
    """Example 1: Transmission dip of qubit A on resonance."""
    print("=== Example 1: Transmission Spectrum ===")

    params = measured_params(detuning_mhz=0.0)
    probe = mhz(1.0) * np.linspace(-10, 10, 2001)
    metrics = extract_dip_metrics(probe, transmission(probe, params, 'A'))

    print(f"Closed-form depth: {dip_depth(params, 'A'):.4f}")
    print(f"Closed-form width: {to_mhz(dip_width(params, 'A')):.4f} MHz")
    print(f"Extracted depth:   {metrics.depth:.4f}")
    print(f"Extracted FWHM:    {to_mhz(metrics.fwhm):.4f} MHz")


def example_2_decay():
    """Example 2: Decay of |ee> compared with the superradiant law."""
    print("\n=== Example 2: Master-Equation Decay ===")

    params = ideal_params(detuning_mhz=25.0, n_max=2)
    schedule = decay_schedule(params, 'ee', 2.0)
    psi = prepare_state(schedule.prep, int(params.n_max))
    trace, _ = evolve(ket_to_dm(psi), schedule, params, IntegratorConfig(sample_dt=0.002))

    gamma = mean_purcell_rate(params)
    analytic = decay_power(DecayCase.BOTH_EXCITED, gamma, trace.t)
    print(f"Purcell rate: {to_mhz(gamma):.4f} MHz")
    print(f"Emitted photons (master equation): {emitted_photons(trace):.4f}")
    print(f"Peak flux: {trace['flux'].max():.3f} /us (analytic {analytic.max():.3f} /us)")

    measured = measured_params(25.0)
    for qubit in ('A', 'B'):
        print(f"  Gamma_kappa,{qubit} = {to_mhz(qubit_purcell_rate(measured, qubit)):.4f} MHz")


def example_3_detection():
    """Example 3: Detected power of a decay trace."""
    print("\n=== Example 3: Heterodyne Detection ===")

    params = ideal_params(detuning_mhz=25.0, n_max=2)
    schedule = decay_schedule(params, 'plus_plus', 1.0)
    psi = prepare_state(schedule.prep, int(params.n_max))
    observables = {'a': system_operators(int(params.n_max))['a']}
    trace, _ = evolve(ket_to_dm(psi), schedule, params, IntegratorConfig(sample_dt=0.01), observables)

    cfg = DetectionConfig(n_noise=1.0, rng_seed=7)
    sig = synthesize_time_records(trace, 20000, cfg, params.kappa, 'signal')
    off = synthesize_time_records(trace, 20000, cfg, params.kappa, 'off')
    detected = power_trace(sig, off)
    print(f"Emitted photons, simulated: {emitted_photons(trace):.4f}")
    print(f"Emitted photons, detected:  {trapezoid(detected['flux'], detected.t):.4f}")


def example_4_tomography():
    """Example 4: Reconstruct the field emitted by |+>|+>."""
    print("\n=== Example 4: Field Tomography ===")

    target = output_field_state(*coupled_basis_decompose(named_two_qubit_state('plus_plus')), n_max=3)
    vacuum = np.zeros((4, 4))
    vacuum[0, 0] = 1.0

    cfg = DetectionConfig(n_noise=0.5, rng_seed=11)
    sig = synthesize_single_mode_records(target, 100000, cfg, 'signal')
    off = synthesize_single_mode_records(DensityMatrix(vacuum, (4,)), 100000, cfg, 'off')
    moments = deconvolve_noise(estimate_raw_moments(sig), estimate_raw_moments(off))
    result = reconstruct(moments, n_max=3)

    print(f"<a>      = {moments[(0, 1)]:.4f}")
    print(f"<a^+ a>  = {moments[(1, 1)].real:.4f}")
    print(f"Fidelity = {fidelity(result.rho, target):.4f}")
    print(f"Purity   = {result.rho.purity():.4f}")


def example_5_config_run():
    """Example 5: Config-driven run with artifacts."""
    print("\n=== Example 5: Config Run ===")

    config = {
        'kind': 'decay',
        'param_set': 'ideal',
        'initial_state': 'ge',
        'duration_us': 1.5,
        'params': {'n_max': 2},
    }
    result = run(config, 'output/decay_ge')
    print(f"Emitted photons: {result.summary['emitted_photons']:.4f}")
    print(f"Flux tail / peak: {result.summary['flux_tail_fraction']:.2e} "
          f"(converged: {result.summary['emission_converged']})")
    print(f"Artifacts: {[p.name for p in result.artifacts]}")
    print(f"Manifest: {result.manifest}")

    print("\nValidating an incomplete config:")
    try:
        run({'kind': 'decay'}, 'output/invalid')
    except ValidationError as e:
        for pointer, message in e.errors:
            print(f"  {pointer}: {message}")


def main():
    """Run all examples."""
    print("dicke_sim Examples")
    print("=" * 50)

    # Create output directory
    os.makedirs("output", exist_ok=True)

    # Run examples
    example_1_spectrum()
    example_2_decay()
    example_3_detection()
    example_4_tomography()
    example_5_config_run()

    print("\n" + "=" * 50)
    print("All examples completed!")
    print("Check the 'output' directory for generated artifacts.")


if __name__ == "__main__":
    main()
