"""
dicke_sim - simulation lab for two-qubit superradiance in a bad cavity.

This library provides:
- Dense operators, kets and density matrices on truncated product spaces
- Lindblad master-equation integration with piecewise-constant Hamiltonians
- The two-qubit Tavis-Cummings model, state preparation and coupled basis
- Closed-form decay laws, transmission spectra and output-field states
- A synthetic heterodyne detection chain with noise subtraction
- Moment-based tomography of the emitted single-mode field
- Config-driven experiment runs with CSV/JSON artifacts and sweeps
"""

__version__ = "1.0.0"
__author__ = "dicke_sim developers"

from .exceptions import (
    DickeSimError,
    ValidationError,
    DimensionError,
    NormError,
    NonHermitianError,
    ConvergenceError,
    SamplingError,
    ExportError,
)
from .quantum import DensityMatrix, Ket, Operator
from .cqed import SystemParams, PulseSchedule, ideal_params, measured_params
from .dynamics import IntegratorConfig, TimeTrace, evolve, emitted_photons
from .detection import DetectionConfig, QuadratureRecordSet
from .tomography import MomentTable, ReconstructionResult, reconstruct
from .runner import ExperimentConfig, fit_scale, run, run_sweep

__all__ = [
    'DickeSimError',
    'ValidationError',
    'DimensionError',
    'NormError',
    'NonHermitianError',
    'ConvergenceError',
    'SamplingError',
    'ExportError',
    'Operator',
    'Ket',
    'DensityMatrix',
    'SystemParams',
    'PulseSchedule',
    'measured_params',
    'ideal_params',
    'IntegratorConfig',
    'TimeTrace',
    'evolve',
    'emitted_photons',
    'DetectionConfig',
    'QuadratureRecordSet',
    'MomentTable',
    'ReconstructionResult',
    'reconstruct',
    'ExperimentConfig',
    'fit_scale',
    'run',
    'run_sweep',
]
