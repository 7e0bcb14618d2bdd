"""
Closed-form reference results: Purcell rate, transmission spectrum, the
superradiant decay laws, output-field density matrices and fidelity.

Rates are in rad/us, times in us, powers in photons/us (P0 = Gamma_kappa).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Sequence, Tuple, Union
import logging
import math

import numpy as np
from scipy.linalg import eigh, eigvals

from .cqed import SystemParams, coupled_basis_decompose, qubit_index
from .exceptions import DimensionError, NormError, ValidationError
from .quantum import KET_NORM_TOL, MIN_EIGENVALUE, DensityMatrix, Ket


logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


class DecayCase(Enum):
    """Initial conditions with a closed-form decay law."""
    SINGLE_QUBIT = 'SingleQubit'
    BOTH_EXCITED = 'BothExcited'
    IN_PHASE_SUPERPOSITION = 'InPhaseSuperposition'
    ONE_EXCITED = 'OneExcited'


# Mean excitation minus trapped excitation, in photons
DECAY_INTEGRALS = {
    DecayCase.SINGLE_QUBIT: 1.0,
    DecayCase.BOTH_EXCITED: 2.0,
    DecayCase.IN_PHASE_SUPERPOSITION: 1.0,
    DecayCase.ONE_EXCITED: 0.5,
}

STATE_DECAY_CASES = {
    'single_A': DecayCase.SINGLE_QUBIT,
    'single_B': DecayCase.SINGLE_QUBIT,
    'ee': DecayCase.BOTH_EXCITED,
    'plus_plus': DecayCase.IN_PHASE_SUPERPOSITION,
    'ge': DecayCase.ONE_EXCITED,
    'eg': DecayCase.ONE_EXCITED,
}


def purcell_rate(g: float, kappa: float, delta: float) -> float:
    """Gamma_kappa = kappa g^2 / ((kappa/2)^2 + Delta^2)."""
    if not kappa > 0:
        raise ValidationError("purcell_rate needs kappa > 0", [('/params/kappa_mhz', 'must be > 0')])
    return kappa * g * g / ((kappa / 2) ** 2 + delta * delta)


def qubit_purcell_rate(p: SystemParams, qubit: str) -> float:
    return purcell_rate(p.coupling(qubit), p.kappa, p.detuning(qubit))


def mean_purcell_rate(p: SystemParams) -> float:
    """Arithmetic mean of the two single-qubit Purcell rates at the parameter detunings."""
    return 0.5 * (qubit_purcell_rate(p, 'A') + qubit_purcell_rate(p, 'B'))


def _selected_qubits(qubit: str) -> Tuple[str, ...]:
    sel = str(qubit).upper()
    if sel == 'AB':
        return ('A', 'B')
    qubit_index(sel)
    return (sel,)


def transmission(detuning: ArrayLike, p: SystemParams, qubit: str = 'A') -> np.ndarray:
    """
    Weak-probe transmission amplitude.

    t = (kappa/2) / (-i d + kappa/2 + sum_q g_q^2 / (-i (d - Delta_q) + Gamma2_q))

    Args:
        detuning: Probe minus cavity frequency, rad/us (scalar or array)
        p: System parameters
        qubit: 'A', 'B' or 'AB' (both qubits' susceptibilities)

    Returns:
        Complex amplitude(s) with the shape of `detuning`
    """
    d = np.asarray(detuning, dtype=float)
    half = p.kappa / 2
    qubits = _selected_qubits(qubit)
    # Multiplied through by every qubit denominator so that Gamma2 = 0 on resonance stays finite
    dens = [p.gamma2(q) - 1j * (d - p.detuning(q)) for q in qubits]
    prod_all = np.prod(dens, axis=0)
    coupling_sum = np.zeros_like(prod_all)
    for i, q in enumerate(qubits):
        others = np.prod([dens[j] for j in range(len(qubits)) if j != i], axis=0) if len(qubits) > 1 else 1.0
        coupling_sum = coupling_sum + p.coupling(q) ** 2 * others
    return half * prod_all / ((half - 1j * d) * prod_all + coupling_sum)


def dip_depth(p: SystemParams, qubit: str = 'A') -> float:
    """Closed-form minimum transmission d = Gamma2 / (Gamma_kappa + Gamma2), Gamma_kappa = 4g^2/kappa."""
    g2 = p.gamma2(qubit)
    gk = 4 * p.coupling(qubit) ** 2 / p.kappa
    return g2 / (gk + g2)


def dip_width(p: SystemParams, qubit: str = 'A') -> float:
    """Closed-form dip width w = 2 Gamma2 + 4 g^2 / (kappa - 2 Gamma2), rad/us."""
    g2 = p.gamma2(qubit)
    return 2 * g2 + 4 * p.coupling(qubit) ** 2 / (p.kappa - 2 * g2)


@dataclass
class DipMetrics:
    """Numerically extracted transmission dip."""
    depth: float
    fwhm: float
    center: float


def extract_dip_metrics(detuning: np.ndarray, t: np.ndarray, baseline: float = 1.0) -> DipMetrics:
    """
    Depth (minimum |t|) and full width at half depth of the |t|^2 dip.

    The half-depth level sits midway between the minimum of |t|^2 and
    `baseline`, the empty-cavity transmittance on resonance.
    """
    d = np.asarray(detuning, dtype=float)
    power = np.abs(np.asarray(t)) ** 2
    if d.size < 3 or d.shape != power.shape:
        raise DimensionError("Dip extraction needs matching detuning and transmission arrays")
    i_min = int(np.argmin(power))
    level = 0.5 * (baseline + power[i_min])

    def crossing(indices):
        prev = i_min
        for i in indices:
            if power[i] >= level:
                frac = (level - power[prev]) / (power[i] - power[prev])
                return d[prev] + frac * (d[i] - d[prev])
            prev = i
        raise ValidationError("Scan range does not cover the dip half-depth points")

    left = crossing(range(i_min - 1, -1, -1))
    right = crossing(range(i_min + 1, d.size))
    return DipMetrics(depth=float(math.sqrt(power[i_min])), fwhm=float(right - left), center=float(d[i_min]))


@dataclass
class DoubletMode:
    """One-excitation eigenmode: frequency and amplitude decay rate (rad/us)."""
    frequency: float
    decay_rate: float


def vacuum_rabi_doublet(p: SystemParams, qubit: str = 'A') -> Tuple[DoubletMode, DoubletMode]:
    """Eigenmodes of the non-Hermitian one-excitation block, narrowest first."""
    g = p.coupling(qubit)
    block = np.array([[p.detuning(qubit) - 1j * p.gamma2(qubit), g],
                      [g, -1j * p.kappa / 2]])
    modes = [DoubletMode(float(ev.real), float(-ev.imag)) for ev in eigvals(block)]
    modes.sort(key=lambda m: m.decay_rate)
    return modes[0], modes[1]


def _check_rate_time(gamma: float, t: ArrayLike) -> np.ndarray:
    if not gamma > 0:
        raise ValidationError("Decay rate must be > 0", [('/gamma', 'must be > 0')])
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise ValidationError("Decay laws are defined for t >= 0", [('/t', 'must be >= 0')])
    return tt


def decay_power(case: DecayCase, gamma: float, t: ArrayLike) -> np.ndarray:
    """
    Closed-form emitted photon flux for a decay case.

    Args:
        case: Initial condition
        gamma: Single-qubit Purcell rate (mean rate for two-qubit cases)
        t: Time(s) in us

    Returns:
        Flux in photons/us
    """
    tt = _check_rate_time(gamma, t)
    x = gamma * tt
    if case is DecayCase.SINGLE_QUBIT:
        return gamma * np.exp(-x)
    if case is DecayCase.BOTH_EXCITED:
        return 2 * gamma * np.exp(-2 * x) * (1 + 2 * x)
    if case is DecayCase.IN_PHASE_SUPERPOSITION:
        return gamma * np.exp(-2 * x) * (1.5 + x)
    if case is DecayCase.ONE_EXCITED:
        return gamma * np.exp(-2 * x)
    raise ValidationError(f"Unknown decay case {case!r}")


def rate_equation_populations(p_ee: float, p_bright: float, p_dark: float,
                              gamma: float, t: ArrayLike) -> Dict[str, np.ndarray]:
    """
    Coupled rate equations of the Dicke ladder: ee -> B -> gg at 2 Gamma, D trapped.
    """
    tt = _check_rate_time(gamma, t)
    if min(p_ee, p_bright, p_dark) < 0 or p_ee + p_bright + p_dark > 1 + 1e-12:
        raise NormError("Initial populations must be non-negative and sum to at most 1")
    decay = np.exp(-2 * gamma * tt)
    ee = p_ee * decay
    bright = (p_bright + 2 * gamma * tt * p_ee) * decay
    dark = np.full_like(tt, p_dark)
    return {'ee': ee, 'B': bright, 'D': dark, 'gg': 1.0 - ee - bright - dark}


def rate_equation_power(p_ee: float, p_bright: float, p_dark: float,
                        gamma: float, t: ArrayLike) -> np.ndarray:
    pops = rate_equation_populations(p_ee, p_bright, p_dark, gamma, t)
    return 2 * gamma * (pops['ee'] + pops['B'])


def coupled_populations(psi: Ket) -> Tuple[float, float, float]:
    """(|gamma|^2, |beta|^2, |delta|^2) of a two-qubit ket."""
    _, delta, beta, gamma = coupled_basis_decompose(psi)
    return abs(gamma) ** 2, abs(beta) ** 2, abs(delta) ** 2


def mean_single_power(p: SystemParams, t: ArrayLike) -> np.ndarray:
    """Average of the two single-qubit decay laws, the reference for Delta P."""
    ga, gb = qubit_purcell_rate(p, 'A'), qubit_purcell_rate(p, 'B')
    return 0.5 * (decay_power(DecayCase.SINGLE_QUBIT, ga, t) + decay_power(DecayCase.SINGLE_QUBIT, gb, t))


def delta_power(power: np.ndarray, reference: np.ndarray) -> np.ndarray:
    return np.asarray(power) - np.asarray(reference)


def output_field_state(alpha: complex, delta: complex, beta: complex, gamma: complex,
                       n_max: int = 2) -> DensityMatrix:
    """
    Emitted single-mode field for a two-qubit state in the coupled basis.

    |delta|^2 |0><0| + (1 - |delta|^2) |Psi_B><Psi_B|, with
    Psi_B proportional to alpha|0> + beta|1> + gamma|2>.
    """
    if n_max < 2:
        raise DimensionError("Output field needs a Fock cutoff of at least 2")
    norm = abs(alpha) ** 2 + abs(delta) ** 2 + abs(beta) ** 2 + abs(gamma) ** 2
    if abs(norm - 1.0) > KET_NORM_TOL:
        raise NormError(f"Coupled-basis coefficients have norm {norm:.12g}")
    dim = n_max + 1
    rho = np.zeros((dim, dim), dtype=complex)
    dark = abs(delta) ** 2
    if dark >= 1.0:
        rho[0, 0] = 1.0
        return DensityMatrix(rho, (dim,))
    vec = np.zeros(dim, dtype=complex)
    vec[:3] = [alpha, beta, gamma]
    # (1 - |delta|^2) |Psi_B><Psi_B| is the outer product of the unnormalized vector
    rho += np.outer(vec, vec.conj())
    rho[0, 0] += dark
    return DensityMatrix(rho, (dim,))


def single_qubit_map(alpha: complex, beta: complex, n_max: int = 1) -> Ket:
    """alpha|g> + beta|e>  ->  alpha|0> + beta|1>."""
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > KET_NORM_TOL:
        raise NormError("Single-qubit amplitudes are not normalized")
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[0], amps[1] = alpha, beta
    return Ket(amps, (n_max + 1,))


def _psd_sqrt(rho: DensityMatrix) -> np.ndarray:
    herm = 0.5 * (rho.elements + rho.elements.conj().T)
    w, v = eigh(herm)
    if w[0] < MIN_EIGENVALUE:
        raise ValidationError(f"Fidelity input has negative eigenvalue {w[0]:.3e}")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2."""
    if rho.dim != sigma.dim:
        raise DimensionError(f"Fidelity of {rho.dim}- and {sigma.dim}-dimensional states")
    _psd_sqrt(rho)
    root = _psd_sqrt(sigma)
    inner = root @ rho.elements @ root
    w = eigh(0.5 * (inner + inner.conj().T), eigvals_only=True)
    value = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(max(value, 0.0), 1.0)
