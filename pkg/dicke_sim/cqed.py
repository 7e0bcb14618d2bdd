"""
Two-qubit Tavis-Cummings model: parameters, Hamiltonian, state preparation
and the coupled (bright/dark) basis.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from .exceptions import DimensionError, NormError, ValidationError
from .quantum import (
    KET_NORM_TOL, Ket, Operator, basis, destroy, embed, sigma_minus, sigma_z, tensor,
)


logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi

# Laboratory frequencies (GHz). The numerics run in the frame rotating at the
# resonator frequency, so these only enter through the spectator detunings.
RESONATOR_GHZ = 7.064
IDLE_FREQUENCY_GHZ = {'A': 8.20, 'B': 7.40}
IDLE_DETUNING_MHZ = {q: round((f - RESONATOR_GHZ) * 1000.0, 6) for q, f in IDLE_FREQUENCY_GHZ.items()}

QUBITS = ('A', 'B')

_PARAM_FIELDS = ('g_a', 'g_b', 'kappa', 'gamma_nr_a', 'gamma_nr_b',
                 'gamma_phi_a', 'gamma_phi_b', 'delta_a', 'delta_b')


def mhz(value: float) -> float:
    """Convert a /2pi MHz value to rad/us."""
    return TWO_PI * float(value)


def to_mhz(rate: float) -> float:
    """Convert rad/us to /2pi MHz."""
    return float(rate) / TWO_PI


def qubit_index(qubit: str) -> int:
    try:
        return QUBITS.index(str(qubit).upper())
    except ValueError:
        raise ValidationError(f"Unknown qubit {qubit!r}", [('/qubit', "must be 'A' or 'B'")])


@dataclass(frozen=True)
class SystemParams:
    """Physical rate set in rad/us; detunings are qubit minus cavity."""
    g_a: float
    g_b: float
    kappa: float
    gamma_nr_a: float = 0.0
    gamma_nr_b: float = 0.0
    gamma_phi_a: float = 0.0
    gamma_phi_b: float = 0.0
    delta_a: float = 0.0
    delta_b: float = 0.0
    n_max: int = 5

    def __post_init__(self):
        errors = []
        if not self.kappa > 0:
            errors.append(('/params/kappa_mhz', 'must be > 0'))
        for name in ('g_a', 'g_b'):
            if not getattr(self, name) > 0:
                errors.append((f'/params/{name}_mhz', 'must be > 0'))
        for name in ('gamma_nr_a', 'gamma_nr_b', 'gamma_phi_a', 'gamma_phi_b'):
            if not getattr(self, name) >= 0:
                errors.append((f'/params/{name}_mhz', 'must be >= 0'))
        for name in _PARAM_FIELDS:
            if not math.isfinite(getattr(self, name)):
                errors.append((f'/params/{name}_mhz', 'must be finite'))
        if int(self.n_max) != self.n_max or self.n_max < 2:
            errors.append(('/params/n_max', 'must be an integer >= 2'))
        if errors:
            raise ValidationError("Invalid system parameters", errors)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (2, 2, int(self.n_max) + 1)

    @property
    def dim(self) -> int:
        return 4 * (int(self.n_max) + 1)

    def coupling(self, qubit: str) -> float:
        return (self.g_a, self.g_b)[qubit_index(qubit)]

    def detuning(self, qubit: str) -> float:
        return (self.delta_a, self.delta_b)[qubit_index(qubit)]

    def gamma_nr(self, qubit: str) -> float:
        return (self.gamma_nr_a, self.gamma_nr_b)[qubit_index(qubit)]

    def gamma_phi(self, qubit: str) -> float:
        return (self.gamma_phi_a, self.gamma_phi_b)[qubit_index(qubit)]

    def gamma2(self, qubit: str) -> float:
        """Free coherence decay rate, Gamma_nr/2 + Gamma*."""
        return self.gamma_nr(qubit) / 2 + self.gamma_phi(qubit)

    def with_detunings(self, delta_a: float, delta_b: float) -> 'SystemParams':
        return replace(self, delta_a=delta_a, delta_b=delta_b)

    def to_dict(self) -> Dict[str, float]:
        """Values in /2pi MHz, keyed as in the JSON config."""
        data = {f'{name}_mhz': to_mhz(getattr(self, name)) for name in _PARAM_FIELDS}
        data['n_max'] = int(self.n_max)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, float], base: Optional['SystemParams'] = None) -> 'SystemParams':
        """Build from /2pi MHz keys; missing keys come from `base` (measured values by default)."""
        base = base or measured_params()
        known = {f'{name}_mhz' for name in _PARAM_FIELDS} | {'n_max'}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError("Unknown parameter keys",
                                  [(f'/params/{key}', 'unknown key') for key in unknown])
        values = {}
        for name in _PARAM_FIELDS:
            key = f'{name}_mhz'
            if key in data:
                try:
                    values[name] = mhz(float(data[key]))
                except (TypeError, ValueError):
                    raise ValidationError("Invalid system parameters", [(f'/params/{key}', 'must be a number')])
            else:
                values[name] = getattr(base, name)
        n_max = data.get('n_max', base.n_max)
        if isinstance(n_max, bool) or not isinstance(n_max, (int, float)):
            raise ValidationError("Invalid system parameters", [('/params/n_max', 'must be an integer >= 2')])
        return cls(n_max=n_max, **values)


def measured_params(detuning_mhz: float = 25.0) -> SystemParams:
    """Experimentally extracted parameter set, both qubits at `detuning_mhz` from the cavity."""
    return SystemParams(
        g_a=mhz(3.5), g_b=mhz(3.7), kappa=mhz(43.0),
        gamma_nr_a=mhz(0.040), gamma_nr_b=mhz(0.042),
        gamma_phi_a=mhz(0.25), gamma_phi_b=mhz(0.27),
        delta_a=mhz(detuning_mhz), delta_b=mhz(detuning_mhz),
        n_max=5,
    )


def ideal_params(detuning_mhz: float = 25.0, n_max: int = 5) -> SystemParams:
    """Identical couplings (the mean measured g), no non-radiative decay, no dephasing."""
    measured = measured_params(detuning_mhz)
    g = 0.5 * (measured.g_a + measured.g_b)
    return replace(measured, g_a=g, g_b=g, gamma_nr_a=0.0, gamma_nr_b=0.0,
                   gamma_phi_a=0.0, gamma_phi_b=0.0, n_max=n_max)


@dataclass(frozen=True)
class Rotation:
    """Ideal instantaneous rotation of one qubit out of |g>."""
    qubit: str
    theta: float
    phi: float = 0.0


@dataclass(frozen=True)
class Segment:
    """Constant-Hamiltonian interval; detunings in rad/us."""
    duration: float
    delta_a: float
    delta_b: float


@dataclass
class PulseSchedule:
    """Preparation at t=0- followed by piecewise-constant detuning segments."""
    prep: List[Rotation] = field(default_factory=list)
    segments: List[Segment] = field(default_factory=list)
    initial_state: Optional[Ket] = None

    def __post_init__(self):
        errors = []
        seen = set()
        for i, rot in enumerate(self.prep):
            if str(rot.qubit).upper() not in QUBITS:
                errors.append((f'/prep/{i}/qubit', "must be 'A' or 'B'"))
            elif rot.qubit.upper() in seen:
                errors.append((f'/prep/{i}/qubit', 'qubit rotated twice'))
            seen.add(str(rot.qubit).upper())
            if not 0.0 <= rot.theta <= math.pi:
                errors.append((f'/prep/{i}/theta', 'must lie in [0, pi]'))
            if not 0.0 <= rot.phi < TWO_PI:
                errors.append((f'/prep/{i}/phi', 'must lie in [0, 2pi)'))
        if not self.segments:
            errors.append(('/segments', 'at least one segment required'))
        for i, seg in enumerate(self.segments):
            if not seg.duration > 0:
                errors.append((f'/segments/{i}/duration_us', 'must be > 0'))
        if errors:
            raise ValidationError("Invalid pulse schedule", errors)

    @property
    def total_duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments))

    def boundaries(self) -> List[float]:
        return [0.0] + list(np.cumsum([seg.duration for seg in self.segments]))


def system_operators(n_max: int) -> Dict[str, Operator]:
    """Named operators embedded in qubit A (x) qubit B (x) cavity."""
    dims = (2, 2, n_max + 1)
    a = embed(destroy(n_max), 2, dims)
    ops = {
        'a': a,
        'sm_a': embed(sigma_minus(), 0, dims),
        'sm_b': embed(sigma_minus(), 1, dims),
        'sz_a': embed(sigma_z(), 0, dims),
        'sz_b': embed(sigma_z(), 1, dims),
    }
    ops['n'] = a.dag() @ a
    return ops


def build_hamiltonian(p: SystemParams, delta_a: Optional[float] = None,
                      delta_b: Optional[float] = None) -> Operator:
    """
    Tavis-Cummings Hamiltonian in the frame rotating at the cavity frequency.

    Args:
        p: System parameters
        delta_a: Override for the qubit A detuning (rad/us)
        delta_b: Override for the qubit B detuning (rad/us)

    Returns:
        H = sum_i Delta_i sp_i sm_i + g_i (a sp_i + a^dag sm_i)
    """
    ops = system_operators(int(p.n_max))
    da = p.delta_a if delta_a is None else delta_a
    db = p.delta_b if delta_b is None else delta_b
    a, ad = ops['a'], ops['a'].dag()
    h = da * (ops['sm_a'].dag() @ ops['sm_a']) + db * (ops['sm_b'].dag() @ ops['sm_b'])
    for g, sm in ((p.g_a, ops['sm_a']), (p.g_b, ops['sm_b'])):
        h = h + g * (a @ sm.dag() + ad @ sm)
    return h


def qubit_state(theta: float, phi: float = 0.0) -> Ket:
    """cos(theta/2)|g> + e^{i phi} sin(theta/2)|e>."""
    return Ket([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)], (2,))


def two_qubit_state(prep: Sequence[Rotation]) -> Ket:
    states = {'A': basis(2, 0), 'B': basis(2, 0)}
    seen = set()
    for rot in prep:
        q = QUBITS[qubit_index(rot.qubit)]
        if q in seen:
            raise ValidationError("Invalid preparation", [('/prep', f'qubit {q} rotated twice')])
        seen.add(q)
        states[q] = qubit_state(rot.theta, rot.phi)
    return tensor(states['A'], states['B'])


def prepare_state(prep: Sequence[Rotation], n_max: int = 5,
                  two_qubit: Optional[Ket] = None) -> Ket:
    """Full-system initial ket with the cavity in vacuum."""
    qubits = two_qubit if two_qubit is not None else two_qubit_state(prep)
    if qubits.space_tag != (2, 2):
        raise DimensionError(f"Expected a two-qubit ket, got space {qubits.space_tag}")
    qubits.check_norm()
    return tensor(qubits, basis(n_max + 1, 0))


def coupled_basis_decompose(psi: Ket) -> Tuple[complex, complex, complex, complex]:
    """
    Expand a two-qubit ket as alpha|gg> + delta|D> + beta|B> + gamma|ee>.

    Returns:
        (alpha, delta, beta, gamma)
    """
    if psi.space_tag != (2, 2):
        raise DimensionError(f"Expected a two-qubit ket, got space {psi.space_tag}")
    psi.check_norm(KET_NORM_TOL)
    c_gg, c_ge, c_eg, c_ee = (complex(c) for c in psi.amplitudes)
    root2 = math.sqrt(2.0)
    return c_gg, (c_ge - c_eg) / root2, (c_ge + c_eg) / root2, c_ee


def recompose_coupled_basis(alpha: complex, delta: complex, beta: complex, gamma: complex) -> Ket:
    root2 = math.sqrt(2.0)
    psi = Ket([alpha, (beta + delta) / root2, (beta - delta) / root2, gamma], (2, 2))
    return psi.check_norm(KET_NORM_TOL)


NAMED_STATES = ('ee', 'ge', 'eg', 'plus_plus', 'plus_minus', 'single_A', 'single_B', 'dark', 'bright')


def superposition_preparation(relative_phase: float) -> List[Rotation]:
    """(|g>+|e>)(|g>+e^{i dphi}|e>)/2."""
    return [Rotation('A', math.pi / 2, 0.0),
            Rotation('B', math.pi / 2, float(relative_phase) % TWO_PI)]


def named_preparation(name: str) -> List[Rotation]:
    if name == 'ee':
        return [Rotation('A', math.pi), Rotation('B', math.pi)]
    if name == 'ge':
        return [Rotation('B', math.pi)]
    if name in ('eg', 'single_A'):
        return [Rotation('A', math.pi)]
    if name == 'single_B':
        return [Rotation('B', math.pi)]
    if name == 'plus_plus':
        return superposition_preparation(0.0)
    if name == 'plus_minus':
        return superposition_preparation(math.pi)
    if name in ('dark', 'bright'):
        return []
    raise ValidationError(f"Unknown initial state {name!r}",
                          [('/initial_state', f"must be one of {', '.join(NAMED_STATES)}")])


def named_two_qubit_state(name: str) -> Ket:
    if name == 'dark':
        return recompose_coupled_basis(0, 1, 0, 0)
    if name == 'bright':
        return recompose_coupled_basis(0, 0, 1, 0)
    return two_qubit_state(named_preparation(name))


def decay_schedule(p: SystemParams, state: str, duration: float,
                   prep: Optional[Sequence[Rotation]] = None) -> PulseSchedule:
    """
    Single-segment decay experiment with both qubits at the parameter detunings.

    For the single-qubit references the spectator is left at its idle
    frequency, far from the cavity.
    """
    delta_a, delta_b = p.delta_a, p.delta_b
    if state == 'single_A':
        delta_b = mhz(IDLE_DETUNING_MHZ['B'])
    elif state == 'single_B':
        delta_a = mhz(IDLE_DETUNING_MHZ['A'])

    if prep is not None:
        rotations, initial = list(prep), None
    elif state in ('dark', 'bright'):
        rotations, initial = [], named_two_qubit_state(state)
    else:
        rotations, initial = named_preparation(state), None
    return PulseSchedule(prep=rotations, segments=[Segment(duration, delta_a, delta_b)],
                         initial_state=initial)
