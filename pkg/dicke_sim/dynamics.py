"""
Lindblad master-equation integration with piecewise-constant Hamiltonians.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from scipy.integrate import solve_ivp, trapezoid

from .cqed import PulseSchedule, SystemParams, build_hamiltonian, system_operators
from .exceptions import ConvergenceError, DimensionError, NonHermitianError, ValidationError
from .quantum import DensityMatrix, Operator, validate_density_matrix


logger = logging.getLogger(__name__)

RHS_HERMITIAN_TOL = 1e-9
TAIL_FRACTION = 1e-3


@dataclass(frozen=True)
class CollapseOp:
    """Lindblad jump operator with a readable label."""
    op: Operator
    label: str


@dataclass
class TimeTrace:
    """Sampled observables on an ascending time grid (us)."""
    t: np.ndarray
    values: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or self.t.size == 0:
            raise ValidationError("TimeTrace needs a non-empty 1-d time grid")
        if np.any(np.diff(self.t) <= 0):
            raise ValidationError("TimeTrace time grid must be strictly ascending")
        for label, vals in list(self.values.items()):
            arr = np.asarray(vals)
            if arr.shape != self.t.shape:
                raise ValidationError(f"Observable {label!r} has {arr.size} samples, expected {self.t.size}")
            self.values[label] = arr

    @property
    def labels(self) -> List[str]:
        return list(self.values)

    def __getitem__(self, label: str) -> np.ndarray:
        try:
            return self.values[label]
        except KeyError:
            raise ValidationError(f"TimeTrace has no observable {label!r}")


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive RK45 tolerances and the observable sampling step (us)."""
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 0.1
    sample_dt: float = 0.01

    def __post_init__(self):
        errors = [(f'/integrator/{name}', 'must be > 0')
                  for name in ('rel_tol', 'abs_tol', 'max_step', 'sample_dt')
                  if not getattr(self, name) > 0]
        if errors:
            raise ValidationError("Invalid integrator settings", errors)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def collapse_operators(p: SystemParams) -> List[CollapseOp]:
    """Cavity loss, qubit relaxation and pure dephasing; zero rates are skipped."""
    ops = system_operators(int(p.n_max))
    channels = [
        (p.kappa, ops['a'], 'kappa'),
        (p.gamma_nr_a, ops['sm_a'], 'gamma_nr_a'),
        (p.gamma_nr_b, ops['sm_b'], 'gamma_nr_b'),
        (p.gamma_phi_a / 2, ops['sz_a'], 'gamma_phi_a'),
        (p.gamma_phi_b / 2, ops['sz_b'], 'gamma_phi_b'),
    ]
    return [CollapseOp(math.sqrt(rate) * op, label) for rate, op, label in channels if rate > 0]


def _check_generator(h: Operator, cs: Sequence[CollapseOp], dim: int):
    if h.dim != dim:
        raise DimensionError(f"Hamiltonian dimension {h.dim} does not match state dimension {dim}")
    if not h.is_hermitian(RHS_HERMITIAN_TOL):
        raise NonHermitianError("Hamiltonian is not Hermitian")
    for c in cs:
        if c.op.dim != dim:
            raise DimensionError(f"Collapse operator {c.label!r} has dimension {c.op.dim}, expected {dim}")


def lindblad_rhs(rho: DensityMatrix, h: Operator, cs: Sequence[CollapseOp]) -> np.ndarray:
    """
    Right-hand side of the master equation (hbar = 1).

    Args:
        rho: Current state
        h: Hermitian Hamiltonian
        cs: Collapse operators

    Returns:
        d rho / dt as a dense matrix
    """
    _check_generator(h, cs, rho.dim)
    r = rho.elements
    out = -1j * (h.elements @ r - r @ h.elements)
    for c in cs:
        m = c.op.elements
        mdm = m.conj().T @ m
        out += m @ r @ m.conj().T - 0.5 * (mdm @ r + r @ mdm)
    return out


def liouvillian(h: Operator, cs: Sequence[CollapseOp]) -> np.ndarray:
    """Superoperator acting on the row-major vectorized density matrix."""
    _check_generator(h, cs, h.dim)
    eye = np.eye(h.dim)
    hm = h.elements
    sup = -1j * (np.kron(hm, eye) - np.kron(eye, hm.T))
    for c in cs:
        m = c.op.elements
        mdm = m.conj().T @ m
        sup += np.kron(m, m.conj()) - 0.5 * np.kron(mdm, eye) - 0.5 * np.kron(eye, mdm.T)
    return sup


def sample_grid(total: float, dt: float) -> np.ndarray:
    n = int(math.floor(total / dt + 1e-9))
    return np.arange(n + 1) * dt


def evolve(rho0: DensityMatrix, schedule: PulseSchedule, params: SystemParams,
           cfg: Optional[IntegratorConfig] = None,
           observables: Optional[Mapping[str, Operator]] = None) -> Tuple[TimeTrace, DensityMatrix]:
    """
    Integrate the master equation segment by segment.

    Each constant-Hamiltonian segment is integrated with an embedded 4/5
    Runge-Kutta pair, restarting at the segment boundaries. Observables are
    recorded on the uniform sample_dt grid; the photon flux kappa<a^dag a>
    is always recorded under the label 'flux'.

    Args:
        rho0: Initial state on the full system space
        schedule: Detuning segments (the preparation is already in rho0)
        params: System parameters (couplings and rates)
        cfg: Integrator settings
        observables: Extra observables keyed by label

    Returns:
        (TimeTrace, final DensityMatrix)
    """
    cfg = cfg or IntegratorConfig()
    if rho0.space_tag != params.dims:
        raise DimensionError(f"Initial state space {rho0.space_tag} does not match system {params.dims}")
    validate_density_matrix(rho0)

    ops = system_operators(int(params.n_max))
    recorded: Dict[str, Operator] = {'flux': params.kappa * ops['n']}
    recorded.update(observables or {})
    for label, op in recorded.items():
        if op.dim != rho0.dim:
            raise DimensionError(f"Observable {label!r} has dimension {op.dim}, expected {rho0.dim}")

    cs = collapse_operators(params)
    grid = sample_grid(schedule.total_duration, cfg.sample_dt)
    bounds = schedule.boundaries()
    dim = rho0.dim
    y = np.array(rho0.elements, dtype=complex).reshape(-1)
    samples = np.empty((grid.size, dim * dim), dtype=complex)
    filled = np.zeros(grid.size, dtype=bool)

    for k, seg in enumerate(schedule.segments):
        t0, t1 = bounds[k], bounds[k + 1]
        last = k == len(schedule.segments) - 1
        upper = grid <= t1 + 1e-12 if last else grid < t1 - 1e-12
        mask = (grid >= t0 - 1e-12) & upper & ~filled
        t_eval = np.unique(np.append(np.clip(grid[mask], t0, t1), t1))

        sup = liouvillian(build_hamiltonian(params, seg.delta_a, seg.delta_b), cs)
        last_t = [t0]

        def rhs(t, vec, sup=sup, last_t=last_t):
            last_t[0] = t
            return sup @ vec

        sol = solve_ivp(rhs, (t0, t1), y, method='RK45', t_eval=t_eval,
                        rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step)
        if sol.status != 0:
            raise ConvergenceError(f"Integration failed at t={last_t[0]:.9g} us: {sol.message}",
                                   time_stamp=float(last_t[0]))

        n_in = int(mask.sum())
        samples[np.flatnonzero(mask)] = sol.y[:, :n_in].T
        filled |= mask
        y = sol.y[:, -1]
        logger.info(f"Integrated segment {k} [{t0:.4g}, {t1:.4g}] us in {sol.nfev} evaluations")

    rhos = samples.reshape(grid.size, dim, dim)
    values = {}
    for label, op in recorded.items():
        vals = np.einsum('kij,ji->k', rhos, op.elements)
        values[label] = vals.real.copy() if op.is_hermitian() else vals

    traces = np.einsum('kii->k', rhos)
    trace_dev = float(np.max(np.abs(traces - 1.0)))
    herm = 0.5 * (rhos + np.conj(np.transpose(rhos, (0, 2, 1))))
    min_eig = float(np.min(np.linalg.eigvalsh(herm)))
    if trace_dev > 1e-8:
        logger.warning(f"Trace drifted by {trace_dev:.3e} during evolution")

    metadata = {
        'trace_deviation': trace_dev,
        'min_eigenvalue': min_eig,
        'segment_boundaries_us': [float(b) for b in bounds],
        'integrator': cfg.to_dict(),
    }
    final = DensityMatrix(y.reshape(dim, dim), rho0.space_tag)
    return TimeTrace(grid, values, metadata), final


def flux_tail_fraction(trace: TimeTrace, label: str = 'flux') -> float:
    """Last sample of the flux relative to its peak magnitude."""
    flux = np.real(trace[label])
    peak = float(np.max(np.abs(flux))) if flux.size else 0.0
    return abs(float(flux[-1])) / peak if peak > 0 else 0.0


def emitted_photons(trace: TimeTrace, label: str = 'flux') -> float:
    """Trapezoidal integral of the photon flux; warns if the tail has not decayed."""
    flux = np.real(trace[label])
    tail = flux_tail_fraction(trace, label)
    if tail > TAIL_FRACTION:
        logger.warning(f"Flux tail is {tail:.3e} of peak, above {TAIL_FRACTION:g}; "
                       f"emitted photon count is truncated")
    return float(trapezoid(flux, trace.t))
