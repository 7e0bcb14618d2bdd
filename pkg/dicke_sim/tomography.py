"""
Moment-based single-mode state tomography.

Records S = A + h^dag are reduced to moments <(S*)^n S^m>, the
phase-insensitive noise mode is removed with the moments of an off
measurement, and a positive density matrix rho = T^dag T / Tr(T^dag T) is
fitted to the remaining field moments <(a^dag)^n a^m> by weighted least
squares.
"""

from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import logging

import numpy as np
from scipy.optimize import minimize

from .detection import QuadratureRecordSet
from .exceptions import ConvergenceError, DimensionError, ValidationError
from .exporters import write_json
from .parallel import run_parallel
from .quantum import DensityMatrix, destroy


logger = logging.getLogger(__name__)

MIN_SHOTS = 1000
JACKKNIFE_BLOCKS = 100
MAX_TOTAL_ORDER = 6
SIGMA_FLOOR = 1e-4
GRAD_TOL = 1e-9
MAX_ITER = 10000
LINE_SEARCH_FAILURE = 2
SYMMETRY_TOL = 1e-9

Pair = Tuple[int, int]


def moment_pairs(max_order: int) -> List[Pair]:
    """All (n, m) with n + m <= 2 * max_order."""
    total = 2 * max_order
    return [(n, m) for n in range(total + 1) for m in range(total + 1 - n)]


@dataclass
class MomentTable:
    """
    Normally ordered moments keyed by (n, m) for <(a^dag)^n a^m>
    (or <(S*)^n S^m> for raw records), with standard errors.
    """
    max_order: int
    moments: Dict[Pair, complex]
    std_errors: Dict[Pair, float] = field(default_factory=dict)
    n_shots: int = 0

    def __post_init__(self):
        if int(self.max_order) != self.max_order or self.max_order < 1:
            raise ValidationError(f"max_order must be an integer >= 1, got {self.max_order}")
        missing = [p for p in moment_pairs(self.max_order) if p not in self.moments]
        if missing:
            raise ValidationError(f"Moment table is missing entries {missing[:4]}")
        self.moments = {p: complex(self.moments[p]) for p in moment_pairs(self.max_order)}
        self.std_errors = {p: float(self.std_errors.get(p, 0.0)) for p in self.moments}
        if abs(self.moments[(0, 0)] - 1.0) > SYMMETRY_TOL:
            raise ValidationError(f"Moment (0, 0) must be 1, got {self.moments[(0, 0)]}")
        for (n, m), value in self.moments.items():
            if abs(value - self.moments[(m, n)].conjugate()) > SYMMETRY_TOL * max(1.0, abs(value)):
                raise ValidationError(f"Moments ({n}, {m}) and ({m}, {n}) are not complex conjugates")

    def __getitem__(self, pair: Pair) -> complex:
        return self.moments[pair]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'max_order': self.max_order,
            'n_shots': self.n_shots,
            'moments': [{'n': n, 'm': m, 'value': v, 'std_error': self.std_errors[(n, m)]}
                        for (n, m), v in self.moments.items()],
        }


@dataclass
class ReconstructionResult:
    """Fitted density matrix with the weighted residual at the optimum."""
    rho: DensityMatrix
    residual: float
    iterations: int
    converged: bool
    termination: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rho': self.rho.elements,
            'n_max': self.rho.dim - 1,
            'residual': self.residual,
            'iterations': self.iterations,
            'converged': self.converged,
            'termination': self.termination,
        }


def _block_sums(block: np.ndarray, pairs: List[Pair]) -> np.ndarray:
    conj = np.conj(block)
    return np.array([np.sum(conj ** n * block ** m) for n, m in pairs])


def estimate_raw_moments(records: QuadratureRecordSet, max_order: int = 3) -> MomentTable:
    """
    Sample moments <(S*)^n S^m> of single-bin records.

    Standard errors are blocked jackknife estimates over 100 contiguous
    shot blocks; the block sums are computed on the worker pool.

    Args:
        records: Single-mode record set
        max_order: Moments up to total order 2 * max_order

    Returns:
        MomentTable of S
    """
    if records.n_bins != 1:
        raise DimensionError(f"Moment estimation needs single-mode records, got {records.n_bins} bins")
    n_shots = records.n_shots
    if n_shots < MIN_SHOTS:
        raise ValidationError(f"Moment estimation needs at least {MIN_SHOTS} shots, got {n_shots}",
                              [('/n_shots', f'must be >= {MIN_SHOTS}')])

    s = records.records[:, 0]
    upper = [(n, m) for n, m in moment_pairs(max_order) if n <= m]
    blocks = np.array_split(s, JACKKNIFE_BLOCKS)
    sums = np.array(run_parallel(lambda b: _block_sums(b, upper), blocks))
    counts = np.array([b.size for b in blocks], dtype=float)

    total = sums.sum(axis=0)
    mean = total / n_shots
    loo = (total[None, :] - sums) / (n_shots - counts)[:, None]
    n_blocks = len(blocks)
    err = np.sqrt((n_blocks - 1) / n_blocks * np.sum(np.abs(loo - loo.mean(axis=0)) ** 2, axis=0))

    moments: Dict[Pair, complex] = {}
    errors: Dict[Pair, float] = {}
    for k, (n, m) in enumerate(upper):
        moments[(n, m)] = complex(mean[k])
        moments[(m, n)] = complex(mean[k]).conjugate()
        errors[(n, m)] = errors[(m, n)] = float(err[k])
    moments[(0, 0)] = 1.0
    errors[(0, 0)] = 0.0
    logger.debug(f"Estimated {len(moments)} raw moments from {n_shots} shots")
    return MomentTable(max_order, moments, errors, n_shots)


def _check_pair(sig: MomentTable, off: MomentTable):
    if sig.max_order != off.max_order:
        raise ValidationError(f"Moment tables have orders {sig.max_order} and {off.max_order}")


def _noise_moments(off: MomentTable) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal noise moments <h^k (h^dag)^k> and their errors."""
    ks = range(off.max_order + 1)
    values = np.array([off[(k, k)].real for k in ks])
    errors = np.array([off.std_errors[(k, k)] for k in ks])
    return values, errors


def deconvolve_noise(sig: MomentTable, off: MomentTable) -> MomentTable:
    """
    Remove a phase-insensitive noise mode from raw signal moments.

    Inverts <(S*)^n S^m> = sum_k C(n,k) C(m,k) <(a^dag)^(n-k) a^(m-k)> N_k,
    where N_k = <(S*)^k S^k> of the off measurement, in ascending total
    order. Standard errors are propagated to first order.

    Args:
        sig: Raw moments of the signal records
        off: Raw moments of the off records

    Returns:
        MomentTable of the field mode a
    """
    _check_pair(sig, off)
    noise, noise_err = _noise_moments(off)
    pairs = sorted(moment_pairs(sig.max_order), key=lambda p: (p[0] + p[1], p))
    field_m: Dict[Pair, complex] = {}
    field_e: Dict[Pair, float] = {}
    for n, m in pairs:
        value = sig[(n, m)]
        var = sig.std_errors[(n, m)] ** 2
        for k in range(1, min(n, m) + 1):
            c = comb(n, k) * comb(m, k)
            lower = field_m[(n - k, m - k)]
            value -= c * lower * noise[k]
            var += c ** 2 * (abs(lower) ** 2 * noise_err[k] ** 2 + noise[k] ** 2 * field_e[(n - k, m - k)] ** 2)
        field_m[(n, m)] = value
        field_e[(n, m)] = float(np.sqrt(var))
    field_m[(0, 0)] = 1.0
    field_e[(0, 0)] = 0.0
    # symmetric pairs accumulate identical rounding; pin the conjugate relation
    for n, m in pairs:
        if n > m:
            field_m[(n, m)] = field_m[(m, n)].conjugate()

    photons = field_m[(1, 1)].real
    if photons < -3 * field_e[(1, 1)] and field_e[(1, 1)] > 0:
        logger.warning(f"Inferred <a^dag a> = {photons:.4g} is negative beyond 3 sigma "
                       f"({field_e[(1, 1)]:.2g}); check the off-measurement calibration")
    return MomentTable(sig.max_order, field_m, field_e, sig.n_shots)


def reconvolve_noise(field_moments: MomentTable, off: MomentTable) -> MomentTable:
    """Forward convolution of field moments with the off-measurement noise mode."""
    _check_pair(field_moments, off)
    noise, _ = _noise_moments(off)
    raw: Dict[Pair, complex] = {}
    for n, m in moment_pairs(field_moments.max_order):
        raw[(n, m)] = sum(comb(n, k) * comb(m, k) * field_moments[(n - k, m - k)] * noise[k]
                          for k in range(min(n, m) + 1))
    return MomentTable(field_moments.max_order, raw, dict(field_moments.std_errors), field_moments.n_shots)


def _moment_operators(dim: int, pairs: List[Pair]) -> Dict[Pair, np.ndarray]:
    a = destroy(dim - 1).elements
    powers = [np.eye(dim, dtype=complex)]
    for _ in range(max(max(p) for p in pairs)):
        powers.append(powers[-1] @ a)
    return {(n, m): powers[n].conj().T @ powers[m] for n, m in pairs}


def exact_moments(rho: DensityMatrix, max_order: int = 3) -> MomentTable:
    """Tr(rho (a^dag)^n a^m) for a single-mode state, with zero errors."""
    if len(rho.space_tag) != 1:
        raise DimensionError(f"Expected a single-mode state, got space {rho.space_tag}")
    pairs = moment_pairs(max_order)
    ops = _moment_operators(rho.dim, pairs)
    moments = {p: complex(np.einsum('ij,ji->', rho.elements, ops[p])) for p in pairs}
    moments[(0, 0)] = 1.0
    return MomentTable(max_order, moments)


def rotate_moments(table: MomentTable, theta: float) -> MomentTable:
    """Apply the phase rotation a -> a exp(-i theta) to every moment."""
    rotated = {(n, m): v * np.exp(-1j * (m - n) * theta) for (n, m), v in table.moments.items()}
    return MomentTable(table.max_order, rotated, dict(table.std_errors), table.n_shots)


class _MomentFit:
    """Weighted least-squares objective over the lower-triangular factor T."""

    def __init__(self, moments: MomentTable, dim: int):
        top = min(2 * moments.max_order, MAX_TOTAL_ORDER)
        self.pairs = [p for p in moment_pairs(moments.max_order) if 0 < p[0] + p[1] <= top]
        self.dim = dim
        ops = _moment_operators(dim, self.pairs)
        self.ops = np.array([ops[p] for p in self.pairs])
        self.targets = np.array([moments[p] for p in self.pairs])
        sigma = np.array([moments.std_errors[p] for p in self.pairs])
        self.weights = 1.0 / np.maximum(sigma, SIGMA_FLOOR) ** 2
        self.rows, self.cols = np.tril_indices(dim, k=-1)

    def unpack(self, x: np.ndarray) -> np.ndarray:
        d = self.dim
        n_off = self.rows.size
        t = np.zeros((d, d), dtype=complex)
        t[np.diag_indices(d)] = x[:d]
        t[self.rows, self.cols] = x[d:d + n_off] + 1j * x[d + n_off:]
        return t

    def pack(self, t: np.ndarray) -> np.ndarray:
        off = t[self.rows, self.cols]
        return np.concatenate([np.real(np.diag(t)), off.real, off.imag])

    def __call__(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        t = self.unpack(x)
        gram = t.conj().T @ t
        tau = float(np.real(np.trace(gram)))
        rho = gram / tau
        predicted = np.einsum('ij,kji->k', rho, self.ops)
        diff = predicted - self.targets
        value = float(np.sum(self.weights * np.abs(diff) ** 2))

        e = np.einsum('k,kij->ij', self.weights * np.conj(diff), self.ops)
        c = np.einsum('ij,ji->', rho, e)
        d = 2.0 * (t @ e + t @ e.conj().T - 2.0 * c.real * t) / tau
        off = d[self.rows, self.cols]
        grad = np.concatenate([np.real(np.diag(d)), off.real, off.imag])
        return value, grad


def _thermal_start(moments: MomentTable, dim: int) -> np.ndarray:
    nbar = max(moments[(1, 1)].real, 0.0)
    t = np.zeros((dim, dim), dtype=complex)
    if nbar == 0.0:
        t[0, 0] = 1.0
        return t
    q = nbar / (1.0 + nbar)
    p = (1.0 - q) * q ** np.arange(dim)
    t[np.diag_indices(dim)] = np.sqrt(p / p.sum())
    return t


def reconstruct(moments: MomentTable, n_max: int = 3, raise_on_failure: bool = True) -> ReconstructionResult:
    """
    Positive density matrix that best reproduces the field moments.

    Minimizes sum |Tr(rho (a^dag)^n a^m) - moment|^2 / sigma^2 over moments
    up to total order 6 with L-BFGS-B and an analytic gradient. rho is
    parametrized as T^dag T / Tr(T^dag T) with T lower triangular and a
    real diagonal, so positivity and unit trace hold for every iterate.
    Zero standard errors are floored at 1e-4.

    The fit counts as converged when the gradient norm drops below 1e-9 or
    L-BFGS-B reports success, either by its projected-gradient test or by
    a relative objective reduction below machine epsilon. A line search
    failure is restarted once from the last iterate; if it fails again the
    result is returned with converged=False and a warning.

    Args:
        moments: Field moments (after noise deconvolution)
        n_max: Fock cutoff of the reconstruction
        raise_on_failure: Raise ConvergenceError instead of returning an
            unconverged result

    Returns:
        ReconstructionResult
    """
    if int(n_max) != n_max or n_max < 1:
        raise ValidationError(f"n_max must be an integer >= 1, got {n_max}", [('/tomo/n_max', 'must be >= 1')])
    available = min(2 * moments.max_order, MAX_TOTAL_ORDER)
    if 2 * n_max > available:
        raise ValidationError(f"Cutoff {n_max} needs moments to total order {2 * n_max}, have {available}",
                              [('/tomo/n_max', f'must be <= {available // 2}')])

    dim = int(n_max) + 1
    objective = _MomentFit(moments, dim)
    res = _minimize(objective, objective.pack(_thermal_start(moments, dim)))
    iterations = int(res.nit)
    if res.status == LINE_SEARCH_FAILURE:
        logger.info(f"Line search stalled after {res.nit} iterations; restarting from the last iterate")
        res = _minimize(objective, res.x)
        iterations += int(res.nit)

    value, grad = objective(res.x)
    grad_norm = float(np.linalg.norm(grad))
    termination = str(res.message)
    exhausted = res.nit >= MAX_ITER and grad_norm >= GRAD_TOL
    if not np.isfinite(value) or exhausted:
        message = f"Moment fit did not converge after {iterations} iterations (residual {value:.4g})"
        if raise_on_failure:
            raise ConvergenceError(message, residual=float(value))
        logger.warning(message)
    converged = bool(np.isfinite(value) and not exhausted and (grad_norm < GRAD_TOL or res.success))
    if not converged and np.isfinite(value) and not exhausted:
        logger.warning(f"Moment fit stopped without convergence: {termination} "
                       f"(gradient norm {grad_norm:.3g}, residual {value:.4g})")

    t = objective.unpack(res.x)
    gram = t.conj().T @ t
    rho = gram / np.real(np.trace(gram))
    rho = 0.5 * (rho + rho.conj().T)
    logger.info(f"Reconstructed rho at cutoff {n_max}: residual {value:.4g} after {iterations} iterations")
    return ReconstructionResult(DensityMatrix(rho, (dim,)), float(value), iterations, converged, termination)


def _minimize(objective: _MomentFit, x0: np.ndarray):
    return minimize(objective, x0, jac=True, method='L-BFGS-B',
                    options={'maxiter': MAX_ITER, 'maxfun': 10 * MAX_ITER,
                             'ftol': np.finfo(float).eps, 'gtol': 1e-12})


def export_json(result: Union[MomentTable, ReconstructionResult], path: Union[str, Path]) -> Path:
    return write_json(result.to_dict(), path)
