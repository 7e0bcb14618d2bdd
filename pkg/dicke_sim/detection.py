"""
Synthetic heterodyne acquisition chain.

Single-mode records are drawn from the Husimi Q distribution of the field
plus phase-insensitive amplifier noise (S = A + H*). Time-binned records use
a per-bin Gaussian approximation and go through an IF mixer, a digital
downconverter and the 4-point square filter before the power is averaged
and the off-measurement noise floor is subtracted.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import csv
import json
import logging
import math

import numpy as np
from scipy.linalg import eigh
from scipy.signal import freqz, lfilter, lfilter_zi
from scipy.special import factorial

from .dynamics import TimeTrace
from .exceptions import DimensionError, ExportError, SamplingError, ValidationError
from .parallel import run_parallel
from .quantum import DensityMatrix, validate_density_matrix


logger = logging.getLogger(__name__)

MAX_SAMPLING_CUTOFF = 12
RECORD_KINDS = ('signal', 'off')
_KIND_CODES = {'signal': 0, 'off': 1}


@dataclass(frozen=True)
class DetectionConfig:
    """Acquisition chain settings; frequencies in MHz, times in us."""
    if_freq: float = 25.0
    sample_dt: float = 0.01
    filter_len: int = 4
    n_noise: float = 0.0
    gain: float = 1.0
    rng_seed: int = 0
    chunk_shots: int = 10000

    def __post_init__(self):
        errors = []
        if not self.if_freq > 0:
            errors.append(('/detection/if_freq', 'must be > 0'))
        if not self.sample_dt > 0:
            errors.append(('/detection/sample_dt', 'must be > 0'))
        if int(self.filter_len) != self.filter_len or self.filter_len < 1:
            errors.append(('/detection/filter_len', 'must be an integer >= 1'))
        if not self.n_noise >= 0:
            errors.append(('/detection/n_noise', 'must be >= 0'))
        if not self.gain > 0:
            errors.append(('/detection/gain', 'must be > 0'))
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            errors.append(('/detection/rng_seed', 'must be a non-negative integer'))
        if int(self.chunk_shots) != self.chunk_shots or self.chunk_shots < 1:
            errors.append(('/detection/chunk_shots', 'must be an integer >= 1'))
        if not errors and abs(self.if_freq * self.sample_dt * self.filter_len - 1.0) > 1e-9:
            errors.append(('/detection/filter_len', 'square filter must span exactly one IF period'))
        if errors:
            raise ValidationError("Invalid detection settings", errors)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    def chain_signature(self) -> Tuple:
        """Settings that must agree between signal and off records."""
        return (self.if_freq, self.sample_dt, self.filter_len, self.n_noise, self.gain)


@dataclass
class QuadratureRecordSet:
    """Per-shot complex amplitudes, shape (n_shots, n_bins)."""
    records: np.ndarray
    config: DetectionConfig
    kind: str = 'signal'
    t: Optional[np.ndarray] = None

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=complex)
        if self.records.ndim != 2:
            raise DimensionError(f"Records must be 2-d (shots x bins), got shape {self.records.shape}")
        if self.kind not in RECORD_KINDS:
            raise ValidationError(f"Unknown record kind {self.kind!r}")
        if self.t is None:
            self.t = np.arange(self.n_bins) * self.config.sample_dt
        self.t = np.asarray(self.t, dtype=float)
        if self.t.shape != (self.n_bins,):
            raise DimensionError("Record time grid does not match the number of bins")

    @property
    def n_shots(self) -> int:
        return self.records.shape[0]

    @property
    def n_bins(self) -> int:
        return self.records.shape[1]


def _chunk_plan(n_shots: int, cfg: DetectionConfig, kind: str) -> List[Tuple[int, np.random.SeedSequence]]:
    if int(n_shots) != n_shots or n_shots < 1:
        raise ValidationError("n_shots must be a positive integer", [('/n_shots', 'must be >= 1')])
    n_chunks = int(math.ceil(n_shots / cfg.chunk_shots))
    seeds = np.random.SeedSequence([int(cfg.rng_seed), _KIND_CODES[kind]]).spawn(n_chunks)
    sizes = [cfg.chunk_shots] * (n_chunks - 1) + [int(n_shots) - cfg.chunk_shots * (n_chunks - 1)]
    return list(zip(sizes, seeds))


def _amplifier_noise(rng: np.random.Generator, shape, n_noise: float) -> np.ndarray:
    """Complex Gaussian H with <|H|^2> = n_noise."""
    scale = math.sqrt(n_noise / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _coherent_overlaps(samples: np.ndarray, dim: int) -> np.ndarray:
    """<n|A> for every sample, shape (n_samples, dim)."""
    n = np.arange(dim)
    norm = np.exp(-0.5 * np.abs(samples) ** 2)[:, None]
    return norm * samples[:, None] ** n[None, :] / np.sqrt(factorial(n))[None, :]


def husimi_q(rho: DensityMatrix, points: Union[complex, np.ndarray]) -> np.ndarray:
    """Q(A) = <A|rho|A> / pi."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    coh = _coherent_overlaps(pts.ravel(), rho.dim)
    q = np.real(np.einsum('kn,nm,km->k', coh.conj(), rho.elements, coh)) / math.pi
    return q.reshape(np.shape(points))


def _rejection_bound(cutoff: int, spread: float) -> float:
    """Max over r of Q_v / proposal for any unit vector v on Fock levels 0..cutoff."""
    u = np.linspace(0.0, 60.0 * (cutoff + 1), 60001)
    series = np.zeros_like(u)
    term = np.ones_like(u)
    for n in range(cutoff + 1):
        if n:
            term = term * u / n
        series += term
    ratio = spread * np.exp(-u * (1.0 - 1.0 / spread)) * series
    return float(np.max(ratio)) * 1.001


def _sample_eigvector(rng: np.random.Generator, vec: np.ndarray, count: int,
                      spread: float, bound: float) -> np.ndarray:
    accepted: List[np.ndarray] = []
    total = 0
    scale = math.sqrt(spread / 2)
    while total < count:
        batch = max(int(1.2 * bound * (count - total)), 256)
        cand = scale * (rng.standard_normal(batch) + 1j * rng.standard_normal(batch))
        amp = _coherent_overlaps(cand, vec.size).conj() @ vec
        target = np.abs(amp) ** 2 / math.pi
        proposal = np.exp(-np.abs(cand) ** 2 / spread) / (math.pi * spread)
        keep = rng.random(batch) * bound * proposal <= target
        picked = cand[keep][:count - total]
        accepted.append(picked)
        total += picked.size
    return np.concatenate(accepted)


def _sample_husimi_chunk(rng: np.random.Generator, weights: np.ndarray, vectors: np.ndarray,
                         count: int, spread: float, bound: float) -> np.ndarray:
    counts = rng.multinomial(count, weights)
    parts = [_sample_eigvector(rng, vectors[:, k], int(c), spread, bound)
             for k, c in enumerate(counts) if c > 0]
    samples = np.concatenate(parts) if parts else np.empty(0, dtype=complex)
    return samples[rng.permutation(samples.size)]


def synthesize_single_mode_records(rho: DensityMatrix, n_shots: int, cfg: DetectionConfig,
                                   kind: str = 'signal') -> QuadratureRecordSet:
    """
    Draw one complex amplitude per shot, S = gain * (A + H*).

    A follows the Husimi distribution of rho, sampled by decomposing rho
    into eigenvectors and rejection-sampling each from a broad Gaussian.
    H is amplifier noise with <|H|^2> = n_noise.

    Args:
        rho: Single-mode field state (Fock cutoff <= 12)
        n_shots: Number of shots
        cfg: Detection settings (seed, noise, gain)
        kind: 'signal' or 'off'; selects an independent random stream

    Returns:
        QuadratureRecordSet with one bin per shot
    """
    if len(rho.space_tag) != 1:
        raise DimensionError(f"Expected a single-mode state, got space {rho.space_tag}")
    cutoff = rho.dim - 1
    if cutoff > MAX_SAMPLING_CUTOFF:
        raise SamplingError(f"Fock cutoff {cutoff} exceeds {MAX_SAMPLING_CUTOFF}; no rejection bound")
    validate_density_matrix(rho)

    w, v = eigh(0.5 * (rho.elements + rho.elements.conj().T))
    weights = np.clip(w, 0.0, None)
    weights = weights / weights.sum()
    spread = float(cutoff + 1)
    bound = _rejection_bound(cutoff, spread)

    def draw(plan):
        size, seed = plan
        rng = np.random.default_rng(seed)
        a = _sample_husimi_chunk(rng, weights, v, size, spread, bound)
        return cfg.gain * (a + np.conj(_amplifier_noise(rng, size, cfg.n_noise)))

    chunks = run_parallel(draw, _chunk_plan(n_shots, cfg, kind))
    records = np.concatenate(chunks)[:, None]
    logger.info(f"Synthesized {n_shots} single-mode {kind} shots (n_noise={cfg.n_noise:g})")
    return QuadratureRecordSet(records, cfg, kind, t=np.zeros(1))


def filter_taps(cfg: DetectionConfig) -> np.ndarray:
    return np.ones(int(cfg.filter_len)) / cfg.filter_len


def filter_response(cfg: DetectionConfig, freqs_mhz: Union[float, np.ndarray]) -> np.ndarray:
    """Complex frequency response of the square filter at the given frequencies (MHz)."""
    f = np.atleast_1d(np.asarray(freqs_mhz, dtype=float))
    _, h = freqz(filter_taps(cfg), worN=f, fs=1.0 / cfg.sample_dt)
    return h.reshape(np.shape(freqs_mhz))


def _downconvert(baseband: np.ndarray, t: np.ndarray, cfg: DetectionConfig) -> np.ndarray:
    """Up-mix to the IF, digitize the real quadrature, mix back down and filter."""
    phase = np.exp(1j * 2 * math.pi * cfg.if_freq * t)[None, :]
    digitized = math.sqrt(2.0) * np.real(baseband * phase)
    mixed = math.sqrt(2.0) * digitized * np.conj(phase)
    taps = filter_taps(cfg)
    zi = lfilter_zi(taps, 1.0)[None, :] * mixed[:, :1]
    filtered, _ = lfilter(taps, 1.0, mixed, axis=1, zi=zi)
    return filtered


def synthesize_time_records(trace: TimeTrace, n_shots: int, cfg: DetectionConfig, kappa: float,
                            kind: str = 'signal') -> QuadratureRecordSet:
    """
    Time-binned records of the output field for a decay trace.

    Per bin the output-mode amplitude is sqrt(kappa dt) <a>, with complex
    Gaussian fluctuations of total variance n_noise + 1/2 plus the
    incoherent photon number kappa dt (<a^dag a> - |<a>|^2). The raw noise
    is scaled so that this variance holds after the square filter. The
    first filter_len - 1 bins carry the filter start-up transient.

    Args:
        trace: Dynamics trace with 'flux' and complex 'a' on the cfg grid
        n_shots: Number of shots
        cfg: Detection settings
        kappa: Cavity decay rate (rad/us)
        kind: 'signal' or 'off' (off records carry no field)

    Returns:
        QuadratureRecordSet of shape (n_shots, len(trace.t))
    """
    dt = cfg.sample_dt
    steps = np.diff(trace.t)
    if steps.size and not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise DimensionError(f"Trace grid does not match the detection sample step {dt} us")
    n_bins = trace.t.size
    if kind == 'signal':
        mean = math.sqrt(kappa * dt) * np.asarray(trace['a'], dtype=complex)
        photons = dt * np.real(trace['flux'])
        incoherent = np.clip(photons - np.abs(mean) ** 2, 0.0, None)
    else:
        mean = np.zeros(n_bins, dtype=complex)
        incoherent = np.zeros(n_bins)
    raw_var = (cfg.n_noise + 0.5 + incoherent) * cfg.filter_len / 2

    def draw(plan):
        size, seed = plan
        rng = np.random.default_rng(seed)
        noise = np.sqrt(raw_var / 2)[None, :] * (rng.standard_normal((size, n_bins))
                                                 + 1j * rng.standard_normal((size, n_bins)))
        return cfg.gain * _downconvert(mean[None, :] + noise, trace.t, cfg)

    chunks = run_parallel(draw, _chunk_plan(n_shots, cfg, kind))
    logger.info(f"Synthesized {n_shots} x {n_bins} {kind} time records")
    return QuadratureRecordSet(np.concatenate(chunks), cfg, kind, t=trace.t.copy())


def power_trace(sig: QuadratureRecordSet, off: QuadratureRecordSet) -> TimeTrace:
    """
    Averaged photon flux with the off-measurement noise floor subtracted.

    Returns:
        TimeTrace with 'flux' (photons/us) and its standard error 'flux_sem'
    """
    if sig.config.chain_signature() != off.config.chain_signature():
        raise ValidationError("Signal and off records were taken with different chain settings")
    if sig.n_bins != off.n_bins:
        raise DimensionError(f"Signal has {sig.n_bins} bins, off measurement has {off.n_bins}")
    cfg = sig.config
    norm = cfg.gain ** 2 * cfg.sample_dt
    p_sig = np.abs(sig.records) ** 2
    p_off = np.abs(off.records) ** 2
    flux = (p_sig.mean(axis=0) - p_off.mean(axis=0)) / norm
    sem = np.sqrt(p_sig.var(axis=0, ddof=1) / sig.n_shots + p_off.var(axis=0, ddof=1) / off.n_shots) / norm
    return TimeTrace(sig.t.copy(), {'flux': flux, 'flux_sem': sem},
                     {'n_shots': sig.n_shots, 'n_off_shots': off.n_shots})


def export_records_csv(records: QuadratureRecordSet, path: Union[str, Path]) -> Path:
    """Write columns shot, bin, re_s, im_s."""
    path = Path(path)
    try:
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['shot', 'bin', 're_s', 'im_s'])
            for shot, row in enumerate(records.records):
                for b, s in enumerate(row):
                    writer.writerow([shot, b, f'{s.real:.17g}', f'{s.imag:.17g}'])
    except OSError as e:
        raise ExportError(f"Record CSV export failed: {e}")
    return path


def export_records_binary(records: QuadratureRecordSet, path: Union[str, Path]) -> Path:
    """Write an .npz with the records, bin times, kind and the chain settings as JSON."""
    path = Path(path)
    try:
        with open(path, 'wb') as f:
            np.savez(f, records=records.records, t=records.t, kind=np.array(records.kind),
                     config=np.array(json.dumps(records.config.to_dict(), sort_keys=True)))
    except OSError as e:
        raise ExportError(f"Record binary export failed: {e}")
    return path


def load_records_binary(path: Union[str, Path]) -> QuadratureRecordSet:
    with np.load(Path(path)) as data:
        cfg = DetectionConfig(**json.loads(str(data['config'])))
        return QuadratureRecordSet(data['records'], cfg, str(data['kind']), t=data['t'])
