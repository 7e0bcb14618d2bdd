"""
Experiment orchestration: declarative JSON configs in, plot-ready artifacts out.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import copy
import json
import logging
import math

import numpy as np
from scipy.integrate import trapezoid

from . import __version__
from .cqed import (
    NAMED_STATES, QUBITS, Rotation, SystemParams, coupled_basis_decompose, decay_schedule,
    ideal_params, mhz, named_two_qubit_state, measured_params, prepare_state, system_operators,
    to_mhz, two_qubit_state,
)
from .detection import DetectionConfig, power_trace, synthesize_single_mode_records, synthesize_time_records
from .dynamics import TAIL_FRACTION, IntegratorConfig, TimeTrace, emitted_photons, evolve, flux_tail_fraction
from .exceptions import ConvergenceError, DickeSimError, ExportError, ValidationError
from .exporters import (
    plot_columns, read_csv_columns, sha256_file, write_csv, write_json, write_pdf_summary, write_png,
    write_xlsx,
)
from .oracles import (
    STATE_DECAY_CASES, DecayCase, coupled_populations, decay_power, delta_power, dip_depth, dip_width,
    extract_dip_metrics, fidelity, mean_purcell_rate, mean_single_power, output_field_state,
    qubit_purcell_rate, rate_equation_power, transmission, vacuum_rabi_doublet,
)
from .parallel import run_parallel
from .quantum import DensityMatrix, ket_to_dm
from .tomography import deconvolve_noise, estimate_raw_moments, export_json, reconstruct


logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KINDS = ('spectrum', 'decay', 'tomo')
PARAM_SETS = ('measured', 'ideal')
DEFAULT_TOMO_SHOTS = 100000

_TOP_LEVEL_KEYS = {
    'schema_version', 'kind', 'name', 'param_set', 'detuning_mhz', 'params', 'initial_state',
    'duration_us', 'integrator', 'detection', 'spectrum', 'tomo', 'scale_s', 'measured',
    'reports', 'sweep',
}


@dataclass(frozen=True)
class SpectrumSettings:
    qubit: str = 'A'
    scan_min_mhz: float = -10.0
    scan_max_mhz: float = 10.0
    n_points: int = 2001


@dataclass(frozen=True)
class TomoSettings:
    n_max: int = 3
    max_order: int = 3


@dataclass(frozen=True)
class ReportFlags:
    xlsx: bool = False
    pdf: bool = False
    png: bool = False


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description; `source` keeps the raw input for sweeps."""
    kind: str
    params: SystemParams
    name: str = ''
    param_set: str = 'measured'
    detuning_mhz: float = 25.0
    initial_state: Union[str, List[Rotation], None] = None
    duration_us: Optional[float] = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    n_shots: int = 0
    spectrum: SpectrumSettings = field(default_factory=SpectrumSettings)
    tomo: TomoSettings = field(default_factory=TomoSettings)
    scale_s: Optional[float] = None
    measured: Optional[str] = None
    reports: ReportFlags = field(default_factory=ReportFlags)
    sweep: Optional[Dict[str, Any]] = None
    source: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def seed(self) -> int:
        return int(self.detection.rng_seed)

    @property
    def state_label(self) -> str:
        return self.initial_state if isinstance(self.initial_state, str) else 'custom'

    def to_dict(self) -> Dict[str, Any]:
        if isinstance(self.initial_state, list):
            state = [{'qubit': r.qubit, 'theta': r.theta, 'phi': r.phi} for r in self.initial_state]
        else:
            state = self.initial_state
        detection = self.detection.to_dict()
        detection['n_shots'] = self.n_shots
        return {
            'schema_version': SCHEMA_VERSION,
            'kind': self.kind,
            'name': self.name,
            'param_set': self.param_set,
            'detuning_mhz': self.detuning_mhz,
            'params': self.params.to_dict(),
            'initial_state': state,
            'duration_us': self.duration_us,
            'integrator': self.integrator.to_dict(),
            'detection': detection,
            'spectrum': asdict(self.spectrum),
            'tomo': asdict(self.tomo),
            'scale_s': self.scale_s,
            'measured': self.measured,
            'reports': asdict(self.reports),
            'sweep': self.sweep,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'ExperimentConfig':
        """
        Validate a raw config and materialize every default.

        All problems are collected and raised together as one
        ValidationError carrying JSON-pointer paths.
        """
        if not isinstance(data, Mapping):
            raise ValidationError("Config must be a JSON object", [('', 'expected an object')])
        errors: List[Tuple[str, str]] = []
        for key in sorted(set(data) - _TOP_LEVEL_KEYS):
            errors.append((f'/{key}', 'unknown key'))

        version = data.get('schema_version', SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            errors.append(('/schema_version', f'unsupported version {version!r}, expected {SCHEMA_VERSION}'))

        kind = data.get('kind')
        if kind not in KINDS:
            errors.append(('/kind', f"must be one of {', '.join(KINDS)}"))

        param_set = data.get('param_set', 'measured')
        if param_set not in PARAM_SETS:
            errors.append(('/param_set', f"must be one of {', '.join(PARAM_SETS)}"))
            param_set = 'measured'

        detuning = _number(data, 'detuning_mhz', 25.0, errors)
        params = None
        try:
            base = measured_params(detuning) if param_set == 'measured' else ideal_params(detuning)
            overrides = data.get('params') or {}
            if not isinstance(overrides, Mapping):
                raise ValidationError("Invalid params", [('/params', 'expected an object')])
            params = SystemParams.from_dict(dict(overrides), base)
        except ValidationError as e:
            errors.extend(e.errors or [('/params', str(e))])

        initial_state = _parse_initial_state(data.get('initial_state'), errors)
        duration = data.get('duration_us')
        if duration is not None:
            duration = _number(data, 'duration_us', None, errors)
            if duration is not None and not duration > 0:
                errors.append(('/duration_us', 'must be > 0'))

        if kind in ('decay', 'tomo') and initial_state is None:
            errors.append(('/initial_state', f'required for kind {kind!r}'))
        if kind == 'decay' and duration is None:
            errors.append(('/duration_us', "required for kind 'decay'"))

        integrator = _section(IntegratorConfig, data, 'integrator', errors)
        det_raw = data.get('detection') or {}
        if not isinstance(det_raw, Mapping):
            errors.append(('/detection', 'expected an object'))
            det_raw = {}
        det_raw = dict(det_raw)
        n_shots = det_raw.pop('n_shots', DEFAULT_TOMO_SHOTS if kind == 'tomo' else 0)
        if isinstance(n_shots, bool) or not isinstance(n_shots, int) or n_shots < 0:
            errors.append(('/detection/n_shots', 'must be a non-negative integer'))
            n_shots = 0
        detection = _section(DetectionConfig, {'detection': det_raw}, 'detection', errors)
        if (kind == 'decay' and n_shots > 0 and integrator is not None and detection is not None
                and not math.isclose(integrator.sample_dt, detection.sample_dt, rel_tol=1e-12)):
            errors.append(('/detection/sample_dt', 'must equal integrator.sample_dt for detected decay traces'))

        spectrum = _section(SpectrumSettings, data, 'spectrum', errors)
        if spectrum is not None:
            if str(spectrum.qubit).upper() not in QUBITS + ('AB',):
                errors.append(('/spectrum/qubit', "must be 'A', 'B' or 'AB'"))
            if not spectrum.scan_max_mhz > spectrum.scan_min_mhz:
                errors.append(('/spectrum/scan_max_mhz', 'must exceed scan_min_mhz'))
            if not isinstance(spectrum.n_points, int) or spectrum.n_points < 3:
                errors.append(('/spectrum/n_points', 'must be an integer >= 3'))
        tomo = _section(TomoSettings, data, 'tomo', errors)
        reports = _section(ReportFlags, data, 'reports', errors)

        scale_s = data.get('scale_s')
        if scale_s is not None:
            scale_s = _number(data, 'scale_s', None, errors)
            if scale_s is not None and not scale_s > 0:
                errors.append(('/scale_s', 'must be > 0'))
        measured = data.get('measured')
        if measured is not None and not isinstance(measured, str):
            errors.append(('/measured', 'must be a file path'))

        sweep = data.get('sweep')
        if sweep is not None:
            if (not isinstance(sweep, Mapping) or not isinstance(sweep.get('field'), str)
                    or not isinstance(sweep.get('values'), list) or not sweep.get('values')):
                errors.append(('/sweep', "needs a 'field' string and a non-empty 'values' list"))
            else:
                sweep = {'field': sweep['field'], 'values': list(sweep['values'])}

        if errors:
            raise ValidationError("Invalid experiment config", errors)

        return cls(kind=kind, params=params, name=str(data.get('name') or kind), param_set=param_set,
                   detuning_mhz=detuning, initial_state=initial_state, duration_us=duration,
                   integrator=integrator, detection=detection, n_shots=n_shots, spectrum=spectrum,
                   tomo=tomo, scale_s=scale_s, measured=measured, reports=reports, sweep=sweep,
                   source=copy.deepcopy(dict(data)))


def _number(data: Mapping[str, Any], key: str, default, errors: List[Tuple[str, str]]):
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        errors.append((f'/{key}', 'must be a finite number'))
        return default
    return float(value)


def _section(cls, data: Mapping[str, Any], key: str, errors: List[Tuple[str, str]]):
    raw = data.get(key) or {}
    if not isinstance(raw, Mapping):
        errors.append((f'/{key}', 'expected an object'))
        return None
    try:
        return cls(**raw)
    except TypeError as e:
        errors.append((f'/{key}', f'unknown or malformed field: {e}'))
    except ValidationError as e:
        errors.extend(e.errors or [(f'/{key}', str(e))])
    return None


def _parse_initial_state(raw, errors: List[Tuple[str, str]]):
    if raw is None:
        return None
    if isinstance(raw, str):
        if raw not in NAMED_STATES:
            errors.append(('/initial_state', f"must be one of {', '.join(NAMED_STATES)}"))
            return None
        return raw
    if isinstance(raw, list):
        rotations = []
        for i, item in enumerate(raw):
            if not isinstance(item, Mapping) or 'qubit' not in item or 'theta' not in item:
                errors.append((f'/initial_state/{i}', "needs 'qubit' and 'theta'"))
                continue
            try:
                rotations.append(Rotation(str(item['qubit']).upper(), float(item['theta']),
                                          float(item.get('phi', 0.0))))
            except (TypeError, ValueError):
                errors.append((f'/initial_state/{i}', 'theta and phi must be numbers'))
        try:
            two_qubit_state(rotations)
        except ValidationError as e:
            errors.append(('/initial_state', str(e)))
        return rotations
    errors.append(('/initial_state', 'must be a state name or a list of rotations'))
    return None


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a raw JSON experiment config."""
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ValidationError(f"Config file not found: {path}", [('', 'file not found')])
    except json.JSONDecodeError as e:
        raise ValidationError(f"Config file {path} is not valid JSON", [('', f'line {e.lineno}: {e.msg}')])
    if not isinstance(data, dict):
        raise ValidationError(f"Config file {path} must hold a JSON object", [('', 'expected an object')])
    return data


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_dotted(data: Dict[str, Any], key: str, value: Any) -> Dict[str, Any]:
    """Set `a.b.c` inside nested dicts, creating sections as needed."""
    parts = key.split('.')
    if not all(parts):
        raise ValidationError(f"Invalid override key {key!r}", [('/' + key.replace('.', '/'), 'empty path segment')])
    node = data
    for i, part in enumerate(parts[:-1]):
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ValidationError(f"Cannot override {key!r}",
                                  [('/' + '/'.join(parts[:i + 1]), 'not an object')])
        node = child
    node[parts[-1]] = value
    return data


def apply_overrides(data: Mapping[str, Any], overrides: Union[Sequence[str], Mapping[str, Any]]) -> Dict[str, Any]:
    """
    Apply `key=value` overrides (or a mapping) to a raw config.

    Values are parsed as JSON and fall back to plain strings; dotted keys
    reach nested sections.
    """
    result = copy.deepcopy(dict(data))
    if isinstance(overrides, Mapping):
        items = list(overrides.items())
    else:
        items = []
        for item in overrides:
            key, sep, value = str(item).partition('=')
            if not sep or not key.strip():
                raise ValidationError(f"Override {item!r} is not of the form key=value",
                                      [('', f'bad override {item!r}')])
            items.append((key.strip(), _parse_value(value.strip())))
    for key, value in items:
        set_dotted(result, key, value)
    return result


def fit_scale(measured: TimeTrace, model: TimeTrace, label: str = 'flux') -> float:
    """Least-squares s minimizing sum (measured - s * model)^2 on a common grid."""
    if measured.t.shape != model.t.shape or not np.allclose(measured.t, model.t, rtol=1e-9, atol=1e-12):
        raise ValidationError("fit_scale needs measured and model traces on a common time grid")
    y = np.real(model[label])
    denom = float(np.dot(y, y))
    if denom == 0.0:
        raise ValidationError("Cannot fit a scale factor to an all-zero model trace")
    return float(np.dot(np.real(measured[label]), y) / denom)


def normalization_constant(measured_single: TimeTrace, expected_photons: float, label: str = 'flux') -> float:
    """
    Constant that turns the measured mean individual decay into `expected_photons`.

    Every measured trace of the same calibration is divided by this value.
    """
    if not expected_photons > 0:
        raise ValidationError("Expected photon number must be > 0")
    integral = emitted_photons(measured_single, label)
    if not integral > 0:
        raise ValidationError("Measured single-qubit trace integrates to zero or less")
    return integral / expected_photons


@dataclass
class RunResult:
    """Summary values and the artifacts a run wrote."""
    kind: str
    out_dir: Path
    summary: Dict[str, Any]
    artifacts: List[Path]
    manifest: Path


def _write_reports(cfg: ExperimentConfig, out: Path, header, columns, summary, x_label, series) -> List[Path]:
    written = []
    if not (cfg.reports.xlsx or cfg.reports.pdf or cfg.reports.png):
        return written
    png = plot_columns(columns[0], series, title=cfg.name, x_label=x_label) if (cfg.reports.png or cfg.reports.pdf) else None
    if cfg.reports.png:
        written.append(write_png(out / f'{cfg.kind}.png', png))
    if cfg.reports.xlsx:
        written.append(write_xlsx(out / f'{cfg.kind}.xlsx', header, columns, summary))
    if cfg.reports.pdf:
        written.append(write_pdf_summary(out / f'{cfg.kind}.pdf', cfg.name, summary, png))
    return written


def _run_spectrum(cfg: ExperimentConfig, out: Path) -> Tuple[Dict[str, Any], List[Path]]:
    s = cfg.spectrum
    qubit = str(s.qubit).upper()
    probe_mhz = np.linspace(s.scan_min_mhz, s.scan_max_mhz, int(s.n_points))
    amp = transmission(mhz(1.0) * probe_mhz, cfg.params, qubit)
    power = np.abs(amp) ** 2
    phase = np.angle(amp)

    metrics = extract_dip_metrics(mhz(1.0) * probe_mhz, amp)
    summary: Dict[str, Any] = {
        'qubit': qubit,
        'extracted_depth': metrics.depth,
        'extracted_fwhm_mhz': to_mhz(metrics.fwhm),
        'dip_center_mhz': to_mhz(metrics.center),
        'purcell_rate_mhz': {q: to_mhz(qubit_purcell_rate(cfg.params, q)) for q in QUBITS},
    }
    if qubit != 'AB':
        narrow, broad = vacuum_rabi_doublet(cfg.params, qubit)
        summary.update({
            'dip_depth': dip_depth(cfg.params, qubit),
            'dip_width_mhz': to_mhz(dip_width(cfg.params, qubit)),
            'doublet_mhz': [{'frequency': to_mhz(m.frequency), 'decay_rate': to_mhz(m.decay_rate)}
                            for m in (narrow, broad)],
        })
    header = ['probe_detuning_mhz', 'transmittance', 'phase_rad']
    columns = [probe_mhz, power, phase]
    artifacts = [write_csv(out / 'spectrum.csv', header, columns)]
    artifacts += _write_reports(cfg, out, header, columns, summary, 'probe detuning (MHz)',
                                {'|t|^2': power})
    logger.info(f"Spectrum {qubit}: depth {metrics.depth:.4f}, FWHM {to_mhz(metrics.fwhm):.4f} MHz")
    return summary, artifacts


def _two_qubit_initial(cfg: ExperimentConfig):
    if isinstance(cfg.initial_state, list):
        return two_qubit_state(cfg.initial_state)
    return named_two_qubit_state(cfg.initial_state)


def _analytic_decay(cfg: ExperimentConfig, t: np.ndarray) -> np.ndarray:
    """Closed-form law for the named cases, the rate-equation model otherwise."""
    p = cfg.params
    label = cfg.state_label
    case = STATE_DECAY_CASES.get(label)
    if case is DecayCase.SINGLE_QUBIT:
        return decay_power(case, qubit_purcell_rate(p, label[-1]), t)
    if case is not None:
        return decay_power(case, mean_purcell_rate(p), t)
    p_ee, p_bright, p_dark = coupled_populations(_two_qubit_initial(cfg))
    return rate_equation_power(p_ee, p_bright, p_dark, mean_purcell_rate(p), t)


def _measured_columns(cfg: ExperimentConfig, t: np.ndarray, p_me: np.ndarray,
                      summary: Dict[str, Any]) -> Dict[str, np.ndarray]:
    data = read_csv_columns(cfg.measured)
    if 't_us' not in data or 'p' not in data:
        raise ValidationError("Measured trace needs columns t_us and p", [('/measured', 'missing t_us or p column')])
    order = np.argsort(data['t_us'])
    tm = data['t_us'][order]
    if t[0] < tm[0] - 1e-12 or t[-1] > tm[-1] + 1e-12:
        raise ValidationError("Measured trace does not cover the simulated window",
                              [('/measured', 'time range too short')])
    norm = 1.0
    if 'p_single' in data:
        single = TimeTrace(t, {'flux': np.interp(t, tm, data['p_single'][order])})
        norm = normalization_constant(single, float(trapezoid(mean_single_power(cfg.params, t), t)))
    measured = np.interp(t, tm, data['p'][order]) / norm
    summary['normalization_constant'] = norm
    summary['fitted_scale_s'] = fit_scale(TimeTrace(t, {'flux': measured}), TimeTrace(t, {'flux': p_me}))
    return {'p_measured': measured}


def _run_decay(cfg: ExperimentConfig, out: Path) -> Tuple[Dict[str, Any], List[Path]]:
    p = cfg.params
    prep = cfg.initial_state if isinstance(cfg.initial_state, list) else None
    schedule = decay_schedule(p, cfg.state_label, cfg.duration_us, prep)
    psi0 = prepare_state(schedule.prep, int(p.n_max), two_qubit=schedule.initial_state)
    observables = {'a': system_operators(int(p.n_max))['a']}
    trace, _ = evolve(ket_to_dm(psi0), schedule, p, cfg.integrator, observables)

    t = trace.t
    p_me = np.real(trace['flux'])
    p_analytic = _analytic_decay(cfg, t)
    p_single = mean_single_power(p, t)
    tail = flux_tail_fraction(trace)
    summary: Dict[str, Any] = {
        'initial_state': cfg.state_label,
        'emitted_photons': emitted_photons(trace),
        'emitted_photons_analytic': float(trapezoid(p_analytic, t)),
        'flux_tail_fraction': tail,
        'emission_converged': tail <= TAIL_FRACTION,
        'mean_purcell_rate_mhz': to_mhz(mean_purcell_rate(p)),
        'trace_deviation': trace.metadata['trace_deviation'],
        'min_eigenvalue': trace.metadata['min_eigenvalue'],
    }
    header = ['t_us', 'p_me', 'p_analytic', 'delta_p', 'p_mean_single']
    columns = [t, p_me, p_analytic, delta_power(p_me, p_single), p_single]

    if cfg.n_shots > 0:
        sig = synthesize_time_records(trace, cfg.n_shots, cfg.detection, p.kappa, 'signal')
        off = synthesize_time_records(trace, cfg.n_shots, cfg.detection, p.kappa, 'off')
        detected = power_trace(sig, off)
        header += ['p_detected', 'p_detected_sem']
        columns += [detected['flux'], detected['flux_sem']]
        summary['emitted_photons_detected'] = float(trapezoid(detected['flux'], t))

    if cfg.measured:
        extra = _measured_columns(cfg, t, p_me, summary)
        header += list(extra)
        columns += list(extra.values())

    scale = cfg.scale_s if cfg.scale_s is not None else summary.get('fitted_scale_s')
    if scale is not None:
        summary['scale_s'] = scale
        header += ['p_me_scaled', 'p_analytic_scaled']
        columns += [scale * p_me, scale * p_analytic]

    artifacts = [write_csv(out / 'decay.csv', header, columns)]
    artifacts += _write_reports(cfg, out, header, columns, summary, 't (us)',
                                {'master equation': p_me, 'analytic': p_analytic})
    logger.info(f"Decay {cfg.state_label}: {summary['emitted_photons']:.4f} photons emitted")
    return summary, artifacts


def _run_tomo(cfg: ExperimentConfig, out: Path) -> Tuple[Dict[str, Any], List[Path]]:
    alpha, delta, beta, gamma = coupled_basis_decompose(_two_qubit_initial(cfg))
    n_max = max(int(cfg.tomo.n_max), 2)
    target = output_field_state(alpha, delta, beta, gamma, n_max=n_max)

    sig = synthesize_single_mode_records(target, cfg.n_shots, cfg.detection, 'signal')
    vacuum = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    vacuum[0, 0] = 1.0
    off = synthesize_single_mode_records(DensityMatrix(vacuum, (n_max + 1,)), cfg.n_shots, cfg.detection, 'off')

    raw = estimate_raw_moments(sig, cfg.tomo.max_order)
    noise = estimate_raw_moments(off, cfg.tomo.max_order)
    moments = deconvolve_noise(raw, noise)
    result = reconstruct(moments, cfg.tomo.n_max)

    dim = result.rho.dim
    padded = np.zeros((dim, dim), dtype=complex)
    k = min(dim, target.dim)
    padded[:k, :k] = target.elements[:k, :k]
    target_rho = DensityMatrix(padded / np.trace(padded), (dim,))
    f = fidelity(result.rho, target_rho)
    photons = float(np.real(np.sum(np.arange(dim) * np.diag(result.rho.elements))))

    summary = {
        'initial_state': cfg.state_label,
        'fidelity': f,
        'purity': result.rho.purity(),
        'mean_photon_number': photons,
        'residual': result.residual,
        'iterations': result.iterations,
        'converged': result.converged,
        'termination': result.termination,
    }
    rho_path = write_json({**result.to_dict(), 'target': target_rho.elements, 'fidelity': f}, out / 'rho.json')
    artifacts = [rho_path, export_json(moments, out / 'moments.json')]
    populations = np.real(np.diag(result.rho.elements))
    header = ['n', 'p_reconstructed', 'p_target']
    columns = [np.arange(dim), populations, np.real(np.diag(target_rho.elements))]
    artifacts += _write_reports(cfg, out, header, columns, summary, 'photon number',
                                {'reconstructed': populations, 'target': columns[2]})
    logger.info(f"Tomography {cfg.state_label}: fidelity {f:.4f}")
    return summary, artifacts


_RUNNERS = {'spectrum': _run_spectrum, 'decay': _run_decay, 'tomo': _run_tomo}


def run(config: Union[ExperimentConfig, Mapping[str, Any]], out_dir: Union[str, Path]) -> RunResult:
    """
    Execute one experiment and write its artifacts.

    Args:
        config: ExperimentConfig or raw config mapping
        out_dir: Output directory (created if missing)

    Returns:
        RunResult with the summary, the artifacts and the manifest path
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExportError(f"Creating output directory {out} failed: {e}")

    logger.info(f"Running {cfg.kind} experiment {cfg.name!r} into {out}")
    summary, artifacts = _RUNNERS[cfg.kind](cfg, out)
    artifacts.append(write_json(summary, out / 'summary.json'))

    manifest = {
        'schema_version': SCHEMA_VERSION,
        'dicke_sim_version': __version__,
        'kind': cfg.kind,
        'seed': cfg.seed,
        'resolved_config': cfg.to_dict(),
        'artifacts': [{'path': path.name, 'sha256': sha256_file(path)} for path in artifacts],
    }
    manifest_path = write_json(manifest, out / 'manifest.json')
    return RunResult(cfg.kind, out, summary, artifacts, manifest_path)


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, ValidationError):
        return 2
    if isinstance(error, ConvergenceError):
        return 3
    return 1


def run_sweep(config: ExperimentConfig, out_dir: Union[str, Path]) -> Dict[str, Any]:
    """
    Fan one isolated run per sweep value out over the worker pool.

    Each run writes into its own `run_NNN` directory; the merged
    `index.json` lists value, status and summary per run.
    """
    if not config.sweep:
        raise ValidationError("Config has no sweep section", [('/sweep', 'missing')])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    key = config.sweep['field']
    base = {k: v for k, v in config.source.items() if k != 'sweep'}

    def one(item):
        index, value = item
        run_dir = out / f'run_{index:03d}'
        entry = {'index': index, 'value': value, 'out_dir': run_dir.name}
        try:
            result = run(apply_overrides(base, {key: value}), run_dir)
            entry.update(status='completed', exit_code=0, summary=result.summary)
        except DickeSimError as e:
            logger.error(f"Sweep run {index} ({key}={value!r}) failed: {e}")
            entry.update(status='failed', exit_code=exit_code_for(e), error=str(e))
        return entry

    entries = run_parallel(one, list(enumerate(config.sweep['values'])))
    index = {'schema_version': SCHEMA_VERSION, 'field': key, 'runs': entries}
    write_json(index, out / 'index.json')
    return index
