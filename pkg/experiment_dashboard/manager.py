import json
import logging
from pathlib import Path

from flask import current_app

from config import db
from dicke_sim.exceptions import DickeSimError, ValidationError
from dicke_sim.exporters import dumps_json, plot_columns, plot_data_uri, read_csv_columns
from dicke_sim.runner import ExperimentConfig, apply_overrides, exit_code_for, run
from .models import ExperimentRun

logger = logging.getLogger(__name__)

SETTINGS_DIR = Path('settings')
PRESETS_DIR = SETTINGS_DIR / 'experiments'
OUTPUT_DIR = Path('runs')

PLOT_COLUMNS = {
    'decay': ('decay.csv', 't_us', ('p_me', 'p_analytic'), 't (us)'),
    'spectrum': ('spectrum.csv', 'probe_detuning_mhz', ('transmittance',), 'probe detuning (MHz)'),
}


class ExperimentManager:
    """Runs experiment configs through dicke_sim and records the outcome."""

    @property
    def presets_dir(self) -> Path:
        return Path(current_app.config.get('EXPERIMENT_PRESETS_DIR', PRESETS_DIR))

    @property
    def output_dir(self) -> Path:
        return Path(current_app.config.get('EXPERIMENT_OUTPUT_DIR', OUTPUT_DIR))

    def list_presets(self):
        presets = []
        if not self.presets_dir.exists():
            return presets
        for path in sorted(self.presets_dir.glob('*.json')):
            try:
                with open(path) as f:
                    data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                logger.warning(f"Skipping unreadable preset {path}: {e}")
                continue
            presets.append({'id': path.stem, 'name': data.get('name', path.stem), 'kind': data.get('kind')})
        return presets

    def load_preset(self, preset_id):
        path = self.presets_dir / f'{preset_id}.json'
        if Path(preset_id).name != preset_id or not path.exists():
            raise ValidationError(f"Unknown preset {preset_id!r}", [('/preset', 'not found')])
        with open(path) as f:
            return json.load(f)

    def submit(self, preset=None, config=None, overrides=None):
        """
        Validate and run a config, storing the run record.

        Validation errors are raised before anything is stored; failures
        during the run are recorded on the run and re-raised.
        """
        if (preset is None) == (config is None):
            raise ValidationError("Give exactly one of 'preset' or 'config'", [('', 'preset or config required')])
        data = self.load_preset(preset) if preset is not None else config
        if not isinstance(data, dict):
            raise ValidationError("Config must be a JSON object", [('/config', 'expected an object')])
        data = apply_overrides(data, overrides or {})
        experiment = ExperimentConfig.from_dict(data)

        record = ExperimentRun(name=experiment.name, kind=experiment.kind, status='running',
                               config_json=dumps_json(experiment.to_dict()))
        db.session.add(record)
        db.session.commit()

        out_dir = self.output_dir / f'run_{record.id:04d}'
        record.out_dir = str(out_dir)
        try:
            result = run(experiment, out_dir)
            record.status = 'completed'
            record.exit_code = 0
            record.summary_json = dumps_json(result.summary)
        except DickeSimError as e:
            record.status = 'failed'
            record.exit_code = exit_code_for(e)
            record.error = str(e)
            db.session.commit()
            logger.error(f"Run {record.id} failed: {e}")
            raise
        db.session.commit()
        return record

    def get_run(self, run_id):
        return db.session.get(ExperimentRun, run_id)

    def get_runs(self):
        return ExperimentRun.query.order_by(ExperimentRun.id.desc()).all()

    def render_plot(self, record):
        """Base64 PNG of a completed decay or spectrum run."""
        spec = PLOT_COLUMNS.get(record.kind)
        if spec is None or record.status != 'completed':
            return None
        filename, x_name, y_names, x_label = spec
        data = read_csv_columns(Path(record.out_dir) / filename)
        png = plot_columns(data[x_name], {name: data[name] for name in y_names},
                           title=record.name, x_label=x_label)
        return plot_data_uri(png)
