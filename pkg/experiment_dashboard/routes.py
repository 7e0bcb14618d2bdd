from flask import abort, jsonify, render_template_string, request

from dicke_sim.exceptions import ConvergenceError, DickeSimError, ValidationError
from . import experiment_dashboard_bp
from .manager import ExperimentManager

manager = ExperimentManager()

INDEX_TEMPLATE = """<!DOCTYPE html>
<html>
<head>
    <title>Experiment Runs</title>
    <style>
        body { font-family: Arial, sans-serif; margin: 20px; }
        table { border-collapse: collapse; }
        td, th { border: 1px solid #ccc; padding: 4px 8px; }
    </style>
</head>
<body>
    <h1>Experiment Runs</h1>
    <h2>Presets</h2>
    <ul>
    {% for preset in presets %}
        <li>{{ preset.name }} ({{ preset.kind }}) - <code>{{ preset.id }}</code></li>
    {% else %}
        <li>No presets found</li>
    {% endfor %}
    </ul>
    <h2>Runs</h2>
    <table>
        <tr><th>ID</th><th>Name</th><th>Kind</th><th>Status</th><th>Exit code</th></tr>
        {% for run in runs %}
        <tr>
            <td><a href="{{ url_for('ExperimentDashboard.get_run', run_id=run.id) }}">{{ run.id }}</a></td>
            <td>{{ run.name }}</td><td>{{ run.kind }}</td><td>{{ run.status }}</td><td>{{ run.exit_code }}</td>
        </tr>
        {% endfor %}
    </table>
</body>
</html>
"""


@experiment_dashboard_bp.route('/')
def index():
    return render_template_string(INDEX_TEMPLATE, presets=manager.list_presets(), runs=manager.get_runs())


@experiment_dashboard_bp.route('/presets')
def presets():
    return jsonify(manager.list_presets())


@experiment_dashboard_bp.route('/runs', methods=['POST'])
def submit_run():
    body = request.get_json(silent=True)
    if not isinstance(body, dict):
        return jsonify({'error': 'Request body must be a JSON object', 'errors': []}), 400
    try:
        record = manager.submit(preset=body.get('preset'), config=body.get('config'),
                                overrides=body.get('overrides'))
    except ValidationError as e:
        return jsonify({'error': str(e),
                        'errors': [{'pointer': p, 'message': m} for p, m in e.errors]}), 400
    except ConvergenceError as e:
        return jsonify({'error': str(e), 'residual': e.residual, 'time_stamp': e.time_stamp}), 422
    except DickeSimError as e:
        return jsonify({'error': f'Run failed: {e}'}), 500
    return jsonify(record.to_dict()), 201


@experiment_dashboard_bp.route('/runs/<int:run_id>')
def get_run(run_id):
    record = manager.get_run(run_id)
    if record is None:
        abort(404)
    return jsonify(record.to_dict())


@experiment_dashboard_bp.route('/runs/<int:run_id>/plot')
def run_plot(run_id):
    record = manager.get_run(run_id)
    if record is None:
        abort(404)
    try:
        image = manager.render_plot(record)
    except DickeSimError as e:
        return jsonify({'error': f'Plot failed: {e}'}), 500
    if image is None:
        return jsonify({'error': f'No plot for a {record.status} {record.kind} run'}), 404
    return jsonify({'image': image})
