from flask import Blueprint

experiment_dashboard_bp = Blueprint(
    'ExperimentDashboard',
    __name__,
)

from . import routes  # noqa: E402,F401
