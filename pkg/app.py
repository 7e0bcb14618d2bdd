from flask import Flask
from config import db


def create_app(test_config=None):
    app = Flask(__name__)
    app.secret_key = 'change-me'
    app.config['SQLALCHEMY_DATABASE_URI'] = 'sqlite:///experiments.db'
    app.config['SQLALCHEMY_TRACK_MODIFICATIONS'] = False
    app.config['EXPERIMENT_PRESETS_DIR'] = 'settings/experiments'
    app.config['EXPERIMENT_OUTPUT_DIR'] = 'runs'
    if test_config:
        app.config.update(test_config)

    db.init_app(app)

    from experiment_dashboard import experiment_dashboard_bp
    app.register_blueprint(experiment_dashboard_bp, url_prefix='/experiments')

    with app.app_context():
        db.create_all()

    @app.route('/')
    def index():
        return '<h1>Superradiance Lab</h1><p><a href="/experiments/">Experiment runs</a></p>'

    return app


if __name__ == '__main__':
    app = create_app()
    print("Starting Flask app...")
    print("App will be available at:")
    print("  - Local: http://127.0.0.1:8081/")
    print("  - Runs: http://127.0.0.1:8081/experiments/")
    app.run(host='0.0.0.0', port=8081, debug=True)
