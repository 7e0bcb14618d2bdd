import json

from config import db


class ExperimentRun(db.Model):
    __tablename__ = 'experiment_runs'

    id = db.Column(db.Integer, primary_key=True)
    name = db.Column(db.String(100), nullable=False)
    kind = db.Column(db.String(20), nullable=False)  # spectrum, decay, tomo
    status = db.Column(db.String(20), nullable=False, default='running')  # running, completed, failed
    exit_code = db.Column(db.Integer)
    out_dir = db.Column(db.String(255))
    config_json = db.Column(db.Text, nullable=False)
    summary_json = db.Column(db.Text)
    error = db.Column(db.Text)
    created_at = db.Column(db.DateTime, default=db.func.current_timestamp())

    def __repr__(self):
        return f'<ExperimentRun {self.id} {self.kind} {self.status}>'

    def to_dict(self):
        return {
            'id': self.id,
            'name': self.name,
            'kind': self.kind,
            'status': self.status,
            'exit_code': self.exit_code,
            'out_dir': self.out_dir,
            'config': json.loads(self.config_json) if self.config_json else None,
            'summary': json.loads(self.summary_json) if self.summary_json else None,
            'error': self.error,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }
