from flask_sqlalchemy import SQLAlchemy
from datetime import datetime
import json

db = SQLAlchemy()


class ScenarioRun(db.Model):
    """One execution of a scenario and how it ended."""

    __tablename__ = 'scenario_runs'

    id = db.Column(db.Integer, primary_key=True)
    scenario = db.Column(db.String(100), nullable=False, index=True)
    flow = db.Column(db.String(20), nullable=False)
    seed = db.Column(db.Integer, nullable=False)
    status = db.Column(db.String(20), nullable=False, default='done')  # done | gave_up | failed
    exit_code = db.Column(db.Integer, nullable=False, default=0)
    out_arg = db.Column(db.Text, nullable=True)
    message = db.Column(db.Text, nullable=True)
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    events = db.relationship('RunEvent', backref='run', lazy=True, order_by='RunEvent.sequence',
                             cascade='all, delete-orphan')

    def to_dict(self):
        return {
            'id': self.id,
            'scenario': self.scenario,
            'flow': self.flow,
            'seed': self.seed,
            'status': self.status,
            'exit_code': self.exit_code,
            'out_arg': self.out_arg,
            'message': self.message,
            'created_at': self.created_at.isoformat() if self.created_at else None
        }


class RunEvent(db.Model):
    """A single entry of a run record: behavior, inference step, dialogue turn or KB update."""

    __tablename__ = 'run_events'

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.Integer, db.ForeignKey('scenario_runs.id'), nullable=False, index=True)
    sequence = db.Column(db.Integer, nullable=False)
    kind = db.Column(db.String(40), nullable=False, index=True)
    payload = db.Column(db.Text, nullable=True)  # JSON string
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def to_dict(self):
        payload = {}
        if self.payload:
            try:
                payload = json.loads(self.payload)
            except json.JSONDecodeError:
                payload = {'raw': self.payload}
        return {'run_id': self.run_id, 'sequence': self.sequence, 'kind': self.kind, **payload}
