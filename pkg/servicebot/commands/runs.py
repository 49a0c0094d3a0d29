"""
Run store commands for the service robot engine.
This module lists stored scenario runs and prints their records.
"""

import json
import logging

import click
from flask.cli import with_appcontext

from servicebot.models import ScenarioRun, db

logger = logging.getLogger(__name__)


@click.group("runs")
def runs_group():
    """Inspect stored scenario runs."""


@runs_group.command("list")
@with_appcontext
@click.option("--scenario", help="Only runs of this scenario")
@click.option("--limit", type=int, default=20, show_default=True)
def list_runs(scenario, limit):
    """List stored runs, newest first."""
    query = ScenarioRun.query
    if scenario:
        query = query.filter_by(scenario=scenario)
    runs = query.order_by(ScenarioRun.id.desc()).limit(limit).all()
    if not runs:
        click.echo("No stored runs")
        return
    for run in runs:
        click.echo(f"{run.id}\t{run.scenario}\t{run.flow}\tseed={run.seed}\t{run.status}\t{run.created_at:%Y-%m-%d %H:%M:%S}")


@runs_group.command("show")
@with_appcontext
@click.argument("run_id", type=int)
def show_run(run_id):
    """Print one run's events as JSON lines."""
    run = db.session.get(ScenarioRun, run_id)
    if run is None:
        click.echo(f"No run with id {run_id}", err=True)
        raise SystemExit(1)
    click.echo(json.dumps(run.to_dict()))
    for event in run.events:
        click.echo(json.dumps(event.to_dict()))
