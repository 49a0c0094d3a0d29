"""
Scenario commands for the service robot engine.
This module contains the run and trace-check entry points.
"""

import logging
import sys
from pathlib import Path

import click
from flask import current_app
from flask.cli import with_appcontext

from servicebot.errors import ServiceBotError, TermSyntaxError
from servicebot.services.scenario_service import EXIT_LOAD_ERROR, ScenarioService
from servicebot.utils.terms import parse_term
from servicebot.utils.trace import TraceRenderer

logger = logging.getLogger(__name__)


def _prompt_reply(question):
    """Read one user reply from the terminal as (term, text); an empty line means no reply."""
    while True:
        text = click.prompt(f"[{question}]", default="", show_default=False).strip()
        if not text:
            return None
        try:
            return parse_term(text), text
        except TermSyntaxError as e:
            click.echo(f"Could not read that reply: {e.message}", err=True)


def _prompt_commands():
    """Read commands until an empty line."""
    commands = []
    while True:
        text = click.prompt("command", default="", show_default=False).strip()
        if not text:
            return commands
        try:
            commands.append(parse_term(text))
        except TermSyntaxError as e:
            click.echo(f"Could not read that command: {e.message}", err=True)


@click.command("run")
@with_appcontext
@click.option("--scenario", "scenario_name", required=True, help="Scenario file or shipped scenario name")
@click.option("--program", "programs", multiple=True, help="SitLog program; repeat for several")
@click.option("--kb", "kb_name", help="KB file, overrides the scenario's")
@click.option("--cost-model", "cost_model_name", help="Cost model file, overrides the scenario's")
@click.option("--seed", type=int, help="Seed for the diagnosis distribution")
@click.option("--interactive", is_flag=True, help="Type the user's replies instead of reading the script")
@click.option("--trace-out", type=click.Path(dir_okay=False), help="Where to write the SitLog trace")
@click.option("--record-out", type=click.Path(dir_okay=False), help="Where to write the JSON-lines run record")
@click.option("--golden", type=click.Path(dir_okay=False), help="Golden trace the run's trace must match")
def run_command(scenario_name, programs, kb_name, cost_model_name, seed, interactive, trace_out, record_out,
                golden):
    """Run a scenario end to end."""
    config = current_app.config
    try:
        loaded = ScenarioService.load(
            scenario_name,
            config["DATA_DIR"],
            program_names=list(programs) or None,
            kb_name=kb_name,
            cost_model_name=cost_model_name,
            seed=seed,
            default_seed=config["DEFAULT_SEED"],
            default_hand=config["PREFERRED_HAND"],
        )
    except ServiceBotError as e:
        logger.error(f"Could not load scenario {scenario_name}: {e}")
        click.echo(str(e), err=True)
        sys.exit(EXIT_LOAD_ERROR)
    except OSError as e:
        logger.error(f"Could not read scenario files: {e}")
        click.echo(f"{e.filename}: {e.strerror}", err=True)
        sys.exit(EXIT_LOAD_ERROR)

    replies = _prompt_reply if interactive else None
    commands = None
    if interactive and loaded.scenario.flow != "home" and not loaded.scenario.commands:
        commands = _prompt_commands()

    try:
        outcome = ScenarioService.run(
            loaded,
            replies=replies,
            commands=commands,
            maximize=config["DECISION_MODE"] != "minimize",
            max_cycles=config["MAX_INFERENCE_CYCLES"],
        )
    except Exception as e:
        logger.error(f"Unexpected error while running {scenario_name}: {e}")
        logger.debug("Run failed", exc_info=True)
        click.echo(f"{scenario_name}: internal error: {e}", err=True)
        sys.exit(EXIT_LOAD_ERROR)

    if config["PERSIST_RUNS"]:
        ScenarioService.persist(outcome)

    for line in outcome.dialogue.transcript:
        click.echo(f"{line.speaker}: {line.text}")
    if outcome.out_arg is not None:
        click.echo(f"Out Arg: {outcome.to_dict()['out_arg']}")
    if outcome.message:
        click.echo(outcome.message, err=True)

    if trace_out:
        ScenarioService.write_trace(outcome, trace_out)
    if record_out:
        ScenarioService.write_record(outcome, record_out)
    if golden:
        golden_path = ScenarioService.resolve_path("golden", golden, config["DATA_DIR"])
        same, difference = TraceRenderer.compare(outcome.trace_text(), golden_path.read_text(encoding="utf-8"))
        if not same:
            click.echo(f"{golden_path}: trace differs: {difference}", err=True)
            sys.exit(EXIT_LOAD_ERROR)

    click.echo(f"Run {outcome.run_id or '-'}: {outcome.status}")
    sys.exit(outcome.exit_code)


@click.command("trace-check")
@with_appcontext
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
@click.argument("golden")
def trace_check_command(trace, golden):
    """Compare a trace file against a golden trace."""
    golden_path = ScenarioService.resolve_path("golden", golden, current_app.config["DATA_DIR"])
    if not golden_path.exists():
        click.echo(f"{golden_path}: golden trace not found", err=True)
        sys.exit(EXIT_LOAD_ERROR)
    same, difference = TraceRenderer.compare(
        Path(trace).read_text(encoding="utf-8"), golden_path.read_text(encoding="utf-8"))
    if same:
        click.echo("Trace matches")
        return
    click.echo(f"{trace}: {difference}", err=True)
    sys.exit(1)
