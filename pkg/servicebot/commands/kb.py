"""
KB commands for the service robot engine.
This module contains the query REPL over a loaded knowledge base.
"""

import logging

import click
from flask import current_app
from flask.cli import with_appcontext

from servicebot.errors import ServiceBotError
from servicebot.services.kb_service import KBService, KBStore
from servicebot.services.scenario_service import EXIT_LOAD_ERROR, ScenarioService
from servicebot.utils.terms import parse_term, print_term

logger = logging.getLogger(__name__)

EXTENSIONS = ("class", "property", "relation", "explanation")
PROFILES = ("classes", "properties", "relations", "explanations")
UPDATES = ("add_class", "remove_class", "add_individual", "remove_individual", "assert_clause",
           "retract_clause", "set_value")

HELP = """\
ask SUBJECT LITERAL          yes, no or unknown
class CLASS                  individuals of a class
property|relation LITERAL    individuals holding a property or relation
explanation LITERAL          individuals with an explanation for LITERAL
classes|properties|relations|explanations INDIVIDUAL
closure SUBJECT              everything that holds for SUBJECT
preferred SUBJECT ATTRIBUTE  values of ATTRIBUTE, most preferred first
explain SUBJECT ATTRIBUTE    why SUBJECT has its value of ATTRIBUTE
abduce SUBJECT LITERAL       most preferred explanation of an observation
update OPERATION PAYLOAD     add_class, remove_class, add_individual, remove_individual,
                             assert_clause, retract_clause or set_value
dump                         the KB in file format
help | quit"""


def _show(value):
    if isinstance(value, (set, frozenset)):
        return ", ".join(sorted(value)) or "none"
    if isinstance(value, dict):
        return "\n".join(f"{k}: {v}" for k, v in sorted(value.items())) or "none"
    if isinstance(value, (list, tuple)):
        return "\n".join(str(v) for v in value) or "none"
    return str(value)


def _causes(explanation):
    causes = ", ".join(str(a) for a in explanation.antecedents) or "-"
    return f"{causes} (weight {explanation.weight})"


def _explain(store, subject, attribute):
    found = [
        e for e in KBService.profile_of_individual(store.taxonomy, "explanations", subject)
        if e.consequent.attribute == attribute
    ]
    return "\n".join(_causes(e) for e in found) or f"{subject} has no explained value of {attribute}"


def evaluate(store, line):
    """
    Run one REPL line against the store.

    Args:
        store (KBStore): Current KB
        line (str): Command and arguments

    Returns:
        str: Text to print
    """
    command, _, rest = line.strip().partition(" ")
    rest = rest.strip()
    kb = store.taxonomy

    if command == "help":
        return HELP
    if command == "dump":
        return KBService.dump_kb(kb).rstrip("\n")
    if command in EXTENSIONS:
        key = rest if command == "class" else parse_term(rest)
        return _show(KBService.extension_of(kb, command, key))
    if command in PROFILES:
        return _show(KBService.profile_of_individual(kb, command, rest))

    subject, _, argument = rest.partition(" ")
    argument = argument.strip()
    if command == "closure":
        return _show(KBService.resolve_closure(kb, subject))
    if not argument:
        raise ValueError(f"{command} needs two arguments; try help")
    if command == "ask":
        return store.ask(subject, parse_term(argument)).value
    if command == "preferred":
        values = store.preferred_value_list(subject, argument)
        return ", ".join(print_term(v) for v in values) or "none"
    if command == "explain":
        return _explain(store, subject, argument)
    if command == "abduce":
        explanation = store.abduce(subject, parse_term(argument))
        return str(explanation) if explanation else "no explanation"
    if command == "update":
        if subject not in UPDATES:
            raise ValueError(f"unknown update {subject}; one of {', '.join(UPDATES)}")
        store.update(subject, parse_term(argument))
        return "ok"
    raise ValueError(f"unknown command {command!r}; try help")


@click.command("kb")
@with_appcontext
@click.argument("kb_name")
def kb_command(kb_name):
    """Query a knowledge base interactively."""
    path = ScenarioService.resolve_path("kb", kb_name, current_app.config["DATA_DIR"])
    try:
        store = KBStore.from_file(path)
    except ServiceBotError as e:
        logger.error(f"Could not load KB {path}: {e}")
        click.echo(str(e), err=True)
        raise SystemExit(EXIT_LOAD_ERROR)
    except OSError as e:
        click.echo(f"{path}: {e.strerror}", err=True)
        raise SystemExit(EXIT_LOAD_ERROR)

    click.echo(f"Loaded {path}. Type help for the commands.")
    for line in click.get_text_stream("stdin"):
        line = line.strip()
        if not line:
            continue
        if line in ("quit", "exit"):
            break
        try:
            click.echo(evaluate(store, line))
        except (ServiceBotError, ValueError) as e:
            click.echo(f"error: {e}", err=True)
