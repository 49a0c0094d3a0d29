"""
User functions callable from SitLog programs through ``apply``.

Each function receives a FunctionContext first, then the evaluated
arguments, and returns a term (plain str/int/list values are lifted).
"""

import logging

from servicebot.utils.terms import EMPTY, ListTerm, Symbol, print_term

logger = logging.getLogger(__name__)


# Dummy program -------------------------------------------------------------

def day_status(ctx, value):
    """``ok`` when value is the current ``day`` local, else ``not ok``."""
    return "ok" if value == ctx.get("day") else "not ok"


def last_transition(ctx, _=None):
    return ctx.last_transition()


def same_day_next(ctx, value, day):
    """Next situation: back to ``is`` on a matching day, otherwise into the recursive ``rs``."""
    return "is" if value == day else "rs"


DUMMY_FUNCTIONS = {"f": day_status, "g": last_transition, "h": same_day_next}


# Knowledge base ------------------------------------------------------------

def _kb(ctx):
    kb = ctx.services.get("kb")
    if kb is None:
        raise KeyError("no knowledge base registered with the engine")
    return kb


def _name(term):
    return term.name if isinstance(term, Symbol) else print_term(term)


def kb_ask(ctx, subject, literal):
    return _kb(ctx).ask(_name(subject), literal).value


def kb_value(ctx, subject, attribute):
    value = _kb(ctx).preferred_value(_name(subject), _name(attribute))
    return value if value is not None else EMPTY


def kb_values(ctx, subject, attribute):
    return ListTerm(tuple(_kb(ctx).preferred_value_list(_name(subject), _name(attribute))))


def kb_class_of(ctx, subject):
    return _kb(ctx).class_of(_name(subject)) or EMPTY


def kb_update(ctx, operation, payload):
    _kb(ctx).update(_name(operation), payload)
    logger.info(f"KB update {_name(operation)} {print_term(payload)}")
    return "ok"


def kb_location(ctx, subject):
    return _kb(ctx).believed_location(_name(subject)) or EMPTY


KB_FUNCTIONS = {
    "kb_ask": kb_ask,
    "kb_value": kb_value,
    "kb_values": kb_values,
    "kb_class_of": kb_class_of,
    "kb_update": kb_update,
    "kb_location": kb_location,
}


def register_library(engine, *tables):
    for table in tables or (DUMMY_FUNCTIONS, KB_FUNCTIONS):
        engine.register_functions(table)
    return engine


# Dialogue ------------------------------------------------------------------

def _text(term):
    return term.name if isinstance(term, Symbol) else print_term(term)


class DialogueChannel:
    """
    Connects a SitLog engine to a Dialogue.

    ``say`` and ``ask`` become action handlers; the reply to the last
    ``ask`` is what the next speech situation receives.
    """

    def __init__(self, dialogue):
        self.dialogue = dialogue
        self._reply = None

    def say(self, ctx, text):
        self.dialogue.say(_text(text))

    def ask(self, ctx, text):
        result = self.dialogue.ask(_text(text))
        self._reply = result.payload if result.is_ok else None

    def __call__(self, request):
        reply, self._reply = self._reply, None
        return reply

    def attach(self, engine):
        engine.register_action("say", self.say)
        engine.register_action("screen", self.say)
        engine.register_action("ask", self.ask)
        engine.register_input_provider("speech", self)
        return engine
