"""
SitLog interpreter.

Programs are sets of dialogue models; each model is a graph of situations
linked by ``expectation:action => next`` arcs. The engine keeps a stack of
active models, threads the pipe through situations, evaluates the functional
expression language and records the task history.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from servicebot.errors import (
    EvaluationError,
    NoMatch,
    ScriptExhausted,
    ServiceBotError,
    SitLogError,
    SitLogTypeError,
    UnknownFunction,
    UnknownVariable,
    ValidationError,
)
from servicebot.utils.terms import (
    EMPTY,
    FALSE,
    TRUE,
    Compound,
    ListTerm,
    Number,
    Symbol,
    Variable,
    as_term,
    comp,
    is_op,
    name_of,
    parse_clauses,
    print_term,
)
from servicebot.utils.unify import substitute, unify

logger = logging.getLogger(__name__)

_SITUATION_KEYS = ("id", "type", "in_arg", "out_arg", "prog", "arcs", "embedded_dm")


@dataclass(frozen=True)
class Arc:
    expectation: object
    action: object
    next: object


@dataclass(frozen=True)
class Situation:
    id: object
    type: str
    arcs: tuple = ()
    in_arg: Optional[object] = None
    out_arg: Optional[object] = None
    prog: tuple = ()
    embedded_dm: Optional[object] = None
    extra: tuple = ()

    @property
    def name(self):
        return name_of(self.id)

    def attribute(self, key):
        for name, value in self.extra:
            if name == key:
                return value
        return None


@dataclass(frozen=True)
class DialogueModel:
    id: object
    situations: tuple
    locals: tuple = ()

    @property
    def name(self):
        return name_of(self.id)

    def finals(self):
        return {s.name for s in self.situations if s.type == "final"}


@dataclass(frozen=True)
class Program:
    models: tuple
    globals: tuple = ()
    source: Optional[str] = None

    def model(self, name):
        for m in self.models:
            if m.name == name:
                return m
        return None

    @property
    def names(self):
        return [m.name for m in self.models]


@dataclass(frozen=True)
class HistoryEntry:
    dm_id: str
    situation_id: object
    expectation: object
    action: object
    depth: int

    @property
    def transition(self):
        return comp(":", self.expectation, self.action)


@dataclass
class RunResult:
    out_arg: object
    globals: dict
    history: list


# Loading -------------------------------------------------------------------

def _split_arc(term, where):
    """An arcs-list element parses as ``=>(:(E, A), N)``."""
    if not (is_op(term, "=>") and is_op(term.args[0], ":")):
        raise ValidationError(f"{where}: arc must be Expectation:Action => Next, got {print_term(term)}")
    (expectation, action), next_situation = term.args[0].args, term.args[1]
    return Arc(expectation, action, next_situation)


def _assignments(term, where):
    if not isinstance(term, ListTerm):
        raise ValidationError(f"{where}: variable list expected, got {print_term(term)}")
    pairs = []
    for item in term.elements:
        if not (is_op(item, "==>") and isinstance(item.args[0], Symbol)):
            raise ValidationError(f"{where}: expected name ==> value, got {print_term(item)}")
        pairs.append((item.args[0].name, item.args[1]))
    return tuple(pairs)


def _situation_from_term(term, model_name):
    if not isinstance(term, ListTerm):
        raise ValidationError(f"{model_name}: situation must be a list of attribute ==> value pairs")
    attrs = {}
    extra = []
    for item in term.elements:
        if not (is_op(item, "==>") and isinstance(item.args[0], Symbol)):
            raise ValidationError(f"{model_name}: expected attribute ==> value, got {print_term(item)}")
        key, value = item.args[0].name, item.args[1]
        if key in _SITUATION_KEYS:
            attrs[key] = value
        else:
            extra.append((key, value))
    if "id" not in attrs or "type" not in attrs:
        raise ValidationError(f"{model_name}: situation without id or type: {print_term(term)}")
    where = f"{model_name}/{print_term(attrs['id'])}"
    kind = attrs["type"]
    if not isinstance(kind, Symbol):
        raise ValidationError(f"{where}: type must be a name")
    arcs = ()
    if "arcs" in attrs:
        if not isinstance(attrs["arcs"], ListTerm):
            raise ValidationError(f"{where}: arcs must be a list")
        arcs = tuple(_split_arc(a, where) for a in attrs["arcs"].elements)
    prog = attrs.get("prog")
    if prog is not None:
        prog = tuple(prog.elements) if isinstance(prog, ListTerm) else (prog,)
    return Situation(
        id=attrs["id"],
        type=kind.name,
        arcs=arcs,
        in_arg=attrs.get("in_arg"),
        out_arg=attrs.get("out_arg"),
        prog=prog or (),
        embedded_dm=attrs.get("embedded_dm"),
        extra=tuple(extra),
    )


def _model_from_term(term):
    id_term, situations, locals_term = term.args
    if name_of(id_term) is None:
        raise ValidationError(f"dialogue model id must be a name or compound, got {print_term(id_term)}")
    if not isinstance(situations, ListTerm):
        raise ValidationError(f"{name_of(id_term)}: situations must be a list")
    return DialogueModel(
        id=id_term,
        situations=tuple(_situation_from_term(s, name_of(id_term)) for s in situations.elements),
        locals=_assignments(locals_term, name_of(id_term)),
    )


def validate_program(program):
    names = program.names
    if names.count("main") != 1:
        raise ValidationError("a program needs exactly one dialogue model named main")
    duplicates = {n for n in names if names.count(n) > 1}
    if duplicates:
        raise ValidationError(f"duplicate dialogue models: {', '.join(sorted(duplicates))}")
    for model in program.models:
        ids = [s.name for s in model.situations]
        if ids.count("is") != 1:
            raise ValidationError(f"{model.name}: exactly one initial situation 'is' is required")
        if not model.finals():
            raise ValidationError(f"{model.name}: at least one final situation is required")
        for s in model.situations:
            where = f"{model.name}/{print_term(s.id)}"
            if s.type == "final":
                if s.arcs:
                    raise ValidationError(f"{where}: final situations have no arcs")
                continue
            if not s.arcs:
                raise ValidationError(f"{where}: arcs are mandatory for {s.type} situations")
            if s.type != "recursive":
                continue
            if s.embedded_dm is None:
                raise ValidationError(f"{where}: recursive situation without embedded_dm")
            embedded = program.model(name_of(s.embedded_dm))
            if embedded is None:
                raise ValidationError(f"{where}: unknown embedded_dm {print_term(s.embedded_dm)}")
            for arc in s.arcs:
                if isinstance(arc.expectation, Symbol) and arc.expectation.name not in embedded.finals():
                    raise ValidationError(
                        f"{where}: expectation {arc.expectation.name} is not a final situation of {embedded.name}")
    return program


def _read_clauses(text, source):
    models = []
    global_vars = ()
    for clause in parse_clauses(text, source=source):
        if isinstance(clause, Compound) and clause.functor == "diag_mod" and clause.arity == 3:
            models.append(_model_from_term(clause))
        elif is_op(clause, "=") and isinstance(clause.args[0], Variable):
            global_vars += _assignments(clause.args[1], "Global_Vars")
        elif isinstance(clause, Compound) and clause.functor == "global_vars" and clause.arity == 1:
            global_vars += _assignments(clause.args[0], "global_vars")
        else:
            raise ValidationError(f"unexpected clause {print_term(clause)}")
    return Program(tuple(models), global_vars, source)


def load_program(text, source=None):
    """
    Parse and validate a SitLog program.

    Args:
        text (str): diag_mod/3 clauses plus an optional ``Global_Vars = [...]`` clause
        source (str): Optional file name used in error messages

    Returns:
        Program: Validated program
    """
    try:
        program = validate_program(_read_clauses(text, source))
    except ServiceBotError as e:
        raise e.with_source(source)
    logger.info(f"Loaded SitLog program {source or '<text>'}: models {', '.join(program.names)}")
    return program


def load_program_files(paths):
    """Load several program files as one program; models and globals are concatenated."""
    models, global_vars, sources = [], (), []
    for path in paths:
        path = Path(path)
        try:
            part = _read_clauses(path.read_text(encoding="utf-8"), str(path))
        except ServiceBotError as e:
            raise e.with_source(str(path))
        models.extend(part.models)
        global_vars += part.globals
        sources.append(str(path))
    program = validate_program(Program(tuple(models), global_vars, ",".join(sources)))
    logger.info(f"Loaded SitLog program {program.source}: models {', '.join(program.names)}")
    return program


# History accessors ---------------------------------------------------------

def get_history(engine):
    return list(engine.history)


def get_last_transition(history):
    """``Expectation:Action`` of the most recent history entry, or empty."""
    if not history:
        return EMPTY
    return history[-1].transition


# Runtime -------------------------------------------------------------------

@dataclass
class Frame:
    model: DialogueModel
    locals: dict
    situation: Situation
    params: dict
    env: dict
    pipe: object
    depth: int
    returned: Optional[tuple] = None


@dataclass
class InputRequest:
    engine: "SitLogEngine"
    model: str
    situation: Situation
    expectations: list


class _Scope:
    def __init__(self, frame, env, local_store, global_store):
        self.frame = frame
        self.env = env
        self.locals = local_store
        self.globals = global_store


class FunctionContext:
    """What a user function sees: the variables in scope, the history and shared services."""

    def __init__(self, engine, scope):
        self.engine = engine
        self._scope = scope

    @property
    def services(self):
        return self.engine.services

    @property
    def history(self):
        return self.engine.history

    @property
    def model(self):
        return self._scope.frame.model.name

    def get(self, name):
        return self.engine._lookup(name, self._scope)

    def set(self, name, value):
        self.engine._store(name, as_term(value), self._scope)

    def last_transition(self):
        return get_last_transition(self.engine.history)


class ScriptedInput:
    """Input provider reading a fixed script of terms."""

    def __init__(self, items=()):
        self._items = deque(as_term(i) for i in items)
        self.consumed = []

    def push(self, *items):
        self._items.extend(as_term(i) for i in items)

    @property
    def remaining(self):
        return len(self._items)

    def __call__(self, request):
        if not self._items:
            return None
        item = self._items.popleft()
        self.consumed.append(item)
        return item


def _when(ctx, condition, then, otherwise):
    return then if condition == TRUE else otherwise


class SitLogEngine:
    """
    Interpreter state for one program run.

    Args:
        program (Program): Validated program
        speech (callable): Input provider for speech situations
        services (dict): Shared objects user functions may reach (kb, world, dialogue, ...)
        max_steps (int): Guard against non-terminating programs
    """

    def __init__(self, program, speech=None, services=None, max_steps=10000):
        self.program = program
        self.services = services if services is not None else {}
        self.max_steps = max_steps
        self.globals = {name: value for name, value in program.globals}
        self.history = []
        self.stack = []
        self.finished = False
        self.out_arg = None
        self.steps = 0
        self.functions = {"when": _when}
        self.actions = {}
        self.providers = {"neutral": lambda request: EMPTY}
        if speech is not None:
            self.providers["speech"] = speech

    def register_function(self, name, function):
        self.functions[name] = function

    def register_functions(self, functions):
        for name, function in functions.items():
            self.register_function(name, function)

    def register_input_provider(self, situation_type, provider):
        self.providers[situation_type] = provider

    def register_action(self, name, handler):
        self.actions[name] = handler

    # variables

    def _lookup(self, name, scope):
        if name in scope.locals:
            return scope.locals[name]
        if name in scope.globals:
            return scope.globals[name]
        raise UnknownVariable(f"unknown variable {name!r} in {scope.frame.model.name}")

    def _store(self, name, value, scope):
        if name in scope.locals:
            scope.locals[name] = value
        elif name in scope.globals:
            scope.globals[name] = value
        else:
            raise UnknownVariable(f"unknown variable {name!r} in {scope.frame.model.name}")

    def _bind(self, pattern, value, scope):
        bound = unify(pattern, value, scope.env)
        if bound is None:
            raise EvaluationError(f"{print_term(substitute(pattern, scope.env))} does not match {print_term(value)}")
        scope.env = bound

    def _variable_name(self, term, scope):
        name = name_of(substitute(term, scope.env))
        if name is None or not isinstance(substitute(term, scope.env), Symbol):
            raise EvaluationError(f"variable name expected, got {print_term(term)}")
        return name

    # expressions

    def evaluate(self, term, scope):
        """
        Evaluate an expression of the functional language.

        Built-ins: get/2, set/2, inc/2, apply/2, ==/2 and =/2. Any other
        compound evaluates its arguments; lists evaluate element-wise.
        """
        if isinstance(term, Variable):
            return substitute(term, scope.env)
        if isinstance(term, (Symbol, Number)):
            return term
        if isinstance(term, ListTerm):
            return ListTerm(tuple(self.evaluate(e, scope) for e in term.elements))
        functor, args = term.functor, term.args
        if len(args) == 2:
            if functor == "get":
                value = self._lookup(self._variable_name(args[0], scope), scope)
                self._bind(args[1], value, scope)
                return value
            if functor == "set":
                value = self.evaluate(args[1], scope)
                self._store(self._variable_name(args[0], scope), value, scope)
                return value
            if functor == "inc":
                name = self._variable_name(args[0], scope)
                current = self._lookup(name, scope)
                if not isinstance(current, Number):
                    raise SitLogTypeError(f"inc on non-integer variable {name!r} = {print_term(current)}")
                value = Number(current.value + 1)
                self._store(name, value, scope)
                self._bind(args[1], value, scope)
                return value
            if functor == "apply":
                return self._apply(args[0], args[1], scope)
            if functor == "==":
                return TRUE if self.evaluate(args[0], scope) == self.evaluate(args[1], scope) else FALSE
            if functor == "=":
                self._bind(self.evaluate(args[0], scope), self.evaluate(args[1], scope), scope)
                return TRUE
        return Compound(functor, tuple(self.evaluate(a, scope) for a in args))

    def _apply(self, function_term, values_term, scope):
        values = self.evaluate(values_term, scope)
        if not isinstance(values, ListTerm):
            raise EvaluationError(f"apply expects a list of values, got {print_term(values)}")
        function_term = substitute(function_term, scope.env)
        if isinstance(function_term, Symbol):
            name, params = function_term.name, ()
        elif isinstance(function_term, Compound):
            name, params = function_term.functor, function_term.args
        else:
            raise EvaluationError(f"apply expects a function term, got {print_term(function_term)}")
        for param, value in zip(params, values.elements):
            self._bind(param, value, scope)
        function = self.functions.get(name)
        if function is None:
            raise UnknownFunction(f"unknown user function {name!r}")
        args = tuple(substitute(p, scope.env) for p in params)
        result = function(FunctionContext(self, scope), *args)
        return as_term(result if result is not None else EMPTY)

    # situations

    def instantiate_expectations(self, situation, frame, env):
        """Evaluate each arc's expectation in its own scope, leaving variables open."""
        candidates = []
        for arc in situation.arcs:
            scope = _Scope(frame, dict(env), dict(frame.locals), dict(self.globals))
            candidates.append((arc, self.evaluate(arc.expectation, scope), scope))
        return candidates

    @staticmethod
    def match_expectation(expectations, input_term, envs=None):
        """
        First expectation unifying with the input.

        A singleton-list expectation also accepts its bare element.

        Returns:
            tuple | None: (arc index, binding) or None for no match
        """
        for index, expectation in enumerate(expectations):
            env = envs[index] if envs else {}
            bound = unify(expectation, input_term, env)
            if bound is None and isinstance(expectation, ListTerm) and len(expectation) == 1 \
                    and not isinstance(input_term, ListTerm):
                bound = unify(expectation.elements[0], input_term, env)
            if bound is not None:
                return index, bound
        return None

    def _find_situation(self, model, request):
        for situation in model.situations:
            env = unify(situation.id, request, {})
            if env is not None:
                return situation, env
        raise EvaluationError(f"{model.name}: no situation {print_term(request)}")

    def _push(self, target, pipe, depth):
        model = self.program.model(name_of(target))
        if model is None:
            raise EvaluationError(f"unknown dialogue model {print_term(target)}")
        params = unify(model.id, target, {})
        if params is None:
            raise EvaluationError(f"{print_term(target)} does not match dialogue model {print_term(model.id)}")
        situation, situation_env = self._find_situation(model, Symbol("is"))
        env = {**params, **situation_env}
        self.stack.append(Frame(model, dict(model.locals), situation, params, env, pipe, depth))
        logger.debug(f"Entered dialogue model {print_term(target)} at depth {depth}")

    def _pipe_out(self, situation, scope, default):
        if situation.out_arg is None:
            return default
        value = self.evaluate(situation.out_arg, scope)
        return default if isinstance(value, Variable) else value

    @staticmethod
    def _grounded(action, value):
        """A list holding a single function application is recorded as the function's value."""
        if isinstance(action, ListTerm) and len(action) == 1 and is_op(action.elements[0], "apply"):
            return value.elements[0]
        return value

    def _record(self, frame, situation, expectation, action, env):
        entry = HistoryEntry(frame.model.name, substitute(situation.id, env), expectation, action, frame.depth)
        self.history.append(entry)
        logger.debug(f"{entry.dm_id}: ({print_term(entry.situation_id)},{print_term(entry.transition)})")

    def _perform(self, action, scope):
        items = action.elements if isinstance(action, ListTerm) else (action,)
        for item in items:
            name = name_of(item)
            handler = self.actions.get(name) if name else None
            if handler is not None:
                args = item.args if isinstance(item, Compound) else ()
                handler(FunctionContext(self, scope), *args)

    def start(self, pipe=None, model="main"):
        self.stack.clear()
        self.history.clear()
        self.finished = False
        self.out_arg = None
        self.steps = 0
        self._push(Symbol(model) if isinstance(model, str) else model, as_term(pipe) if pipe is not None else EMPTY, 0)

    def step(self):
        """Interpret the current situation once."""
        if self.finished:
            raise SitLogError("the program has already reached its final situation")
        self.steps += 1
        if self.steps > self.max_steps:
            raise SitLogError(f"step limit of {self.max_steps} exceeded")
        frame = self.stack[-1]
        situation = frame.situation
        env = dict(frame.env)
        if situation.in_arg is not None:
            env = unify(situation.in_arg, frame.pipe, env)
            if env is None:
                raise EvaluationError(f"{frame.model.name}/{situation.name}: pipe {print_term(frame.pipe)} "
                                      f"does not match in_arg {print_term(situation.in_arg)}")
        if frame.returned is not None:
            final_name, pipe = frame.returned
            frame.returned = None
            self._transition(frame, situation, env, Symbol(final_name), pipe)
            return
        scope = _Scope(frame, dict(env), frame.locals, self.globals)
        for expression in situation.prog:
            self.evaluate(expression, scope)
        if situation.type == "final":
            self._finish(frame, situation, env)
        elif situation.type == "recursive":
            target = self.evaluate(situation.embedded_dm, scope)
            self._push(target, self._pipe_out(situation, scope, frame.pipe), frame.depth + 1)
        else:
            self._transition(frame, situation, env, None, None)

    def _transition(self, frame, situation, env, input_term, returned_pipe):
        candidates = self.instantiate_expectations(situation, frame, env)
        if input_term is None:
            provider = self.providers.get(situation.type)
            if provider is None:
                raise SitLogError(f"no input provider for situation type {situation.type!r}")
            request = InputRequest(self, frame.model.name, situation, [c[1] for c in candidates])
            input_term = provider(request)
            if input_term is None:
                raise ScriptExhausted(f"no input left for {frame.model.name}/{print_term(situation.id)}")
            input_term = as_term(input_term)
        found = self.match_expectation([c[1] for c in candidates], input_term, [c[2].env for c in candidates])
        if found is None:
            raise NoMatch(
                f"{frame.model.name}/{print_term(situation.id)}: no expectation matches {print_term(input_term)}",
                situation=situation, input_term=input_term)
        index, bound = found
        arc, expectation, scope = candidates[index]
        for other, (_, _, discarded) in enumerate(candidates):
            if other != index and (discarded.locals != frame.locals or discarded.globals != self.globals):
                logger.warning(f"{frame.model.name}/{situation.name}: writes made by the expectation of "
                               f"unselected arc {other + 1} are discarded")
        frame.locals.clear()
        frame.locals.update(scope.locals)
        self.globals.clear()
        self.globals.update(scope.globals)
        scope = _Scope(frame, bound, frame.locals, self.globals)
        action = self.evaluate(arc.action, scope)
        self._record(frame, situation, substitute(expectation, scope.env), self._grounded(arc.action, action), env)
        self._perform(action, scope)
        next_term = self.evaluate(arc.next, scope)
        pipe = returned_pipe if returned_pipe is not None else self._pipe_out(situation, scope, frame.pipe)
        frame.situation, situation_env = self._find_situation(frame.model, next_term)
        frame.env = {**frame.params, **situation_env}
        frame.pipe = pipe

    def _finish(self, frame, situation, env):
        self._record(frame, situation, EMPTY, EMPTY, env)
        out = self._pipe_out(situation, _Scope(frame, dict(env), frame.locals, self.globals), frame.pipe)
        self.stack.pop()
        logger.debug(f"Left dialogue model {frame.model.name} through {situation.name}")
        if not self.stack:
            self.finished = True
            self.out_arg = out
            return
        self.stack[-1].returned = (situation.name, out)

    def run(self, pipe=None, model="main"):
        """
        Run from the initial situation of the main model until it reaches a final situation.

        Returns:
            RunResult: out_arg, global variables and the complete history
        """
        self.start(pipe, model)
        while not self.finished:
            self.step()
        logger.info(f"SitLog run finished after {self.steps} steps, out_arg {print_term(self.out_arg)}")
        return RunResult(self.out_arg, dict(self.globals), list(self.history))
