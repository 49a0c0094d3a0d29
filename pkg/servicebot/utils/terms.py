"""
Term notation shared by knowledge-base files, SitLog programs and scenario files.

Terms are immutable values (symbols, integers, variables, compounds, lists).
``parse_term`` and ``parse_clauses`` read the textual notation with a lark
LALR grammar; ``print_term`` writes it back in canonical form.
"""

import logging
import re
from dataclasses import dataclass
from typing import Union

from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError, UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from servicebot.errors import TermSyntaxError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Symbol:
    name: str

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class Number:
    value: int

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class Variable:
    name: str

    @property
    def anonymous(self):
        return self.name == "_"

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise ValueError(f"compound {self.functor!r} needs at least one argument")

    @property
    def arity(self):
        return len(self.args)

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class ListTerm:
    elements: tuple = ()

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __str__(self):
        return print_term(self)


Term = Union[Symbol, Number, Variable, Compound, ListTerm]

EMPTY = Symbol("empty")
TRUE = Symbol("true")
FALSE = Symbol("false")


def sym(name):
    return Symbol(name)


def var(name):
    return Variable(name)


def num(value):
    return Number(int(value))


def comp(functor, *args):
    return Compound(functor, tuple(args))


def lst(*elements):
    return ListTerm(tuple(elements))


def as_term(value):
    """Lift plain Python values (str, int, list, tuple) into terms."""
    if isinstance(value, (Symbol, Number, Variable, Compound, ListTerm)):
        return value
    if isinstance(value, bool):
        return TRUE if value else FALSE
    if isinstance(value, int):
        return Number(value)
    if isinstance(value, str):
        return Symbol(value)
    if isinstance(value, (list, tuple)):
        return ListTerm(tuple(as_term(v) for v in value))
    raise TypeError(f"cannot convert {value!r} to a term")


def name_of(term):
    """Principal name of a symbol or compound, else None."""
    if isinstance(term, Symbol):
        return term.name
    if isinstance(term, Compound):
        return term.functor
    return None


def is_op(term, functor):
    return isinstance(term, Compound) and term.functor == functor and len(term.args) == 2


# Grammar -------------------------------------------------------------------

_GRAMMAR = r"""
    document: term "."?
    clauses: (term ".")*

    ?term: attr

    ?attr: colon
         | colon "==>" attr        -> op_attr
         | _ARCS "==>" arc_list    -> op_arcs
    ?colon: default
          | default ":" colon      -> op_colon
    ?default: pair
            | pair "=>>" default   -> op_default
    ?pair: cond
         | cond "=>" pair          -> op_pair
    ?cond: cmp
         | cmp "->" cond           -> op_cond
    ?cmp: primary
        | primary "==" primary     -> op_eq
        | primary "=" primary      -> op_unify

    // inside an arcs list the arc arrow is the loosest operator; pairs need parentheses
    arc_list: "[" "]"
            | "[" arc ("," arc)* "]"
    arc: arc_colon "=>" arc_colon  -> op_pair
    ?arc_colon: arc_default
              | arc_default ":" arc_colon    -> op_colon
    ?arc_default: cond
                | cond "=>>" arc_default     -> op_default

    ?primary: name "(" term ("," term)* ")"   -> compound
            | "[" "]"                         -> empty_list
            | "[" term ("," term)* "]"        -> plist
            | name                            -> atom
            | NUMBER                          -> number
            | VARIABLE                        -> variable
            | "(" term ")"

    name: NAME | QUOTED

    _ARCS: "arcs"
    NAME: /[a-z][A-Za-z0-9_]*/
    QUOTED: /'[^']*'/
    VARIABLE: /[A-Z_][A-Za-z0-9_]*/
    NUMBER: /-?[0-9]+/
    COMMENT: /%[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

# functor -> (precedence, associativity, rendered operator)
OPERATORS = {
    "==>": (1100, "xfy", " ==> "),
    ":": (1000, "xfy", ":"),
    "=>>": (900, "xfy", "=>>"),
    "=>": (800, "xfy", "=>"),
    "->": (700, "xfy", "->"),
    "==": (600, "xfx", "=="),
    "=": (600, "xfx", "="),
}

_PLAIN_NAME = re.compile(r"[a-z][A-Za-z0-9_]*")
_RESERVED = {"arcs"}


@v_args(inline=True)
class _TermBuilder(Transformer):
    def name(self, token):
        text = str(token)
        if text.startswith("'"):
            return text[1:-1]
        return text

    def atom(self, name):
        return Symbol(name)

    def compound(self, name, *args):
        return Compound(name, tuple(args))

    def empty_list(self):
        return ListTerm(())

    def plist(self, *elements):
        return ListTerm(tuple(elements))

    def number(self, token):
        return Number(int(token))

    def variable(self, token):
        return Variable(str(token))

    def op_attr(self, left, right):
        return Compound("==>", (left, right))

    def op_arcs(self, arcs):
        return Compound("==>", (Symbol("arcs"), arcs))

    def arc_list(self, *arcs):
        return ListTerm(tuple(arcs))

    def op_colon(self, left, right):
        return Compound(":", (left, right))

    def op_default(self, left, right):
        return Compound("=>>", (left, right))

    def op_pair(self, left, right):
        return Compound("=>", (left, right))

    def op_cond(self, left, right):
        return Compound("->", (left, right))

    def op_eq(self, left, right):
        return Compound("==", (left, right))

    def op_unify(self, left, right):
        return Compound("=", (left, right))

    def document(self, term):
        return term

    def clauses(self, *terms):
        return list(terms)


_parser = Lark(_GRAMMAR, start=["document", "clauses"], parser="lalr", transformer=_TermBuilder())


def _syntax_error(exc, source):
    if isinstance(exc, UnexpectedEOF):
        expected = set(exc.expected)
        message = "unexpected end of input"
    elif isinstance(exc, UnexpectedToken):
        expected = set(exc.expected)
        message = f"unexpected token {str(exc.token)!r}"
    elif isinstance(exc, UnexpectedCharacters):
        expected = set(exc.allowed or ())
        message = f"unexpected character {exc.char!r}"
    else:
        expected = set()
        message = "malformed term"
    if expected:
        message = f"{message}, expected one of {', '.join(sorted(expected))}"
    return TermSyntaxError(
        message,
        line=getattr(exc, "line", None),
        column=getattr(exc, "column", None),
        expected=expected,
        source=source,
    )


def parse_term(text, source=None):
    """
    Parse a single term. A trailing ``.`` is accepted.

    Args:
        text (str): Term text; ``%`` starts a comment running to end of line
        source (str): Optional file name used in error messages

    Returns:
        Term: The structural term

    Raises:
        TermSyntaxError: With line, column and the expected-token set
    """
    try:
        return _parser.parse(text, start="document")
    except UnexpectedInput as e:
        raise _syntax_error(e, source) from e
    except LarkError as e:
        raise TermSyntaxError(str(e), source=source) from e


def parse_clauses(text, source=None):
    """Parse a sequence of ``.``-terminated terms (program and scenario files)."""
    try:
        return _parser.parse(text, start="clauses")
    except UnexpectedInput as e:
        raise _syntax_error(e, source) from e
    except LarkError as e:
        raise TermSyntaxError(str(e), source=source) from e


# Printing ------------------------------------------------------------------

def _print_name(name):
    if _PLAIN_NAME.fullmatch(name) and name not in _RESERVED:
        return name
    return f"'{name}'"


def print_term(term, max_precedence=1200):
    """
    Render a term in canonical notation; ``parse_term(print_term(t)) == t``.

    Args:
        term (Term): Term to render
        max_precedence (int): Loosest operator allowed without parentheses

    Returns:
        str: Canonical text
    """
    if isinstance(term, Symbol):
        return _print_name(term.name)
    if isinstance(term, Number):
        return str(term.value)
    if isinstance(term, Variable):
        return term.name
    if isinstance(term, ListTerm):
        return "[" + ",".join(print_term(e) for e in term.elements) + "]"
    if isinstance(term, Compound):
        op = OPERATORS.get(term.functor)
        if op and len(term.args) == 2:
            precedence, assoc, rendered = op
            left_max = precedence - 1
            right_max = precedence if assoc == "xfy" else precedence - 1
            text = (
                print_term(term.args[0], left_max)
                + rendered
                + print_term(term.args[1], right_max)
            )
            return f"({text})" if precedence > max_precedence else text
        args = ",".join(print_term(a) for a in term.args)
        return f"{_print_name(term.functor)}({args})"
    raise TypeError(f"not a term: {term!r}")


def precedence_of(term):
    """Operator precedence of a term (0 for primaries)."""
    if isinstance(term, Compound) and len(term.args) == 2 and term.functor in OPERATORS:
        return OPERATORS[term.functor][0]
    return 0
