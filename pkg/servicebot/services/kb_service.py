"""
Knowledge-base service.

A strict class taxonomy with individuals, strong negation, the principle of
specificity and weighted conditional defaults. Taxonomies are immutable
values: every update returns a new one. ``KBStore`` is the single writer the
rest of the application shares.
"""

import itertools
import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Optional

from servicebot.errors import (
    ClauseError,
    HierarchyError,
    SameLevelConflict,
    ServiceBotError,
    UnknownClass,
    UnknownIndividual,
    UnknownSubject,
    UnknownTarget,
)
from servicebot.utils.terms import (
    Compound,
    ListTerm,
    Number,
    Symbol,
    Variable,
    comp,
    is_op,
    lst,
    parse_term,
    print_term,
)
from servicebot.utils.unify import is_ground, substitute, unify, variables_of

logger = logging.getLogger(__name__)

PLACEHOLDER = Symbol("-")
_tags = itertools.count(1)


class Verdict(str, Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Literal:
    """A label (``fly``) or an attribute-value pair (``loc=>shelf_food``), possibly negated."""

    attribute: str
    value: Optional[object] = None
    positive: bool = True

    @property
    def is_label(self):
        return self.value is None

    def negate(self):
        return replace(self, positive=not self.positive)

    def bind(self, env):
        if self.value is None or not env:
            return self
        return replace(self, value=substitute(self.value, env))

    def is_ground(self):
        return self.value is None or is_ground(self.value)

    def to_term(self, placeholders=False):
        value = self.value
        if placeholders and value is not None:
            value = _to_placeholders(value)
        body = Symbol(self.attribute) if value is None else comp("=>", Symbol(self.attribute), value)
        return body if self.positive else comp("not", body)

    def __str__(self):
        return print_term(self.to_term())


@dataclass(frozen=True)
class ConditionalDefault:
    antecedents: tuple
    consequent: Literal
    weight: int = 0

    def renamed(self):
        """Copy with its variables renamed apart from every other default."""
        names = []
        for literal in (*self.antecedents, self.consequent):
            if literal.value is not None:
                names.extend(n for n in variables_of(literal.value) if n not in names)
        if not names:
            return self
        tag = next(_tags)
        mapping = {name: Variable(f"_{name}_{tag}") for name in names}
        return ConditionalDefault(
            tuple(a.bind(mapping) for a in self.antecedents),
            self.consequent.bind(mapping),
            self.weight,
        )

    def to_term(self):
        if not self.antecedents:
            head = PLACEHOLDER
        elif len(self.antecedents) == 1:
            head = self.antecedents[0].to_term(placeholders=True)
        else:
            head = lst(*(a.to_term(placeholders=True) for a in self.antecedents))
        return comp("=>>", head, self.consequent.to_term(placeholders=True))


@dataclass(frozen=True)
class WeightedClause:
    clause: object
    weight: int = 0

    @property
    def is_default(self):
        return isinstance(self.clause, ConditionalDefault)

    def to_term(self):
        return lst(self.clause.to_term(), Number(self.weight))


@dataclass(frozen=True)
class Explanation:
    consequent: Literal
    antecedents: tuple
    weight: int

    def to_term(self):
        return comp(":", self.consequent.to_term(), lst(*(a.to_term() for a in self.antecedents)))

    def __str__(self):
        causes = ", ".join(str(a) for a in self.antecedents) or "-"
        return f"{self.consequent} because {causes} (weight {self.weight})"


@dataclass(frozen=True)
class IndividualDef:
    id: str
    props: tuple = ()
    rels: tuple = ()


@dataclass(frozen=True)
class ClassDef:
    id: str
    mother: Optional[str]
    props: tuple = ()
    rels: tuple = ()
    individuals: tuple = ()


@dataclass(frozen=True)
class Taxonomy:
    classes: tuple = ()

    @cached_property
    def class_index(self):
        return {c.id: c for c in self.classes}

    @cached_property
    def individual_index(self):
        return {ind.id: (c.id, ind) for c in self.classes for ind in c.individuals}

    def is_class(self, name):
        return name in self.class_index

    def is_individual(self, name):
        return name in self.individual_index

    def class_of(self, individual_id):
        if individual_id not in self.individual_index:
            raise UnknownIndividual(f"unknown individual {individual_id!r}")
        return self.individual_index[individual_id][0]

    def class_chain(self, class_id):
        """Class ids from class_id up to top."""
        chain = []
        current = class_id
        while current is not None:
            chain.append(current)
            current = self.class_index[current].mother
        return chain

    def descendants(self, class_id):
        """class_id and every class below it, in declaration order."""
        found = {class_id}
        for c in self.classes:
            if c.mother in found:
                found.add(c.id)
        return [c.id for c in self.classes if c.id in found]

    def individuals_of(self, class_id):
        if class_id not in self.class_index:
            raise UnknownClass(f"unknown class {class_id!r}")
        members = set(self.descendants(class_id))
        return [ind.id for c in self.classes if c.id in members for ind in c.individuals]

    def path(self, subject):
        """Nodes (individual and/or classes) from subject up to top, most specific first."""
        if subject in self.individual_index:
            class_id, individual = self.individual_index[subject]
            return [individual] + [self.class_index[c] for c in self.class_chain(class_id)]
        if subject in self.class_index:
            return [self.class_index[c] for c in self.class_chain(subject)]
        raise UnknownSubject(f"unknown class or individual {subject!r}")


# Parsing -------------------------------------------------------------------

def _to_placeholders(term):
    return substitute(term, {name: PLACEHOLDER for name in variables_of(term)}) if variables_of(term) else term


def _from_placeholders(term):
    if term == PLACEHOLDER:
        return Variable("Any")
    if isinstance(term, Compound):
        return Compound(term.functor, tuple(_from_placeholders(a) for a in term.args))
    if isinstance(term, ListTerm):
        return ListTerm(tuple(_from_placeholders(e) for e in term.elements))
    return term


def literal_from_term(term, consequent=False):
    """
    Read a literal: ``fly``, ``not(fly)``, ``loc=>shelf_food``.

    In consequent position ``live=>>'-'`` is read as ``live=>'-'``.
    """
    positive = True
    while isinstance(term, Compound) and term.functor == "not" and len(term.args) == 1:
        positive = not positive
        term = term.args[0]
    if isinstance(term, Symbol):
        return Literal(term.name, None, positive)
    if (is_op(term, "=>") or (consequent and is_op(term, "=>>"))) and isinstance(term.args[0], Symbol):
        return Literal(term.args[0].name, term.args[1], positive)
    raise ClauseError(f"not a literal: {print_term(term)}")


def _default_from_term(term):
    head, tail = term.args
    if head == PLACEHOLDER:
        antecedents = ()
    elif isinstance(head, ListTerm):
        antecedents = tuple(literal_from_term(_from_placeholders(t)) for t in head.elements)
    else:
        antecedents = (literal_from_term(_from_placeholders(head)),)
    return antecedents, literal_from_term(_from_placeholders(tail), consequent=True)


def clause_from_term(term, kind="property"):
    """
    Read one entry of a properties or relations list.

    Args:
        term (Term): ``[Clause, Weight]``, ``[Clause]`` or a bare clause (weight 0)
        kind (str): ``property`` or ``relation``; relations cannot hold bare labels

    Returns:
        WeightedClause: The parsed clause
    """
    if isinstance(term, ListTerm) and len(term) == 2 and isinstance(term.elements[1], Number):
        body, weight = term.elements[0], term.elements[1].value
    elif isinstance(term, ListTerm) and len(term) == 1:
        body, weight = term.elements[0], 0
    elif isinstance(term, ListTerm):
        raise ClauseError(f"malformed weighted clause {print_term(term)}")
    else:
        body, weight = term, 0
    if weight < 0:
        raise ClauseError(f"negative weight in {print_term(term)}")
    if is_op(body, "=>>"):
        antecedents, consequent = _default_from_term(body)
        clause = ConditionalDefault(antecedents, consequent, weight)
        literals = (*antecedents, consequent)
    else:
        clause = literal_from_term(body)
        literals = (clause,)
    if kind == "relation" and any(l.is_label for l in literals):
        raise ClauseError(f"relation clause holds a bare label: {print_term(body)}")
    return WeightedClause(clause, weight)


def _clauses(term, kind, owner):
    if not isinstance(term, ListTerm):
        raise ClauseError(f"{owner}: {kind} list expected, got {print_term(term)}")
    return tuple(clause_from_term(t, kind) for t in term.elements)


def _individual_from_term(term, owner):
    if not isinstance(term, ListTerm) or not 1 <= len(term) <= 3:
        raise ClauseError(f"{owner}: malformed individual {print_term(term)}")
    head = term.elements[0]
    if not (is_op(head, "=>") and head.args[0] == Symbol("id") and isinstance(head.args[1], Symbol)):
        raise ClauseError(f"{owner}: individual must start with id=>Name")
    name = head.args[1].name
    props = _clauses(term.elements[1], "property", name) if len(term) > 1 else ()
    rels = _clauses(term.elements[2], "relation", name) if len(term) > 2 else ()
    return IndividualDef(name, props, rels)


def class_from_term(term):
    if not (isinstance(term, Compound) and term.functor == "class" and len(term.args) == 5):
        raise ClauseError(f"class/5 term expected, got {print_term(term)}")
    id_t, mother_t, props_t, rels_t, individuals_t = term.args
    if not isinstance(id_t, Symbol) or not isinstance(mother_t, Symbol):
        raise ClauseError(f"class id and mother must be names in {print_term(term)}")
    if not isinstance(individuals_t, ListTerm):
        raise ClauseError(f"{id_t.name}: individuals list expected")
    return ClassDef(
        id=id_t.name,
        mother=None if mother_t.name == "none" else mother_t.name,
        props=_clauses(props_t, "property", id_t.name),
        rels=_clauses(rels_t, "relation", id_t.name),
        individuals=tuple(_individual_from_term(t, id_t.name) for t in individuals_t.elements),
    )


def _validated(classes):
    roots = [c for c in classes if c.mother is None]
    if len(roots) != 1 or roots[0].id != "top":
        raise HierarchyError("exactly one root class named top with mother none is required")
    seen = set()
    for c in classes:
        if c.id in seen:
            raise HierarchyError(f"duplicate class id {c.id!r}")
        if c.mother is not None and c.mother not in seen:
            raise HierarchyError(f"class {c.id!r} names unknown or later-declared mother {c.mother!r}")
        seen.add(c.id)
    individuals = set()
    for c in classes:
        for ind in c.individuals:
            if ind.id in individuals or ind.id in seen:
                raise HierarchyError(f"duplicate individual id {ind.id!r}")
            individuals.add(ind.id)
    return Taxonomy(tuple(classes))


def _coerce_literal(value):
    if isinstance(value, Literal):
        return value
    if isinstance(value, str):
        value = parse_term(value)
    return literal_from_term(value)


def _name(value):
    if isinstance(value, Symbol):
        return value.name
    if isinstance(value, str):
        return value
    raise UnknownTarget(f"name expected, got {value}")


# Closure -------------------------------------------------------------------

class _Closure:
    """Accumulates a consistent set of literals, most specific first."""

    def __init__(self):
        self.literals = []
        self._labels = {}
        self._values = {}
        self._negations = {}

    def add(self, literal, depth, weight, strict=True):
        here = (depth, weight)
        if literal.is_label:
            previous = self._labels.get(literal.attribute)
            if previous is not None:
                if strict and previous[1:] == here and previous[0] != literal.positive:
                    raise SameLevelConflict(f"{literal.attribute} and its negation asserted at the same level")
                return False
            self._labels[literal.attribute] = (literal.positive, depth, weight)
        elif literal.positive:
            negation = self._negations.get((literal.attribute, literal.value))
            if negation is not None:
                if strict and negation == here:
                    raise SameLevelConflict(f"{literal} and its negation asserted at the same level")
                return False
            if literal.attribute in self._values:
                return False
            self._values[literal.attribute] = (literal.value, depth, weight)
        else:
            held = self._values.get(literal.attribute)
            if held is not None and held[0] == literal.value:
                if strict and held[1:] == here:
                    raise SameLevelConflict(f"{literal.negate()} and its negation asserted at the same level")
                return False
            if (literal.attribute, literal.value) in self._negations:
                return False
            self._negations[(literal.attribute, literal.value)] = here
        self.literals.append(literal)
        return True


def _atomic(path, lists=("props", "rels")):
    closure = _Closure()
    for depth, node in enumerate(path):
        clauses = [wc for name in lists for wc in getattr(node, name) if not wc.is_default]
        for wc in sorted(clauses, key=lambda c: c.weight):
            closure.add(wc.clause, depth, wc.weight)
    return closure


def _defaults(path, lists=("props", "rels")):
    found = [wc.clause for node in path for name in lists for wc in getattr(node, name) if wc.is_default]
    return sorted(found, key=lambda d: d.weight)


def _match(pattern, fact, env):
    if pattern.attribute != fact.attribute or pattern.positive != fact.positive:
        return None
    if pattern.is_label or fact.is_label:
        return env if pattern.is_label and fact.is_label else None
    return unify(pattern.value, fact.value, env)


def _contradicted(literal, facts):
    for fact in facts:
        if fact.attribute != literal.attribute or fact.positive == literal.positive:
            continue
        if fact.is_label and literal.is_label:
            return True
        if not fact.is_label and not literal.is_label and fact.value == literal.value:
            return True
    return False


def _solutions(antecedents, facts, later, env):
    if not antecedents:
        yield env
        return
    first, rest = antecedents[0], antecedents[1:]
    matched = False
    for fact in facts:
        bound = _match(first, fact, env)
        if bound is not None:
            matched = True
            yield from _solutions(rest, facts, later, bound)
    if not matched and later:
        # forward step over the heavier defaults (temporary proposition set)
        temporary = [literal for literal, _ in _fire(facts, later)]
        for fact in temporary:
            bound = _match(first, fact, env)
            if bound is not None:
                yield from _solutions(rest, facts, later, bound)


def _fire(prop, lcd):
    """Fire sorted defaults against prop; yields (consequent, Explanation) in firing order."""
    result = list(prop)
    fired = []
    for index, default in enumerate(lcd):
        default = default.renamed()
        env = next(_solutions(default.antecedents, result, lcd[index + 1:], {}), None)
        if env is None:
            continue
        consequent = default.consequent.bind(env)
        if not consequent.is_ground() or consequent in result or _contradicted(consequent, result):
            continue
        result.append(consequent)
        fired.append((consequent, Explanation(
            consequent, tuple(a.bind(env) for a in default.antecedents), default.weight)))
    return fired


def _resolve(kb, subject, lists=("props", "rels")):
    """Specificity-resolved closure plus the explanations of the defaults kept in it."""
    path = kb.path(subject)
    base = _atomic(path).literals
    closure = _atomic(path, lists)
    depth = len(path)
    explanations = []
    for literal, explanation in _fire(base, _defaults(path, lists)):
        if closure.add(literal, depth, explanation.weight, strict=False):
            explanations.append(explanation)
    return closure.literals, explanations


def _values_for(kb, scope, attribute, known, exclude, ignore_exceptions):
    path = kb.path(scope)
    base = [l for l in _atomic(path).literals if l.attribute not in exclude]
    for literal in map(_coerce_literal, known):
        if literal.attribute not in exclude and literal not in base:
            base.append(literal)
    if ignore_exceptions:
        base = [l for l in base if l.positive or l.attribute != attribute]
    values = [l.value for l in base if l.attribute == attribute and l.positive and not l.is_label]
    for literal, _ in _fire(base, _defaults(path)):
        if literal.attribute == attribute and literal.positive and not literal.is_label:
            values.append(literal.value)
    return values


def _node_update(kb, subject, kind, change):
    """Replace the props or rels tuple of one node through change(old) -> new."""
    field_name = "props" if kind == "property" else "rels"
    if kb.is_individual(subject):
        class_id, _ = kb.individual_index[subject]
        classes = []
        for c in kb.classes:
            if c.id == class_id:
                individuals = tuple(
                    replace(ind, **{field_name: change(getattr(ind, field_name))}) if ind.id == subject else ind
                    for ind in c.individuals
                )
                c = replace(c, individuals=individuals)
            classes.append(c)
        return classes
    if kb.is_class(subject):
        return [
            replace(c, **{field_name: change(getattr(c, field_name))}) if c.id == subject else c
            for c in kb.classes
        ]
    raise UnknownTarget(f"unknown class or individual {subject!r}")


def _clause_target(payload):
    if not (isinstance(payload, Compound) and payload.functor in ("property", "relation") and len(payload.args) == 2):
        raise UnknownTarget(f"expected property(Subject, Clause) or relation(Subject, Clause), got {print_term(payload)}")
    return payload.functor, _name(payload.args[0]), payload.args[1]


def _direct_contradiction(a, b):
    return (
        a.attribute == b.attribute
        and a.positive != b.positive
        and a.is_label == b.is_label
        and (a.is_label or a.value == b.value)
    )


class KBService:
    """Retrieval, inference and update services over a Taxonomy."""

    @staticmethod
    def load_kb(text, source=None):
        """
        Parse and validate a KB written as a list of class/5 terms.

        Args:
            text (str): KB text in term notation
            source (str): Optional file name used in error messages

        Returns:
            Taxonomy: Validated taxonomy, declaration order preserved
        """
        term = parse_term(text, source=source)
        if not isinstance(term, ListTerm):
            raise ClauseError("a KB is a list of class/5 terms", source=source)
        try:
            kb = _validated([class_from_term(t) for t in term.elements])
        except ServiceBotError as e:
            raise e.with_source(source)
        logger.info(f"Loaded KB {source or '<text>'}: {len(kb.classes)} classes, {len(kb.individual_index)} individuals")
        return kb

    @staticmethod
    def load_kb_file(path):
        path = Path(path)
        return KBService.load_kb(path.read_text(encoding="utf-8"), source=str(path))

    @staticmethod
    def dump_kb(kb):
        """Re-emit a taxonomy in the KB file format."""
        rows = []
        for c in kb.classes:
            individuals = lst(*(
                lst(comp("=>", Symbol("id"), Symbol(ind.id)),
                    lst(*(wc.to_term() for wc in ind.props)),
                    lst(*(wc.to_term() for wc in ind.rels)))
                for ind in c.individuals
            ))
            term = comp(
                "class",
                Symbol(c.id),
                Symbol(c.mother or "none"),
                lst(*(wc.to_term() for wc in c.props)),
                lst(*(wc.to_term() for wc in c.rels)),
                individuals,
            )
            rows.append(" " + print_term(term))
        return "[\n" + ",\n".join(rows) + "\n]\n"

    @staticmethod
    def resolve_closure(kb, subject):
        """
        Consistent extension for a class or individual under specificity and weights.

        Returns:
            list[Literal]: Atomic literals most specific first, then fired defaults
        """
        literals, _ = _resolve(kb, subject)
        return literals

    @staticmethod
    def ask(kb, subject, literal):
        literal = _coerce_literal(literal)
        closure = KBService.resolve_closure(kb, subject)
        if any(_match(literal, fact, {}) is not None for fact in closure):
            return Verdict.YES
        if any(_match(literal.negate(), fact, {}) is not None for fact in closure):
            return Verdict.NO
        return Verdict.UNKNOWN

    @staticmethod
    def extension_of(kb, kind, key):
        """
        Individuals in a class, or holding a property, relation or explanation.

        Args:
            kb (Taxonomy): Knowledge base
            kind (str): class, property, relation or explanation
            key: Class name for kind=class, otherwise a literal

        Returns:
            set | dict: Individual ids; for kind=explanation a dict id -> Explanation
        """
        if kind == "class":
            return set(kb.individuals_of(_name(key)))
        literal = _coerce_literal(key)
        individuals = list(kb.individual_index)
        if kind in ("property", "relation"):
            lists = ("props",) if kind == "property" else ("rels",)
            return {
                ind for ind in individuals
                if any(_match(literal, fact, {}) is not None for fact in _resolve(kb, ind, lists)[0])
            }
        if kind == "explanation":
            found = {}
            for ind in individuals:
                for explanation in _resolve(kb, ind)[1]:
                    if _match(literal, explanation.consequent, {}) is not None:
                        found[ind] = explanation
                        break
            return found
        raise ValueError(f"unknown extension kind {kind!r}")

    @staticmethod
    def profile_of_individual(kb, kind, individual):
        if not kb.is_individual(individual):
            raise UnknownIndividual(f"unknown individual {individual!r}")
        if kind == "classes":
            return kb.class_chain(kb.class_of(individual))
        if kind == "properties":
            return _resolve(kb, individual, ("props",))[0]
        if kind == "relations":
            return _resolve(kb, individual, ("rels",))[0]
        if kind == "explanations":
            return _resolve(kb, individual)[1]
        raise ValueError(f"unknown profile kind {kind!r}")

    @staticmethod
    def chain_defaults(prop, lcd):
        """
        Extend prop with the consequents of every default that fires.

        Antecedents are satisfied by prop (backward) or by consequents of the
        later, heavier defaults (forward). lcd must be sorted by weight.
        """
        prop = [_coerce_literal(p) for p in prop]
        return prop + [literal for literal, _ in _fire(prop, list(lcd))]

    @staticmethod
    def preferred_value(kb, scope, attribute, known=(), exclude=(), ignore_exceptions=False):
        """
        Most preferred value of attribute for scope.

        Args:
            kb (Taxonomy): Knowledge base
            scope (str): Class or individual id
            attribute (str): Attribute name
            known (iterable): Extra literals known to hold
            exclude (iterable): Attributes left out of the fact base
            ignore_exceptions (bool): Disregard negated values of attribute

        Returns:
            Term | None: First value after weight ordering, or None
        """
        values = _values_for(kb, scope, attribute, known, set(exclude), ignore_exceptions)
        return values[0] if values else None

    @staticmethod
    def preferred_value_list(kb, scope, attribute, known=(), exclude=(), ignore_exceptions=False):
        values = _values_for(kb, scope, attribute, known, set(exclude), ignore_exceptions)
        ordered = []
        for value in values:
            if value not in ordered:
                ordered.append(value)
        return ordered

    @staticmethod
    def abduce(kb, subject, observed):
        """
        Most preferred explanation of an observed literal.

        Returns:
            Explanation | None: Lowest-weight default whose consequent matches observed
        """
        observed = _coerce_literal(observed)
        for default in _defaults(kb.path(subject)):
            default = default.renamed()
            env = _match(default.consequent, observed, {})
            if env is not None:
                return Explanation(observed, tuple(a.bind(env) for a in default.antecedents), default.weight)
        return None

    @staticmethod
    def clauses_of(kb, subject, kind="property"):
        """Weighted clauses stated directly at one node."""
        node = kb.path(subject)[0]
        return node.props if kind == "property" else node.rels

    @staticmethod
    def update_kb(kb, op, payload):
        """
        Apply one update and return the new taxonomy.

        Args:
            kb (Taxonomy): Current taxonomy
            op (str): add_class, remove_class, add_individual, remove_individual,
                assert_clause, retract_clause or set_value
            payload (Term): class/5 term, a name, individual(Class, [id=>X, Props, Rels]),
                or property(Subject, Clause) / relation(Subject, Clause)

        Returns:
            Taxonomy: Updated, validated taxonomy
        """
        if op == "add_class":
            classes = list(kb.classes) + [class_from_term(payload)]
        elif op == "remove_class":
            name = _name(payload)
            if not kb.is_class(name):
                raise UnknownTarget(f"unknown class {name!r}")
            if name == "top":
                raise HierarchyError("the root class cannot be removed")
            doomed = set(kb.descendants(name))
            classes = [c for c in kb.classes if c.id not in doomed]
        elif op == "add_individual":
            if not (isinstance(payload, Compound) and payload.functor == "individual" and len(payload.args) == 2):
                raise UnknownTarget(f"expected individual(Class, [id=>Name, Props, Rels]), got {print_term(payload)}")
            class_id = _name(payload.args[0])
            if not kb.is_class(class_id):
                raise UnknownTarget(f"unknown class {class_id!r}")
            individual = _individual_from_term(payload.args[1], class_id)
            classes = [
                replace(c, individuals=c.individuals + (individual,)) if c.id == class_id else c
                for c in kb.classes
            ]
        elif op == "remove_individual":
            name = _name(payload)
            if not kb.is_individual(name):
                raise UnknownTarget(f"unknown individual {name!r}")
            classes = [
                replace(c, individuals=tuple(i for i in c.individuals if i.id != name))
                for c in kb.classes
            ]
        elif op in ("assert_clause", "retract_clause", "set_value"):
            kind, subject, clause_term = _clause_target(payload)
            clause = clause_from_term(clause_term, kind)
            if op == "assert_clause":
                classes = _node_update(kb, subject, kind, lambda old: _asserted(old, clause))
            elif op == "retract_clause":
                classes = _node_update(kb, subject, kind, lambda old: _retracted(old, clause, clause_term, subject))
            else:
                classes = _node_update(kb, subject, kind, lambda old: _with_value(old, clause))
        else:
            raise ValueError(f"unknown update operation {op!r}")
        updated = _validated(classes)
        logger.debug(f"KB {op}: {print_term(payload) if not isinstance(payload, str) else payload}")
        return updated


def _asserted(old, clause):
    if clause in old:
        return old
    kept = old
    if not clause.is_default:
        kept = tuple(
            wc for wc in old
            if wc.is_default or not _direct_contradiction(wc.clause, clause.clause)
        )
    return kept + (clause,)


def _retracted(old, clause, clause_term, subject):
    explicit_weight = isinstance(clause_term, ListTerm) and len(clause_term) == 2
    for index, wc in enumerate(old):
        if wc.clause == clause.clause and (not explicit_weight or wc.weight == clause.weight):
            return old[:index] + old[index + 1:]
    raise UnknownTarget(f"{subject} has no clause {print_term(clause_term)}")


def _with_value(old, clause):
    literal = clause.clause
    if clause.is_default or literal.is_label or not literal.positive:
        raise ClauseError("set_value takes a positive attribute=>value pair")
    kept = tuple(
        wc for wc in old
        if wc.is_default or not (wc.clause.attribute == literal.attribute and wc.clause.positive and not wc.clause.is_label)
    )
    return kept + (WeightedClause(literal, 0),)


class KBStore:
    """
    Single writer over the current taxonomy.

    Holds the latest Taxonomy value, applies updates in order and offers the
    belief helpers perception and the flows share.
    """

    def __init__(self, taxonomy, source=None):
        self.taxonomy = taxonomy
        self.source = source
        self.updates = []

    @classmethod
    def from_file(cls, path):
        return cls(KBService.load_kb_file(path), source=str(path))

    def update(self, op, payload):
        if isinstance(payload, str):
            payload = parse_term(payload)
        self.taxonomy = KBService.update_kb(self.taxonomy, op, payload)
        self.updates.append((op, print_term(payload)))
        return self.taxonomy

    # clause helpers

    def assert_clause(self, subject, clause, weight=0, kind="property"):
        term = clause if not isinstance(clause, Literal) else clause.to_term()
        if isinstance(term, str):
            term = parse_term(term)
        return self.update("assert_clause", comp(kind, Symbol(subject), lst(term, Number(weight))))

    def retract_where(self, subject, predicate, kind="property"):
        """Retract every clause at subject's own node for which predicate(clause) holds."""
        removed = 0
        for wc in list(KBService.clauses_of(self.taxonomy, subject, kind)):
            if predicate(wc):
                self.update("retract_clause", comp(kind, Symbol(subject), wc.to_term()))
                removed += 1
        return removed

    def set_value(self, subject, attribute, value, kind="property"):
        value = value if not isinstance(value, str) else Symbol(value)
        return self.update("set_value", comp(kind, Symbol(subject), comp("=>", Symbol(attribute), value)))

    def value_of(self, subject, attribute):
        """Atomic value stated directly at subject's node, if any."""
        for wc in KBService.clauses_of(self.taxonomy, subject):
            literal = wc.clause
            if not wc.is_default and literal.attribute == attribute and literal.positive and not literal.is_label:
                return literal.value
        return None

    # queries

    def ask(self, subject, literal):
        return KBService.ask(self.taxonomy, subject, literal)

    def holds(self, subject, literal):
        return self.ask(subject, literal) == Verdict.YES

    def preferred_value(self, scope, attribute, known=(), **options):
        return KBService.preferred_value(self.taxonomy, scope, attribute, known, **options)

    def preferred_value_list(self, scope, attribute, known=(), **options):
        return KBService.preferred_value_list(self.taxonomy, scope, attribute, known, **options)

    def abduce(self, subject, observed):
        return KBService.abduce(self.taxonomy, subject, observed)

    def class_of(self, individual):
        return self.taxonomy.class_of(individual)

    def is_a(self, individual, class_id):
        return self.taxonomy.is_individual(individual) and class_id in self.taxonomy.class_chain(self.class_of(individual))

    # beliefs about where objects are

    def believed_location(self, obj):
        value = self.preferred_value(obj, "loc")
        return value.name if isinstance(value, Symbol) else None

    def location_order(self, obj):
        return [v.name for v in self.preferred_value_list(obj, "loc") if isinstance(v, Symbol)]

    def predefined_location(self, obj):
        """Preferred location ignoring observations (last_seen and location exceptions)."""
        value = self.preferred_value(obj, "loc", exclude=("last_seen",), ignore_exceptions=True)
        return value.name if isinstance(value, Symbol) else None

    def believe_at(self, obj, shelf):
        self.retract_where(obj, lambda wc: not wc.is_default and wc.clause.attribute == "loc"
                           and wc.clause.positive and wc.clause.value != Symbol(shelf))
        self.retract_where(obj, lambda wc: not wc.is_default and wc.clause == Literal("loc", Symbol(shelf), False))
        if self.value_of(obj, "last_seen") != Symbol(shelf):
            self.set_value(obj, "last_seen", shelf)

    def believe_not_at(self, obj, shelf):
        self.assert_clause(obj, Literal("loc", Symbol(shelf), False))
        if self.value_of(obj, "last_seen") == Symbol(shelf):
            self.retract_where(obj, lambda wc: not wc.is_default and wc.clause.attribute == "last_seen")

    def hypothesize_at(self, obj, shelf):
        self.retract_where(obj, lambda wc: not wc.is_default and wc.clause.attribute == "last_seen")
        self.set_value(obj, "loc", shelf)

    def believe_taken(self, obj):
        """The object left the shelves: drop every observational location fact."""
        self.retract_where(obj, lambda wc: not wc.is_default and (
            wc.clause.attribute in ("last_seen", "loc") or wc.clause == Literal("misplaced")))
