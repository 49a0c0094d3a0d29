"""Unification with occurs-check over terms, plus substitution helpers."""

import itertools

from servicebot.utils.terms import Compound, ListTerm, Variable

_fresh = itertools.count(1)


def walk(term, env):
    """Follow variable bindings until reaching a non-variable or an unbound variable."""
    while isinstance(term, Variable) and term.name in env:
        term = env[term.name]
    return term


def substitute(term, env):
    """Apply a binding to every variable in term."""
    if not env:
        return term
    term = walk(term, env)
    if isinstance(term, Compound):
        return Compound(term.functor, tuple(substitute(a, env) for a in term.args))
    if isinstance(term, ListTerm):
        return ListTerm(tuple(substitute(e, env) for e in term.elements))
    return term


def variables_of(term):
    """Named (non-anonymous) variables of a term, in first-occurrence order."""
    seen = []
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Variable):
            if not t.anonymous and t.name not in seen:
                seen.append(t.name)
        elif isinstance(t, Compound):
            stack.extend(reversed(t.args))
        elif isinstance(t, ListTerm):
            stack.extend(reversed(t.elements))
    return seen


def is_ground(term):
    if isinstance(term, Variable):
        return False
    if isinstance(term, Compound):
        return all(is_ground(a) for a in term.args)
    if isinstance(term, ListTerm):
        return all(is_ground(e) for e in term.elements)
    return True


def _occurs(name, term, env):
    term = walk(term, env)
    if isinstance(term, Variable):
        return term.name == name
    if isinstance(term, Compound):
        return any(_occurs(name, a, env) for a in term.args)
    if isinstance(term, ListTerm):
        return any(_occurs(name, e, env) for e in term.elements)
    return False


def _unify(a, b, env):
    a = walk(a, env)
    b = walk(b, env)
    if isinstance(a, Variable) and a.anonymous:
        return True
    if isinstance(b, Variable) and b.anonymous:
        return True
    if isinstance(a, Variable):
        if isinstance(b, Variable) and a.name == b.name:
            return True
        if _occurs(a.name, b, env):
            return False
        env[a.name] = b
        return True
    if isinstance(b, Variable):
        return _unify(b, a, env)
    if isinstance(a, Compound) and isinstance(b, Compound):
        if a.functor != b.functor or len(a.args) != len(b.args):
            return False
        return all(_unify(x, y, env) for x, y in zip(a.args, b.args))
    if isinstance(a, ListTerm) and isinstance(b, ListTerm):
        if len(a.elements) != len(b.elements):
            return False
        return all(_unify(x, y, env) for x, y in zip(a.elements, b.elements))
    return a == b


def unify(a, b, env=None):
    """
    Most general unifier of a and b extending env.

    Args:
        a (Term): First term
        b (Term): Second term
        env (dict): Idempotent binding to extend (not mutated)

    Returns:
        dict: New idempotent binding, or None when the terms do not unify
    """
    work = dict(env or {})
    if not _unify(a, b, work):
        return None
    return {name: substitute(value, work) for name, value in work.items()}


def rename(term, suffix=None):
    """Copy term with every named variable renamed apart (``X`` -> ``_X_7``)."""
    tag = suffix if suffix is not None else next(_fresh)
    mapping = {name: Variable(f"_{name}_{tag}") for name in variables_of(term)}
    return substitute(term, mapping)
