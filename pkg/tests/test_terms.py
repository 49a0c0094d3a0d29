"""
unit tests for servicebot.utils.terms
"""
from pytest import mark, raises

from servicebot.errors import TermSyntaxError
from servicebot.utils.terms import (
    Compound,
    ListTerm,
    Number,
    Symbol,
    Variable,
    as_term,
    comp,
    lst,
    parse_clauses,
    parse_term,
    print_term,
    sym,
)


def test_parse_atoms_numbers_and_variables():
    """parse_term() - primaries"""
    assert parse_term("monday") == Symbol("monday")
    assert parse_term("'not ok'") == Symbol("not ok")
    assert parse_term("42") == Number(42)
    assert parse_term("In_Arg") == Variable("In_Arg")
    assert parse_term("_").anonymous


def test_parse_operators_nest_right():
    """parse_term() - ==> binds looser than : which binds looser than =>"""
    term = parse_term("id ==> a:b => c")
    assert term.functor == "==>"
    arc = term.args[1]
    assert arc.functor == ":"
    assert arc.args[1] == comp("=>", sym("b"), sym("c"))


def test_parse_default_clause():
    """parse_term() - a conditional default keeps its chain of =>> on the right"""
    term = parse_term("work=>'-'=>>live=>>'-'")
    assert term.functor == "=>>"
    assert term.args[0] == comp("=>", sym("work"), sym("-"))
    assert term.args[1] == comp("=>>", sym("live"), sym("-"))


def test_parse_arc_arrow_is_loosest_in_arcs():
    """parse_term() - inside an arcs list the arc arrow groups Expectation:Action first"""
    term = parse_term("arcs ==> [finish:screen('Good Bye') => fs, [day(X)]:[] => is]")
    assert term.args[0] == sym("arcs")
    first, second = term.args[1].elements
    assert first == comp("=>", comp(":", sym("finish"), comp("screen", sym("Good Bye"))), sym("fs"))
    assert second.args[0].args[1] == ListTerm(())
    assert parse_term("arcs ==> []") == comp("==>", sym("arcs"), ListTerm(()))


@mark.parametrize(
    "text, action",
    [
        ("arcs ==> [e:(k=>v) => n]", comp("=>", sym("k"), sym("v"))),
        ("arcs ==> [e:f(k=>v) => n]", comp("f", comp("=>", sym("k"), sym("v")))),
        ("arcs ==> [e:[k=>v, w] => n]", lst(comp("=>", sym("k"), sym("v")), sym("w"))),
    ],
)
def test_parse_arc_action_with_its_own_pair(text, action):
    """parse_term() - a pair inside an arc's action stays inside the action"""
    (arc,) = parse_term(text).args[1].elements
    assert arc.functor == "=>"
    assert arc.args[0] == comp(":", sym("e"), action)
    assert arc.args[1] == sym("n")


def test_parse_arc_unparenthesized_pair_is_rejected():
    """parse_term() - a bare pair after the arc arrow is a syntax error"""
    with raises(TermSyntaxError):
        parse_term("arcs ==> [e:k => v => n]")


def test_print_quotes_arcs_keyword():
    """print_term() - the arcs keyword prints quoted and the program still reads back"""
    assert print_term(sym("arcs")) == "'arcs'"
    term = parse_term("[id ==> is, arcs ==> [e:(k=>v) => n]]")
    assert parse_term(print_term(term)) == term


def test_parse_lists_and_comments():
    """parse_term() - lists, the empty list and % comments"""
    assert parse_term("[a, b] % trailing") == lst(sym("a"), sym("b"))
    assert parse_term("[]") == ListTerm(())
    assert parse_term("f([x], y).") == comp("f", lst(sym("x")), sym("y"))


def test_parse_clauses():
    """parse_clauses() - several terms, each ending with a dot"""
    clauses = parse_clauses("flow(gpsr).\n% note\nseed(7).\n")
    assert clauses == [comp("flow", sym("gpsr")), comp("seed", Number(7))]


@mark.parametrize("text", ["f(a", "[a,,b]", "a ==> ", ")"])
def test_parse_errors_carry_position(text):
    """parse_term() - malformed input raises TermSyntaxError with a location"""
    with raises(TermSyntaxError) as exc:
        parse_term(text, source="bad.txt")
    assert exc.value.source == "bad.txt"
    assert str(exc.value).startswith("bad.txt")


def test_print_canonical_forms():
    """print_term() - quoting, lists and operator spacing"""
    assert print_term(sym("not ok")) == "'not ok'"
    assert print_term(sym("Good")) == "'Good'"
    assert print_term(lst(sym("a"), Number(1))) == "[a,1]"
    assert print_term(comp("==>", sym("g_count"), Number(0))) == "g_count ==> 0"
    assert print_term(comp(":", sym("fs1"), comp("screen", sym("Back")))) == "fs1:screen('Back')"


def test_print_parenthesizes_looser_operators():
    """print_term() - a looser operator under a tighter one gets parentheses"""
    term = comp("=>", comp(":", sym("a"), sym("b")), sym("c"))
    assert print_term(term) == "(a:b)=>c"
    assert parse_term(print_term(term)) == term


@mark.parametrize(
    "text",
    [
        "diag_mod(main,[[id ==> is,type ==> neutral,arcs ==> [empty:empty => fs]]],[])",
        "[[day(X)]:[date(get(day,Y)),next_date(set(day,X))] => is]",
        "class(birds,animals,[[fly,0],[not(swim),0]],[],[])",
        "[last_seen=>'-'=>>loc=>'-',1]",
        "apply(when(If,True,False),[In_Arg==monday,tuesday,monday])",
    ],
)
def test_print_parse_identity(text):
    """print_term() - printing then parsing gives the same term"""
    term = parse_term(text)
    assert parse_term(print_term(term)) == term


def test_as_term_lifts_python_values():
    """as_term() - str, int, bool and nested sequences"""
    assert as_term("ok") == Symbol("ok")
    assert as_term(3) == Number(3)
    assert as_term(True) == Symbol("true")
    assert as_term(["a", [1]]) == lst(sym("a"), lst(Number(1)))
    with raises(TypeError):
        as_term(1.5)


def test_compound_needs_arguments():
    """Compound() - zero-arity compounds are symbols"""
    with raises(ValueError):
        Compound("f", ())
