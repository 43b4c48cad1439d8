"""Parser, desugaring, and pretty-printer round-trip."""

import random

import pytest

from pap import syntax
from pap.parser import PapSyntaxError, UnknownPrimitiveError, parse, parse_surface
from pap.syntax import (
    REAL,
    App,
    ConstReal,
    If,
    Lam,
    Prim,
    Sample,
    Score,
    Var,
    free_vars,
    pretty,
)
from termgen import gen_term


def test_fun_mul():
    t = parse("fun (x : real) -> mul(x, x)")
    assert t == Lam("x", REAL, Prim("mul", (Var("x"), Var("x"))))


def test_sillyid_body():
    t = parse("fun (x : real) -> if eq(x, 0.0) then 0.0 else x")
    assert t.body == If(
        Prim("eq", (Var("x"), ConstReal(0.0))), ConstReal(0.0), Var("x")
    )


def test_let_desugars_to_application():
    t = parse("let y = sample in score(y)")
    assert t == App(Lam("y", None, Score(Var("y"))), Sample())


def test_let_surface_kept():
    t = parse_surface("let y = 1.0 in y")
    assert isinstance(t, syntax.Let)
    assert syntax.is_desugared(syntax.desugar(t))


def test_syntax_error_has_position():
    with pytest.raises(PapSyntaxError) as exc:
        parse("fun (x : real) ->\n  mul(x,)")
    assert exc.value.line == 2


def test_unknown_primitive():
    with pytest.raises(UnknownPrimitiveError) as exc:
        parse("bogus(1.0, 2.0)")
    assert exc.value.name == "bogus"


def test_unbound_variable_is_unknown_primitive_error():
    with pytest.raises(UnknownPrimitiveError):
        parse("fun (x : real) -> y")


def test_prim_arity_checked():
    with pytest.raises(PapSyntaxError):
        parse("add(1.0)")


def test_binder_shadows_primitive():
    t = parse("fun (add : real) -> add")
    assert t.body == Var("add")


def test_application_juxtaposition_left_assoc():
    t = parse("fun (f : real -> real -> real) -> fun (x : real) -> f x x")
    body = t.body.body
    assert body == App(App(Var("f"), Var("x")), Var("x"))


def test_negative_literals_and_exponents():
    assert parse("-3.7") == ConstReal(-3.7)
    assert parse("2.5e-05") == ConstReal(2.5e-05)
    assert parse("1e+16") == ConstReal(1e16)


def test_comments_ignored():
    t = parse("# heading\n1.0 # trailing\n")
    assert t == ConstReal(1.0)

def test_unit_and_pairs():
    assert parse("()") == syntax.ConstUnit()
    assert parse("(1.0, true)") == syntax.Pair(ConstReal(1.0), syntax.ConstBool(True))


def test_mu_result_type_stops_before_arrow():
    t = parse("mu f (x : real) : real -> x")
    assert t.result_type == REAL
    t = parse("mu f (x : real) : (real -> real) -> fun (y : real) -> y")
    assert t.result_type == syntax.ArrowT(REAL, REAL)


def test_type_connective_precedence():
    t = parse("fun (x : real * real -> real) -> x")
    assert t.param_type == syntax.ArrowT(syntax.ProdT(REAL, REAL), REAL)


def test_free_vars():
    assert free_vars(Var("x")) == {"x"}
    assert free_vars(parse("fun (x : real) -> x")) == set()
    assert free_vars(App(Var("f"), Var("x"))) == {"f", "x"}


def test_pretty_roundtrip_generated_terms():
    rng = random.Random(20240817)
    checked = 0
    for _ in range(300):
        t, _ty = gen_term(rng, depth=4, prob=rng.random() < 0.3)
        again = parse(pretty(t))
        assert again == t, pretty(t)
        checked += 1
    assert checked == 300


def test_pretty_roundtrip_builtins():
    from pap import programs

    for name in programs.names():
        t = programs.term(name)
        assert parse(pretty(t)) == t, name
