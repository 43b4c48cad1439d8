"""Derivative transform: macro shape, type preservation, drivers, and the
agreement properties against the oracle."""

import random
import struct

import pytest

from pap import ad, interp, numcheck, programs
from pap.interp import Bottom, Val
from pap.parser import parse
from pap.syntax import (
    BOOL,
    REAL,
    ArrowT,
    ConstReal,
    If,
    Pair,
    Prim,
    ProdT,
    Var,
    contains_prob,
    pretty,
)
from pap.typecheck import typecheck, typecheck_closed
from termgen import context_of, gen_term


def bits(x: float) -> bytes:
    return struct.pack("<d", x)


# -- macro shape -------------------------------------------------------------

def test_transform_constant():
    assert ad.transform(ConstReal(3.0)) == Pair(ConstReal(3.0), ConstReal(0.0))


def test_transform_variable_fixed():
    assert ad.transform(Var("x")) == Var("x")


def test_transform_if_homomorphic():
    t = If(Var("b"), ConstReal(1.0), ConstReal(2.0))
    d = ad.transform(t)
    assert d == If(
        Var("b"),
        Pair(ConstReal(1.0), ConstReal(0.0)),
        Pair(ConstReal(2.0), ConstReal(0.0)),
    )


def test_transform_prim_becomes_dual_call():
    d = ad.transform(Prim("mul", (Var("x"), Var("y"))))
    assert d == Prim("mul_d", (Var("x"), Var("y")))


def test_type_translation():
    assert ad.translate_type(REAL) == ProdT(REAL, REAL)
    assert ad.translate_type(BOOL) == BOOL
    assert ad.translate_type(ArrowT(REAL, BOOL)) == ArrowT(ProdT(REAL, REAL), BOOL)


def test_transform_type_preservation_generated():
    rng = random.Random(23)
    checked = 0
    for _ in range(250):
        ctx_dict = {"u": REAL} if rng.random() < 0.5 else {}
        t, ty = gen_term(rng, ctx_dict, depth=4)
        if contains_prob(t):
            continue
        d = ad.transform(t)
        dctx = context_of({k: ad.translate_type(v) for k, v in ctx_dict.items()})
        assert typecheck(dctx, d) == ad.translate_type(ty)
        checked += 1
    assert checked > 150


def test_emitted_source_reparses_and_typechecks():
    for name in ("sillyid", "square", "q", "counterexample_p", "cantor"):
        t = programs.term(name)
        d = ad.transform(t)
        src = pretty(d)
        again = parse(src)
        assert again == d
        assert typecheck_closed(again) == ad.translate_type(typecheck_closed(t))


# -- drivers -----------------------------------------------------------------

def test_derivative_sillyid():
    sid = programs.term("sillyid")
    assert ad.derivative(sid, 0.0) == Val(0.0)
    assert ad.derivative(sid, 2.0) == Val(1.0)


def test_derivative_square():
    assert ad.derivative(programs.term("square"), 3.0) == Val(6.0)


def test_derivative_finite_difference_interior():
    sid = programs.term("sillyid")
    fd, cls = numcheck.fd_derivative(
        lambda x: x if x != 0.0 else 0.0, 2.0, numcheck.FDConfig()
    )
    assert cls == numcheck.INTERIOR
    assert ad.derivative(sid, 2.0).value == pytest.approx(fd, rel=1e-9)


def test_jvp_tupled():
    t = parse("fun (p : real * real) -> (mul(match p with (a, b) -> a, match p with (a, b) -> b), add(match p with (a, b) -> a, match p with (a, b) -> b))")
    out = ad.jvp(t, [2.0, 3.0], [1.0, 0.0])
    assert out == Val((3.0, 1.0))


def test_jvp_curried():
    t = parse("fun (x : real) -> fun (y : real) -> (mul(x, y), add(x, y))")
    out = ad.jvp(t, [2.0, 3.0], [1.0, 0.0])
    assert out == Val((3.0, 1.0))
    out = ad.jvp(t, [2.0, 3.0], [0.0, 0.0])
    assert out == Val((0.0, 0.0))


def test_jvp_piecewise_branch():
    t = parse("fun (x : real) -> fun (y : real) -> if lt(x, y) then x else y")
    out = ad.jvp(t, [1.0, 2.0], [1.0, 1.0])
    assert out == Val((1.0,))
    fd, _ = numcheck.fd_derivative(lambda s: min(1.0 + s, 2.0 + s), 0.0, numcheck.FDConfig())
    assert out.value[0] == pytest.approx(fd, rel=1e-6)


def test_jvp_linearity_in_seed():
    rng = random.Random(31)
    t = parse(
        "fun (x : real) -> fun (y : real) -> (exp(mul(0.3, sub(x, y))), mul(sin(x), y))"
    )
    dclo = ad.dual_closure(t)
    arg_types, n = ad.input_signature(typecheck_closed(t))
    for _ in range(50):
        xs = [rng.uniform(-2, 2), rng.uniform(-2, 2)]
        v = [rng.uniform(-2, 2), rng.uniform(-2, 2)]
        w = [rng.uniform(-2, 2), rng.uniform(-2, 2)]
        a, b = rng.uniform(-2, 2), rng.uniform(-2, 2)
        combo = ad.jvp_via(dclo, arg_types, xs, [a * vi + b * wi for vi, wi in zip(v, w)]).value
        jv = ad.jvp_via(dclo, arg_types, xs, v).value
        jw = ad.jvp_via(dclo, arg_types, xs, w).value
        for c, x1, x2 in zip(combo, jv, jw):
            ref = a * x1 + b * x2
            assert abs(c - ref) <= 1e-12 * max(abs(c), abs(ref), 1.0)


def test_domain_agreement():
    # derivative defined exactly where the program is
    t = parse("fun (x : real) -> log(x)")
    assert isinstance(ad.derivative(t, 1.0), Val)
    assert isinstance(ad.derivative(t, -1.0), Bottom)
    assert isinstance(interp.apply_value(ad.primal_closure(t), -1.0), Bottom)

    rng = random.Random(37)
    t = parse("fun (x : real) -> div(1.0, sub(x, 1.0))")
    pclo = ad.primal_closure(t)
    dclo = ad.dual_closure(t)
    for _ in range(200):
        x = rng.uniform(0.0, 2.0)
        primal_defined = isinstance(interp.apply_value(pclo, x), Val)
        deriv_defined = isinstance(ad.derivative_via(dclo, x), Val)
        assert primal_defined == deriv_defined


def test_primal_preservation_bitwise():
    rng = random.Random(41)
    for prog in programs.AUDIT_CORPUS:
        t = prog.term()
        pclo = ad.primal_closure(t)
        dclo = ad.dual_closure(t)
        for _ in range(40):
            x = rng.uniform(prog.lo, prog.hi)
            plain = interp.apply_value(pclo, x)
            dual = interp.apply_value(dclo, (x, 1.0))
            if isinstance(plain, Val):
                assert isinstance(dual, Val)
                assert bits(dual.value[0]) == bits(plain.value), (prog.name, x)
            else:
                assert not isinstance(dual, Val)


def test_chain_rule_composition():
    from pap.syntax import App, Lam

    rng = random.Random(43)
    pairs = [
        ("fun (x : real) -> exp(mul(0.5, x))", "fun (x : real) -> sin(x)"),
        ("fun (x : real) -> mul(x, x)", "fun (x : real) -> add(mul(2.0, x), 1.0)"),
        ("fun (x : real) -> abs(x)", "fun (x : real) -> sub(mul(x, x), 1.0)"),
    ]
    for outer_src, inner_src in pairs:
        outer, inner = parse(outer_src), parse(inner_src)
        comp = Lam("z", REAL, App(outer, App(inner, Var("z"))))
        d_comp = ad.dual_closure(comp)
        d_outer = ad.dual_closure(outer)
        d_inner = ad.dual_closure(inner)
        p_inner = ad.primal_closure(inner)
        for _ in range(60):
            x = rng.uniform(-2.0, 2.0)
            whole = ad.derivative_via(d_comp, x)
            gx = interp.apply_value(p_inner, x)
            if not (isinstance(whole, Val) and isinstance(gx, Val)):
                continue
            d_in = ad.derivative_via(d_inner, x).value
            d_out = ad.derivative_via(d_outer, gx.value).value
            ref = d_out * d_in
            assert abs(whole.value - ref) <= 1e-6 * max(abs(whole.value), abs(ref), 1e-6)


# -- audit -------------------------------------------------------------------

def test_check_intensional_sillyid_random_points():
    rng = random.Random(47)
    pts = [rng.uniform(-1, 1) for _ in range(200)]
    pts = [p for p in pts if p != 0.0]
    reports = ad.check_intensional(programs.term("sillyid"), pts)
    assert ad.interior_disagreements(reports) == []
    assert all(r.agree for r in reports)


def test_check_intensional_sillyid_at_zero_flagged_boundary():
    reports = ad.check_intensional(programs.term("sillyid"), [0.0])
    r = reports[0]
    assert r.ad_value == 0.0
    assert r.fd_value == pytest.approx(1.0, abs=1e-9)
    assert not r.agree
    assert r.fd_class == ad.BOUNDARY


def test_check_intensional_exp_at_zero():
    reports = ad.check_intensional(parse("fun (x : real) -> exp(x)"), [0.0])
    r = reports[0]
    assert r.ad_value == 1.0
    assert abs(r.fd_value - 1.0) <= 1e-7
    assert r.fd_class == ad.INTERIOR
    assert r.agree


def test_check_intensional_reports_undefined():
    reports = ad.check_intensional(parse("fun (x : real) -> log(x)"), [-0.5])
    assert reports[0].fd_class == ad.UNDEFINED


def test_analytic_programs_match_fd_everywhere_sampled():
    rng = random.Random(53)
    analytic = [p for p in programs.AUDIT_CORPUS if p.name in (
        "poly3", "square", "exp_half", "sin", "sin_cos", "log_shift",
        "sqrt_shift", "rational", "neg_cube", "exp_sin", "loop_sum",
    )]
    assert len(analytic) == 11
    for prog in analytic:
        pts = [rng.uniform(prog.lo, prog.hi) for _ in range(60)]
        reports = ad.check_intensional(prog.term(), pts)
        for r in reports:
            if r.fd_class == ad.INTERIOR:
                assert r.agree, (prog.name, r)
