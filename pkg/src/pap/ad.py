"""Forward-mode derivative transform and drivers.

The transform is a source-to-source map: real constants become
(value, 0) pairs, primitive calls become calls to their registered dual
companions, and every other construct maps homomorphically. Running the
transformed program on (x, 1) yields a pair whose first component
reproduces the original program bit for bit and whose second component is
a piecewise derivative: on each analytic piece of the program it is that
piece's true derivative, so it can deviate from the extensional derivative
only where piece boundaries put the input on a measure-zero set.

Drivers: `derivative` for real -> real programs, `jvp` for first-order
programs over (possibly curried or tupled) real vectors, and
`check_intensional` which audits transform output against an independent
finite-difference oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import interp, numcheck, primitives
from .syntax import (
    App,
    ArrowT,
    BoolT,
    ConstBool,
    ConstReal,
    ConstUnit,
    Context,
    If,
    Lam,
    Let,
    MatchPair,
    Mu,
    Pair,
    Prim,
    ProdT,
    RealT,
    Sample,
    Score,
    Term,
    Type,
    UnitT,
    Var,
)
from .typecheck import PapTypeError, typecheck_closed

translate_type = primitives.dual_type


def transform(t: Term) -> Term:
    """Apply the derivative macro. Sample/score map structurally (the dual
    trace runtime interprets them); `Let` must already be desugared."""
    if isinstance(t, Var):
        return t
    if isinstance(t, ConstReal):
        return Pair(t, ConstReal(0.0), span=t.span)
    if isinstance(t, (ConstBool, ConstUnit, Sample)):
        return t
    if isinstance(t, Prim):
        return Prim(
            t.name + primitives.DUAL_SUFFIX,
            tuple(transform(a) for a in t.args),
            span=t.span,
        )
    if isinstance(t, Pair):
        return Pair(transform(t.fst), transform(t.snd), span=t.span)
    if isinstance(t, MatchPair):
        return MatchPair(transform(t.scrutinee), t.left, t.right, transform(t.body), span=t.span)
    if isinstance(t, If):
        return If(transform(t.cond), transform(t.then), transform(t.orelse), span=t.span)
    if isinstance(t, Lam):
        ann = None if t.param_type is None else translate_type(t.param_type)
        return Lam(t.param, ann, transform(t.body), span=t.span)
    if isinstance(t, App):
        return App(transform(t.fn), transform(t.arg), span=t.span)
    if isinstance(t, Mu):
        return Mu(
            t.fname,
            t.param,
            translate_type(t.param_type),
            translate_type(t.result_type),
            transform(t.body),
            span=t.span,
        )
    if isinstance(t, Score):
        return Score(transform(t.arg), span=t.span)
    if isinstance(t, Let):
        raise ValueError("desugar before transforming")
    raise ValueError(f"unknown term node: {t!r}")


def translate_context(ctx: Context) -> Context:
    out = Context()
    for name in ctx.names():
        out = out.extend(name, translate_type(ctx.lookup(name)))
    return out


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def dual_closure(t: Term, fuel: int = interp.DEFAULT_FUEL):
    """Evaluate the transformed program to a closure value. Raises on
    non-Val outcomes (the untransformed program must itself be a value)."""
    out = interp.eval_closed(transform(t), fuel)
    if not isinstance(out, interp.Val):
        raise interp.EvalError(f"transformed program did not evaluate to a value: {out}")
    return out.value


def primal_closure(t: Term, fuel: int = interp.DEFAULT_FUEL):
    out = interp.eval_closed(t, fuel)
    if not isinstance(out, interp.Val):
        raise interp.EvalError(f"program did not evaluate to a value: {out}")
    return out.value


def derivative_via(dclo, x: float, fuel: int = interp.DEFAULT_FUEL):
    """Tangent of a prebuilt dual closure at x with seed 1."""
    out = interp.apply_value(dclo, (float(x), 1.0), fuel)
    if isinstance(out, interp.Val):
        return interp.Val(out.value[1], out.steps)
    return out


def derivative(t: Term, x: float, fuel: int = interp.DEFAULT_FUEL):
    """Derivative of a closed real -> real program at x, as computed by the
    transform. Defined exactly where the program is."""
    ty = typecheck_closed(t)
    if ty != ArrowT(RealT(), RealT()):
        raise PapTypeError(t, "derivative needs a real -> real program", actual=ty)
    return derivative_via(dual_closure(t, fuel), x, fuel)


def _count_slots(ty: Type) -> int:
    if isinstance(ty, RealT):
        return 1
    if isinstance(ty, ProdT):
        return _count_slots(ty.fst) + _count_slots(ty.snd)
    raise ValueError(f"not a real vector type: {ty!r}")


def _build_dual(ty: Type, xs, vs, pos: int):
    if isinstance(ty, RealT):
        return (float(xs[pos]), float(vs[pos])), pos + 1
    if isinstance(ty, ProdT):
        fst, pos = _build_dual(ty.fst, xs, vs, pos)
        snd, pos = _build_dual(ty.snd, xs, vs, pos)
        return (fst, snd), pos
    raise ValueError(f"not a real vector type: {ty!r}")


def _flatten_tangents(v, out: list) -> None:
    # dual reals are (primal, tangent) float pairs; nested products are
    # pairs of those
    if type(v) is tuple and len(v) == 2 and type(v[0]) is float:
        out.append(v[1])
        return
    if type(v) is tuple and len(v) == 2:
        _flatten_tangents(v[0], out)
        _flatten_tangents(v[1], out)
        return
    raise interp.EvalError(f"output is not a real vector: {v!r}")


def _flatten_primals(v, out: list) -> None:
    if type(v) is tuple and len(v) == 2 and type(v[0]) is float:
        out.append(v[0])
        return
    if type(v) is tuple and len(v) == 2:
        _flatten_primals(v[0], out)
        _flatten_primals(v[1], out)
        return
    raise interp.EvalError(f"output is not a real vector: {v!r}")


def input_signature(ty: Type) -> tuple[list[Type], int]:
    """Peel a first-order function type into its argument list and total
    real-slot count. Accepts curried and tupled shapes."""
    arg_types: list[Type] = []
    while isinstance(ty, ArrowT):
        arg_types.append(ty.arg)
        ty = ty.res
    if not arg_types:
        raise ValueError("not a function type")
    n = sum(_count_slots(a) for a in arg_types)
    _count_slots(ty)  # result must be a real vector too
    return arg_types, n


def jvp_via(dclo, arg_types: list[Type], xs, v, fuel: int = interp.DEFAULT_FUEL):
    """Tangent outputs of a prebuilt dual closure at xs with seed vector v."""
    args = []
    pos = 0
    for a_ty in arg_types:
        dual, pos = _build_dual(a_ty, xs, v, pos)
        args.append(dual)
    out = interp.apply_values(dclo, args, fuel)
    if not isinstance(out, interp.Val):
        return out
    tangents: list[float] = []
    _flatten_tangents(out.value, tangents)
    return interp.Val(tuple(tangents), out.steps)


def jvp(t: Term, xs, v, fuel: int = interp.DEFAULT_FUEL):
    """Product of a piecewise Jacobian of a first-order program with a seed
    vector, via one forward pass."""
    ty = typecheck_closed(t)
    arg_types, n = input_signature(ty)
    if len(xs) != n or len(v) != n:
        raise ValueError(f"program takes {n} real inputs, got point of size {len(xs)} and seed of size {len(v)}")
    return jvp_via(dual_closure(t, fuel), arg_types, xs, v, fuel)


def gradient(t: Term, xs, fuel: int = interp.DEFAULT_FUEL):
    """Gradient of a real-valued first-order program by n seeded passes."""
    ty = typecheck_closed(t)
    arg_types, n = input_signature(ty)
    dclo = dual_closure(t, fuel)
    grads = []
    for j in range(n):
        seed = [0.0] * n
        seed[j] = 1.0
        out = jvp_via(dclo, arg_types, xs, seed, fuel)
        if not isinstance(out, interp.Val):
            return out
        if len(out.value) != 1:
            raise ValueError("gradient needs a scalar-valued program")
        grads.append(out.value[0])
    return interp.Val(tuple(grads))


# ---------------------------------------------------------------------------
# Derivative audit
# ---------------------------------------------------------------------------

INTERIOR = numcheck.INTERIOR
BOUNDARY = numcheck.BOUNDARY
UNDEFINED = "undefined"


@dataclass(frozen=True)
class DerivReport:
    point: float
    ad_value: float | None
    fd_value: float | None
    fd_class: str  # interior | suspected-boundary | undefined
    abs_err: float | None
    rel_err: float | None
    agree: bool


def _agrees(a: float, b: float, rtol: float, atol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b)) + atol


def check_intensional(
    t: Term,
    points,
    fd_cfg: numcheck.FDConfig | None = None,
    rtol: float = 1e-5,
    atol: float = 1e-8,
    fuel: int = interp.DEFAULT_FUEL,
) -> list[DerivReport]:
    """Compare transform-computed derivatives against the finite-difference
    oracle at each point.

    Classification starts from the oracle's own stability class and is
    refined with a neighborhood probe: a point where the oracle is stable
    but the two sides disagree is reclassified as a suspected piece
    boundary when the disagreement is isolated (transform and oracle agree
    again at x +- h). Guard boundaries such as an exact equality test
    produce exactly that pattern while leaving the oracle's stencil
    untouched.
    """
    cfg = fd_cfg or numcheck.FDConfig()
    ty = typecheck_closed(t)
    if ty != ArrowT(RealT(), RealT()):
        raise PapTypeError(t, "check_intensional needs a real -> real program", actual=ty)
    dclo = dual_closure(t, fuel)
    pclo = primal_closure(t, fuel)

    def f(x: float) -> float:
        out = interp.apply_value(pclo, x, fuel)
        if isinstance(out, interp.Val):
            return out.value
        raise numcheck.ProbeUndefined(x)

    def ad_at(x: float):
        return derivative_via(dclo, x, fuel)

    reports = []
    for x in points:
        x = float(x)
        ad_out = ad_at(x)
        if not isinstance(ad_out, interp.Val):
            reports.append(DerivReport(x, None, None, UNDEFINED, None, None, False))
            continue
        ad_val = ad_out.value
        try:
            fd_val, fd_class = numcheck.fd_derivative(f, x, cfg)
        except numcheck.UndefinedNearPoint:
            reports.append(DerivReport(x, ad_val, None, UNDEFINED, None, None, False))
            continue
        agree = _agrees(ad_val, fd_val, rtol, atol)
        if fd_class == INTERIOR and not agree:
            if _isolated_deviation(f, ad_at, x, cfg, rtol, atol):
                fd_class = BOUNDARY
        abs_err = abs(ad_val - fd_val)
        rel_err = abs_err / max(abs(ad_val), abs(fd_val), 1e-300)
        reports.append(DerivReport(x, ad_val, fd_val, fd_class, abs_err, rel_err, agree))
    return reports


def _isolated_deviation(f, ad_at, x: float, cfg, rtol: float, atol: float) -> bool:
    h = cfg.step_at(x)
    for probe in (x - h, x + h):
        ad_out = ad_at(probe)
        if not isinstance(ad_out, interp.Val):
            return True  # domain edge within a step: boundary territory
        try:
            fd_val, fd_class = numcheck.fd_derivative(f, probe, cfg)
        except numcheck.UndefinedNearPoint:
            return True
        if fd_class != INTERIOR:
            return True
        if not _agrees(ad_out.value, fd_val, rtol, atol):
            return False  # deviation persists off the point: genuine disagreement
    return True


def interior_disagreements(reports) -> list[DerivReport]:
    return [r for r in reports if r.fd_class == INTERIOR and not r.agree]


def summarize(reports) -> dict:
    n = len(reports)
    bad = interior_disagreements(reports)
    return {
        "points": n,
        "interior_disagreements": len(bad),
        "interior_disagreement_fraction": (len(bad) / n) if n else 0.0,
        "boundary_flags": sum(1 for r in reports if r.fd_class == BOUNDARY),
        "undefined_points": sum(1 for r in reports if r.fd_class == UNDEFINED),
    }
