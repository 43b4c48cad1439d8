"""Typechecker for desugared terms.

Synthesis-directed: every binder except let-introduced lambdas carries an
annotation, so each term has at most one type. Lambdas with a missing
annotation (produced by desugaring `let`) are only accepted in operator
position, where the binder type is synthesized from the operand.
"""

from __future__ import annotations

from . import primitives
from .syntax import (
    BOOL,
    EMPTY_CONTEXT,
    REAL,
    UNIT_T,
    App,
    ArrowT,
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
    Sample,
    Score,
    Term,
    Type,
    Var,
    pretty,
    pretty_type,
)


class PapTypeError(Exception):
    def __init__(self, term: Term, message: str, expected: Type | None = None, actual: Type | None = None):
        detail = message
        if expected is not None and actual is not None:
            detail += f" (expected {pretty_type(expected)}, got {pretty_type(actual)})"
        where = f" at {term.span[0]}:{term.span[1]}" if term.span else ""
        super().__init__(f"{detail}{where}: {pretty(term) if _printable(term) else type(term).__name__}")
        self.term = term
        self.message = message
        self.expected = expected
        self.actual = actual


def _printable(t: Term) -> bool:
    try:
        pretty(t)
        return True
    except ValueError:
        return False


def typecheck(ctx: Context, t: Term) -> Type:
    if isinstance(t, Var):
        ty = ctx.lookup(t.name)
        if ty is None:
            raise PapTypeError(t, f"unbound variable '{t.name}'")
        return ty
    if isinstance(t, ConstReal):
        return REAL
    if isinstance(t, ConstBool):
        return BOOL
    if isinstance(t, ConstUnit):
        return UNIT_T
    if isinstance(t, Prim):
        try:
            spec = primitives.lookup(t.name)
        except primitives.PrimNotFound:
            raise PapTypeError(t, f"unknown primitive '{t.name}'") from None
        if len(t.args) != spec.arity:
            raise PapTypeError(
                t, f"primitive '{t.name}' expects {spec.arity} argument(s), got {len(t.args)}"
            )
        for arg, want in zip(t.args, spec.arg_types):
            got = typecheck(ctx, arg)
            if got != want:
                raise PapTypeError(arg, f"argument of '{t.name}'", expected=want, actual=got)
        return spec.result_type
    if isinstance(t, Pair):
        return ProdT(typecheck(ctx, t.fst), typecheck(ctx, t.snd))
    if isinstance(t, MatchPair):
        scrut_ty = typecheck(ctx, t.scrutinee)
        if not isinstance(scrut_ty, ProdT):
            raise PapTypeError(t.scrutinee, "match scrutinee must be a pair", actual=scrut_ty, expected=ProdT(REAL, REAL))
        inner = ctx.extend(t.left, scrut_ty.fst).extend(t.right, scrut_ty.snd)
        return typecheck(inner, t.body)
    if isinstance(t, If):
        cond_ty = typecheck(ctx, t.cond)
        if cond_ty != BOOL:
            raise PapTypeError(t.cond, "condition must be bool", expected=BOOL, actual=cond_ty)
        then_ty = typecheck(ctx, t.then)
        else_ty = typecheck(ctx, t.orelse)
        if then_ty != else_ty:
            raise PapTypeError(t, "branches disagree", expected=then_ty, actual=else_ty)
        return then_ty
    if isinstance(t, Lam):
        if t.param_type is None:
            raise PapTypeError(
                t, "unannotated lambda outside let position; annotate the binder"
            )
        body_ty = typecheck(ctx.extend(t.param, t.param_type), t.body)
        return ArrowT(t.param_type, body_ty)
    if isinstance(t, App):
        if isinstance(t.fn, Lam) and t.fn.param_type is None:
            # let-introduced binding: infer the binder type from the operand
            arg_ty = typecheck(ctx, t.arg)
            return typecheck(ctx.extend(t.fn.param, arg_ty), t.fn.body)
        fn_ty = typecheck(ctx, t.fn)
        if not isinstance(fn_ty, ArrowT):
            raise PapTypeError(t.fn, "application of a non-function", actual=fn_ty)
        arg_ty = typecheck(ctx, t.arg)
        if arg_ty != fn_ty.arg:
            raise PapTypeError(t.arg, "argument type mismatch", expected=fn_ty.arg, actual=arg_ty)
        return fn_ty.res
    if isinstance(t, Mu):
        fn_ty = ArrowT(t.param_type, t.result_type)
        inner = ctx.extend(t.fname, fn_ty).extend(t.param, t.param_type)
        body_ty = typecheck(inner, t.body)
        if body_ty != t.result_type:
            raise PapTypeError(t.body, "recursive function body type mismatch", expected=t.result_type, actual=body_ty)
        return fn_ty
    if isinstance(t, Sample):
        return REAL
    if isinstance(t, Score):
        arg_ty = typecheck(ctx, t.arg)
        if arg_ty != REAL:
            raise PapTypeError(t.arg, "score argument must be real", expected=REAL, actual=arg_ty)
        return UNIT_T
    if isinstance(t, Let):
        raise PapTypeError(t, "let must be desugared before typechecking")
    raise PapTypeError(t, f"unknown term node {type(t).__name__}")


def typecheck_closed(t: Term) -> Type:
    return typecheck(EMPTY_CONTEXT, t)
