"""Seeded random generator of well-typed terms for property tests."""

from __future__ import annotations

import random

from pap import primitives
from pap.syntax import (
    BOOL,
    REAL,
    UNIT_T,
    App,
    ArrowT,
    BoolT,
    ConstBool,
    ConstReal,
    ConstUnit,
    Context,
    If,
    Lam,
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
)

GROUND = (REAL, BOOL, UNIT_T)

REAL_PRIMS_1 = ("neg", "exp", "sin", "cos", "abs")
REAL_PRIMS_2 = ("add", "sub", "mul", "min", "max")
CMP_PRIMS = ("lt", "le", "gt", "ge", "eq")


def gen_type(rng: random.Random, depth: int = 2) -> Type:
    if depth <= 0:
        return rng.choice(GROUND)
    r = rng.random()
    if r < 0.55:
        return rng.choice(GROUND)
    if r < 0.8:
        return ProdT(gen_type(rng, depth - 1), gen_type(rng, depth - 1))
    return ArrowT(gen_type(rng, depth - 1), gen_type(rng, depth - 1))


class _Gen:
    def __init__(self, rng: random.Random, prob: bool):
        self.rng = rng
        self.prob = prob
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def vars_of(self, ctx: dict, ty: Type) -> list[str]:
        return [name for name, t in ctx.items() if t == ty]

    def leaf(self, ctx: dict, ty: Type) -> Term:
        rng = self.rng
        names = self.vars_of(ctx, ty)
        if names and rng.random() < 0.5:
            return __import__("pap.syntax", fromlist=["Var"]).Var(rng.choice(names))
        if isinstance(ty, RealT):
            if self.prob and rng.random() < 0.3:
                return Sample()
            return ConstReal(round(rng.uniform(-4.0, 4.0), 3))
        if isinstance(ty, BoolT):
            return ConstBool(rng.random() < 0.5)
        if isinstance(ty, UnitT):
            if self.prob and rng.random() < 0.4:
                return Score(self.term(ctx, REAL, 0))
            return ConstUnit()
        if isinstance(ty, ProdT):
            return Pair(self.term(ctx, ty.fst, 0), self.term(ctx, ty.snd, 0))
        if isinstance(ty, ArrowT):
            x = self.fresh()
            inner = dict(ctx)
            inner[x] = ty.arg
            return Lam(x, ty.arg, self.term(inner, ty.res, 0))
        raise AssertionError(ty)

    def term(self, ctx: dict, ty: Type, depth: int) -> Term:
        rng = self.rng
        if depth <= 0:
            return self.leaf(ctx, ty)
        roll = rng.random()
        if roll < 0.30:
            return self.leaf(ctx, ty)
        if roll < 0.42 and isinstance(ty, RealT):
            name = rng.choice(REAL_PRIMS_1 if rng.random() < 0.4 else REAL_PRIMS_2)
            spec = primitives.lookup(name)
            return Prim(name, tuple(self.term(ctx, REAL, depth - 1) for _ in range(spec.arity)))
        if roll < 0.50 and isinstance(ty, BoolT):
            name = rng.choice(CMP_PRIMS)
            return Prim(name, (self.term(ctx, REAL, depth - 1), self.term(ctx, REAL, depth - 1)))
        if roll < 0.62:
            return If(
                self.term(ctx, BOOL, depth - 1),
                self.term(ctx, ty, depth - 1),
                self.term(ctx, ty, depth - 1),
            )
        if roll < 0.72:
            # let-style binding (application of an unannotated lambda)
            sigma = gen_type(rng, 1)
            x = self.fresh()
            inner = dict(ctx)
            inner[x] = sigma
            return App(Lam(x, None, self.term(inner, ty, depth - 1)), self.term(ctx, sigma, depth - 1))
        if roll < 0.80:
            sigma = gen_type(rng, 1)
            fn = self.term(ctx, ArrowT(sigma, ty), depth - 1)
            return App(fn, self.term(ctx, sigma, depth - 1))
        if roll < 0.88:
            s1, s2 = gen_type(rng, 1), gen_type(rng, 1)
            scrut = self.term(ctx, ProdT(s1, s2), depth - 1)
            left, right = self.fresh(), self.fresh()
            inner = dict(ctx)
            inner[left] = s1
            inner[right] = s2
            return MatchPair(scrut, left, right, self.term(inner, ty, depth - 1))
        if isinstance(ty, ArrowT):
            if rng.random() < 0.4:
                fname, x = self.fresh(), self.fresh()
                inner = dict(ctx)
                inner[fname] = ty
                inner[x] = ty.arg
                return Mu(fname, x, ty.arg, ty.res, self.term(inner, ty.res, depth - 1))
            x = self.fresh()
            inner = dict(ctx)
            inner[x] = ty.arg
            return Lam(x, ty.arg, self.term(inner, ty.res, depth - 1))
        return self.leaf(ctx, ty)


def gen_term(rng: random.Random, ctx: dict | None = None, ty: Type | None = None, depth: int = 4, prob: bool = False) -> tuple[Term, Type]:
    """Generate a well-typed term in the given variable context."""
    ctx = ctx or {}
    ty = ty or gen_type(rng, 2)
    g = _Gen(rng, prob)
    return g.term(ctx, ty, depth), ty


def context_of(ctx: dict) -> Context:
    out = Context()
    for name, ty in ctx.items():
        out = out.extend(name, ty)
    return out
