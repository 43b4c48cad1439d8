"""Abstract syntax: types, terms, contexts, free variables, substitution,
and the pretty-printer that inverts the parser.

Terms are immutable (frozen dataclasses) and safe to share between threads.
`Let` is surface sugar only; `desugar` rewrites it to an application of an
unannotated lambda, and everything downstream of the parser assumes
desugared terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class RealT(Type):
    pass


@dataclass(frozen=True)
class BoolT(Type):
    pass


@dataclass(frozen=True)
class UnitT(Type):
    pass


@dataclass(frozen=True)
class ProdT(Type):
    fst: Type
    snd: Type


@dataclass(frozen=True)
class ArrowT(Type):
    arg: Type
    res: Type


REAL = RealT()
BOOL = BoolT()
UNIT_T = UnitT()


def pretty_type(ty: Type, _prec: int = 0) -> str:
    """Render a type in concrete syntax. `*` binds tighter than `->`; both
    associate to the right."""
    if isinstance(ty, RealT):
        return "real"
    if isinstance(ty, BoolT):
        return "bool"
    if isinstance(ty, UnitT):
        return "unit"
    if isinstance(ty, ProdT):
        s = f"{pretty_type(ty.fst, 2)} * {pretty_type(ty.snd, 1)}"
        return f"({s})" if _prec >= 2 else s
    if isinstance(ty, ArrowT):
        s = f"{pretty_type(ty.arg, 1)} -> {pretty_type(ty.res, 0)}"
        return f"({s})" if _prec >= 1 else s
    raise ValueError(f"unknown type node: {ty!r}")


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    # (line, col) of the token that started this node, when it came from the
    # parser. Not part of structural equality.
    span: tuple[int, int] | None = field(
        default=None, kw_only=True, compare=False, repr=False
    )


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class ConstReal(Term):
    value: float


@dataclass(frozen=True)
class ConstBool(Term):
    value: bool


@dataclass(frozen=True)
class ConstUnit(Term):
    pass


@dataclass(frozen=True)
class Prim(Term):
    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Pair(Term):
    fst: Term
    snd: Term


@dataclass(frozen=True)
class MatchPair(Term):
    scrutinee: Term
    left: str
    right: str
    body: Term


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    orelse: Term


@dataclass(frozen=True)
class Lam(Term):
    # param_type is None only for lambdas produced by desugaring `let`; the
    # typechecker infers the binder type from the operand in that case.
    param: str
    param_type: Type | None
    body: Term


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Mu(Term):
    fname: str
    param: str
    param_type: Type
    result_type: Type
    body: Term


@dataclass(frozen=True)
class Sample(Term):
    pass


@dataclass(frozen=True)
class Score(Term):
    arg: Term


@dataclass(frozen=True)
class Let(Term):
    """Surface-only binding form; removed by `desugar`."""

    name: str
    bound: Term
    body: Term


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------

def desugar(t: Term) -> Term:
    """Expand every `let x = e in b` into `(fun (x : _) -> b) e` with an
    unannotated binder."""
    if isinstance(t, Let):
        return App(
            Lam(t.name, None, desugar(t.body), span=t.span),
            desugar(t.bound),
            span=t.span,
        )
    if isinstance(t, (Var, ConstReal, ConstBool, ConstUnit, Sample)):
        return t
    if isinstance(t, Prim):
        return Prim(t.name, tuple(desugar(a) for a in t.args), span=t.span)
    if isinstance(t, Pair):
        return Pair(desugar(t.fst), desugar(t.snd), span=t.span)
    if isinstance(t, MatchPair):
        return MatchPair(desugar(t.scrutinee), t.left, t.right, desugar(t.body), span=t.span)
    if isinstance(t, If):
        return If(desugar(t.cond), desugar(t.then), desugar(t.orelse), span=t.span)
    if isinstance(t, Lam):
        return Lam(t.param, t.param_type, desugar(t.body), span=t.span)
    if isinstance(t, App):
        return App(desugar(t.fn), desugar(t.arg), span=t.span)
    if isinstance(t, Mu):
        return Mu(t.fname, t.param, t.param_type, t.result_type, desugar(t.body), span=t.span)
    if isinstance(t, Score):
        return Score(desugar(t.arg), span=t.span)
    raise ValueError(f"unknown term node: {t!r}")


def is_desugared(t: Term) -> bool:
    return not any(isinstance(s, Let) for s in subterms(t))


def subterms(t: Term):
    """Pre-order iterator over all nodes of a term."""
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Prim):
            stack.extend(node.args)
        elif isinstance(node, Pair):
            stack.extend((node.fst, node.snd))
        elif isinstance(node, MatchPair):
            stack.extend((node.scrutinee, node.body))
        elif isinstance(node, If):
            stack.extend((node.cond, node.then, node.orelse))
        elif isinstance(node, Lam):
            stack.append(node.body)
        elif isinstance(node, App):
            stack.extend((node.fn, node.arg))
        elif isinstance(node, Mu):
            stack.append(node.body)
        elif isinstance(node, Score):
            stack.append(node.arg)
        elif isinstance(node, Let):
            stack.extend((node.bound, node.body))


def free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, (ConstReal, ConstBool, ConstUnit, Sample)):
        return frozenset()
    if isinstance(t, Prim):
        out: frozenset[str] = frozenset()
        for a in t.args:
            out |= free_vars(a)
        return out
    if isinstance(t, Pair):
        return free_vars(t.fst) | free_vars(t.snd)
    if isinstance(t, MatchPair):
        return free_vars(t.scrutinee) | (free_vars(t.body) - {t.left, t.right})
    if isinstance(t, If):
        return free_vars(t.cond) | free_vars(t.then) | free_vars(t.orelse)
    if isinstance(t, Lam):
        return free_vars(t.body) - {t.param}
    if isinstance(t, App):
        return free_vars(t.fn) | free_vars(t.arg)
    if isinstance(t, Mu):
        return free_vars(t.body) - {t.fname, t.param}
    if isinstance(t, Score):
        return free_vars(t.arg)
    if isinstance(t, Let):
        return free_vars(t.bound) | (free_vars(t.body) - {t.name})
    raise ValueError(f"unknown term node: {t!r}")


def contains_prob(t: Term) -> bool:
    """True when the term uses the probabilistic constructs."""
    return any(isinstance(s, (Sample, Score)) for s in subterms(t))


def fresh_name(base: str, avoid: frozenset[str]) -> str:
    if base not in avoid:
        return base
    i = 1
    while f"{base}#{i}" in avoid:
        i += 1
    return f"{base}#{i}"


def subst(t: Term, name: str, replacement: Term) -> Term:
    """Capture-avoiding substitution t[replacement/name]."""
    rep_fv = free_vars(replacement)

    def go(t: Term, name: str) -> Term:
        if isinstance(t, Var):
            return replacement if t.name == name else t
        if isinstance(t, (ConstReal, ConstBool, ConstUnit, Sample)):
            return t
        if isinstance(t, Prim):
            return Prim(t.name, tuple(go(a, name) for a in t.args), span=t.span)
        if isinstance(t, Pair):
            return Pair(go(t.fst, name), go(t.snd, name), span=t.span)
        if isinstance(t, If):
            return If(go(t.cond, name), go(t.then, name), go(t.orelse, name), span=t.span)
        if isinstance(t, App):
            return App(go(t.fn, name), go(t.arg, name), span=t.span)
        if isinstance(t, Score):
            return Score(go(t.arg, name), span=t.span)
        if isinstance(t, Lam):
            if t.param == name:
                return t
            if t.param in rep_fv:
                new = fresh_name(t.param, rep_fv | free_vars(t.body) | {name})
                body = go_rename(t.body, t.param, new)
                return Lam(new, t.param_type, go(body, name), span=t.span)
            return Lam(t.param, t.param_type, go(t.body, name), span=t.span)
        if isinstance(t, Mu):
            if name in (t.fname, t.param):
                return t
            fname, param, body = t.fname, t.param, t.body
            avoid = rep_fv | free_vars(body) | {name}
            if fname in rep_fv:
                new = fresh_name(fname, avoid)
                body = go_rename(body, fname, new)
                fname = new
                avoid = avoid | {new}
            if param in rep_fv:
                new = fresh_name(param, avoid)
                body = go_rename(body, param, new)
                param = new
            return Mu(fname, param, t.param_type, t.result_type, go(body, name), span=t.span)
        if isinstance(t, MatchPair):
            scrut = go(t.scrutinee, name)
            if name in (t.left, t.right):
                return MatchPair(scrut, t.left, t.right, t.body, span=t.span)
            left, right, body = t.left, t.right, t.body
            avoid = rep_fv | free_vars(body) | {name}
            if left in rep_fv:
                new = fresh_name(left, avoid)
                body = go_rename(body, left, new)
                left = new
                avoid = avoid | {new}
            if right in rep_fv:
                new = fresh_name(right, avoid)
                body = go_rename(body, right, new)
                right = new
            return MatchPair(scrut, left, right, go(body, name), span=t.span)
        if isinstance(t, Let):
            bound = go(t.bound, name)
            if t.name == name:
                return Let(t.name, bound, t.body, span=t.span)
            if t.name in rep_fv:
                new = fresh_name(t.name, rep_fv | free_vars(t.body) | {name})
                body = go_rename(t.body, t.name, new)
                return Let(new, bound, go(body, name), span=t.span)
            return Let(t.name, bound, go(t.body, name), span=t.span)
        raise ValueError(f"unknown term node: {t!r}")

    def go_rename(t: Term, old: str, new: str) -> Term:
        return subst(t, old, Var(new))

    return go(t, name)


# ---------------------------------------------------------------------------
# Context
# ---------------------------------------------------------------------------

class Context:
    """Typing context. Immutable; `extend` returns a new context with the
    innermost binding shadowing any previous one."""

    __slots__ = ("_bindings",)

    def __init__(self, bindings: dict[str, Type] | None = None):
        self._bindings: dict[str, Type] = dict(bindings) if bindings else {}

    def extend(self, name: str, ty: Type) -> "Context":
        new = dict(self._bindings)
        new[name] = ty
        return Context(new)

    def lookup(self, name: str) -> Type | None:
        return self._bindings.get(name)

    def names(self) -> frozenset[str]:
        return frozenset(self._bindings)

    def __contains__(self, name: str) -> bool:
        return name in self._bindings

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {pretty_type(v)}" for k, v in self._bindings.items())
        return f"Context({{{inner}}})"


EMPTY_CONTEXT = Context()


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------

# Precedence levels: 0 = open forms (fun/mu/if/let/match), 1 = application
# chains, 2 = atoms. A node printed in a context demanding a higher level
# gets parenthesized.

def pretty(t: Term) -> str:
    """Concrete syntax for a term; `parse(pretty(t)) == t` for well-scoped
    terms (desugared lets print back as `let`)."""
    return _pp(t, 0)


def _pp(t: Term, prec: int) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, ConstReal):
        return repr(t.value)
    if isinstance(t, ConstBool):
        return "true" if t.value else "false"
    if isinstance(t, ConstUnit):
        return "()"
    if isinstance(t, Sample):
        return "sample"
    if isinstance(t, Score):
        return f"score({_pp(t.arg, 0)})"
    if isinstance(t, Prim):
        args = ", ".join(_pp(a, 0) for a in t.args)
        return f"{t.name}({args})"
    if isinstance(t, Pair):
        return f"({_pp(t.fst, 0)}, {_pp(t.snd, 0)})"
    if isinstance(t, App):
        if isinstance(t.fn, Lam) and t.fn.param_type is None:
            s = f"let {t.fn.param} = {_pp(t.arg, 0)} in {_pp(t.fn.body, 0)}"
            return f"({s})" if prec > 0 else s
        s = f"{_pp(t.fn, 1)} {_pp(t.arg, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(t, Lam):
        if t.param_type is None:
            raise ValueError(
                "cannot print an unannotated lambda outside let position"
            )
        s = f"fun ({t.param} : {pretty_type(t.param_type)}) -> {_pp(t.body, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, Mu):
        s = (
            f"mu {t.fname} ({t.param} : {pretty_type(t.param_type)}) : "
            f"{pretty_type(t.result_type, 1)} -> {_pp(t.body, 0)}"
        )
        return f"({s})" if prec > 0 else s
    if isinstance(t, If):
        s = f"if {_pp(t.cond, 0)} then {_pp(t.then, 0)} else {_pp(t.orelse, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, MatchPair):
        s = (
            f"match {_pp(t.scrutinee, 1)} with ({t.left}, {t.right}) -> "
            f"{_pp(t.body, 0)}"
        )
        return f"({s})" if prec > 0 else s
    if isinstance(t, Let):
        s = f"let {t.name} = {_pp(t.bound, 0)} in {_pp(t.body, 0)}"
        return f"({s})" if prec > 0 else s
    raise ValueError(f"unknown term node: {t!r}")
