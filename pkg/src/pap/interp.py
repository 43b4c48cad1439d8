"""Fuel-bounded big-step interpreter for the deterministic fragment.

Runtime values are plain Python data: floats for reals, bools, a unit
singleton, 2-tuples for pairs, and closure records for functions. Values
and environments are immutable and safe to share between threads.

Evaluation is call-by-value, left to right: operators before operands,
operands before the call. Each recursive-function unfolding and each
primitive application costs one unit of fuel; running out yields a
fuel-exhausted bottom rather than divergence. Tail positions (if branches,
match bodies, applications in return position) are executed iteratively,
so tail-recursive loops run in constant Python stack. Deeply nested
non-tail recursion is retried once on a worker thread with a large stack;
if even that overflows, the run is reported as fuel-exhausted with a
detail note (the host stack is one more finite resource bounding the
approximation, like fuel).
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field

from . import primitives
from .syntax import (
    App,
    ConstBool,
    ConstReal,
    ConstUnit,
    If,
    Lam,
    Let,
    MatchPair,
    Mu,
    Pair,
    Prim,
    Sample,
    Score,
    Term,
    Var,
    contains_prob,
    free_vars,
)

DEFAULT_FUEL = 10**6

# Python 3.10 keeps one C frame per Python call; ~16k deep is safe on the
# default 8 MiB main stack, so stay well under it and fall back to a large
# worker stack beyond that.
_MAIN_LIMIT = 12_000
_WORKER_LIMIT = 600_000
_WORKER_STACK = 480 * 1024 * 1024

if sys.getrecursionlimit() < _MAIN_LIMIT:
    sys.setrecursionlimit(_MAIN_LIMIT)


class Unit:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "()"


UNIT = Unit()


@dataclass(frozen=True)
class Closure:
    env: dict
    param: str
    body: Term

    def __repr__(self):
        return f"<fun {self.param}>"


@dataclass(frozen=True)
class RecClosure:
    env: dict
    fname: str
    param: str
    body: Term

    def __repr__(self):
        return f"<mu {self.fname}>"


# Value = float | bool | Unit | tuple[Value, Value] | Closure | RecClosure


@dataclass(frozen=True)
class Val:
    value: object
    steps: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Bottom:
    reason: str  # "domain-error" | "fuel-exhausted"
    detail: str = field(default="", compare=False)
    steps: int = field(default=0, compare=False)


DOMAIN_ERROR = "domain-error"
FUEL_EXHAUSTED = "fuel-exhausted"

# Outcome = Val | Bottom


class NotDeterministic(Exception):
    """A probabilistic construct reached the deterministic evaluator."""


class EvalError(Exception):
    """Internal invariant violation; cannot happen on typechecked input."""


class DomainBottomSignal(Exception):
    def __init__(self, detail: str):
        self.detail = detail


class FuelExhaustedSignal(Exception):
    pass


class Machine:
    """Mutable fuel counter shared across one evaluation."""

    __slots__ = ("fuel", "initial")

    def __init__(self, fuel: int):
        if fuel <= 0:
            raise ValueError("fuel must be positive")
        self.fuel = fuel
        self.initial = fuel

    def charge(self) -> None:
        if self.fuel <= 0:
            raise FuelExhaustedSignal()
        self.fuel -= 1

    @property
    def steps(self) -> int:
        return self.initial - self.fuel


def _capture(env: dict, wanted) -> dict:
    return {k: env[k] for k in wanted if k in env}


def eval_in_machine(m: Machine, t: Term, env: dict):
    """Evaluate to a value, raising the internal bottom exceptions."""
    while True:
        cls = type(t)
        if cls is Var:
            try:
                return env[t.name]
            except KeyError:
                raise EvalError(f"unbound variable '{t.name}'") from None
        if cls is ConstReal:
            return t.value
        if cls is Prim:
            spec = primitives.lookup(t.name)
            args = [eval_in_machine(m, a, env) for a in t.args]
            m.charge()
            try:
                return spec.fn(*args)
            except primitives.PrimDomainError as e:
                raise DomainBottomSignal(str(e)) from None
        if cls is If:
            c = eval_in_machine(m, t.cond, env)
            t = t.then if c else t.orelse
            continue
        if cls is App:
            f = eval_in_machine(m, t.fn, env)
            a = eval_in_machine(m, t.arg, env)
            fcls = type(f)
            if fcls is Closure:
                env = dict(f.env)
                env[f.param] = a
                t = f.body
                continue
            if fcls is RecClosure:
                m.charge()
                env = dict(f.env)
                env[f.fname] = f
                env[f.param] = a
                t = f.body
                continue
            raise EvalError("application of a non-function value")
        if cls is Lam:
            return Closure(_capture(env, free_vars(t)), t.param, t.body)
        if cls is Pair:
            return (eval_in_machine(m, t.fst, env), eval_in_machine(m, t.snd, env))
        if cls is MatchPair:
            v = eval_in_machine(m, t.scrutinee, env)
            if type(v) is not tuple:
                raise EvalError("match scrutinee is not a pair value")
            env = dict(env)
            env[t.left] = v[0]
            env[t.right] = v[1]
            t = t.body
            continue
        if cls is Mu:
            return RecClosure(_capture(env, free_vars(t)), t.fname, t.param, t.body)
        if cls is ConstBool:
            return t.value
        if cls is ConstUnit:
            return UNIT
        if cls is Sample or cls is Score:
            raise NotDeterministic(
                "sample/score reached the deterministic evaluator"
            )
        if cls is Let:
            raise EvalError("Let must be desugared before evaluation")
        raise EvalError(f"unknown term node {cls.__name__}")


def call_deep(thunk):
    """Run `thunk`; on Python stack overflow, retry once on a worker thread
    with a large stack. The thunk must be pure (it is re-run from scratch)."""
    try:
        return thunk()
    except RecursionError:
        pass
    box: list = []

    def run():
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(_WORKER_LIMIT)
        try:
            box.append(("ok", thunk()))
        except BaseException as e:  # noqa: BLE001 - transported to caller
            box.append(("err", e))
        finally:
            sys.setrecursionlimit(old)

    old_size = threading.stack_size(_WORKER_STACK)
    try:
        worker = threading.Thread(target=run, name="pap-deep-eval")
        worker.start()
        worker.join()
    finally:
        threading.stack_size(old_size)
    kind, payload = box[0]
    if kind == "err":
        raise payload
    return payload


def run_machine(fuel: int, body):
    """Run `body(machine)` to an Outcome, converting internal bottom
    signals (and host stack overflow) into Bottom values. `body` must be
    pure: on a stack overflow it is re-run from scratch on a worker thread
    with a fresh machine."""
    last: list[Machine] = []

    def attempt():
        m = Machine(fuel)
        last.append(m)
        return body(m)

    try:
        value = call_deep(attempt)
    except DomainBottomSignal as e:
        return Bottom(DOMAIN_ERROR, e.detail, last[-1].steps)
    except FuelExhaustedSignal:
        return Bottom(FUEL_EXHAUSTED, "step budget exhausted", last[-1].steps)
    except RecursionError:
        return Bottom(FUEL_EXHAUSTED, "recursion depth exceeded host stack", last[-1].steps)
    return Val(value, last[-1].steps)


def eval_term(t: Term, env: dict | None = None, fuel: int = DEFAULT_FUEL):
    """Big-step evaluation of a (deterministic) term in an environment."""
    frozen = {} if env is None else dict(env)
    return run_machine(fuel, lambda m: eval_in_machine(m, t, frozen))


def eval_closed(t: Term, fuel: int = DEFAULT_FUEL):
    """Evaluate a closed deterministic term; rejects probabilistic terms."""
    if contains_prob(t):
        raise NotDeterministic("term uses sample/score; use the trace runtime")
    return eval_term(t, {}, fuel)


def apply_in_machine(m: Machine, fn_value, args):
    """Apply a closure value to argument values, inside a machine."""
    f = fn_value
    for a in args:
        fcls = type(f)
        if fcls is Closure:
            env = dict(f.env)
            env[f.param] = a
            f = eval_in_machine(m, f.body, env)
        elif fcls is RecClosure:
            m.charge()
            env = dict(f.env)
            env[f.fname] = f
            env[f.param] = a
            f = eval_in_machine(m, f.body, env)
        else:
            raise EvalError("application of a non-function value")
    return f


def apply_value(fn_value, arg, fuel: int = DEFAULT_FUEL):
    """Apply a closure value to an argument value."""
    return run_machine(fuel, lambda m: apply_in_machine(m, fn_value, (arg,)))


def apply_values(fn_value, args, fuel: int = DEFAULT_FUEL):
    """Apply a closure value to several argument values in turn."""
    return run_machine(fuel, lambda m: apply_in_machine(m, fn_value, tuple(args)))


def value_matches_type(v, ty) -> bool:
    """Shape check used by tests: does a runtime value inhabit a type?"""
    from .syntax import ArrowT, BoolT, ProdT, RealT, UnitT

    if isinstance(ty, RealT):
        return type(v) is float
    if isinstance(ty, BoolT):
        return type(v) is bool
    if isinstance(ty, UnitT):
        return v is UNIT
    if isinstance(ty, ProdT):
        return (
            type(v) is tuple
            and len(v) == 2
            and value_matches_type(v[0], ty.fst)
            and value_matches_type(v[1], ty.snd)
        )
    if isinstance(ty, ArrowT):
        return type(v) in (Closure, RecClosure)
    return False
