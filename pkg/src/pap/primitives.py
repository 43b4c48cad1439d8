"""Registry of piecewise-analytic primitives.

Each primitive carries an evaluator over runtime values, a dual-number
translation used by the derivative transform, and a note documenting its
piece layout and the convention chosen at piece boundaries. Boundary
conventions are one admissible choice among many; what matters is that the
evaluator and the dual translation pick the *same* piece everywhere, so the
primal half of the dual result reproduces the evaluator bit for bit.

Real equality is exact bit comparison of the IEEE-754 encodings (so it can
serve as a `x == 0` guard); the other comparisons follow IEEE semantics.

Dual values for `real` positions are `(primal, tangent)` pairs, i.e. the
same encoding the interpreter uses for product values. For every base
primitive `f` a companion `f_d` is registered operating on translated
types; emitted derivative programs call these by name.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable

from .syntax import BOOL, REAL, ArrowT, BoolT, ProdT, RealT, Type, UnitT

DUAL_SUFFIX = "_d"


class PrimNotFound(KeyError):
    pass


class PrimDomainError(Exception):
    """The arguments fall outside the primitive's domain; models the
    undefined (bottom) outcome, not a user-facing crash."""


@dataclass(frozen=True)
class PrimSpec:
    name: str
    arg_types: tuple[Type, ...]
    result_type: Type
    fn: Callable
    dual_fn: Callable | None
    boundary_note: str

    @property
    def arity(self) -> int:
        return len(self.arg_types)


_REGISTRY: dict[str, PrimSpec] = {}


def lookup(name: str) -> PrimSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise PrimNotFound(name) from None


def has_prim(name: str) -> bool:
    return name in _REGISTRY


def names() -> list[str]:
    return sorted(_REGISTRY)


def eval_prim(spec: PrimSpec, args) -> object:
    """Apply a primitive's evaluator. Raises PrimDomainError outside its
    domain."""
    return spec.fn(*args)


def dual_prim(spec: PrimSpec, args) -> object:
    """Apply a primitive's dual-number translation. Defined exactly where
    the evaluator is."""
    if spec.dual_fn is None:
        raise PrimNotFound(f"{spec.name} has no dual translation")
    return spec.dual_fn(*args)


def registry_dump() -> list[dict]:
    from .syntax import pretty_type

    out = []
    for name in names():
        spec = _REGISTRY[name]
        out.append(
            {
                "name": name,
                "arity": spec.arity,
                "arg_types": [pretty_type(t) for t in spec.arg_types],
                "result_type": pretty_type(spec.result_type),
                "boundary_note": spec.boundary_note,
            }
        )
    return out


def dual_type(ty: Type) -> Type:
    """Type translation for the derivative transform: real becomes
    real * real, other ground types are fixed, and products/functions map
    structurally."""
    if isinstance(ty, RealT):
        return ProdT(REAL, REAL)
    if isinstance(ty, (BoolT, UnitT)):
        return ty
    if isinstance(ty, ProdT):
        return ProdT(dual_type(ty.fst), dual_type(ty.snd))
    if isinstance(ty, ArrowT):
        return ArrowT(dual_type(ty.arg), dual_type(ty.res))
    raise ValueError(f"unknown type: {ty!r}")


# ---------------------------------------------------------------------------
# Evaluators and dual translations
# ---------------------------------------------------------------------------

_pack = struct.Struct("<d").pack


def _bits_equal(a: float, b: float) -> bool:
    return _pack(a) == _pack(b)


def _add(a, b):
    return a + b


def _dual_add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _sub(a, b):
    return a - b


def _dual_sub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _mul(a, b):
    return a * b


def _dual_mul(a, b):
    x, dx = a
    y, dy = b
    return (x * y, x * dy + dx * y)


def _div(a, b):
    if b == 0.0:
        raise PrimDomainError("div: zero denominator")
    return a / b


def _dual_div(a, b):
    x, dx = a
    y, dy = b
    if y == 0.0:
        raise PrimDomainError("div: zero denominator")
    return (x / y, (dx * y - x * dy) / (y * y))


def _neg(a):
    return -a


def _dual_neg(a):
    return (-a[0], -a[1])


def _exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _dual_exp(a):
    y = _exp(a[0])
    return (y, y * a[1])


def _log(a):
    if a <= 0.0:
        raise PrimDomainError("log: nonpositive argument")
    return math.log(a)


def _dual_log(a):
    x, dx = a
    if x <= 0.0:
        raise PrimDomainError("log: nonpositive argument")
    return (math.log(x), dx / x)


def _sin(a):
    return math.sin(a)


def _dual_sin(a):
    return (math.sin(a[0]), math.cos(a[0]) * a[1])


def _cos(a):
    return math.cos(a)


def _dual_cos(a):
    return (math.cos(a[0]), -math.sin(a[0]) * a[1])


def _sqrt(a):
    if a < 0.0:
        raise PrimDomainError("sqrt: negative argument")
    return math.sqrt(a)


def _dual_sqrt(a):
    x, dx = a
    if x < 0.0:
        raise PrimDomainError("sqrt: negative argument")
    if x == 0.0:
        # piece {0} uses the constant-zero representative
        return (math.sqrt(x), 0.0)
    y = math.sqrt(x)
    return (y, dx / (2.0 * y))


def _abs(a):
    return -a if a < 0.0 else a


def _dual_abs(a):
    x, dx = a
    if x < 0.0:
        return (-x, -dx)
    return (x, dx)


def _min(a, b):
    return a if a < b else b


def _dual_min(a, b):
    return a if a[0] < b[0] else b


def _max(a, b):
    return a if a > b else b


def _dual_max(a, b):
    return a if a[0] > b[0] else b


def _lt(a, b):
    return a < b


def _le(a, b):
    return a <= b


def _gt(a, b):
    return a > b


def _ge(a, b):
    return a >= b


def _cmp_dual(op):
    def dual(a, b):
        return op(a[0], b[0])

    return dual


_R2 = (REAL, REAL)
_R1 = (REAL,)

_BASE: list[tuple[str, tuple[Type, ...], Type, Callable, Callable, str]] = [
    ("add", _R2, REAL, _add, _dual_add, "analytic everywhere"),
    ("sub", _R2, REAL, _sub, _dual_sub, "analytic everywhere"),
    ("mul", _R2, REAL, _mul, _dual_mul, "analytic everywhere"),
    ("div", _R2, REAL, _div, _dual_div, "analytic on y != 0; undefined at y = 0"),
    ("neg", _R1, REAL, _neg, _dual_neg, "analytic everywhere"),
    ("exp", _R1, REAL, _exp, _dual_exp, "analytic everywhere"),
    ("log", _R1, REAL, _log, _dual_log, "analytic on x > 0; undefined at x <= 0"),
    ("sin", _R1, REAL, _sin, _dual_sin, "analytic everywhere"),
    ("cos", _R1, REAL, _cos, _dual_cos, "analytic everywhere"),
    (
        "sqrt",
        _R1,
        REAL,
        _sqrt,
        _dual_sqrt,
        "pieces x > 0 (analytic) and {0} (constant-zero representative, "
        "tangent 0); undefined at x < 0",
    ),
    (
        "abs",
        _R1,
        REAL,
        _abs,
        _dual_abs,
        "pieces x < 0 (slope -1) and x >= 0 (slope +1); at 0 the x >= 0 "
        "piece is active",
    ),
    (
        "min",
        _R2,
        REAL,
        _min,
        _dual_min,
        "pieces a < b (a active) and a >= b (b active); ties take b",
    ),
    (
        "max",
        _R2,
        REAL,
        _max,
        _dual_max,
        "pieces a > b (a active) and a <= b (b active); ties take b",
    ),
    ("lt", _R2, BOOL, _lt, _cmp_dual(_lt), "pieces a < b and a >= b; IEEE comparison"),
    ("le", _R2, BOOL, _le, _cmp_dual(_le), "pieces a <= b and a > b; IEEE comparison"),
    ("gt", _R2, BOOL, _gt, _cmp_dual(_gt), "pieces a > b and a <= b; IEEE comparison"),
    ("ge", _R2, BOOL, _ge, _cmp_dual(_ge), "pieces a >= b and a < b; IEEE comparison"),
    (
        "eq",
        _R2,
        BOOL,
        _bits_equal,
        _cmp_dual(_bits_equal),
        "exact bit comparison of IEEE-754 encodings (distinguishes -0.0 "
        "from 0.0)",
    ),
]


def _register_all() -> None:
    for name, arg_types, result_type, fn, dual_fn, note in _BASE:
        _REGISTRY[name] = PrimSpec(name, arg_types, result_type, fn, dual_fn, note)
    # companion primitives over translated types, called by emitted
    # derivative programs
    for name, arg_types, result_type, fn, dual_fn, note in _BASE:
        _REGISTRY[name + DUAL_SUFFIX] = PrimSpec(
            name + DUAL_SUFFIX,
            tuple(dual_type(t) for t in arg_types),
            dual_type(result_type),
            dual_fn,
            None,
            f"dual-number translation of '{name}'",
        )


_register_all()
