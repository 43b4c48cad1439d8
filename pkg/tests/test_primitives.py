"""Primitive registry: evaluators, dual translations, boundary
conventions, and the agreement/linearity properties."""

import math
import random
import struct

import pytest

from pap import primitives
from pap.primitives import (
    PrimDomainError,
    PrimNotFound,
    dual_prim,
    eval_prim,
    lookup,
)
from pap.syntax import BOOL, REAL, ProdT


def bits(x: float) -> bytes:
    return struct.pack("<d", x)


def test_lookup():
    assert lookup("add").arity == 2
    assert lookup("lt").result_type == BOOL
    with pytest.raises(PrimNotFound):
        lookup("bogus")


def test_dual_companions_registered():
    spec = lookup("add_d")
    assert spec.arg_types == (ProdT(REAL, REAL), ProdT(REAL, REAL))
    assert spec.result_type == ProdT(REAL, REAL)


def test_eval_table():
    assert eval_prim(lookup("abs"), [-3.5]) == 3.5
    assert eval_prim(lookup("lt"), [2.0, 3.0]) is True
    assert eval_prim(lookup("max"), [1.0, 4.0]) == 4.0
    assert eval_prim(lookup("exp"), [0.0]) == 1.0
    with pytest.raises(PrimDomainError):
        eval_prim(lookup("div"), [1.0, 0.0])
    with pytest.raises(PrimDomainError):
        eval_prim(lookup("log"), [0.0])
    with pytest.raises(PrimDomainError):
        eval_prim(lookup("log"), [-1.0])
    with pytest.raises(PrimDomainError):
        eval_prim(lookup("sqrt"), [-1.0])


def test_eq_is_bitwise():
    assert eval_prim(lookup("eq"), [0.0, 0.0]) is True
    assert eval_prim(lookup("eq"), [0.0, -0.0]) is False  # distinct encodings
    assert eval_prim(lookup("eq"), [1.5, 1.5]) is True


def test_dual_table():
    assert dual_prim(lookup("mul"), [(2.0, 1.0), (3.0, 0.0)]) == (6.0, 3.0)
    assert dual_prim(lookup("abs"), [(0.0, 1.0)]) == (0.0, 1.0)  # x >= 0 piece at 0
    assert dual_prim(lookup("exp"), [(0.0, 2.0)]) == (1.0, 2.0)
    assert dual_prim(lookup("sqrt"), [(0.0, 1.0)]) == (0.0, 0.0)  # {0} piece
    assert dual_prim(lookup("max"), [(1.0, 5.0), (1.0, 7.0)]) == (1.0, 7.0)  # tie takes b
    assert dual_prim(lookup("min"), [(1.0, 5.0), (1.0, 7.0)]) == (1.0, 7.0)
    assert dual_prim(lookup("lt"), [(1.0, 9.0), (2.0, 9.0)]) is True
    with pytest.raises(PrimDomainError):
        dual_prim(lookup("div"), [(1.0, 0.0), (0.0, 1.0)])


REAL_ARG_PRIMS = [
    name
    for name in primitives.names()
    if not name.endswith(primitives.DUAL_SUFFIX)
    and all(t == REAL for t in lookup(name).arg_types)
]


def sample_args(rng, name, arity):
    if name == "log":
        return [rng.uniform(0.05, 6.0)]
    if name == "sqrt":
        return [rng.uniform(0.0, 6.0)]
    args = [rng.uniform(-4.0, 4.0) for _ in range(arity)]
    if name == "div" and args[1] == 0.0:
        args[1] = 1.0
    return args


def test_primal_agreement_bit_for_bit():
    rng = random.Random(5)
    for name in REAL_ARG_PRIMS:
        spec = lookup(name)
        for _ in range(200):
            args = sample_args(rng, name, spec.arity)
            plain = eval_prim(spec, args)
            dual = dual_prim(spec, [(a, rng.uniform(-2, 2)) for a in args])
            if spec.result_type == REAL:
                assert bits(dual[0]) == bits(plain), (name, args)
            else:
                assert dual is plain or dual == plain


def test_zero_tangent_fixpoint():
    rng = random.Random(6)
    for name in REAL_ARG_PRIMS:
        spec = lookup(name)
        if spec.result_type != REAL:
            continue
        for _ in range(100):
            args = sample_args(rng, name, spec.arity)
            dual = dual_prim(spec, [(a, 0.0) for a in args])
            assert dual[1] == 0.0, (name, args)


def test_tangent_linearity():
    rng = random.Random(7)
    for name in REAL_ARG_PRIMS:
        spec = lookup(name)
        if spec.result_type != REAL:
            continue
        for _ in range(100):
            args = sample_args(rng, name, spec.arity)
            v = [rng.uniform(-2, 2) for _ in args]
            w = [rng.uniform(-2, 2) for _ in args]
            a, b = rng.uniform(-2, 2), rng.uniform(-2, 2)
            combo = dual_prim(spec, [(x, a * vi + b * wi) for x, vi, wi in zip(args, v, w)])[1]
            split = a * dual_prim(spec, list(zip(args, v)))[1] + b * dual_prim(spec, list(zip(args, w)))[1]
            scale = max(abs(combo), abs(split), 1.0)
            assert abs(combo - split) <= 1e-12 * scale, (name, args, v, w)


def test_tangent_matches_finite_differences_on_piece_interiors():
    from pap import numcheck

    rng = random.Random(8)
    cfg = numcheck.FDConfig()
    for name in REAL_ARG_PRIMS:
        spec = lookup(name)
        if spec.result_type != REAL:
            continue
        for _ in range(40):
            args = sample_args(rng, name, spec.arity)
            # keep away from documented piece boundaries
            if name == "abs" and abs(args[0]) < 1e-3:
                continue
            if name in ("min", "max") and abs(args[0] - args[1]) < 1e-3:
                continue
            if name == "sqrt" and args[0] < 1e-2:
                continue
            if name == "div" and abs(args[1]) < 1e-2:
                continue
            for slot in range(spec.arity):
                def section(v, _slot=slot):
                    probe = list(args)
                    probe[_slot] = v
                    try:
                        return eval_prim(spec, probe)
                    except PrimDomainError:
                        raise numcheck.ProbeUndefined(v) from None

                try:
                    fd, cls = numcheck.fd_derivative(section, args[slot], cfg)
                except numcheck.UndefinedNearPoint:
                    continue
                if cls != numcheck.INTERIOR:
                    continue
                duals = [(a, 1.0 if i == slot else 0.0) for i, a in enumerate(args)]
                tangent = dual_prim(spec, duals)[1]
                assert abs(tangent - fd) <= 1e-6 * max(abs(tangent), abs(fd), 1.0), (
                    name,
                    args,
                    slot,
                )


def test_registry_dump_shape():
    dump = primitives.registry_dump()
    names = {e["name"] for e in dump}
    assert "add" in names and "add_d" in names
    for entry in dump:
        assert set(entry) == {"name", "arity", "arg_types", "result_type", "boundary_note"}
