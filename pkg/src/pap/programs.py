"""Built-in example programs.

The named programs exercise the known failure modes of piecewise
derivative computation (an equality-guarded identity whose derivative at
the guard point is 0, a recursive program whose gradient steps walk off to
minus infinity under the matched step size, a stationary trap) alongside
probabilistic samplers used by the runtime's analyses. `audit_corpus`
lists real -> real programs with sampling ranges for bulk
derivative-vs-oracle audits.
"""

from __future__ import annotations

from dataclasses import dataclass

from .parser import parse
from .syntax import Term

SOURCES: dict[str, str] = {
    # identity with an equality guard; the transform reports derivative 0
    # at the guard point
    "sillyid": "fun (x : real) -> if eq(x, 0.0) then 0.0 else x",
    "square": "fun (x : real) -> mul(x, x)",
    # square with a pointwise trap at x = 1: value is unchanged but the
    # guard piece has derivative 0, so gradient steps stay put
    "q": "fun (x : real) -> if eq(x, 1.0) then 1.0 else mul(x, x)",
    # recursive program equal to x^2/2 everywhere (step-size constant 1.0
    # compiled in); its piecewise derivative is 1 on the nonpositive
    # integers, so gradient descent with step 1.0 decrements forever
    "counterexample_p": (
        "let g = mu g (p : real * real) : real ->\n"
        "  match p with (x, n) ->\n"
        "    if gt(x, 0.0) then div(mul(sub(x, n), sub(x, n)), mul(1.0, 2.0))\n"
        "    else if eq(x, 0.0) then add(div(x, 1.0), div(mul(n, n), mul(2.0, 1.0)))\n"
        "    else g((add(x, 1.0), add(n, 1.0)))\n"
        "in fun (x : real) -> g((x, 0.0))"
    ),
    # halts on (0,1) off the middle-thirds set, loops forever on it
    "cantor": (
        "mu c (x : real) : real ->\n"
        "  if gt(x, 0.3333333333333333)\n"
        "  then (if lt(x, 0.6666666666666666) then 0.0 else c(sub(mul(3.0, x), 2.0)))\n"
        "  else c(mul(3.0, x))"
    ),
    # almost-surely terminating sampler counting failures before a success
    "geometric": (
        "let g = mu g (u : unit) : real ->\n"
        "  if lt(sample, 0.5) then 0.0 else add(1.0, g(()))\n"
        "in g(())"
    ),
    # weight function |r1 - 0.5| with a kink at 0.5
    "abs_kink": "score(abs(sub(sample, 0.5)))",
    "pair_copy": "let u = sample in (u, u)",
    "pair_indep": "(sample, sample)",
    "mixture": (
        "if lt(sample, 0.5) then (let u = sample in (u, u)) else (sample, sample)"
    ),
    "score_two_sample": "let s = score(2.0) in sample",
}


_CACHE: dict[str, Term] = {}


def names() -> list[str]:
    return sorted(SOURCES)


def source(name: str) -> str:
    try:
        return SOURCES[name]
    except KeyError:
        raise KeyError(f"no builtin program named {name!r}; known: {', '.join(names())}") from None


def term(name: str) -> Term:
    if name not in _CACHE:
        _CACHE[name] = parse(source(name))
    return _CACHE[name]


def write_examples(directory) -> list[str]:
    """Write every builtin program to <directory>/<name>.pap."""
    import os

    os.makedirs(directory, exist_ok=True)
    written = []
    for name in names():
        path = os.path.join(directory, f"{name}.pap")
        with open(path, "w") as fh:
            fh.write(source(name) + "\n")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Audit corpus: real -> real programs with sampling ranges
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditProgram:
    name: str
    src: str
    lo: float
    hi: float

    def term(self) -> Term:
        return parse(self.src)


AUDIT_CORPUS: tuple[AuditProgram, ...] = (
    # analytic
    AuditProgram("poly3", "fun (x : real) -> add(mul(2.0, mul(x, mul(x, x))), sub(mul(3.0, x), 1.0))", -3.0, 3.0),
    AuditProgram("square", SOURCES["square"], -3.0, 3.0),
    AuditProgram("exp_half", "fun (x : real) -> exp(mul(0.5, x))", -3.0, 3.0),
    AuditProgram("sin", "fun (x : real) -> sin(x)", -3.0, 3.0),
    AuditProgram("sin_cos", "fun (x : real) -> mul(sin(x), cos(mul(2.0, x)))", -3.0, 3.0),
    AuditProgram("log_shift", "fun (x : real) -> log(add(x, 10.0))", -3.0, 3.0),
    AuditProgram("sqrt_shift", "fun (x : real) -> sqrt(add(mul(x, x), 1.0))", -3.0, 3.0),
    AuditProgram("rational", "fun (x : real) -> div(x, add(mul(x, x), 1.0))", -3.0, 3.0),
    AuditProgram("neg_cube", "fun (x : real) -> neg(mul(x, mul(x, x)))", -2.0, 2.0),
    AuditProgram("exp_sin", "fun (x : real) -> exp(sin(x))", -3.0, 3.0),
    # piecewise
    AuditProgram("abs", "fun (x : real) -> abs(x)", -2.0, 2.0),
    AuditProgram("relu", "fun (x : real) -> max(x, 0.0)", -2.0, 2.0),
    AuditProgram("min_comb", "fun (x : real) -> min(mul(x, x), add(x, 2.0))", -3.0, 3.0),
    AuditProgram("clamp", "fun (x : real) -> max(-1.0, min(1.0, x))", -3.0, 3.0),
    AuditProgram("step_if", "fun (x : real) -> if lt(x, 0.0) then mul(-1.0, x) else mul(x, x)", -2.0, 2.0),
    AuditProgram(
        "three_piece",
        "fun (x : real) -> if lt(x, -1.0) then neg(x) else (if lt(x, 1.0) then mul(x, x) else add(x, 1.0))",
        -3.0,
        3.0,
    ),
    AuditProgram("abs_sin", "fun (x : real) -> abs(sub(sin(x), 0.5))", -3.0, 3.0),
    AuditProgram(
        "huber",
        "fun (x : real) -> if lt(abs(x), 1.0) then mul(0.5, mul(x, x)) else sub(abs(x), 0.5)",
        -3.0,
        3.0,
    ),
    AuditProgram("sillyid", SOURCES["sillyid"], -1.0, 1.0),
    AuditProgram("q", SOURCES["q"], -2.0, 2.0),
    # recursive
    AuditProgram("counterexample_p", SOURCES["counterexample_p"], -5.0, 5.0),
    AuditProgram(
        "rec_halving",
        "fun (x : real) -> (mu h (y : real) : real -> if lt(abs(y), 1.0) then mul(y, y) else h(div(y, 2.0))) x",
        -8.0,
        8.0,
    ),
    AuditProgram(
        "rec_decay",
        "fun (x : real) -> (mu d (y : real) : real -> if lt(abs(y), 0.5) then y else d(mul(0.5, y))) x",
        -4.0,
        4.0,
    ),
    AuditProgram(
        "loop_sum",
        (
            "fun (x : real) -> (mu s (p : real * real) : real -> match p with (k, acc) -> "
            "if le(k, 0.0) then acc else s((sub(k, 1.0), add(acc, sin(x))))) ((5.0, 0.0))"
        ),
        -3.0,
        3.0,
    ),
)
