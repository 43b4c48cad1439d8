"""Trace-based probabilistic runtime.

A probabilistic program is run against a finite trace of reals consumed
front to back: `sample` pops the next entry (weight factor 1) and
`score e` multiplies the run's weight by max(0, e). Weights combine along
sequencing exactly as the sampler monad's bind prescribes: every
sequencing point performs one multiplication of its two subcomputations'
weights (right-nested), which makes the sequential-multiplicativity
invariant hold bitwise, not just up to rounding. A `sample` on an empty
trace ends the run as Incomplete with weight 0; runtime bottoms
(domain errors, fuel) are recorded in the outcome with weight 0.

The weight function of a program maps a trace to the run's weight when the
trace is consumed exactly and the run completes, and to 0 otherwise.
Gradients of the weight function are computed by re-running the
derivative-transformed program with dual trace entries (one seeded slot
per pass); the weight itself is then accumulated as a dual number. This is
positionally sound because consumption order is a deterministic function
of the trace prefix.

Simulation draws the trace lazily from a seeded uniform stream, which is
equivalent to re-running on ever longer trace prefixes. On top of it sit a
Monte Carlo integrator (mean of weight * f(value)), an almost-everywhere
differentiability audit of the weight function, and an empirical support
dimension profiler (rank histogram of output-vs-trace Jacobians).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ad, interp, numcheck
from .interp import (
    UNIT,
    Bottom,
    Closure,
    DomainBottomSignal,
    EvalError,
    FuelExhaustedSignal,
    Machine,
    RecClosure,
    Val,
)
from .rng import UniformStream
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
    free_vars,
)
from . import primitives

DEFAULT_MAX_TRACE = 4096


class TraceOverflow(Exception):
    """Simulation consumed more than max_trace_len samples."""

    def __init__(self, drawn: int):
        super().__init__(f"trace overflow after {drawn} samples")
        self.drawn = drawn


class _Incomplete(Exception):
    """sample hit an empty trace."""


class Incomplete:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Incomplete"


INCOMPLETE = Incomplete()


@dataclass(frozen=True)
class WeightedOutcome:
    result: object  # Val | INCOMPLETE | Bottom
    weight: float
    remainder: tuple
    consumed: int
    steps: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    max_trace_len: int = DEFAULT_MAX_TRACE
    fuel: int = interp.DEFAULT_FUEL


# ---------------------------------------------------------------------------
# Weight algebras: plain floats and dual pairs
# ---------------------------------------------------------------------------

class _PlainW:
    ONE = 1.0

    @staticmethod
    def mul(a, b):
        return a * b

    @staticmethod
    def score_factor(v):
        # max(0, v) with the tie convention of `max`: the argument piece is
        # active at v == 0
        return v if not 0.0 > v else 0.0


class _DualW:
    ONE = (1.0, 0.0)

    @staticmethod
    def mul(a, b):
        return (a[0] * b[0], a[0] * b[1] + a[1] * b[0])

    @staticmethod
    def score_factor(v):
        return v if not 0.0 > v[0] else (0.0, 0.0)


class _Source:
    """Front-to-back trace supply: a fixed prefix, optionally extended from
    a uniform stream up to a cap."""

    __slots__ = ("entries", "cursor", "stream", "max_len")

    def __init__(self, entries, stream=None, max_len=DEFAULT_MAX_TRACE):
        self.entries = list(entries)
        self.cursor = 0
        self.stream = stream
        self.max_len = max_len

    def draw(self):
        if self.cursor < len(self.entries):
            v = self.entries[self.cursor]
            self.cursor += 1
            return v
        if self.stream is None:
            raise _Incomplete()
        if len(self.entries) >= self.max_len:
            raise TraceOverflow(len(self.entries))
        v = self.stream.next()
        self.entries.append(v)
        self.cursor += 1
        return v


def _seq(W, weights):
    w = W.ONE
    for wi in reversed(weights):
        w = W.mul(wi, w)
    return w


def _run(m: Machine, t: Term, env: dict, W, src: _Source):
    """Evaluate under the trace semantics; returns (value, weight)."""
    cls = type(t)
    if cls is Var:
        try:
            return env[t.name], W.ONE
        except KeyError:
            raise EvalError(f"unbound variable '{t.name}'") from None
    if cls is ConstReal:
        return t.value, W.ONE
    if cls is Sample:
        return src.draw(), W.ONE
    if cls is Prim:
        spec = primitives.lookup(t.name)
        vals = []
        weights = []
        for a in t.args:
            v, w = _run(m, a, env, W, src)
            vals.append(v)
            weights.append(w)
        m.charge()
        try:
            return spec.fn(*vals), _seq(W, weights)
        except primitives.PrimDomainError as e:
            raise DomainBottomSignal(str(e)) from None
    if cls is If:
        c, wc = _run(m, t.cond, env, W, src)
        v, wb = _run(m, t.then if c else t.orelse, env, W, src)
        return v, W.mul(wc, wb)
    if cls is App:
        f, w1 = _run(m, t.fn, env, W, src)
        a, w2 = _run(m, t.arg, env, W, src)
        fcls = type(f)
        if fcls is Closure:
            env2 = dict(f.env)
            env2[f.param] = a
        elif fcls is RecClosure:
            m.charge()
            env2 = dict(f.env)
            env2[f.fname] = f
            env2[f.param] = a
        else:
            raise EvalError("application of a non-function value")
        v, w3 = _run(m, f.body, env2, W, src)
        return v, W.mul(w1, W.mul(w2, w3))
    if cls is Score:
        v, we = _run(m, t.arg, env, W, src)
        return UNIT, W.mul(we, W.score_factor(v))
    if cls is Pair:
        v1, w1 = _run(m, t.fst, env, W, src)
        v2, w2 = _run(m, t.snd, env, W, src)
        return (v1, v2), W.mul(w1, W.mul(w2, W.ONE))
    if cls is MatchPair:
        v, ws = _run(m, t.scrutinee, env, W, src)
        if type(v) is not tuple:
            raise EvalError("match scrutinee is not a pair value")
        env2 = dict(env)
        env2[t.left] = v[0]
        env2[t.right] = v[1]
        vb, wb = _run(m, t.body, env2, W, src)
        return vb, W.mul(ws, wb)
    if cls is Lam:
        return Closure(_capture(env, free_vars(t)), t.param, t.body), W.ONE
    if cls is Mu:
        return RecClosure(_capture(env, free_vars(t)), t.fname, t.param, t.body), W.ONE
    if cls is ConstBool:
        return t.value, W.ONE
    if cls is ConstUnit:
        return UNIT, W.ONE
    if cls is Let:
        raise EvalError("Let must be desugared before evaluation")
    raise EvalError(f"unknown term node {cls.__name__}")


def _capture(env: dict, wanted) -> dict:
    return {k: env[k] for k in wanted if k in env}


def _zero_weight(W):
    return 0.0 if W is _PlainW else (0.0, 0.0)


def _run_core(t: Term, entries, fuel: int, W, stream=None, max_len=DEFAULT_MAX_TRACE):
    """Shared driver: run to a WeightedOutcome (weight in W's carrier)."""
    holder: list = []

    def attempt():
        m = Machine(fuel)
        src = _Source(entries, stream, max_len)
        holder.append((m, src))
        return _run(m, t, {}, W, src)

    try:
        value, weight = interp.call_deep(attempt)
    except _Incomplete:
        m, src = holder[-1]
        return WeightedOutcome(INCOMPLETE, _zero_weight(W), (), src.cursor, m.steps), src
    except DomainBottomSignal as e:
        m, src = holder[-1]
        rem = tuple(src.entries[src.cursor:])
        return (
            WeightedOutcome(Bottom(interp.DOMAIN_ERROR, e.detail, m.steps), _zero_weight(W), rem, src.cursor, m.steps),
            src,
        )
    except (FuelExhaustedSignal, RecursionError) as e:
        m, src = holder[-1]
        detail = "step budget exhausted" if isinstance(e, FuelExhaustedSignal) else "recursion depth exceeded host stack"
        rem = tuple(src.entries[src.cursor:])
        return (
            WeightedOutcome(Bottom(interp.FUEL_EXHAUSTED, detail, m.steps), _zero_weight(W), rem, src.cursor, m.steps),
            src,
        )
    m, src = holder[-1]
    rem = tuple(src.entries[src.cursor:])
    return WeightedOutcome(Val(value, m.steps), weight, rem, src.cursor, m.steps), src


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def run_trace(t: Term, trace, fuel: int = interp.DEFAULT_FUEL) -> WeightedOutcome:
    """Run a closed program against a fixed trace."""
    out, _ = _run_core(t, [float(v) for v in trace], fuel, _PlainW)
    return out


def weight_fn(t: Term, trace, fuel: int = interp.DEFAULT_FUEL) -> float:
    """Weight of the run when the trace is consumed exactly; 0 for
    incomplete, bottom, or leftover-remainder runs."""
    out = run_trace(t, trace, fuel)
    if isinstance(out.result, Val) and not out.remainder:
        return out.weight
    return 0.0


def simulate(t: Term, cfg: SimConfig | None = None, index: int = 0):
    """Run with a lazily drawn uniform trace; returns (outcome, trace).

    Raises TraceOverflow when the run consumes more than
    cfg.max_trace_len samples.
    """
    cfg = cfg or SimConfig()
    stream = UniformStream(cfg.seed, index)
    out, src = _run_core(t, [], cfg.fuel, _PlainW, stream=stream, max_len=cfg.max_trace_len)
    return out, tuple(src.entries[: src.cursor])


def weight_grad(t: Term, trace, fuel: int = interp.DEFAULT_FUEL):
    """Gradient of trace |-> weight_fn(t, trace), one seeded dual pass per
    coordinate. Zero-weight regions (incomplete or leftover runs) report a
    zero gradient; bottoms propagate."""
    trace = [float(v) for v in trace]
    plain = run_trace(t, trace, fuel)
    if isinstance(plain.result, Bottom):
        return plain.result
    if plain.result is INCOMPLETE or plain.remainder:
        return Val(tuple(0.0 for _ in trace))
    dual_t = ad.transform(t)
    n = len(trace)
    grads = []
    for j in range(n):
        entries = [(r, 1.0 if i == j else 0.0) for i, r in enumerate(trace)]
        out, _ = _run_core(dual_t, entries, fuel, _DualW)
        if isinstance(out.result, Bottom):
            return out.result
        if out.result is INCOMPLETE or out.remainder:
            raise EvalError("dual run consumed a different trace prefix")
        w, dw = out.weight
        if w != plain.weight:
            raise EvalError("dual run weight disagrees with plain run")
        grads.append(dw)
    return Val(tuple(grads))


# ---------------------------------------------------------------------------
# Monte Carlo integration
# ---------------------------------------------------------------------------

def flatten_reals(v) -> list[float]:
    """Flatten a value of nested-pair real type into a list of floats."""
    if type(v) is float:
        return [v]
    if type(v) is tuple and len(v) == 2:
        return flatten_reals(v[0]) + flatten_reals(v[1])
    raise EvalError(f"value is not a real vector: {v!r}")


def parse_event(spec: str):
    """Builtin integrands: 'mass' (f = 1), 'mean:<i>' (coordinate i), and
    'box:<i>,<hi>' or 'box:<i>,<lo>,<hi>' (coordinate-interval indicator)."""
    if spec in ("mass", "total-mass"):
        return lambda v: 1.0
    if spec == "mean":
        spec = "mean:0"
    if spec.startswith("mean:"):
        i = int(spec.split(":", 1)[1])
        return lambda v: flatten_reals(v)[i]
    if spec.startswith("box:"):
        parts = spec.split(":", 1)[1].split(",")
        if len(parts) == 2:
            i, lo, hi = int(parts[0]), 0.0, float(parts[1])
        elif len(parts) == 3:
            i, lo, hi = int(parts[0]), float(parts[1]), float(parts[2])
        else:
            raise ValueError(f"bad box event: {spec!r}")
        return lambda v: 1.0 if lo <= flatten_reals(v)[i] <= hi else 0.0
    raise ValueError(f"unknown event spec: {spec!r}")


@dataclass(frozen=True)
class EstimateReport:
    mean: float
    halfwidth: float
    confidence: float
    n: int
    bottom_runs: int
    overflow_runs: int
    incomplete_runs: int


def estimate(
    t: Term,
    event: str,
    n: int,
    cfg: SimConfig | None = None,
    confidence: float = 0.95,
) -> EstimateReport:
    """Monte Carlo mean of weight * f(value) over n simulations. Failed
    runs (bottom or trace overflow) contribute weight 0 and are counted."""
    cfg = cfg or SimConfig()
    f = parse_event(event)
    samples = []
    bottoms = overflows = incompletes = 0
    for i in range(n):
        try:
            out, _ = simulate(t, cfg, index=i)
        except TraceOverflow:
            overflows += 1
            samples.append(0.0)
            continue
        if isinstance(out.result, Bottom):
            bottoms += 1
            samples.append(0.0)
        elif out.result is INCOMPLETE:
            incompletes += 1
            samples.append(0.0)
        else:
            samples.append(out.weight * f(out.result.value))
    mean, halfwidth = numcheck.mc_mean_ci(samples, confidence)
    return EstimateReport(mean, halfwidth, confidence, n, bottoms, overflows, incompletes)


# ---------------------------------------------------------------------------
# Weight-function differentiability audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoordCheck:
    trace_index: int
    coord: int
    value: float
    ad: float
    fd: float | None
    fd_class: str
    agree: bool


@dataclass(frozen=True)
class AeDiffReport:
    n_traces: int
    checked_coords: int
    interior_disagreements: tuple
    boundary_flags: tuple
    undefined_coords: int
    zero_weight_traces: int
    failed_traces: int


def ae_diff_check(
    t: Term,
    n_traces: int,
    cfg: SimConfig | None = None,
    fd_cfg: numcheck.FDConfig | None = None,
    rtol: float = 1e-5,
    atol: float = 1e-7,
) -> AeDiffReport:
    """Sample traces by simulation and compare the dual-pass gradient of
    the weight function against finite differences, coordinate by
    coordinate. Probes stay inside [0, 1] (one-sided near the edges); a
    coordinate whose one-sided differences are unstable (e.g. the probe
    changes the consumption pattern) is boundary-flagged, not failed."""
    cfg = cfg or SimConfig()
    fd_cfg = fd_cfg or numcheck.FDConfig()
    disagreements = []
    flags = []
    undefined = zero_weight = failed = checked = 0
    for i in range(n_traces):
        try:
            out, trace = simulate(t, cfg, index=i)
        except TraceOverflow:
            failed += 1
            continue
        if isinstance(out.result, Bottom):
            failed += 1
            continue
        if out.result is INCOMPLETE:
            failed += 1
            continue
        if not trace:
            continue
        if not (out.weight > 0.0):
            zero_weight += 1
            continue
        grad_out = weight_grad(t, trace, cfg.fuel)
        if not isinstance(grad_out, Val):
            failed += 1
            continue
        grad = grad_out.value
        for j, r in enumerate(trace):
            def section(v, _j=j):
                probe = list(trace)
                probe[_j] = v
                return weight_fn(t, probe, cfg.fuel)

            try:
                fd_val, fd_class = numcheck.fd_derivative(section, r, fd_cfg, bounds=(0.0, 1.0))
            except numcheck.UndefinedNearPoint:
                undefined += 1
                continue
            checked += 1
            agree = abs(grad[j] - fd_val) <= rtol * max(abs(grad[j]), abs(fd_val)) + atol
            if fd_class == numcheck.BOUNDARY:
                flags.append(CoordCheck(i, j, r, grad[j], fd_val, fd_class, agree))
            elif not agree:
                disagreements.append(CoordCheck(i, j, r, grad[j], fd_val, fd_class, agree))
    return AeDiffReport(
        n_traces=n_traces,
        checked_coords=checked,
        interior_disagreements=tuple(disagreements),
        boundary_flags=tuple(flags),
        undefined_coords=undefined,
        zero_weight_traces=zero_weight,
        failed_traces=failed,
    )


# ---------------------------------------------------------------------------
# Support dimension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankHistogram:
    counts: dict
    jacobian_shapes: tuple
    svd_tol: float
    n_samples: int
    skipped: int

    def fraction(self, rank: int) -> float:
        total = sum(self.counts.values())
        return self.counts.get(rank, 0) / total if total else 0.0


def support_dim(
    t: Term,
    n_samples: int,
    cfg: SimConfig | None = None,
    svd_tol: float = 1e-8,
) -> RankHistogram:
    """Empirical local dimension of a program's output distribution: for
    each simulated trace, the numerical rank of the Jacobian of the output
    vector with respect to the consumed trace coordinates."""
    cfg = cfg or SimConfig()
    dual_t = ad.transform(t)
    counts: dict[int, int] = {}
    shapes = []
    skipped = 0
    for i in range(n_samples):
        try:
            out, trace = simulate(t, cfg, index=i)
        except TraceOverflow:
            skipped += 1
            continue
        if not isinstance(out.result, Val):
            skipped += 1
            continue
        k = len(flatten_reals(out.result.value))
        n = len(trace)
        if n == 0:
            rank = 0
        else:
            cols = []
            bad = False
            for j in range(n):
                entries = [(r, 1.0 if jj == j else 0.0) for jj, r in enumerate(trace)]
                dout, _ = _run_core(dual_t, entries, cfg.fuel, _DualW)
                if not isinstance(dout.result, Val):
                    bad = True
                    break
                tangents: list[float] = []
                ad._flatten_tangents(dout.result.value, tangents)
                cols.append(tangents)
            if bad:
                skipped += 1
                continue
            jac = np.array(cols, dtype=float).T  # k x n
            sv = np.linalg.svd(jac, compute_uv=False)
            smax = float(sv[0]) if len(sv) else 0.0
            rank = int(np.sum(sv > svd_tol * smax)) if smax > 0.0 else 0
        counts[rank] = counts.get(rank, 0) + 1
        shapes.append((k, n))
    return RankHistogram(counts, tuple(shapes), svd_tol, n_samples, skipped)
