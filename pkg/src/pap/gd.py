"""Gradient-descent lab: the fixed-step iteration x' = x - eps * g with
gradients from either the derivative transform or the finite-difference
oracle, plus the randomized step-size/start experiment and an empirical
gradient-Lipschitz probe.

The randomized experiment draws (eps, x0) per seed from
U(0, 2/L) x U(box), runs the transform-gradient iteration, and judges
convergence by the *oracle* gradient at the final iterate: transform
gradients can sit on bad pieces (that is the point of the counterexample
programs), so the verdict must come from the independent side. Final
points whose oracle stencil is boundary-flagged are marked indeterminate
rather than failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import ad, interp, numcheck
from .rng import UniformStream
from .syntax import ArrowT, ProdT, RealT, Term, Type
from .typecheck import PapTypeError, typecheck_closed

AD_MODE = "ad"
FD_MODE = "fd"


@dataclass(frozen=True)
class GDConfig:
    eps: float
    T: int
    grad_mode: str = AD_MODE
    stop_tol: float = 0.0
    fuel: int = interp.DEFAULT_FUEL
    fd_cfg: numcheck.FDConfig = field(default_factory=numcheck.FDConfig)

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.grad_mode not in (AD_MODE, FD_MODE):
            raise ValueError(f"grad_mode must be '{AD_MODE}' or '{FD_MODE}'")


@dataclass
class Trajectory:
    xs: list  # visited iterates, tuples of floats
    grads: list  # gradient used for step i: xs[i+1] = xs[i] - eps*grads[i]
    fs: list  # objective at each visited iterate
    final_grad: tuple | None
    termination: str  # 'converged' | 'exhausted' | 'undefined'
    fail_step: int | None = None

    @property
    def final_x(self):
        return self.xs[-1]

    def monotone_decrease(self) -> bool:
        return all(self.fs[i + 1] <= self.fs[i] for i in range(len(self.fs) - 1))

    def scalar_xs(self) -> list[float]:
        return [x[0] for x in self.xs]


def _build_plain(ty: Type, xs, pos: int):
    if isinstance(ty, RealT):
        return float(xs[pos]), pos + 1
    if isinstance(ty, ProdT):
        fst, pos = _build_plain(ty.fst, xs, pos)
        snd, pos = _build_plain(ty.snd, xs, pos)
        return (fst, snd), pos
    raise ValueError(f"not a real vector type: {ty!r}")


class Objective:
    """Callable views of a closed scalar-valued program over real inputs
    (curried or tupled)."""

    def __init__(self, t: Term, fuel: int = interp.DEFAULT_FUEL):
        ty = typecheck_closed(t)
        try:
            self.arg_types, self.n = ad.input_signature(ty)
        except ValueError as e:
            raise PapTypeError(t, str(e), actual=ty) from None
        res = ty
        while isinstance(res, ArrowT):
            res = res.res
        if not isinstance(res, RealT):
            raise PapTypeError(t, "objective must be scalar-valued", actual=ty)
        self.term = t
        self.fuel = fuel
        self.pclo = ad.primal_closure(t, fuel)
        self.dclo = ad.dual_closure(t, fuel)

    def _plain_args(self, xs):
        args = []
        pos = 0
        for a_ty in self.arg_types:
            v, pos = _build_plain(a_ty, xs, pos)
            args.append(v)
        return args

    def value(self, xs):
        """Outcome of f(xs)."""
        return interp.apply_values(self.pclo, self._plain_args(xs), self.fuel)

    def value_fn(self):
        """float-in, float-out view for the oracle; raises ProbeUndefined
        on bottom."""

        def f(xs):
            out = self.value(xs)
            if isinstance(out, interp.Val):
                return out.value
            raise numcheck.ProbeUndefined(tuple(xs))

        return f

    def ad_value_and_grad(self, xs):
        """Objective value and transform gradient, by n seeded passes.
        Returns Outcome of (f, grad)."""
        grads = []
        primal = None
        for j in range(self.n):
            seed = [0.0] * self.n
            seed[j] = 1.0
            args = []
            pos = 0
            for a_ty in self.arg_types:
                dual, pos = ad._build_dual(a_ty, xs, seed, pos)
                args.append(dual)
            out = interp.apply_values(self.dclo, args, self.fuel)
            if not isinstance(out, interp.Val):
                return out
            primal, tangent = out.value
            grads.append(tangent)
        return interp.Val((primal, tuple(grads)))

    def fd_value_and_grad(self, xs, fd_cfg=None):
        """Objective value and oracle gradient. Returns Outcome of
        (f, grad, classes)."""
        out = self.value(xs)
        if not isinstance(out, interp.Val):
            return out
        try:
            grad, classes = numcheck.fd_gradient(self.value_fn(), xs, fd_cfg)
        except (numcheck.UndefinedNearPoint, numcheck.ProbeUndefined):
            return interp.Bottom(interp.DOMAIN_ERROR, "oracle probes undefined", 0)
        return interp.Val((out.value, grad, classes))


def _norm(v) -> float:
    return math.sqrt(math.fsum(x * x for x in v))


def as_vector(x0, n: int):
    if isinstance(x0, (int, float)):
        xs = (float(x0),)
    else:
        xs = tuple(float(v) for v in x0)
    if len(xs) != n:
        raise ValueError(f"objective takes {n} real input(s), got {len(xs)}")
    return xs


def gd_run(t: Term, x0, cfg: GDConfig) -> Trajectory:
    """Iterate x' = x - eps * g from x0 until the gradient norm drops below
    stop_tol (if positive), the step budget T runs out, or evaluation
    bottoms out."""
    obj = Objective(t, cfg.fuel)
    return gd_run_objective(obj, x0, cfg)


def gd_run_objective(obj: Objective, x0, cfg: GDConfig) -> Trajectory:
    x = as_vector(x0, obj.n)
    xs = [x]
    grads: list = []
    fs: list = []
    final_grad = None
    termination = "exhausted"
    fail_step = None

    for step in range(cfg.T + 1):
        if cfg.grad_mode == AD_MODE:
            out = obj.ad_value_and_grad(x)
            if not isinstance(out, interp.Val):
                termination = "undefined"
                fail_step = step
                break
            f, g = out.value
        else:
            out = obj.fd_value_and_grad(x, cfg.fd_cfg)
            if not isinstance(out, interp.Val):
                termination = "undefined"
                fail_step = step
                break
            f, g, _classes = out.value
        fs.append(f)
        if cfg.stop_tol > 0.0 and _norm(g) < cfg.stop_tol:
            final_grad = g
            termination = "converged"
            break
        if step == cfg.T:
            final_grad = g
            termination = "exhausted"
            break
        grads.append(g)
        x = tuple(xi - cfg.eps * gi for xi, gi in zip(x, g))
        xs.append(x)

    return Trajectory(xs, grads, fs, final_grad, termination, fail_step)


# ---------------------------------------------------------------------------
# Randomized step-size/start experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeedRecord:
    index: int
    eps: float
    x0: tuple
    status: str  # 'converged' | 'not-converged' | 'indeterminate' | 'undefined'
    final_true_grad_norm: float | None
    monotone: bool
    iterations: int


@dataclass(frozen=True)
class RandomizedGDReport:
    seed: int
    n_seeds: int
    L: float
    stop_tol: float
    records: tuple
    converged_fraction: float
    fraction_ci_halfwidth: float

    def statuses(self) -> dict:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.status] = out.get(r.status, 0) + 1
        return out


def randomized_gd(
    t: Term,
    L: float,
    x0_range,
    n_seeds: int,
    cfg: GDConfig,
    seed: int = 0,
) -> RandomizedGDReport:
    """Per seed, draw eps ~ U(0, 2/L) (endpoints rejected) and x0 uniform
    over the box, run the transform-gradient iteration, and judge the
    final iterate with the oracle gradient."""
    if L <= 0.0:
        raise ValueError("L must be positive")
    obj = Objective(t, cfg.fuel)
    lo, hi = float(x0_range[0]), float(x0_range[1])
    records = []
    n_converged = 0
    for i in range(n_seeds):
        stream = UniformStream(seed, i)
        eps = stream.next_open() * (2.0 / L)
        x0 = tuple(lo + stream.next() * (hi - lo) for _ in range(obj.n))
        traj = gd_run_objective(obj, x0, replace(cfg, eps=eps, grad_mode=AD_MODE))
        monotone = traj.monotone_decrease()
        if traj.termination == "undefined":
            records.append(SeedRecord(i, eps, x0, "undefined", None, monotone, len(traj.xs)))
            continue
        try:
            grad, classes = numcheck.fd_gradient(obj.value_fn(), traj.final_x, cfg.fd_cfg)
        except (numcheck.UndefinedNearPoint, numcheck.ProbeUndefined):
            records.append(SeedRecord(i, eps, x0, "indeterminate", None, monotone, len(traj.xs)))
            continue
        norm = _norm(grad)
        if any(c == numcheck.BOUNDARY for c in classes):
            status = "indeterminate"
        elif norm < cfg.stop_tol:
            status = "converged"
            n_converged += 1
        else:
            status = "not-converged"
        records.append(SeedRecord(i, eps, x0, status, norm, monotone, len(traj.xs)))
    fraction = n_converged / n_seeds if n_seeds else 0.0
    z = 1.959963984540054  # two-sided 95% normal quantile
    hw = z * math.sqrt(max(fraction * (1.0 - fraction), 0.0) / n_seeds) if n_seeds else 0.0
    return RandomizedGDReport(
        seed=seed,
        n_seeds=n_seeds,
        L=L,
        stop_tol=cfg.stop_tol,
        records=tuple(records),
        converged_fraction=fraction,
        fraction_ci_halfwidth=hw,
    )


# ---------------------------------------------------------------------------
# Empirical gradient-Lipschitz probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothnessReport:
    estimate: float
    refinement: tuple  # (pair separation, ratio) along the bisection
    suspected_nonsmooth: bool
    pairs_used: int
    pairs_skipped: int


def smoothness_probe(
    t: Term,
    sample_count: int,
    region,
    seed: int = 0,
    fuel: int = interp.DEFAULT_FUEL,
    fd_cfg: numcheck.FDConfig | None = None,
) -> SmoothnessReport:
    """Estimate sup ||g(x) - g(y)|| / ||x - y|| with oracle gradients.

    Random pairs give a coarse maximum; the worst pair is then bisected
    toward whichever half concentrates the gradient difference. Across a
    gradient jump the ratio doubles with every halving (and the stencil
    eventually boundary-flags), while for an L-smooth objective it stays
    bounded by L, so growth under shrinking separations marks the
    objective as not gradient-Lipschitz. Pairs with boundary-flagged or
    undefined probes are skipped and counted."""
    obj = Objective(t, fuel)
    fd_cfg = fd_cfg or numcheck.FDConfig()
    lo, hi = float(region[0]), float(region[1])
    width = hi - lo
    stream = UniformStream(seed, 0)
    f = obj.value_fn()

    def grad_at(xs):
        try:
            grad, classes = numcheck.fd_gradient(f, xs, fd_cfg)
        except (numcheck.UndefinedNearPoint, numcheck.ProbeUndefined):
            return None
        if any(c == numcheck.BOUNDARY for c in classes):
            return None
        return grad

    used = skipped = 0
    best_ratio = 0.0
    worst_pair = None
    for _ in range(sample_count):
        x = tuple(lo + stream.next() * width for _ in range(obj.n))
        y = tuple(lo + stream.next() * width for _ in range(obj.n))
        dist = _norm(tuple(a - b for a, b in zip(x, y)))
        if dist == 0.0:
            continue
        gx, gy = grad_at(x), grad_at(y)
        if gx is None or gy is None:
            skipped += 1
            continue
        used += 1
        ratio = _norm(tuple(a - b for a, b in zip(gx, gy))) / dist
        if ratio > best_ratio or worst_pair is None:
            best_ratio = ratio
            worst_pair = (x, y, gx, gy)

    refinement = []
    estimate = best_ratio
    hit_boundary = False
    if worst_pair is not None and best_ratio > 0.0:
        a, b, ga, gb = worst_pair
        for _ in range(14):
            dist = _norm(tuple(p - q for p, q in zip(a, b)))
            if dist <= 4.0 * fd_cfg.step_at(max(map(abs, a + b))):
                break
            mid = tuple((p + q) / 2.0 for p, q in zip(a, b))
            gm = grad_at(mid)
            if gm is None:
                hit_boundary = True  # the stencil flags a kink inside the bracket
                break
            left = _norm(tuple(p - q for p, q in zip(ga, gm)))
            right = _norm(tuple(p - q for p, q in zip(gm, gb)))
            if left >= right:
                b, gb = mid, gm
            else:
                a, ga = mid, gm
            dist = _norm(tuple(p - q for p, q in zip(a, b)))
            if dist == 0.0:
                break
            ratio = _norm(tuple(p - q for p, q in zip(ga, gb))) / dist
            refinement.append((dist, ratio))
            estimate = max(estimate, ratio)

    grew = bool(refinement) and refinement[-1][1] > 8.0 * max(best_ratio, 1e-12)
    suspected = hit_boundary and bool(refinement) and refinement[-1][1] > 1.5 * best_ratio
    suspected = suspected or grew
    return SmoothnessReport(estimate, tuple(refinement), suspected, used, skipped)
