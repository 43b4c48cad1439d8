"""Independent numerical oracles: finite differences with stability
classification, and Monte Carlo summary statistics.

This module sees objective functions only as black-box callables (raising
ProbeUndefined where they are partial), so comparisons against the
derivative transform are genuinely independent: nothing here imports the
transform or the interpreter.

Classification: a point is flagged `suspected-boundary` when the
Richardson-combined forward and backward one-sided differences (built from
steps h and h/2) disagree beyond 10 * rtol relative to the estimates. At a
kink the two sides converge to different slopes, so the combined estimates
disagree by the slope jump no matter how small h gets; on a smooth
function both sides agree to O(h^3) plus rounding noise, even at critical
points and under strong curvature. Within h of a kink the two half-steps
of one side straddle it and the combination is inconsistent, which also
trips the flag, so the suspect zone covers the stencil's reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

INTERIOR = "interior"
BOUNDARY = "suspected-boundary"

_DEFAULT_H = 2.0**-17


class ProbeUndefined(Exception):
    """The black-box function is undefined at the probed point."""


class UndefinedNearPoint(Exception):
    """Probes required for the estimate are undefined on both sides."""


class Degenerate(Exception):
    """Too few samples to form a confidence interval."""


@dataclass(frozen=True)
class FDConfig:
    h_base: float = _DEFAULT_H
    rtol: float = 1e-5
    atol: float = 1e-7
    richardson: bool = True

    def step_at(self, x: float) -> float:
        return self.h_base * max(1.0, abs(x))

    def __post_init__(self):
        if self.h_base <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise ValueError("h_base, rtol, atol must be positive")


def _try(f, x: float):
    try:
        return f(x)
    except ProbeUndefined:
        return None


def fd_derivative(f, x: float, cfg: FDConfig | None = None, bounds=None):
    """Estimate f'(x) by central differences (Richardson-extrapolated once
    by default) and classify the point's stability.

    `bounds`, when given as (lo, hi), keeps probes inside the closed
    interval; near an edge the estimate switches to one-sided differences.
    Probes inside bounds that come back undefined raise UndefinedNearPoint
    if they prevent both the two-sided and one-sided estimates.
    """
    cfg = cfg or FDConfig()
    x = float(x)
    h = cfg.step_at(x)
    lo, hi = bounds if bounds is not None else (-math.inf, math.inf)

    f0 = _try(f, x)
    if f0 is None:
        raise UndefinedNearPoint(f"f undefined at {x}")

    left_ok = x - h >= lo
    right_ok = x + h <= hi
    fp = _try(f, x + h) if right_ok else None
    fm = _try(f, x - h) if left_ok else None
    fp2 = _try(f, x + h / 2) if right_ok else None
    fm2 = _try(f, x - h / 2) if left_ok else None

    if fp is not None and fm is not None and fp2 is not None and fm2 is not None:
        c1 = (fp - fm) / (2 * h)
        c2 = (fp2 - fm2) / h
        estimate = (4 * c2 - c1) / 3 if cfg.richardson else c1
        fwd1 = (fp - f0) / h
        fwd2 = (fp2 - f0) / (h / 2)
        bwd1 = (f0 - fm) / h
        bwd2 = (f0 - fm2) / (h / 2)
        fx = 2 * fwd2 - fwd1
        bx = 2 * bwd2 - bwd1
        scale = max(abs(fwd1), abs(fwd2), abs(bwd1), abs(bwd2))
        boundary = abs(fx - bx) > 10 * cfg.rtol * scale + cfg.atol
        return estimate, (BOUNDARY if boundary else INTERIOR)

    # one-sided fallback: walk away from the blocked side
    if fp is not None and fp2 is not None:
        return _one_sided(f, x, f0, h, cfg, +1.0)
    if fm is not None and fm2 is not None:
        return _one_sided(f, x, f0, h, cfg, -1.0)
    raise UndefinedNearPoint(f"no usable probes around {x}")


def _one_sided(f, x, f0, h, cfg, sign):
    e_h = _try(f, x + sign * h)
    e_h2 = _try(f, x + sign * h / 2)
    e_h4 = _try(f, x + sign * h / 4)
    if e_h is None or e_h2 is None or e_h4 is None:
        raise UndefinedNearPoint(f"no usable probes around {x}")
    d1 = sign * (e_h - f0) / h
    d2 = sign * (e_h2 - f0) / (h / 2)
    d4 = sign * (e_h4 - f0) / (h / 4)
    r1 = 2 * d2 - d1
    r2 = 2 * d4 - d2
    scale = max(abs(d1), abs(d2), abs(d4))
    boundary = abs(r1 - r2) > 10 * cfg.rtol * scale + cfg.atol
    return r2, (BOUNDARY if boundary else INTERIOR)


def fd_gradient(f, xs, cfg: FDConfig | None = None, bounds=None):
    """Coordinate-wise fd_derivative of a vector-argument black box.

    `bounds` may be a single (lo, hi) applied to every coordinate or a
    sequence of per-coordinate intervals.
    """
    cfg = cfg or FDConfig()
    xs = [float(v) for v in xs]
    n = len(xs)
    if bounds is None:
        per_coord = [None] * n
    elif isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], tuple):
        per_coord = [bounds] * n
    else:
        per_coord = list(bounds)

    grads = []
    classes = []
    for j in range(n):
        def section(v, _j=j):
            probe = list(xs)
            probe[_j] = v
            return f(probe)

        g, c = fd_derivative(section, xs[j], cfg, per_coord[j])
        grads.append(g)
        classes.append(c)
    return tuple(grads), tuple(classes)


def mc_mean_ci(samples, confidence: float = 0.95):
    """Sample mean and normal-approximation confidence halfwidth.

    All-equal samples yield halfwidth 0 (a degenerate but valid interval).
    """
    xs = [float(v) for v in samples]
    n = len(xs)
    if n < 2:
        raise Degenerate("need at least two samples")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    mean = math.fsum(xs) / n
    var = math.fsum((v - mean) ** 2 for v in xs) / (n - 1)
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    halfwidth = z * math.sqrt(var / n)
    return mean, halfwidth
