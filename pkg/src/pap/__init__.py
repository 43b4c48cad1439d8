"""Workbench for a higher-order recursive language with piecewise-analytic
primitives: parser and typechecker, fuel-bounded interpreter, forward-mode
derivative transform with numerical audits, a gradient-descent lab, and a
trace-based probabilistic runtime."""

__version__ = "0.1.0"
