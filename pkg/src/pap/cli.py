"""Command-line front door.

Every command emits JSON on stdout (CSV where noted) carrying a manifest:
command name, sha256 of the program text, seed, the effective
configuration, tool version, and wall time. `--stable` drops the timing
field so outputs are byte-comparable. All randomness flows from `--seed`
(default 0).

Exit codes: 0 success, 1 user error (syntax/type/usage), 2 when the
final result of the run is a bottom (domain error or fuel exhaustion).

Program arguments name either a file or a builtin (`builtin:sillyid`;
see `pap examples`).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

from . import ad, gd, interp, numcheck, prob, programs, syntax, typecheck
from .parser import PapSyntaxError, parse
from .typecheck import PapTypeError

SCHEMA = "pap/1"


class UserError(Exception):
    pass


def _load_source(spec: str) -> tuple[str, str]:
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        try:
            return programs.source(name), spec
        except KeyError as e:
            raise UserError(str(e)) from None
    try:
        with open(spec) as fh:
            return fh.read(), spec
    except OSError as e:
        raise UserError(f"cannot read {spec!r}: {e}") from None


def _load_term(spec: str):
    src, origin = _load_source(spec)
    t = parse(src)
    typecheck.typecheck_closed(t)
    return t, src, origin


def _manifest(command: str, src: str, args, config: dict, started: float) -> dict:
    m = {
        "command": command,
        "program_sha256": hashlib.sha256(src.encode()).hexdigest(),
        "seed": getattr(args, "seed", None),
        "config": config,
        "version": __import__("pap").__version__,
    }
    if not args.stable:
        m["wall_seconds"] = round(time.time() - started, 6)
    return m


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")


def _value_to_json(v):
    if v is interp.UNIT:
        return None
    if type(v) is tuple:
        return [_value_to_json(v[0]), _value_to_json(v[1])]
    if type(v) in (float, bool):
        return v
    return repr(v)  # closures


def _outcome_fields(out) -> tuple[dict, int]:
    if isinstance(out, interp.Val):
        return {"status": "val", "value": _value_to_json(out.value), "steps": out.steps}, 0
    return {"status": "bottom", "reason": out.reason, "detail": out.detail, "steps": out.steps}, 2


def _parse_trace(arg: str) -> list[float]:
    if arg.startswith("@"):
        with open(arg[1:]) as fh:
            text = fh.read()
        parts = text.replace(",", "\n").split()
    else:
        parts = [p for p in arg.split(",") if p.strip()]
    return [float(p) for p in parts]


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w"), True


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    if args.arg:
        clo = interp.eval_closed(t, args.fuel)
        if not isinstance(clo, interp.Val):
            fields, code = _outcome_fields(clo)
        else:
            out = interp.apply_values(clo.value, [float(a) for a in args.arg], args.fuel)
            fields, code = _outcome_fields(out)
    else:
        out = interp.eval_closed(t, args.fuel)
        fields, code = _outcome_fields(out)
    payload = {"schema": SCHEMA, **fields}
    payload["manifest"] = _manifest("run", src, args, {"fuel": args.fuel, "arg": args.arg}, started)
    _emit(payload)
    return code


def cmd_typecheck(args) -> int:
    started = time.time()
    src, _ = _load_source(args.program)
    t = parse(src)
    ty = typecheck.typecheck_closed(t)
    payload = {
        "schema": SCHEMA,
        "status": "ok",
        "type": syntax.pretty_type(ty),
        "manifest": _manifest("typecheck", src, args, {}, started),
    }
    _emit(payload)
    return 0


def cmd_prims(args) -> int:
    started = time.time()
    payload = {
        "schema": SCHEMA,
        "primitives": __import__("pap.primitives", fromlist=["x"]).registry_dump(),
        "manifest": _manifest("prims", "", args, {}, started),
    }
    _emit(payload)
    return 0


def cmd_ad(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    d = ad.transform(t)
    emitted = syntax.pretty(d)
    if args.emit:
        sys.stdout.write(emitted + "\n")
        return 0
    ty = typecheck.typecheck_closed(d)
    payload = {
        "schema": SCHEMA,
        "source": emitted,
        "type": syntax.pretty_type(ty),
        "manifest": _manifest("ad", src, args, {}, started),
    }
    _emit(payload)
    return 0


def cmd_grad(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    at = [float(v) for v in args.at.split(",")]
    config = {"at": at, "fuel": args.fuel, "check": args.check}
    if args.seed_vec:
        v = [float(s) for s in args.seed_vec.split(",")]
        config["seed_vec"] = v
        out = ad.jvp(t, at, v, args.fuel)
        if isinstance(out, interp.Val):
            fields, code = {"status": "val", "jvp": list(out.value)}, 0
        else:
            fields, code = _outcome_fields(out)
    elif len(at) == 1:
        out = ad.derivative(t, at[0], args.fuel)
        if isinstance(out, interp.Val):
            fields, code = {"status": "val", "ad": out.value}, 0
            if args.check:
                reports = ad.check_intensional(t, [at[0]], fuel=args.fuel)
                r = reports[0]
                fields["fd"] = r.fd_value
                fields["class"] = r.fd_class
                fields["abs_err"] = r.abs_err
                fields["agree"] = r.agree
        else:
            fields, code = _outcome_fields(out)
    else:
        out = ad.gradient(t, at, args.fuel)
        if isinstance(out, interp.Val):
            fields, code = {"status": "val", "gradient": list(out.value)}, 0
        else:
            fields, code = _outcome_fields(out)
    payload = {"schema": SCHEMA, **fields}
    payload["manifest"] = _manifest("grad", src, args, config, started)
    _emit(payload)
    return code


def cmd_gd(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    cfg = gd.GDConfig(eps=args.eps, T=args.T, grad_mode=args.mode, stop_tol=args.stop_tol, fuel=args.fuel)
    x0 = [float(v) for v in args.x0.split(",")]
    traj = gd.gd_run(t, x0, cfg)
    config = {
        "x0": x0,
        "eps": args.eps,
        "T": args.T,
        "mode": args.mode,
        "stop_tol": args.stop_tol,
        "fuel": args.fuel,
    }
    if args.csv is not None:
        out, close = _open_out(args.csv)
        out.write("t,x,grad,f\n")
        for i, x in enumerate(traj.xs):
            g = traj.grads[i] if i < len(traj.grads) else (traj.final_grad or ())
            out.write(
                f"{i},{';'.join(repr(v) for v in x)},{';'.join(repr(v) for v in g)},{repr(traj.fs[i])}\n"
            )
        if close:
            out.close()
        return 0
    payload = {
        "schema": SCHEMA,
        "termination": traj.termination,
        "iterates": [list(x) for x in traj.xs],
        "gradients": [list(g) for g in traj.grads],
        "objective": list(traj.fs),
        "final_grad": list(traj.final_grad) if traj.final_grad else None,
        "fail_step": traj.fail_step,
        "manifest": _manifest("gd", src, args, config, started),
    }
    _emit(payload)
    return 0 if traj.termination != "undefined" else 2


def cmd_gd_random(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    cfg = gd.GDConfig(eps=1.0, T=args.T, grad_mode="ad", stop_tol=args.stop_tol, fuel=args.fuel)
    rep = gd.randomized_gd(t, args.L, (args.x0_lo, args.x0_hi), args.seeds, cfg, seed=args.seed)
    payload = {
        "schema": SCHEMA,
        "converged_fraction": rep.converged_fraction,
        "fraction_ci_halfwidth": rep.fraction_ci_halfwidth,
        "statuses": rep.statuses(),
        "records": [
            {
                "index": r.index,
                "eps": r.eps,
                "x0": list(r.x0),
                "status": r.status,
                "final_true_grad_norm": r.final_true_grad_norm,
                "monotone": r.monotone,
                "iterations": r.iterations,
            }
            for r in rep.records
        ],
        "manifest": _manifest(
            "gd-random",
            src,
            args,
            {"L": args.L, "seeds": args.seeds, "T": args.T, "stop_tol": args.stop_tol, "x0_range": [args.x0_lo, args.x0_hi]},
            started,
        ),
    }
    if args.json is not None and args.json != "-":
        with open(args.json, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
    else:
        _emit(payload)
    return 0


def cmd_trace(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    trace = _parse_trace(args.trace)
    out = prob.run_trace(t, trace, args.fuel)
    if isinstance(out.result, interp.Val):
        result = {"status": "val", "value": _value_to_json(out.result.value)}
        code = 0
    elif out.result is prob.INCOMPLETE:
        result = {"status": "incomplete"}
        code = 0
    else:
        result = {"status": "bottom", "reason": out.result.reason, "detail": out.result.detail}
        code = 2
    payload = {
        "schema": SCHEMA,
        **result,
        "weight": out.weight,
        "remainder": list(out.remainder),
        "consumed": out.consumed,
        "manifest": _manifest("trace", src, args, {"trace": trace, "fuel": args.fuel}, started),
    }
    _emit(payload)
    return code


def cmd_weight(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    trace = _parse_trace(args.trace)
    w = prob.weight_fn(t, trace, args.fuel)
    payload = {
        "schema": SCHEMA,
        "weight": w,
        "manifest": _manifest("weight", src, args, {"trace": trace, "fuel": args.fuel}, started),
    }
    if args.grad:
        out = prob.weight_grad(t, trace, args.fuel)
        payload["gradient"] = list(out.value) if isinstance(out, interp.Val) else None
    _emit(payload)
    return 0


def cmd_simulate(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    cfg = prob.SimConfig(seed=args.seed, max_trace_len=args.max_trace_len, fuel=args.fuel)
    rows = []
    for i in range(args.n):
        try:
            out, trace = prob.simulate(t, cfg, index=i)
        except prob.TraceOverflow as e:
            rows.append({"run": i, "status": "trace-overflow", "drawn": e.drawn})
            continue
        if isinstance(out.result, interp.Val):
            rows.append(
                {
                    "run": i,
                    "status": "val",
                    "value": _value_to_json(out.result.value),
                    "weight": out.weight,
                    "consumed": out.consumed,
                    "trace": list(trace),
                }
            )
        else:
            rows.append({"run": i, "status": "bottom", "reason": out.result.reason})
    config = {"n": args.n, "max_trace_len": args.max_trace_len, "fuel": args.fuel}
    if args.csv is not None:
        out_fh, close = _open_out(args.csv)
        out_fh.write("run,status,value,weight,consumed\n")
        for r in rows:
            val = r.get("value")
            val_s = json.dumps(val) if val is not None else ""
            out_fh.write(f"{r['run']},{r['status']},\"{val_s}\",{r.get('weight', '')},{r.get('consumed', '')}\n")
        if close:
            out_fh.close()
        return 0
    payload = {
        "schema": SCHEMA,
        "runs": rows,
        "manifest": _manifest("simulate", src, args, config, started),
    }
    _emit(payload)
    return 0


def cmd_estimate(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    cfg = prob.SimConfig(seed=args.seed, max_trace_len=args.max_trace_len, fuel=args.fuel)
    rep = prob.estimate(t, args.event, args.n, cfg)
    payload = {
        "schema": SCHEMA,
        "mean": rep.mean,
        "ci_halfwidth": rep.halfwidth,
        "confidence": rep.confidence,
        "n": rep.n,
        "bottom_runs": rep.bottom_runs,
        "overflow_runs": rep.overflow_runs,
        "incomplete_runs": rep.incomplete_runs,
        "manifest": _manifest("estimate", src, args, {"event": args.event, "n": args.n}, started),
    }
    _emit(payload)
    return 0


def cmd_dim(args) -> int:
    started = time.time()
    t, src, _ = _load_term(args.program)
    cfg = prob.SimConfig(seed=args.seed, max_trace_len=args.max_trace_len, fuel=args.fuel)
    hist = prob.support_dim(t, args.n, cfg, svd_tol=args.svd_tol)
    payload = {
        "schema": SCHEMA,
        "rank_counts": {str(k): v for k, v in sorted(hist.counts.items())},
        "svd_tol": hist.svd_tol,
        "n_samples": hist.n_samples,
        "skipped": hist.skipped,
        "manifest": _manifest("dim", src, args, {"n": args.n, "svd_tol": args.svd_tol}, started),
    }
    _emit(payload)
    return 0


def cmd_examples(args) -> int:
    written = programs.write_examples(args.directory)
    for path in written:
        print(path)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pap", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, program=True):
        if program:
            p.add_argument("program", help="path to a .pap file, or builtin:NAME")
        p.add_argument("--fuel", type=int, default=interp.DEFAULT_FUEL)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--stable", action="store_true", help="omit timing from the manifest")

    p = sub.add_parser("run", help="evaluate a program, optionally applied to real arguments")
    common(p)
    p.add_argument("--arg", action="append", type=float, default=[])
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("typecheck", help="print a program's type")
    common(p)
    p.set_defaults(fn=cmd_typecheck)

    p = sub.add_parser("prims", help="dump the primitive registry")
    common(p, program=False)
    p.add_argument("--json", action="store_true", default=True)
    p.set_defaults(fn=cmd_prims)

    p = sub.add_parser("ad", help="print the derivative-transformed program")
    common(p)
    p.add_argument("--emit", action="store_true", help="print transformed source only")
    p.set_defaults(fn=cmd_ad)

    p = sub.add_parser("grad", help="derivative / gradient / seeded directional derivative")
    common(p)
    p.add_argument("--at", required=True, help="comma-separated input point")
    p.add_argument("--seed-vec", default=None, help="comma-separated tangent seed")
    p.add_argument("--check", action="store_true", help="add the finite-difference audit")
    p.set_defaults(fn=cmd_grad)

    p = sub.add_parser("gd", help="fixed-step gradient descent")
    common(p)
    p.add_argument("--x0", required=True, help="comma-separated start point")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--mode", choices=(gd.AD_MODE, gd.FD_MODE), default=gd.AD_MODE)
    p.add_argument("--stop-tol", type=float, default=0.0)
    p.add_argument("--csv", default=None, help="CSV output path, or - for stdout")
    p.set_defaults(fn=cmd_gd)

    p = sub.add_parser("gd-random", help="randomized step-size/start convergence experiment")
    common(p)
    p.add_argument("--L", type=float, required=True, help="gradient Lipschitz bound")
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--T", type=int, default=10**5)
    p.add_argument("--stop-tol", type=float, default=1e-3)
    p.add_argument("--x0-lo", type=float, default=-10.0)
    p.add_argument("--x0-hi", type=float, default=10.0)
    p.add_argument("--json", default="-", help="JSON output path, or - for stdout")
    p.set_defaults(fn=cmd_gd_random)

    p = sub.add_parser("trace", help="run a program against a fixed trace")
    common(p)
    p.add_argument("--trace", required=True, help="comma-separated reals, or @file")
    p.add_argument("--json", action="store_true", default=True)
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("weight", help="weight function at a trace")
    common(p)
    p.add_argument("--trace", required=True, help="comma-separated reals, or @file")
    p.add_argument("--grad", action="store_true", help="include the trace gradient")
    p.set_defaults(fn=cmd_weight)

    p = sub.add_parser("simulate", help="run with lazily drawn uniform traces")
    common(p)
    p.add_argument("-N", "--n", type=int, default=1)
    p.add_argument("--max-trace-len", type=int, default=prob.DEFAULT_MAX_TRACE)
    p.add_argument("--csv", default=None, help="CSV output path, or - for stdout")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("estimate", help="Monte Carlo integral of weight * f(value)")
    common(p)
    p.add_argument("--event", required=True, help="mass | mean:<i> | box:<i>,<hi> | box:<i>,<lo>,<hi>")
    p.add_argument("-N", "--n", type=int, default=10**5)
    p.add_argument("--max-trace-len", type=int, default=prob.DEFAULT_MAX_TRACE)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("dim", help="rank histogram of output-vs-trace Jacobians")
    common(p)
    p.add_argument("-N", "--n", type=int, default=1000)
    p.add_argument("--max-trace-len", type=int, default=prob.DEFAULT_MAX_TRACE)
    p.add_argument("--svd-tol", type=float, default=1e-8)
    p.add_argument("--json", action="store_true", default=True)
    p.set_defaults(fn=cmd_dim)

    p = sub.add_parser("examples", help="write the builtin programs as .pap files")
    p.add_argument("directory")
    p.set_defaults(fn=cmd_examples)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except UserError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except PapSyntaxError as e:
        print(f"syntax error: {e}", file=sys.stderr)
        return 1
    except PapTypeError as e:
        print(f"type error: {e}", file=sys.stderr)
        return 1
    except prob.TraceOverflow as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except interp.NotDeterministic as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
