"""``blockc`` command-line interface.

Exit codes: 0 success, 1 semantic error, 2 usage or parse error,
3 verification failure. ``COBBLE_SEED`` overrides the default seed 0.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import fixtures
from .circuit import _phases, compile, instantiate_oracles
from .cost import cost
from .errors import BlockcError, VerificationFailed
from .frontend import parse, print_expr
from .ir import typecheck
from .qasm import emit_qasm
from .rewrite import apply_rules, optimize
from .sim import verify

METHODS = ("lcu", "horner", "qsvt", "gqet")


class UsageError(BlockcError):
    kind = "UsageError"
    exit_code = 2


def default_seed() -> int:
    raw = os.environ.get("COBBLE_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"COBBLE_SEED must be an integer, got {raw!r}") from None


def read_program(arg: str):
    """Parse a ``.cob`` file, or a bundled fixture given by name."""
    path = Path(arg)
    if path.exists():
        text = path.read_text()
    elif arg in fixtures.names():
        text = fixtures.source(arg)
    else:
        raise UsageError(f"no such file or fixture: {arg}")
    return parse(text)


def _fmt(x: float) -> str:
    return repr(round(float(x), 12))


def _report_line(r) -> str:
    return f"queries={_fmt(r.queries)} subnorm={_fmt(r.subnorm)} ancillas={r.ancillas} total={_fmt(r.total)}"


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def cmd_check(args) -> int:
    prog = read_program(args.file)
    t = typecheck(prog)
    herm = "hermitian" if t.hermitian else "not hermitian"
    payload = {
        "type": str(t.qtype),
        "hermitian": t.hermitian,
        "subnorm": t.subnorm,
        "queries": t.queries,
        "ancillas": t.ancillas,
    }
    _emit(args, payload, f"{t.qtype}, {herm}")
    return 0


def cmd_cost(args) -> int:
    e = read_program(args.file).resolve()
    typecheck(e)
    if args.opt:
        e = optimize(e)
    r = cost(e, args.method)
    _emit(args, r.as_dict(), _report_line(r))
    return 0


def cmd_opt(args) -> int:
    e = read_program(args.file).resolve()
    typecheck(e)
    out, trace = apply_rules(e)
    payload = {"expr": print_expr(out), "trace": trace.as_list()}
    lines = [print_expr(out)]
    if args.trace:
        for s in trace.steps:
            path = "/".join(map(str, s.path)) or "<root>"
            lines.append(
                f"  {s.rule.value:<22} at {path:<10} total {_fmt(s.before.total)} -> {_fmt(s.after.total)}"
            )
    if not args.trace:
        payload.pop("trace")
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_compile(args) -> int:
    e = read_program(args.file).resolve()
    typecheck(e)
    if not args.no_opt:
        e = optimize(e)
    c = compile(e, args.method)
    seed = default_seed() if args.seed is None else args.seed
    if not args.opaque:
        c = instantiate_oracles(c, seed)
    if args.emit == "qasm":
        text = emit_qasm(c, opaque=args.opaque)
    else:
        text = json.dumps(
            {
                "registers": [{"name": r.name, "size": r.size, "kind": r.kind} for r in c.registers],
                "gates": c.gate_list(),
                "postselect": [r.name for r in c.postselect],
                "predicted": c.predicted.as_dict(),
            },
            sort_keys=True,
        ) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args) -> int:
    e = read_program(args.file).resolve()
    typecheck(e)
    seed = default_seed() if args.seed is None else args.seed
    raw = verify(e, seed, args.method, raise_on_fail=False)
    opt = verify(optimize(e), seed, args.method, raise_on_fail=False)
    agree = float(np.max(np.abs(raw.target - opt.target)))
    payload = {"unoptimized": raw.as_dict(), "optimized": opt.as_dict(), "denotation_gap": agree}
    text = "\n".join(
        [
            f"unoptimized: max_dev={raw.max_dev:.3e} (tol {raw.tol:.0e}) queries={_fmt(raw.queries_measured)}",
            f"optimized:   max_dev={opt.max_dev:.3e} (tol {opt.tol:.0e}) queries={_fmt(opt.queries_measured)}",
            f"denotation gap: {agree:.3e}",
        ]
    )
    _emit(args, payload, text)
    worst = max(raw, opt, key=lambda r: r.max_dev / r.tol)
    if not worst.ok:
        raise VerificationFailed(worst.max_dev, worst.tol)
    if agree > 1e-9:
        raise VerificationFailed(agree, 1e-9)
    return 0


def bench_row(name: str) -> dict:
    fx = fixtures.load(name)
    e = parse(fx.program).resolve()
    before = cost(e)
    after = cost(optimize(e))
    row = {
        "name": name,
        "queries_unopt": before.queries,
        "subnorm_unopt": before.subnorm,
        "queries_opt": after.queries,
        "subnorm_opt": after.subnorm,
        "total_unopt": before.total,
        "total_opt": after.total,
        "speedup": before.total / after.total,
    }
    failures = []
    if fx.expected_unopt is not None and fx.expected_unopt != before:
        failures.append(f"unoptimized cost {before} != {fx.expected_unopt}")
    if fx.expected_opt is not None and fx.expected_opt != after:
        failures.append(f"optimized cost {after} != {fx.expected_opt}")
    row["failures"] = failures
    return row


def timing_row(n: int) -> dict:
    """Compile ``T_n(X)`` from source, splitting off phase-solver time."""
    _phases.cache_clear()
    t0 = time.perf_counter()
    e = optimize(parse(fixtures.chebyshev_source(n)).resolve())
    c = compile(e)
    total = time.perf_counter() - t0
    return {"n": n, "total": total, "solver": c.solver_time, "non_solver": total - c.solver_time}


def _run_pool(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def cmd_bench(args) -> int:
    suite = fixtures.names() if args.suite == "all" else [args.suite]
    rows = _run_pool(bench_row, suite, args.jobs)
    timings = [timing_row(n) for n in fixtures.CHEBYSHEV_RANGE] if args.timing else []
    failures = [f"{r['name']}: {f}" for r in rows for f in r["failures"]]
    if args.json:
        print(json.dumps({"fixtures": rows, "timing": timings}, sort_keys=True))
    else:
        print(f"{'fixture':<24}{'unoptimized':>24}{'optimized':>22}{'speedup':>10}")
        for r in rows:
            unopt = f"{r['queries_unopt']:g} x {r['subnorm_unopt']:.1f} = {r['total_unopt']:.1f}"
            opt = f"{r['queries_opt']:g} x {r['subnorm_opt']:.1f} = {r['total_opt']:.1f}"
            print(f"{r['name']:<24}{unopt:>24}{opt:>22}{r['speedup']:>9.1f}x")
        if timings:
            print()
            print(f"{'n':>4}{'non-solver (s)':>18}{'solver (s)':>14}")
            for t in timings:
                print(f"{t['n']:>4}{t['non_solver']:>18.4f}{t['solver']:>14.4f}")
    for f in failures:
        print(f"FAIL {f}", file=sys.stderr)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockc", description="Block-encoding expression compiler.")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_file(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("file", help="program file or bundled fixture name")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    with_file("check", "parse and typecheck").set_defaults(fn=cmd_check)

    p = with_file("cost", "print the cost report")
    p.add_argument("--opt", action="store_true", help="cost after optimization")
    p.add_argument("--method", choices=METHODS)
    p.set_defaults(fn=cmd_cost)

    p = with_file("opt", "print the normal form")
    p.add_argument("--trace", action="store_true", help="list rewrite steps")
    p.set_defaults(fn=cmd_opt)

    p = with_file("compile", "emit a circuit")
    p.add_argument("--emit", choices=("qasm", "json"), default="qasm")
    p.add_argument("--seed", type=int)
    p.add_argument("--opaque", action="store_true", help="keep oracles as opaque gates")
    p.add_argument("--no-opt", action="store_true", help="skip the optimizer")
    p.add_argument("--method", choices=METHODS[:3])
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_compile)

    p = with_file("verify", "simulate and compare against the denotation")
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=METHODS[:3])
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="run the fixture suite")
    p.add_argument("--suite", default="all", choices=["all"] + fixtures.names())
    p.add_argument("--timing", action="store_true", help="time the T_n(X) family")
    p.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1))
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except BlockcError as exc:
        if getattr(args, "json", False):
            print(json.dumps(exc.to_dict(), sort_keys=True))
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
