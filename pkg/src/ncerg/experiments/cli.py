"""Command line entry point ``ncerg``.

Exit codes: 0 all checks pass, 1 a check failed, 2 invalid config, 3 internal error.
"""
from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from ..errors import ConfigInvalid

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncerg", description="Noncommutative ergodic inequality laboratory.")
    sub = ap.add_subparsers(dest="verb", required=True)

    suite = sub.add_parser("suite", help="run or list verification suites")
    ssub = suite.add_subparsers(dest="action", required=True)
    run = ssub.add_parser("run", help="run one suite")
    run.add_argument("name")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", default=".", help="output directory for the report")
    run.add_argument("--quiet", action="store_true")
    ssub.add_parser("list", help="list suite names")

    est = sub.add_parser("estimate", help="estimate empirical constants")
    est.add_argument("--config")
    est.add_argument("--seed", type=int)
    est.add_argument("--out", help="write the CSV table here (default: stdout)")
    est.add_argument("--json", help="also write the full JSON report here")

    rep = sub.add_parser("report", help="merge reports")
    rep.add_argument("--merge", nargs="+", required=True, metavar="REPORT")
    rep.add_argument("--out", default=".")
    rep.add_argument("--format", choices=("json", "csv"), default="json")

    demo = sub.add_parser("czdemo", help="print the worked Calderon-Zygmund example")
    demo.add_argument("--scalar", action="store_true", required=True)
    return ap


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.3g}"


def _run_suite(args) -> int:
    from .runner import dumps, run_suite
    report = run_suite(args.name, args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{args.name}-seed{report['seed']}.json")
    with open(path, "w") as fh:
        fh.write(dumps(report))
    if not args.quiet:
        for c in report["checks"]:
            status = "PASS" if c["pass"] else "FAIL"
            value = c["empirical_constant"] if c["kind"] == "constant" else c["worst_margin"]
            print(f"{status}  {c['name']}  n={c['instances']}  worst={_fmt(value)}  tol={_fmt(c['tol'])}")
        print(f"report: {path}  wall={report['timing']['wall_time']:.1f}s")
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def _estimate(args) -> int:
    from .runner import dumps, estimate_constant, table_csv
    report = estimate_constant(args.config, args.seed)
    text = table_csv(report["table"])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(dumps(report))
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def _report(args) -> int:
    from .report import load, merge, write
    reports = []
    for path in args.merge:
        reports.extend(load(path))
    merged = merge(reports)
    for p in write(merged, args.out, args.format):
        print(p)
    return EXIT_PASS if all(r.get("pass", True) for r in merged["reports"]) else EXIT_FAIL


def czdemo_text() -> str:
    from ..algebra import AlgebraShape, Element
    from ..cz import cz_decompose, cz_verify
    from ..dyadic import OperatorSequence

    shape = AlgebraShape.scalar()
    f = OperatorSequence.from_values(shape, {0: Element.from_blocks(shape, [np.array([[4.0]])])}, window=2)
    lam = 1.0
    res = cz_decompose(f, lam)
    cu = res.cuculescu

    def row(seq, lo, hi):
        return " ".join(f"{seq.at(x).blocks[0][0, 0].real:+.3g}" for x in range(lo, hi))

    lines = ["f = 4 delta_0 on [0, 4), lambda = 1", f"m_lambda = {cu.m_lambda}"]
    for n, q in enumerate(cu.q_seq):
        lines.append(f"q_{n} on [0,4): {row(q, 0, 4)}")
    lines.append(f"g on [0,4): {row(res.good, 0, 4)}")
    for n, b in enumerate(res.bad):
        lines.append(f"b_{n} on [0,4): {row(b, 0, 4)}")
    lines.append(f"zeta on [{res.zeta.start},{res.zeta.stop}): {row(res.zeta, res.zeta.start, res.zeta.stop)}")
    for c in cz_verify(f, lam, res).checks:
        lines.append(f"{'PASS' if c.passed else 'FAIL'}  {c.check}  margin={c.margin:.3g}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "suite":
            if args.action == "list":
                from .suites import SUITES
                print("\n".join(sorted(SUITES)))
                return EXIT_PASS
            return _run_suite(args)
        if args.verb == "estimate":
            return _estimate(args)
        if args.verb == "report":
            return _report(args)
        if args.verb == "czdemo":
            sys.stdout.write(czdemo_text())
            return EXIT_PASS
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:  # noqa: BLE001 - the exit-code contract needs a catch-all
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
