"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys

from .bench import load_bks, make_report, reports_to_csv, run_manifest, solve_instance
from .instance import ParseError, load_instance
from .params import LONG_ITERATIONS, SolverParams

EXIT_INPUT = 2
EXIT_USAGE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coopvrp", description="Cooperative parallel CVRP solver")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one CVRPLIB instance")
    s.add_argument("instance")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--solvers", type=_positive, default=1)
    it = s.add_mutually_exclusive_group()
    it.add_argument("--iters", type=_positive, default=None, help="core optimization iterations")
    it.add_argument("--long", action="store_true", help=f"use {LONG_ITERATIONS} iterations")
    s.add_argument("--exact-costs", action="store_true", help="unrounded Euclidean costs")
    s.add_argument("--bks", help="CSV of best known solution values")
    s.add_argument("--out", help="write the best solution here")
    s.add_argument("--report", help="write a JSON run report here")
    s.add_argument("--runs", type=_positive, default=1, help="independent runs with seeds seed..seed+runs-1")

    b = sub.add_parser("bench", help="run a JSON experiment manifest")
    b.add_argument("manifest")
    b.add_argument("--csv", help="write the CSV here instead of stdout")
    return p


def _solve(args) -> int:
    inst = load_instance(args.instance, exact_costs=args.exact_costs)
    bks = load_bks(args.bks).get(inst.name) if args.bks else None
    iters = LONG_ITERATIONS if args.long else (args.iters or SolverParams().delta_co)
    reports = []
    best_overall = None
    for k in range(args.runs):
        params = SolverParams(delta_co=iters, solvers=args.solvers, seed=args.seed + k)
        best, stats = solve_instance(inst, params)
        rep = make_report(inst.name, args.solvers, params.seed, best, stats, bks)
        reports.append(rep)
        gap = "" if rep.gap_pct is None else f" gap={rep.gap_pct:.4f}%"
        print(f"{inst.name} seed={params.seed} x={args.solvers} cost={best.cost:.6g} routes={best.n_routes}"
              f"{gap} time={rep.t_total_s:.2f}s")
        if best_overall is None or best.cost < best_overall.cost:
            best_overall = best
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(best_overall.to_text())
    if args.report:
        payload = [r.to_json() for r in reports]
        with open(args.report, "w") as fh:
            json.dump(payload[0] if len(payload) == 1 else payload, fh, indent=2, sort_keys=True)
    return 0


def _bench(args) -> int:
    text = reports_to_csv(run_manifest(args.manifest))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _solve(args) if args.command == "solve" else _bench(args)
    except (ParseError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"coopvrp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
