"""Metrics, statistics and the experiment harness."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Sequence

from .instance import load_instance
from .params import SolverParams
from .parallel import RunStats, prepare, run_filo2x, run_sequential
from .solution import Solution

CSV_COLUMNS = (
    "instance", "x", "seed", "cost", "gap_pct", "t_total_s", "t_preproc_s", "t_coreopt_s",
    "speedup", "infeasible_pct", "sync_frac", "gen_frac",
)


class NonPositiveBks(ValueError):
    pass


class NonPositiveTime(ValueError):
    pass


class InsufficientData(ValueError):
    pass


def compute_gap(z: float, bks: float) -> float:
    if bks <= 0:
        raise NonPositiveBks(bks)
    return 100.0 * (z - bks) / bks


def compute_speedup(t_seq: float, t_par: float) -> float:
    if t_seq <= 0 or t_par <= 0:
        raise NonPositiveTime((t_seq, t_par))
    return t_seq / t_par


def bonferroni_alpha(alpha: float, comparisons: int) -> float:
    return alpha / comparisons


def _signed_ranks(a: Sequence[float], b: Sequence[float]) -> tuple[list[float], list[bool]]:
    if len(a) != len(b):
        raise ValueError("samples must be paired")
    if len(a) < 5:
        raise InsufficientData("need at least 5 pairs")
    diffs = [x - y for x, y in zip(a, b) if x != y]
    if not diffs:
        raise InsufficientData("all differences are zero")
    order = sorted(range(len(diffs)), key=lambda k: abs(diffs[k]))
    ranks = [0.0] * len(diffs)
    k = 0
    while k < len(order):
        m = k
        while m + 1 < len(order) and abs(diffs[order[m + 1]]) == abs(diffs[order[k]]):
            m += 1
        avg = (k + m) / 2 + 1
        for t in range(k, m + 1):
            ranks[order[t]] = avg
        k = m + 1
    return ranks, [d > 0 for d in diffs]


def _exact_upper_tail(ranks: list[float], w_plus: float) -> float:
    # ranks are multiples of 1/2; count sign patterns by doubled rank sums
    doubled = [int(round(2 * r)) for r in ranks]
    counts = {0: 1}
    for r in doubled:
        nxt = dict(counts)
        for s, c in counts.items():
            nxt[s + r] = nxt.get(s + r, 0) + c
        counts = nxt
    target = int(round(2 * w_plus))
    hits = sum(c for s, c in counts.items() if s >= target)
    return hits / 2 ** len(ranks)


def wilcoxon_one_tailed(a: Sequence[float], b: Sequence[float]) -> float:
    """p-value of the signed-rank test for H1: median(a - b) > 0."""
    ranks, positive = _signed_ranks(a, b)
    n = len(ranks)
    w_plus = sum(r for r, p in zip(ranks, positive) if p)
    if n <= 25:
        return _exact_upper_tail(ranks, w_plus)
    mean = n * (n + 1) / 4
    ties: dict[float, int] = {}
    for r in ranks:
        ties[r] = ties.get(r, 0) + 1
    var = n * (n + 1) * (2 * n + 1) / 24 - sum(t ** 3 - t for t in ties.values()) / 48
    z = (w_plus - mean - 0.5) / math.sqrt(var)
    return 0.5 * math.erfc(z / math.sqrt(2))


def load_bks(path: str) -> dict[str, float]:
    """Two-column CSV (name,value); a header row is skipped."""
    out: dict[str, float] = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if len(row) < 2 or not row[0].strip():
                continue
            try:
                value = float(row[1])
            except ValueError:
                continue
            if value <= 0:
                raise NonPositiveBks(f"{row[0]}: {value}")
            out[row[0].strip()] = value
    return out


@dataclass
class RunReport:
    instance: str
    x: int
    seed: int
    cost: float
    gap_pct: float | None
    t_total_s: float
    t_preproc_s: float
    t_coreopt_s: float
    speedup: float | None
    infeasible_pct: float
    sync_frac: float
    gen_frac: float
    n_routes: int = 0
    solution_hash: str = ""
    times: dict[str, float] = field(default_factory=dict)
    applied: int = 0
    discarded: int = 0

    def row(self) -> dict[str, object]:
        out = {}
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            out[col] = "" if v is None else v
        return out

    def to_json(self) -> dict:
        return asdict(self)


def make_report(name: str, x: int, seed: int, best: Solution, stats: RunStats, bks: float | None) -> RunReport:
    s0 = stats.solvers[0]
    return RunReport(
        instance=name,
        x=x,
        seed=seed,
        cost=best.cost,
        gap_pct=compute_gap(best.cost, bks) if bks else None,
        t_total_s=stats.times["total"],
        t_preproc_s=stats.times["preprocessing"],
        t_coreopt_s=stats.times["coreopt"],
        speedup=None,
        infeasible_pct=stats.infeasible_pct,
        sync_frac=stats.sync_frac,
        gen_frac=stats.gen_frac,
        n_routes=best.n_routes,
        solution_hash=best.structural_hash(),
        times=dict(stats.times),
        applied=s0.applied,
        discarded=s0.discarded,
    )


def solve_instance(inst, params: SolverParams) -> tuple[Solution, RunStats]:
    """x = 1 runs the sequential pipeline; larger x runs the cooperative one."""
    if params.solvers == 1:
        return run_sequential(inst, params)
    return run_filo2x(inst, params, prepare(inst, params, params.solvers))


def run_manifest(manifest_path: str) -> list[RunReport]:
    """Run an instance x solvers x seeds matrix described by a JSON manifest.

    Keys: ``instances`` (paths relative to the manifest), ``solvers``,
    ``seeds``, optional ``iters``, ``bks`` (CSV path) and ``exact_costs``.
    """
    with open(manifest_path) as fh:
        spec = json.load(fh)
    base = os.path.dirname(os.path.abspath(manifest_path))
    bks = load_bks(os.path.join(base, spec["bks"])) if spec.get("bks") else {}
    iters = int(spec.get("iters", SolverParams().delta_co))
    reports: list[RunReport] = []
    for path in spec["instances"]:
        inst = load_instance(os.path.join(base, path), exact_costs=bool(spec.get("exact_costs", False)))
        baseline: dict[int, float] = {}
        for x, seed in product(spec["solvers"], spec["seeds"]):
            params = SolverParams(delta_co=iters, solvers=int(x), seed=int(seed))
            best, stats = solve_instance(inst, params)
            rep = make_report(inst.name, int(x), int(seed), best, stats, bks.get(inst.name))
            if int(x) == 1:
                baseline[int(seed)] = rep.t_total_s
            if int(seed) in baseline:
                rep.speedup = compute_speedup(baseline[int(seed)], rep.t_total_s)
            reports.append(rep)
    return reports


def reports_to_csv(reports: Sequence[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        w.writerow(rep.row())
    return buf.getvalue()
