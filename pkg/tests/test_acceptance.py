"""Acceptance criteria; each test prints one PASS/FAIL line."""

import os
import random
import subprocess
import sys
import threading
import time

import pytest

from coopvrp.bench import compute_gap, load_bks
from coopvrp.improve import SolverState, core_optimization_sequential, shared_rng
from coopvrp.instance import load_instance
from coopvrp.params import SolverParams
from coopvrp.parallel import minimize_routes, prepare, run_filo2x, run_sequential
from coopvrp.solution import full_feasibility_check

from conftest import data_path, random_instance, record_verdict

BKS = load_bks(data_path("bks_x.csv"))
TESTS = os.path.dirname(__file__)


def verdict(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"
    record_verdict(line)
    print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def x101_runs():
    inst = load_instance(data_path("X-n101-k25.vrp"))
    runs = []
    for seed in range(1, 6):
        best, stats = run_sequential(inst, SolverParams(delta_co=100_000, seed=seed))
        assert full_feasibility_check(best).ok
        runs.append((best, stats))
    return inst, runs


def test_criterion_1_quality_small_x(x101_runs):
    inst, runs = x101_runs
    gaps = [compute_gap(best.cost, BKS[inst.name]) for best, _ in runs]
    mean = sum(gaps) / len(gaps)
    worst = max(stats.times["total"] for _, stats in runs)
    detail = f"mean gap {mean:.3f}% (limit 0.5%), gaps {[round(g, 3) for g in gaps]}, slowest run {worst:.0f}s"
    verdict(1, "X-n101-k25 quality", mean <= 0.5, detail)


def _x502():
    path = data_path("X-n502-k39.vrp")
    return load_instance(path) if os.path.exists(path) else None


def test_criterion_2_quality_medium_x():
    inst = _x502()
    if inst is None:
        verdict(2, "X-n502-k39 quality", False, "instance file data/X-n502-k39.vrp is not available")
    gaps = []
    for seed in range(1, 4):
        best, _ = run_sequential(inst, SolverParams(delta_co=100_000, seed=seed))
        gaps.append(compute_gap(best.cost, BKS[inst.name]))
    mean = sum(gaps) / len(gaps)
    verdict(2, "X-n502-k39 quality", mean <= 1.5, f"mean gap {mean:.3f}% (limit 1.5%)")


def test_criterion_3_speedup():
    inst = _x502()
    cpus = os.cpu_count()
    if inst is None:
        verdict(3, "x=4 speedup", False, f"instance file data/X-n502-k39.vrp is not available ({cpus} CPU)")
    params = SolverParams(delta_co=100_000, seed=1)
    _, s1 = run_sequential(inst, params)
    _, s4 = run_filo2x(inst, params.with_(solvers=4))
    ratio = s4.times["total"] / s1.times["total"]
    verdict(3, "x=4 speedup", ratio <= 0.55, f"wall ratio {ratio:.3f} (limit 0.55) on {cpus} CPU")


SMALL = ("X-n101-k25.vrp", "X-n106-k14.vrp", "X-n110-k13.vrp")


def test_criterion_4_trajectory_equivalence():
    mismatches = []
    for name in SMALL:
        inst = load_instance(data_path(name))
        for seed in range(10):
            params = SolverParams(delta_co=500, seed=seed)
            prep = prepare(inst, params)
            shared = shared_rng(seed)
            start = minimize_routes(prep, shared)
            state = SolverState(inst, params, prep.neighbors, prep.gens, start, 0, shared)
            seq = core_optimization_sequential(state)
            par, _ = run_filo2x(inst, params, prep)
            if seq.cost != par.cost or seq.structural_hash() != par.structural_hash():
                mismatches.append((name, seed))
    verdict(4, "x=1 equals sequential", not mismatches, f"30 runs at 500 iterations, mismatches {mismatches}")


def test_criterion_5_convergence():
    diverged = []
    runs = 0
    for size in (100, 200, 300, 400, 500):
        inst = random_instance(size, 50, 1000 + size)
        base = SolverParams(delta_co=300, delta_rm=100, seed=0)
        prep = prepare(inst, base)
        for seed in range(5):
            for x in (2, 3, 4, 8):
                _, stats = run_filo2x(inst, base.with_(seed=seed, solvers=x), prep)
                runs += 1
                if len({s.best_hash for s in stats.solvers}) != 1:
                    diverged.append((size, seed, x))
    verdict(5, "solvers converge", not diverged, f"{runs} runs at 300 iterations, diverged {diverged}")


def test_criterion_6_infeasible_rate_tracks_routes():
    def rate(capacity):
        inst = random_instance(200, capacity, 77, demand_range=(10, 10))
        discarded = applied = 0
        for seed in range(3):
            _, stats = run_filo2x(inst, SolverParams(delta_co=400, delta_rm=50, seed=seed, solvers=4))
            discarded += stats.solvers[0].discarded
            applied += stats.solvers[0].applied
        return 100 * discarded / (discarded + applied)

    # both capacities leave about 10% slack over the route count
    few, many = rate(1100), rate(44)
    verdict(6, "infeasible rate vs routes", few > many, f"2 routes {few:.2f}% vs 50 routes {many:.2f}% at x=4")


PROPERTY_SUITES = [
    "test_solution.py::test_do_undo_round_trip_over_many_changes",
    "test_solution.py::test_rejected_changes_are_bit_identical",
    "test_solution.py::test_capacity_plus_one_is_rejected",
    "test_localsearch.py::test_every_move_keeps_solution_feasible",
    "test_instance.py::test_neighbor_lists_match_brute_force",
    "test_construction.py::test_first_fit_within_bin_packing_bounds",
    "test_localsearch.py::test_two_opt_uncrosses_square",
    "test_localsearch.py::test_four_customer_tours_end_without_improving_move",
    "test_bench.py::test_wilcoxon_exact_matches_enumeration",
    "test_bench.py::test_gap_hand_arithmetic",
    "test_bench.py::test_speedup_hand_arithmetic",
]


def _stress(seconds):
    """Repeated 8-solver runs with random delays; returns a list of problems."""
    problems = []
    rounds = 0
    deadline = time.monotonic() + seconds
    while time.monotonic() < deadline:
        rounds += 1
        inst = random_instance(60 + rounds % 5 * 20, 30 + rounds % 3 * 20, rounds)

        def jitter(sid, r=rounds):
            rng = random.Random(f"jitter/{r}/{sid}")
            return lambda: time.sleep(rng.random() * 0.002) if rng.random() < 0.3 else None

        _, stats = run_filo2x(inst, SolverParams(delta_co=80, delta_rm=20, seed=rounds, solvers=8),
                              trace=True, jitter=jitter)
        traces = [s.trace for s in stats.solvers]
        if any(t != traces[0] for t in traces):
            problems.append(f"round {rounds}: traces differ")
        if [seq for seq, _, _ in traces[0]] != list(range(1, len(traces[0]) + 1)):
            problems.append(f"round {rounds}: sequence gap")
        if len({s.best_hash for s in stats.solvers}) != 1:
            problems.append(f"round {rounds}: final solutions differ")
    return problems, rounds


def test_criterion_7_property_suites():
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *(os.path.join(TESTS, t) for t in PROPERTY_SUITES)]
    res = subprocess.run(cmd, capture_output=True, text=True, cwd=TESTS)
    suites_ok = res.returncode == 0
    outcome: dict = {}
    worker = threading.Thread(target=lambda: outcome.update(zip(("problems", "rounds"), _stress(60))), daemon=True)
    worker.start()
    worker.join(timeout=240)
    hung = worker.is_alive()
    problems = outcome.get("problems", ["stress run did not finish"])
    summary = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    detail = f"suites: {summary}; stress: {outcome.get('rounds', 0)} rounds of 8 solvers in 60s, problems {problems}"
    verdict(7, "property suites and stress", suites_ok and not hung and not problems, detail)


def test_criterion_8_coreopt_share(x101_runs):
    _, runs = x101_runs
    shares = [stats.times["coreopt"] / stats.times["total"] for _, stats in runs]
    verdict(8, "core optimization time share", min(shares) >= 0.90,
            f"coreopt share min {min(shares):.4f} (limit 0.90), per run {[round(s, 4) for s in shares]}")
