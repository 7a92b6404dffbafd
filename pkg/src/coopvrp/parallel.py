"""Single-trajectory cooperative runtime: solver threads plus a dispatcher.

Every candidate change goes through one dispatcher queue, receives a global
sequence number and is broadcast to all solver inboxes, so every solver
replays the same changes in the same order.
"""

from __future__ import annotations

import queue
import random
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable

from .construction import greedy_route_estimate, savings_construct
from .improve import (
    Outcome,
    SolverState,
    core_opt_iteration,
    core_optimization_sequential,
    route_minimization,
    shared_rng,
)
from .instance import Instance, NeighborLists, build_neighbor_lists
from .localsearch import MoveGeneratorSet, init_move_generators
from .params import SolverParams
from .solution import CandidateChange, ProtocolViolation, Solution


@dataclass(frozen=True)
class _Done:
    solver: int


@dataclass(frozen=True)
class _Abort:
    reason: str


class Dispatcher:
    """Stamps changes with consecutive sequence numbers and broadcasts them."""

    def __init__(self, n_solvers: int):
        self.incoming: queue.Queue = queue.Queue()
        self.inboxes: list[queue.Queue] = [queue.Queue() for _ in range(n_solvers)]
        self.next_seq = 1
        self.broadcast_count = 0
        self._n = n_solvers

    def submit(self, ch: CandidateChange) -> None:
        self.incoming.put(ch)

    def done(self, solver: int) -> None:
        self.incoming.put(_Done(solver))

    def abort(self, reason: str) -> None:
        self.incoming.put(_Abort(reason))

    def loop(self) -> None:
        finished: set[int] = set()
        while len(finished) < self._n:
            item = self.incoming.get()
            if isinstance(item, _Done):
                finished.add(item.solver)
                continue
            if isinstance(item, _Abort):
                for box in self.inboxes:
                    box.put(item)
                return
            if finished:
                # past the cutoff: nobody will simulate it
                continue
            stamped = replace(item, sequence_no=self.next_seq)
            self.next_seq += 1
            self.broadcast_count += 1
            for box in self.inboxes:
                box.put(stamped)


def dispatcher_loop(dispatcher: Dispatcher) -> None:
    dispatcher.loop()


@dataclass
class SolverStats:
    generated: int = 0
    applied: int = 0
    discarded: int = 0
    kept: int = 0
    gen_time: float = 0.0
    sync_time: float = 0.0
    routemin_time: float = 0.0
    coreopt_time: float = 0.0
    best_cost: float = 0.0
    best_hash: str = ""
    ref_hash: str = ""
    shared_draws: int = 0
    trace: list[tuple[int, str, str]] = field(default_factory=list)


@dataclass
class RunStats:
    solvers: list[SolverStats]
    times: dict[str, float]

    @property
    def infeasible_pct(self) -> float:
        s = self.solvers[0]
        total = s.applied + s.discarded
        return 100.0 * s.discarded / total if total else 0.0

    @property
    def sync_frac(self) -> float:
        wall = sum(s.coreopt_time for s in self.solvers)
        return sum(s.sync_time for s in self.solvers) / wall if wall else 0.0

    @property
    def gen_frac(self) -> float:
        wall = sum(s.coreopt_time for s in self.solvers)
        return sum(s.gen_time for s in self.solvers) / wall if wall else 0.0


def solver_loop(
    state: SolverState,
    inbox: queue.Queue,
    dispatcher: Dispatcher,
    delta_co: int,
    stats: SolverStats,
    trace: bool = False,
    jitter: Callable[[], None] | None = None,
) -> Solution:
    """Generate, submit and revert one change, then replay the shared order until it returns."""
    expected = 1
    sid = state.solver_id
    while state.applied < delta_co:
        t0 = time.perf_counter()
        own = core_opt_iteration(state)
        if jitter:
            jitter()
        dispatcher.submit(own)
        t1 = time.perf_counter()
        stats.gen_time += t1 - t0
        while state.applied < delta_co:
            item = inbox.get()
            if isinstance(item, _Abort):
                raise RuntimeError(f"run aborted: {item.reason}")
            if item.sequence_no != expected:
                raise ProtocolViolation(f"solver {sid} expected change {expected}, got {item.sequence_no}")
            expected += 1
            outcome = state.simulate(item)
            if trace:
                stats.trace.append((item.sequence_no, item.content_hash(), outcome.value))
            if item.generator == sid and item.origin == own.origin:
                break
        stats.sync_time += time.perf_counter() - t1
    dispatcher.done(sid)
    return state.best


@dataclass
class Prepared:
    inst: Instance
    params: SolverParams
    neighbors: NeighborLists
    gens: MoveGeneratorSet
    initial: Solution
    k: int
    times: dict[str, float]


def prepare(inst: Instance, params: SolverParams, workers: int = 1) -> Prepared:
    """Neighbor lists, move generators, savings solution and route estimate."""
    times = {}
    t = time.perf_counter()
    neighbors = build_neighbor_lists(inst, params.n_nn, workers)
    gens = init_move_generators(inst, neighbors, params.n_gs)
    times["preprocessing"] = time.perf_counter() - t
    t = time.perf_counter()
    initial = savings_construct(inst, neighbors, params.n_cw, cache_capacity=params.cache_capacity)
    times["construction"] = time.perf_counter() - t
    t = time.perf_counter()
    k = greedy_route_estimate(inst)
    times["estimate"] = time.perf_counter() - t
    return Prepared(inst, params, neighbors, gens, initial, k, times)


def minimize_routes(prep: Prepared, rng: random.Random) -> Solution:
    """Route minimization from the savings solution when it exceeds the estimate."""
    if prep.initial.n_routes > prep.k:
        return route_minimization(prep.inst, prep.initial, prep.k, rng, prep.params, prep.neighbors, prep.gens)
    return prep.initial.copy()


def run_sequential(inst: Instance, params: SolverParams, prep: Prepared | None = None) -> tuple[Solution, RunStats]:
    """The single-solver pipeline without dispatcher round trips."""
    t_start = time.perf_counter()
    prep = prep or prepare(inst, params, 1)
    shared = shared_rng(params.seed)
    t = time.perf_counter()
    start = minimize_routes(prep, shared)
    t_rm = time.perf_counter() - t
    state = SolverState(inst, params, prep.neighbors, prep.gens, start, 0, shared)
    st = SolverStats(routemin_time=t_rm)
    t = time.perf_counter()
    for _ in range(params.delta_co):
        t0 = time.perf_counter()
        ch = state.generate()
        t1 = time.perf_counter()
        state.simulate(ch, preapplied=True)
        st.gen_time += t1 - t0
        st.sync_time += time.perf_counter() - t1
    st.coreopt_time = time.perf_counter() - t
    _fill(st, state)
    times = dict(prep.times, routemin=t_rm, coreopt=st.coreopt_time)
    times["total"] = time.perf_counter() - t_start
    return state.best, RunStats([st], times)


def _fill(st: SolverStats, state: SolverState) -> None:
    st.generated = state.generated
    st.applied = state.applied
    st.discarded = state.discarded
    st.kept = state.kept
    st.best_cost = state.best_cost
    st.best_hash = state.best.structural_hash()
    st.ref_hash = state.S.structural_hash()
    st.shared_draws = state.shared_draws


def run_filo2x(
    inst: Instance,
    params: SolverParams,
    prep: Prepared | None = None,
    trace: bool = False,
    jitter: Callable[[int], Callable[[], None] | None] | None = None,
) -> tuple[Solution, RunStats]:
    """Cooperative run with ``params.solvers`` solver threads."""
    x = params.solvers
    t_start = time.perf_counter()
    prep = prep or prepare(inst, params, x)
    dispatcher = Dispatcher(x)
    stats = [SolverStats() for _ in range(x)]
    results: list[Solution | None] = [None] * x
    errors: list[BaseException] = []
    barrier = threading.Barrier(x + 1)
    coreopt_start = [0.0]

    def worker(sid: int) -> None:
        try:
            shared = shared_rng(params.seed)
            t = time.perf_counter()
            start = minimize_routes(prep, shared)
            stats[sid].routemin_time = time.perf_counter() - t
            state = SolverState(inst, params, prep.neighbors, prep.gens, start, sid, shared)
            barrier.wait()
            t = time.perf_counter()
            results[sid] = solver_loop(
                state, dispatcher.inboxes[sid], dispatcher, params.delta_co, stats[sid], trace,
                jitter(sid) if jitter else None,
            )
            stats[sid].coreopt_time = time.perf_counter() - t
            _fill(stats[sid], state)
        except BaseException as exc:  # surfaced to the caller after join
            errors.append(exc)
            barrier.abort()
            dispatcher.abort(repr(exc))

    threads = [threading.Thread(target=worker, args=(sid,), name=f"solver-{sid}") for sid in range(x)]
    disp = threading.Thread(target=dispatcher.loop, name="dispatcher")
    disp.start()
    for th in threads:
        th.start()
    try:
        barrier.wait()
        coreopt_start[0] = time.perf_counter()
    except threading.BrokenBarrierError:
        pass
    for th in threads:
        th.join()
    t_co = time.perf_counter() - coreopt_start[0] if coreopt_start[0] else 0.0
    disp.join()
    if errors:
        raise errors[0]
    times = dict(prep.times, routemin=max(s.routemin_time for s in stats), coreopt=t_co)
    times["total"] = time.perf_counter() - t_start
    return results[0], RunStats(stats, times)


__all__ = [
    "Dispatcher",
    "Outcome",
    "Prepared",
    "RunStats",
    "SolverStats",
    "core_optimization_sequential",
    "dispatcher_loop",
    "minimize_routes",
    "prepare",
    "run_filo2x",
    "run_sequential",
    "solver_loop",
]
