"""Route minimization and core optimization (ruin, recreate, local search, annealing)."""

from __future__ import annotations

import enum
import math
import random

import numpy as np

from . import _kernels as K
from .instance import Instance, NeighborLists, edge_cost
from .localsearch import (
    MoveGeneratorSet,
    Sparsification,
    begin_recording,
    end_recording,
    run_local_search,
    update_sparsification,
)
from .params import SolverParams
from .solution import Action, CandidateChange, Solution, array_to_actions


class Ordering(enum.IntEnum):
    INCREASING_DEPOT_DISTANCE = 0
    DECREASING_DEPOT_DISTANCE = 1
    DECREASING_DEMAND = 2
    RANDOM = 3


def order_customers(inst: Instance, customers, ordering: Ordering, rng: random.Random) -> list[int]:
    vs = [int(v) for v in customers]
    if ordering == Ordering.INCREASING_DEPOT_DISTANCE:
        return sorted(vs, key=lambda v: (edge_cost(inst, 0, v), v))
    if ordering == Ordering.DECREASING_DEPOT_DISTANCE:
        return sorted(vs, key=lambda v: (-edge_cost(inst, 0, v), v))
    if ordering == Ordering.DECREASING_DEMAND:
        return sorted(vs, key=lambda v: (-int(inst.demands[v]), v))
    rng.shuffle(vs)
    return vs


def sa_accept(cost_new: float, cost_ref: float, temperature: float, rng: random.Random) -> bool:
    """Annealing test; consumes exactly one draw."""
    u = 1.0 - rng.random()  # (0, 1]
    return cost_new < cost_ref - temperature * math.log(u)


def update_omega(
    omega: np.ndarray, ruined, cost_new: float, cost_ref: float, rng: random.Random,
    eps_sim: float, eps_bad: float, omega_min: int, omega_max: int,
) -> int:
    """Adapt ruin intensities of the ruined customers; returns the draws consumed."""
    g = (cost_new - cost_ref) / cost_ref if cost_ref else 0.0
    draws = 0
    for v in ruined:
        if abs(g) <= eps_sim:
            omega[v] = min(omega[v] + 1, omega_max)
        elif g > eps_bad:
            omega[v] = max(omega[v] - 1, omega_min)
        else:
            step = -1 if rng.random() < 0.5 else 1
            draws += 1
            omega[v] = min(max(omega[v] + step, omega_min), omega_max)
    return draws


def _shake_raw(sol: Solution, seed: int, omega_i: int, neighbors: NeighborLists, n_gs: int, rng: random.Random) -> np.ndarray:
    draws = np.array([rng.random() for _ in range(max(omega_i, 1) - 1)], dtype=np.float64)
    out = np.empty(max(omega_i, 1), dtype=np.int64)
    cnt = K.k_shake(
        sol.X, sol.dem, sol.V, sol.R, sol.RC, sol.G, sol.CM, sol.J, seed, draws, neighbors.lists, n_gs, out
    )
    return out[:cnt]


def shake(
    sol: Solution, seed_customer: int, omega_i: int, neighbors: NeighborLists, rng: random.Random, n_gs: int = 25
) -> tuple[list[int], list[Action]]:
    """Random-walk ruin; returns (ruined customers, recorded actions)."""
    if not sol.is_routed(seed_customer):
        raise ValueError("seed customer must be routed")
    begin_recording(sol)
    ruined = _shake_raw(sol, seed_customer, omega_i, neighbors, n_gs, rng)
    acts, _ = end_recording(sol)
    return [int(v) for v in ruined], array_to_actions(acts)


def recreate(
    sol: Solution, unserved, ordering: Ordering = Ordering.RANDOM, rng: random.Random | None = None
) -> list[Action]:
    """Cheapest-insertion recreate with the singleton route as a fallback candidate."""
    order = order_customers(sol.inst, unserved, Ordering(ordering), rng or random.Random(0))
    begin_recording(sol)
    K.k_recreate(sol.X, sol.dem, sol.V, sol.R, sol.RC, sol.G, sol.CM, sol.J, np.asarray(order, dtype=np.int64))
    acts, _ = end_recording(sol)
    return array_to_actions(acts)


# ------------------------------------------------------------ route minimization


def pick_pair_of_routes(sol: Solution, neighbors: NeighborLists) -> tuple[int, int] | None:
    """Least-loaded route, then the route of its first customer's nearest outside neighbor."""
    ids = sol.route_ids()
    if len(ids) < 2:
        return None
    r1 = min(ids, key=lambda r: (sol.load(r), r))
    first = int(sol.R[K.FIRST, r1])
    for w in neighbors[first]:
        w = int(w)
        if w != 0 and sol.is_routed(w) and sol.route_of(w) != r1:
            return r1, sol.route_of(w)
    r2 = min((r for r in ids if r != r1), key=lambda r: (sol.load(r), r))
    return r1, r2


def route_minimization(
    inst: Instance, best: Solution, k: int, rng: random.Random, params: SolverParams,
    neighbors: NeighborLists, gens: MoveGeneratorSet,
) -> Solution:
    """Try to compact the solution towards k routes without losing quality."""
    best = best.copy()
    cur = best.copy()
    active = np.full(inst.n, gens.prefix_length(params.gamma_base, params.gamma_base), dtype=np.int64)
    prob = 1.0
    pending: list[int] = []
    for _ in range(params.delta_rm):
        pair = pick_pair_of_routes(cur, neighbors)
        if pair is None:
            break
        cur.cache.clear()
        cur.G[K.CACHE_ON] = 1
        for r in pair:
            members = cur.route(r)
            for v in members:
                cur.apply_action(Action.remove(v, cur.pred(v), r))
            cur.apply_action(Action.delete_empty_route(r))
            pending.extend(members)
        if rng.random() < 0.5:
            order = order_customers(inst, pending, Ordering.RANDOM, rng)
        else:
            order = sorted(pending, key=lambda v: (int(inst.demands[v]), v))
        left: list[int] = []
        for v in order:
            r, pred, _ = K.k_best_insertion(cur.X, cur.dem, cur.V, cur.R, cur.G, v)
            if r >= 0:
                cur.apply_action(Action.insert_after(v, int(pred), int(r)))
            elif cur.n_routes < k or rng.random() > prob:
                K.k_singleton(cur.X, cur.dem, cur.V, cur.R, cur.RC, cur.G, cur.CM, cur.J, v)
            else:
                left.append(v)
        pending = left
        run_local_search(cur, gens, active)
        cur.G[K.CACHE_ON] = 0
        if not pending and (cur.cost < best.cost or (cur.cost == best.cost and cur.n_routes < best.n_routes)):
            best.assign(cur)
            if best.n_routes <= k:
                return best
        prob *= params.routemin_decay
        if cur.cost > best.cost:
            cur.assign(best)
            pending = []
    return best


# ------------------------------------------------------------ core optimization


class Outcome(enum.Enum):
    KEPT = "kept"
    REVERTED = "reverted"
    DISCARDED = "discarded"

    @property
    def applied(self) -> bool:
        return self is not Outcome.DISCARDED


def shared_rng(seed: int) -> random.Random:
    return random.Random(f"{seed}/shared")


def private_rng(seed: int, solver_id: int) -> random.Random:
    return random.Random(f"{seed}/private/{solver_id}")


class SolverState:
    """Private state of one core-optimization solver."""

    def __init__(
        self, inst: Instance, params: SolverParams, neighbors: NeighborLists, gens: MoveGeneratorSet,
        start: Solution, solver_id: int = 0, shared: random.Random | None = None,
        delta_co: int | None = None,
    ):
        self.inst = inst
        self.params = params
        self.neighbors = neighbors
        self.gens = gens
        self.solver_id = solver_id
        self.S = start.copy()
        self.S.G[K.CCAP] = params.cache_capacity
        if len(self.S.CM) != params.cache_capacity:
            self.S.CM = np.zeros(params.cache_capacity, dtype=np.int64)
            self.S.G[K.CSIZE] = 0
            self.S.V[K.CPOS] = -1
        self.best = self.S.copy()
        self.best_cost = self.best.cost
        n = inst.n
        self.omega_min = params.omega_min
        self.omega_max = params.omega_max_for(n)
        self.omega = np.full(n, params.omega_base_for(n), dtype=np.int64)
        self.spars = Sparsification(gens, params.gamma_base, params.lam, params.threshold)
        self.delta_co = params.delta_co if delta_co is None else delta_co
        self.t0 = params.t0_factor * gens.mean_arc_cost(inst)
        tf = params.tf_factor * self.t0
        self.cooling = (tf / self.t0) ** (1.0 / self.delta_co) if self.delta_co > 0 and self.t0 > 0 else 1.0
        self.private = private_rng(params.seed, solver_id)
        self.shared = shared if shared is not None else shared_rng(params.seed)
        self.iteration = 0
        self.applied = 0
        self.discarded = 0
        self.generated = 0
        self.kept = 0
        self.shared_draws = 0
        self._ref_cost = 0.0

    @property
    def temperature(self) -> float:
        return self.t0 * self.cooling ** self.iteration

    # -- generation

    def generate(self) -> CandidateChange:
        """One ruin/recreate/descent step on S; S is left at the neighbor."""
        S = self.S
        p = self.params
        self._ref_cost = S.cost
        K.k_clear_cache(S.V, S.G, S.CM)
        S.G[K.CACHE_ON] = 1
        begin_recording(S)
        seed = self.private.randrange(1, self.inst.n)
        ruined = _shake_raw(S, seed, int(self.omega[seed]), self.neighbors, p.n_gs, self.private)
        ordering = Ordering(self.private.randrange(4))
        order = order_customers(self.inst, ruined, ordering, self.private)
        K.k_recreate(S.X, S.dem, S.V, S.R, S.RC, S.G, S.CM, S.J, np.asarray(order, dtype=np.int64))
        run_local_search(S, self.gens, self.spars.active)
        acts, touched = end_recording(S)
        S.G[K.CACHE_ON] = 0
        self.generated += 1
        ch = CandidateChange(
            acts, ruined, touched, generator=self.solver_id, delta=S.cost - self._ref_cost, origin=self.generated
        )
        S.push_applied(ch)
        return ch

    # -- simulation

    def simulate(self, ch: CandidateChange, preapplied: bool = False) -> Outcome:
        S = self.S
        if preapplied:
            cost_ref = self._ref_cost
        else:
            cost_ref = S.cost
            res = S.apply_change(ch)
            if not res.feasible:
                self.discarded += 1
                return Outcome.DISCARDED
        cost_new = S.cost
        p = self.params
        if cost_new < self.best_cost:
            self.best.assign(S)
            self.best_cost = cost_new
            update_sparsification(self.spars, ch.touched, True)
        else:
            update_sparsification(self.spars, ch.touched, False)
        self.shared_draws += update_omega(
            self.omega, ch.ruined, cost_new, cost_ref, self.shared,
            p.eps_sim, p.eps_bad, self.omega_min, self.omega_max,
        )
        keep = sa_accept(cost_new, cost_ref, self.temperature, self.shared)
        self.shared_draws += 1
        if keep:
            S.commit()
            self.kept += 1
        else:
            S.undo_change(ch)
        self.iteration += 1
        self.applied += 1
        return Outcome.KEPT if keep else Outcome.REVERTED


def core_opt_iteration(state: SolverState) -> CandidateChange:
    """Generate one change and restore S to its pre-iteration state."""
    ch = state.generate()
    state.S.undo_change(ch)
    return ch


def simulate_iteration(state: SolverState, ch: CandidateChange) -> Outcome:
    return state.simulate(ch)


def core_optimization_sequential(state: SolverState, delta_co: int | None = None) -> Solution:
    budget = state.delta_co if delta_co is None else delta_co
    for _ in range(budget):
        ch = state.generate()
        state.simulate(ch, preapplied=True)
    return state.best

