import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopvrp.construction import greedy_route_estimate, savings_construct
from coopvrp.improve import (
    Ordering,
    Outcome,
    SolverState,
    order_customers,
    pick_pair_of_routes,
    recreate,
    route_minimization,
    sa_accept,
    shake,
    shared_rng,
    update_omega,
)
from coopvrp.instance import Instance, build_neighbor_lists, edge_cost
from coopvrp.localsearch import init_move_generators
from coopvrp.params import SolverParams
from coopvrp.solution import Action, CandidateChange, Solution, full_feasibility_check

from conftest import random_instance


def _setup(inst, n_gs=25):
    nb = build_neighbor_lists(inst, inst.n)
    return nb, init_move_generators(inst, nb, n_gs)


def test_sa_acceptance_rate_at_one_temperature_above():
    rng = random.Random(42)
    t = 3.0
    hits = sum(sa_accept(100.0 + t, 100.0, t, rng) for _ in range(100_000))
    assert abs(hits / 100_000 - math.exp(-1)) <= 0.01


@settings(max_examples=200)
@given(ref=st.floats(1, 1e5), drop=st.floats(1e-6, 1e3), t=st.floats(0, 1e3), seed=st.integers(0, 2**32))
def test_sa_always_accepts_improvements(ref, drop, t, seed):
    assert sa_accept(ref - drop, ref, t, random.Random(seed))


def test_sa_consumes_one_draw():
    a, b = random.Random(3), random.Random(3)
    sa_accept(10, 5, 1.0, a)
    b.random()
    assert a.random() == b.random()


def test_omega_rules():
    kw = dict(eps_sim=0.02, eps_bad=0.10, omega_min=1, omega_max=5)
    om = np.array([0, 3, 5, 1], dtype=np.int64)
    assert update_omega(om, [1, 2], 101.0, 100.0, random.Random(0), **kw) == 0
    assert om.tolist() == [0, 4, 5, 1]
    assert update_omega(om, [1, 3], 120.0, 100.0, random.Random(0), **kw) == 0
    assert om.tolist() == [0, 3, 5, 1]
    before = om.copy()
    assert update_omega(om, [1, 2], 105.0, 100.0, random.Random(0), **kw) == 2
    assert all(abs(int(a) - int(b)) <= 1 for a, b in zip(om, before))
    assert 1 <= om[1:].min() and om.max() <= 5


def test_orderings():
    coords = np.array([[0, 0], [5, 0], [1, 0], [3, 0]], dtype=float)
    inst = Instance("o", coords, np.array([0, 2, 9, 2]), 20)
    vs = [1, 2, 3]
    assert order_customers(inst, vs, Ordering.INCREASING_DEPOT_DISTANCE, random.Random(0)) == [2, 3, 1]
    assert order_customers(inst, vs, Ordering.DECREASING_DEPOT_DISTANCE, random.Random(0)) == [1, 3, 2]
    assert order_customers(inst, vs, Ordering.DECREASING_DEMAND, random.Random(0)) == [2, 1, 3]
    assert sorted(order_customers(inst, vs, Ordering.RANDOM, random.Random(0))) == vs


def test_shake_with_unit_intensity_removes_only_seed():
    inst = random_instance(8, 100, 3)
    nb, _ = _setup(inst)
    sol = Solution.from_routes(inst, [[1, 2, 3], [4, 5], [6, 7, 8]])
    ruined, acts = shake(sol, 2, 1, nb, random.Random(1))
    assert ruined == [2] and sol.unrouted() == [2] and len(acts) == 1


def test_shake_exhausts_small_instance():
    inst = random_instance(8, 100, 3)
    nb, _ = _setup(inst)
    sol = Solution.from_routes(inst, [[1, 2, 3], [4, 5], [6, 7, 8]])
    ruined, _ = shake(sol, 2, 50, nb, random.Random(1))
    assert sorted(ruined) == list(range(1, 9))
    assert sol.n_routes == 0 and sol.n_unrouted == 8


def test_shake_needs_routed_seed():
    inst = random_instance(5, 100, 3)
    nb, _ = _setup(inst)
    sol = Solution.from_routes(inst, [[1, 2, 3, 4]])
    with pytest.raises(ValueError):
        shake(sol, 5, 2, nb, random.Random(0))


def _insertion_cost(inst, route, pos, v):
    path = [0, *route, 0]
    a, b = path[pos], path[pos + 1]
    return edge_cost(inst, a, v) + edge_cost(inst, v, b) - edge_cost(inst, a, b)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_recreate_inserts_at_cheapest_position(seed):
    inst = random_instance(6, 1000, seed)
    route = [1, 2, 3, 4, 5]
    sol = Solution.from_routes(inst, [route])
    deltas = [_insertion_cost(inst, route, p, 6) for p in range(6)]
    singleton = 2 * edge_cost(inst, 0, 6)
    recreate(sol, [6])
    best = min(range(6), key=lambda p: (deltas[p], p))
    if deltas[best] <= singleton:
        assert sol.routes() == [route[:best] + [6] + route[best:]]
    else:
        assert sol.n_routes == 2
    assert full_feasibility_check(sol).ok


def test_recreate_opens_route_when_nothing_fits():
    coords = np.array([[0, 0], [1, 0], [2, 0], [3, 0]], dtype=float)
    inst = Instance("f", coords, np.array([0, 3, 3, 3]), 6)
    sol = Solution.from_routes(inst, [[1, 2]])
    recreate(sol, [3])
    assert sol.routes() == [[1, 2], [3]]


def test_pick_pair_prefers_least_loaded_route():
    coords = np.array([[0, 0], [10, 0], [11, 0], [50, 50], [12, 1]], dtype=float)
    inst = Instance("p", coords, np.array([0, 1, 5, 5, 5]), 20)
    sol = Solution.from_routes(inst, [[2], [1], [3], [4]])
    nb, _ = _setup(inst)
    r1, r2 = pick_pair_of_routes(sol, nb)
    assert sol.route(r1) == [1] and sol.route(r2) == [2]


def test_route_minimization_reaches_single_route():
    coords = np.array([[0, 0], [10, 0], [0, 10], [-10, 0], [0, -10]], dtype=float)
    inst = Instance("rm", coords, np.array([0, 1, 1, 1, 1]), 4)
    nb, gens = _setup(inst)
    start = Solution.from_routes(inst, [[1], [2], [3], [4]])
    params = SolverParams(delta_rm=100)
    out = route_minimization(inst, start, 1, shared_rng(0), params, nb, gens)
    assert out.n_routes == 1 and full_feasibility_check(out).ok
    assert out.cost <= start.cost


def test_route_minimization_never_worsens():
    inst = random_instance(60, 50, 9)
    nb, gens = _setup(inst)
    start = savings_construct(inst, nb)
    out = route_minimization(inst, start, greedy_route_estimate(inst), shared_rng(1), SolverParams(delta_rm=200), nb, gens)
    assert out.cost <= start.cost and full_feasibility_check(out).ok


def _state(inst, seed=0, delta_co=200):
    nb, gens = _setup(inst)
    start = savings_construct(inst, nb)
    return SolverState(inst, SolverParams(delta_co=delta_co, seed=seed), nb, gens, start)


def test_generate_then_undo_restores_reference():
    state = _state(random_instance(50, 40, 2))
    before = state.S.state_bytes()
    for _ in range(30):
        ch = state.generate()
        state.S.undo_change(ch)
        assert state.S.state_bytes() == before


def test_temperature_schedule_endpoints():
    state = _state(random_instance(30, 40, 2), delta_co=500)
    assert state.temperature == pytest.approx(state.t0)
    state.iteration = 500
    assert state.temperature == pytest.approx(0.01 * state.t0)


def test_best_cost_never_increases_and_stays_feasible():
    state = _state(random_instance(50, 40, 4), delta_co=300)
    last = state.best_cost
    for _ in range(300):
        out = state.simulate(state.generate(), preapplied=True)
        assert out in (Outcome.KEPT, Outcome.REVERTED)
        assert state.best_cost <= last
        last = state.best_cost
    assert state.best.cost == state.best_cost
    assert full_feasibility_check(state.best).ok and full_feasibility_check(state.S).ok


def test_discarded_change_consumes_nothing():
    state = _state(random_instance(30, 40, 6))
    v = state.S.route(state.S.route_ids()[0])[0]
    bad = CandidateChange.of([Action.remove(v, v, state.S.route_of(v))])
    probe, before = state.shared.getstate(), state.S.state_bytes()
    assert state.simulate(bad) is Outcome.DISCARDED
    assert state.shared.getstate() == probe and state.S.state_bytes() == before
    assert (state.iteration, state.applied, state.discarded) == (0, 0, 1)
