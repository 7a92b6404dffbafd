import math
from functools import lru_cache

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from coopvrp.construction import greedy_route_estimate, merge_routes, savings_construct, savings_pairs
from coopvrp.instance import Instance, build_neighbor_lists, edge_cost, load_instance
from coopvrp.solution import full_feasibility_check

from conftest import data_path, random_instance


def _all_pairs_savings(inst):
    out = []
    for i in range(1, inst.n):
        for j in range(i + 1, inst.n):
            s = edge_cost(inst, 0, i) + edge_cost(inst, 0, j) - edge_cost(inst, i, j)
            if s > 0:
                out.append((s, i, j))
    out.sort(key=lambda t: (-t[0], t[1], t[2]))
    return out


def _reference_merge(inst, pairs):
    """Clarke-Wright with explicit end-point case analysis."""
    routes = [[v] for v in range(1, inst.n)]

    def find(v):
        return next(r for r in routes if v in r)

    for _, i, j in pairs:
        a, b = find(i), find(j)
        if a is b or sum(inst.demands[a]) + sum(inst.demands[b]) > inst.capacity:
            continue
        if a[-1] == i and b[0] == j:
            merged = a + b
        elif a[-1] == i and b[-1] == j:
            merged = a + b[::-1]
        elif a[0] == i and b[0] == j:
            merged = a[::-1] + b
        elif a[0] == i and b[-1] == j:
            merged = b + a
        else:
            continue
        routes = [r for r in routes if r is not a and r is not b] + [merged]
    return routes


def _canon(routes):
    return sorted(tuple(min(r, r[::-1])) for r in routes)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 40), cap=st.integers(10, 80), seed=st.integers(0, 5000))
def test_savings_match_all_pairs_reference(n, cap, seed):
    inst = random_instance(n, cap, seed)
    nb = build_neighbor_lists(inst, inst.n)
    pairs = savings_pairs(inst, nb, n_cw=inst.n)
    assert pairs == _all_pairs_savings(inst)
    assert _canon(merge_routes(inst, pairs)) == _canon(_reference_merge(inst, pairs))


def test_savings_solution_on_x_instance_is_feasible():
    inst = load_instance(data_path("X-n101-k25.vrp"))
    sol = savings_construct(inst, build_neighbor_lists(inst, 100))
    assert full_feasibility_check(sol).ok
    assert sol.n_routes >= math.ceil(inst.demands.sum() / inst.capacity)


def _exact_bins(demands, cap):
    items = tuple(sorted(demands, reverse=True))

    @lru_cache(maxsize=None)
    def best(rest):
        if not rest:
            return 0
        first, others = rest[0], rest[1:]
        n = len(others)
        answer = math.inf
        # fill the bin holding the first item with every feasible subset of the rest
        for mask in range(1 << n):
            load = first + sum(others[k] for k in range(n) if mask >> k & 1)
            if load <= cap:
                left = tuple(others[k] for k in range(n) if not mask >> k & 1)
                answer = min(answer, 1 + best(left))
        return answer

    return best(items)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 12), cap=st.integers(5, 30), seed=st.integers(0, 10**6))
def test_first_fit_within_bin_packing_bounds(n, cap, seed):
    inst = random_instance(n, cap, seed, demand_range=(1, 5))
    ff = greedy_route_estimate(inst)
    opt = _exact_bins(list(int(q) for q in inst.demands[1:]), cap)
    assert math.ceil(inst.demands.sum() / cap) <= opt <= ff <= math.floor(1.7 * opt)


def _best_merge_cost(inst):
    """Cheapest solution reachable by any sequence of end-point merges."""
    best = math.inf
    custs = list(range(1, inst.n))

    def cost(routes):
        total = 0.0
        for r in routes:
            path = [0, *r, 0]
            total += sum(edge_cost(inst, a, b) for a, b in zip(path, path[1:]))
        return total

    def explore(routes):
        nonlocal best
        best = min(best, cost(routes))
        for a in range(len(routes)):
            for b in range(len(routes)):
                if a == b:
                    continue
                for ra in (routes[a], routes[a][::-1]):
                    for rb in (routes[b], routes[b][::-1]):
                        if sum(inst.demands[ra]) + sum(inst.demands[rb]) <= inst.capacity:
                            rest = [r for k, r in enumerate(routes) if k not in (a, b)]
                            explore(rest + [ra + rb])

    explore([[v] for v in custs])
    return best


def test_clustered_customers_merge_into_best_single_route():
    coords = np.array([[0, 0], [100, 100], [102, 101], [101, 103]], dtype=float)
    inst = Instance("cluster", coords, np.array([0, 1, 1, 1]), 100)
    sol = savings_construct(inst, build_neighbor_lists(inst, 10))
    assert sol.n_routes == 1
    assert sol.cost == _best_merge_cost(inst)


def test_first_fit_at_most_twice_optimal_on_fixed_case():
    dem = [0, 6, 6, 4, 4, 3, 3, 2, 2]
    inst = Instance("bp", np.zeros((len(dem), 2)), np.array(dem), 10)
    ff = greedy_route_estimate(inst)
    opt = _exact_bins(dem[1:], 10)
    assert opt == 3 and opt <= ff <= 2 * opt
