"""Initial solution by neighbor-limited savings and the greedy route estimate."""

from __future__ import annotations

import random

from .instance import Instance, NeighborLists, edge_cost
from .solution import Solution


def savings_pairs(inst: Instance, neighbors: NeighborLists, n_cw: int) -> list[tuple[float, int, int]]:
    """Positive savings for each customer and its n_cw nearest customers, best first."""
    c0 = [edge_cost(inst, 0, i) for i in range(inst.n)]
    pairs: dict[tuple[int, int], float] = {}
    for i in range(1, inst.n):
        taken = 0
        for j in neighbors[i]:
            j = int(j)
            if j == 0:
                continue
            if taken == n_cw:
                break
            taken += 1
            key = (i, j) if i < j else (j, i)
            if key not in pairs:
                s = c0[i] + c0[j] - edge_cost(inst, i, j)
                if s > 0:
                    pairs[key] = s
    return sorted(((s, i, j) for (i, j), s in pairs.items()), key=lambda t: (-t[0], t[1], t[2]))


def merge_routes(inst: Instance, pairs) -> list[list[int]]:
    """Single pass over the savings list merging routes at their end points."""
    route = {i: [i] for i in range(1, inst.n)}
    load = {i: int(inst.demands[i]) for i in range(1, inst.n)}
    owner = {i: i for i in range(1, inst.n)}
    for _, i, j in pairs:
        ri, rj = owner[i], owner[j]
        if ri == rj or load[ri] + load[rj] > inst.capacity:
            continue
        a, b = route[ri], route[rj]
        if a[-1] != i and a[0] == i:
            a.reverse()
        if b[0] != j and b[-1] == j:
            b.reverse()
        if a[-1] != i or b[0] != j:
            continue
        a.extend(b)
        load[ri] += load.pop(rj)
        del route[rj]
        for v in b:
            owner[v] = ri
    return [route[k] for k in sorted(route)]


def savings_construct(
    inst: Instance, neighbors: NeighborLists, n_cw: int = 100, rng: random.Random | None = None, cache_capacity: int = 50
) -> Solution:
    """Savings construction; ``rng`` is accepted for signature symmetry and unused."""
    routes = merge_routes(inst, savings_pairs(inst, neighbors, n_cw))
    return Solution.from_routes(inst, routes, cache_capacity)


def greedy_route_estimate(inst: Instance) -> int:
    """First-fit bin count over customers in index order."""
    bins: list[int] = []
    for q in inst.demands[1:]:
        q = int(q)
        for b, used in enumerate(bins):
            if used + q <= inst.capacity:
                bins[b] = used + q
                break
        else:
            bins.append(q)
    return len(bins)
