"""Compiled hot paths operating on the flat solution state.

State layout (all owned by one ``Solution``):

* ``X``   float64 [n, 2] coordinates
* ``dem`` int64 [n] demands
* ``V``   int64 [9, n] per-vertex rows (see ``NXT`` ... ``CST``)
* ``R``   int64 [7, n] per-route rows (see ``FIRST`` ... ``DLIST``)
* ``RC``  float64 [n] route costs
* ``G``   int64 [16] scalars (see ``Q`` ... ``TRACK``)
* ``CM``  int64 [cache capacity] cache member slots
* ``J``   int64 [cap, 4] action journal rows (kind, v, pred, route)
"""

import math

import numpy as np
from numba import njit

# vertex rows
NXT, PRV, RID, POS, PLOAD, CPOS, TMARK, TLIST, CST = range(9)
# route rows
FIRST, LAST, SIZE, LOAD, ALIVE, DIRTY, DLIST = range(7)
# scalars
(Q, EW, NROUTES, CSIZE, CCLOCK, CACHE_ON, REC, JLEN, TLEN, TEPOCH, CCAP, NDIRTY, UNROUTED, TRACK) = range(14)
G_SIZE = 16

# action kinds
INSERT_AFTER, REMOVE, CREATE_ROUTE, DELETE_EMPTY_ROUTE = 0, 1, 2, 3

# primitive failure codes
OK = 0
E_BAD_INDEX = 1
E_VERTEX_ROUTED = 2
E_NOT_IN_ROUTE = 3
E_ADJACENCY = 4
E_ROUTE_DEAD = 5
E_ROUTE_ALIVE = 6
E_ROUTE_NOT_EMPTY = 7
E_PRED_NOT_IN_ROUTE = 8

# route validation failure codes
F_BROKEN_CYCLE = 1
F_OVERLOAD = 2
F_EMPTY = 3
F_UNROUTED = 4

# local search operators, in descent order
OP_RELOCATE, OP_SWAP, OP_TWO_OPT, OP_CROSS, OP_EJECTION = range(5)
N_OPS = 5

_FLAGS = dict(cache=True, nogil=True)


@njit(inline="always", **_FLAGS)
def dist(X, ew, i, j):
    if i == j:
        return 0.0
    dx = X[i, 0] - X[j, 0]
    dy = X[i, 1] - X[j, 1]
    d = math.sqrt(dx * dx + dy * dy)
    if ew == 0:
        return math.floor(d + 0.5)
    if ew == 2:
        return math.floor(d)
    return d


@njit(**_FLAGS)
def _touch(V, G, CM, v):
    if v == 0:
        return
    if G[TRACK] != 0 and V[TMARK, v] != G[TEPOCH]:
        V[TMARK, v] = G[TEPOCH]
        V[TLIST, G[TLEN]] = v
        G[TLEN] += 1
    if G[CACHE_ON] == 0:
        return
    G[CCLOCK] += 1
    if V[CPOS, v] >= 0:
        V[CST, v] = G[CCLOCK]
        return
    if G[CSIZE] < G[CCAP]:
        slot = G[CSIZE]
        G[CSIZE] += 1
    else:
        slot = 0
        oldest = V[CST, CM[0]]
        for s in range(1, G[CSIZE]):
            if V[CST, CM[s]] < oldest:
                oldest = V[CST, CM[s]]
                slot = s
        V[CPOS, CM[slot]] = -1
    CM[slot] = v
    V[CPOS, v] = slot
    V[CST, v] = G[CCLOCK]


@njit(**_FLAGS)
def k_touch_list(V, G, CM, vs):
    for v in vs:
        _touch(V, G, CM, v)


@njit(**_FLAGS)
def k_clear_cache(V, G, CM):
    for s in range(G[CSIZE]):
        V[CPOS, CM[s]] = -1
    G[CSIZE] = 0


@njit(**_FLAGS)
def _record(G, J, kind, v, pred, r):
    if G[REC] != 0:
        k = G[JLEN]
        J[k, 0] = kind
        J[k, 1] = v
        J[k, 2] = pred
        J[k, 3] = r
        G[JLEN] = k + 1


@njit(**_FLAGS)
def _mark_dirty(R, G, r):
    if R[DIRTY, r] == 0:
        R[DIRTY, r] = 1
        R[DLIST, G[NDIRTY]] = r
        G[NDIRTY] += 1


@njit(**_FLAGS)
def _insert(dem, V, R, G, CM, J, v, pred, r):
    n = V.shape[1]
    if v <= 0 or v >= n or r < 0 or r >= n or pred < 0 or pred >= n:
        return E_BAD_INDEX
    if V[RID, v] >= 0:
        return E_VERTEX_ROUTED
    if R[ALIVE, r] == 0:
        return E_ROUTE_DEAD
    if pred != 0 and V[RID, pred] != r:
        return E_PRED_NOT_IN_ROUTE
    succ = R[FIRST, r] if pred == 0 else V[NXT, pred]
    V[NXT, v] = succ
    V[PRV, v] = pred
    if pred == 0:
        R[FIRST, r] = v
    else:
        V[NXT, pred] = v
    if succ == 0:
        R[LAST, r] = v
    else:
        V[PRV, succ] = v
    V[RID, v] = r
    R[SIZE, r] += 1
    R[LOAD, r] += dem[v]
    G[UNROUTED] -= 1
    _mark_dirty(R, G, r)
    _touch(V, G, CM, v)
    _touch(V, G, CM, pred)
    _touch(V, G, CM, succ)
    _record(G, J, INSERT_AFTER, v, pred, r)
    return OK


@njit(**_FLAGS)
def _remove(dem, V, R, G, CM, J, v, pred, r):
    n = V.shape[1]
    if v <= 0 or v >= n or r < 0 or r >= n or pred < 0 or pred >= n:
        return E_BAD_INDEX
    if V[RID, v] != r:
        return E_NOT_IN_ROUTE
    if V[PRV, v] != pred:
        return E_ADJACENCY
    succ = V[NXT, v]
    if pred == 0:
        R[FIRST, r] = succ
    else:
        V[NXT, pred] = succ
    if succ == 0:
        R[LAST, r] = pred
    else:
        V[PRV, succ] = pred
    V[NXT, v] = -1
    V[PRV, v] = -1
    V[RID, v] = -1
    V[POS, v] = -1
    V[PLOAD, v] = 0
    R[SIZE, r] -= 1
    R[LOAD, r] -= dem[v]
    G[UNROUTED] += 1
    _mark_dirty(R, G, r)
    _touch(V, G, CM, v)
    _touch(V, G, CM, pred)
    _touch(V, G, CM, succ)
    _record(G, J, REMOVE, v, pred, r)
    return OK


@njit(**_FLAGS)
def _create(R, RC, G, J, r):
    if r < 0 or r >= R.shape[1]:
        return E_BAD_INDEX
    if R[ALIVE, r] != 0:
        return E_ROUTE_ALIVE
    R[ALIVE, r] = 1
    R[FIRST, r] = 0
    R[LAST, r] = 0
    R[SIZE, r] = 0
    R[LOAD, r] = 0
    RC[r] = 0.0
    G[NROUTES] += 1
    _mark_dirty(R, G, r)
    _record(G, J, CREATE_ROUTE, 0, 0, r)
    return OK


@njit(**_FLAGS)
def _delete(R, RC, G, J, r):
    if r < 0 or r >= R.shape[1]:
        return E_BAD_INDEX
    if R[ALIVE, r] == 0:
        return E_ROUTE_DEAD
    if R[SIZE, r] != 0:
        return E_ROUTE_NOT_EMPTY
    R[ALIVE, r] = 0
    R[FIRST, r] = 0
    R[LAST, r] = 0
    RC[r] = 0.0
    G[NROUTES] -= 1
    _record(G, J, DELETE_EMPTY_ROUTE, 0, 0, r)
    return OK


@njit(**_FLAGS)
def _apply_one(dem, V, R, RC, G, CM, J, kind, v, pred, r):
    if kind == INSERT_AFTER:
        return _insert(dem, V, R, G, CM, J, v, pred, r)
    if kind == REMOVE:
        return _remove(dem, V, R, G, CM, J, v, pred, r)
    if kind == CREATE_ROUTE:
        return _create(R, RC, G, J, r)
    if kind == DELETE_EMPTY_ROUTE:
        return _delete(R, RC, G, J, r)
    return E_BAD_INDEX


@njit(**_FLAGS)
def _apply_inverse(dem, V, R, RC, G, CM, J, kind, v, pred, r):
    if kind == INSERT_AFTER:
        return _remove(dem, V, R, G, CM, J, v, pred, r)
    if kind == REMOVE:
        return _insert(dem, V, R, G, CM, J, v, pred, r)
    if kind == CREATE_ROUTE:
        return _delete(R, RC, G, J, r)
    return _create(R, RC, G, J, r)


@njit(**_FLAGS)
def _fix(X, dem, V, R, RC, G, check):
    """Renumber dirty routes and refresh their costs; optionally validate them."""
    ew = G[EW]
    status = 0
    for k in range(G[NDIRTY]):
        r = R[DLIST, k]
        R[DIRTY, r] = 0
        if R[ALIVE, r] == 0:
            continue
        size = R[SIZE, r]
        if check != 0 and status == 0:
            if size == 0:
                status = F_EMPTY
            elif R[LOAD, r] > G[Q]:
                status = F_OVERLOAD
        prev = 0
        v = R[FIRST, r]
        load = 0
        cost = 0.0
        steps = 0
        while v != 0 and steps <= size:
            steps += 1
            V[POS, v] = steps
            load += dem[v]
            V[PLOAD, v] = load
            cost += dist(X, ew, prev, v)
            prev = v
            v = V[NXT, v]
        cost += dist(X, ew, prev, 0)
        RC[r] = cost
        if (v != 0 or steps != size or prev != R[LAST, r] or load != R[LOAD, r]) and status == 0:
            status = F_BROKEN_CYCLE
    G[NDIRTY] = 0
    return status


@njit(**_FLAGS)
def k_fix(X, dem, V, R, RC, G):
    return _fix(X, dem, V, R, RC, G, 0)


@njit(**_FLAGS)
def k_apply_one(X, dem, V, R, RC, G, CM, J, kind, v, pred, r):
    code = _apply_one(dem, V, R, RC, G, CM, J, kind, v, pred, r)
    _fix(X, dem, V, R, RC, G, 0)
    return code


@njit(**_FLAGS)
def k_apply_change(X, dem, V, R, RC, G, CM, J, acts):
    """Apply all actions or none. Returns 0 on success, else a positive code.

    Codes below 100 are the failing primitive's code plus 10 * its index
    offset; 100 + F_* flags a structural or capacity violation.
    """
    rec = G[REC]
    cache = G[CACHE_ON]
    track = G[TRACK]
    G[REC] = 0
    G[CACHE_ON] = 0
    G[TRACK] = 0
    unrouted = G[UNROUTED]
    m = acts.shape[0]
    result = 0
    done = m
    for k in range(m):
        code = _apply_one(dem, V, R, RC, G, CM, J, acts[k, 0], acts[k, 1], acts[k, 2], acts[k, 3])
        if code != OK:
            result = code
            done = k
            break
    if result == 0:
        status = _fix(X, dem, V, R, RC, G, 1)
        if status == 0 and G[UNROUTED] != unrouted:
            status = F_UNROUTED
        if status != 0:
            result = 100 + status
    if result != 0:
        for k in range(done - 1, -1, -1):
            _apply_inverse(dem, V, R, RC, G, CM, J, acts[k, 0], acts[k, 1], acts[k, 2], acts[k, 3])
        _fix(X, dem, V, R, RC, G, 0)
    G[REC] = rec
    G[CACHE_ON] = cache
    G[TRACK] = track
    return result


@njit(**_FLAGS)
def k_revert(X, dem, V, R, RC, G, CM, J, acts):
    """Apply inverse actions in reverse order. Returns the first failing code or 0."""
    rec = G[REC]
    cache = G[CACHE_ON]
    track = G[TRACK]
    G[REC] = 0
    G[CACHE_ON] = 0
    G[TRACK] = 0
    result = 0
    for k in range(acts.shape[0] - 1, -1, -1):
        code = _apply_inverse(dem, V, R, RC, G, CM, J, acts[k, 0], acts[k, 1], acts[k, 2], acts[k, 3])
        if code != OK and result == 0:
            result = code
    _fix(X, dem, V, R, RC, G, 0)
    G[REC] = rec
    G[CACHE_ON] = cache
    G[TRACK] = track
    return result


@njit(**_FLAGS)
def k_total_cost(R, RC):
    total = 0.0
    for r in range(R.shape[1]):
        if R[ALIVE, r] != 0:
            total += RC[r]
    return total


@njit(**_FLAGS)
def _free_route(R):
    for r in range(R.shape[1]):
        if R[ALIVE, r] == 0:
            return r
    return -1


@njit(**_FLAGS)
def k_shake(X, dem, V, R, RC, G, CM, J, seed, draws, nbr, n_gs, out):
    """Random-walk ruin starting at ``seed``; returns the number of removed customers."""
    cur = seed
    count = 0
    steps = draws.shape[0] + 1
    for step in range(steps):
        r = V[RID, cur]
        _remove(dem, V, R, G, CM, J, cur, V[PRV, cur], r)
        if R[SIZE, r] == 0:
            _delete(R, RC, G, J, r)
        out[count] = cur
        count += 1
        if step == steps - 1:
            break
        # the first n_gs routed customers in cur's list are the candidates
        cands = 0
        row = nbr[cur]
        for k in range(row.shape[0]):
            w = row[k]
            if w != 0 and V[RID, w] >= 0:
                cands += 1
                if cands == n_gs:
                    break
        if cands == 0:
            break
        pick = int(draws[step] * cands)
        if pick >= cands:
            pick = cands - 1
        seen = 0
        for k in range(row.shape[0]):
            w = row[k]
            if w != 0 and V[RID, w] >= 0:
                if seen == pick:
                    cur = w
                    break
                seen += 1
    _fix(X, dem, V, R, RC, G, 0)
    return count


@njit(**_FLAGS)
def _best_insertion(X, dem, V, R, G, v):
    """Cheapest feasible insertion of v in existing routes: (route, pred, delta).

    Ties go to the lowest route id, then the earliest position.
    """
    ew = G[EW]
    best_r = -1
    best_p = -1
    best_d = np.inf
    q = dem[v]
    for r in range(R.shape[1]):
        if R[ALIVE, r] == 0 or R[LOAD, r] + q > G[Q]:
            continue
        prev = 0
        cur = R[FIRST, r]
        while True:
            d = dist(X, ew, prev, v) + dist(X, ew, v, cur) - dist(X, ew, prev, cur)
            if d < best_d:
                best_d = d
                best_r = r
                best_p = prev
            if cur == 0:
                break
            prev = cur
            cur = V[NXT, cur]
    return best_r, best_p, best_d


@njit(**_FLAGS)
def k_best_insertion(X, dem, V, R, G, v):
    return _best_insertion(X, dem, V, R, G, v)


@njit(**_FLAGS)
def k_recreate(X, dem, V, R, RC, G, CM, J, order):
    """Insert each customer of ``order`` at its cheapest position or in a new route."""
    ew = G[EW]
    for k in range(order.shape[0]):
        v = order[k]
        r, p, d = _best_insertion(X, dem, V, R, G, v)
        if r < 0 or 2.0 * dist(X, ew, 0, v) < d:
            r = _free_route(R)
            _create(R, RC, G, J, r)
            p = 0
        _insert(dem, V, R, G, CM, J, v, p, r)
        _fix(X, dem, V, R, RC, G, 0)


@njit(**_FLAGS)
def k_singleton(X, dem, V, R, RC, G, CM, J, v):
    r = _free_route(R)
    _create(R, RC, G, J, r)
    _insert(dem, V, R, G, CM, J, v, 0, r)
    _fix(X, dem, V, R, RC, G, 0)
    return r


# ---------------------------------------------------------------- local search


@njit(**_FLAGS)
def _ev_relocate(X, dem, V, R, G, x, y, bd, mv):
    rx = V[RID, x]
    ry = V[RID, y]
    if rx != ry and R[LOAD, ry] + dem[x] > G[Q]:
        return bd
    ew = G[EW]
    px = V[PRV, x]
    nx = V[NXT, x]
    rem = dist(X, ew, px, nx) - dist(X, ew, px, x) - dist(X, ew, x, nx)
    py = V[PRV, y]
    if py != x:
        d = rem + dist(X, ew, py, x) + dist(X, ew, x, y) - dist(X, ew, py, y)
        if d < bd:
            bd = d
            mv[0] = OP_RELOCATE
            mv[1] = x
            mv[2] = y
            mv[3] = 0
    if px != y:
        ny = V[NXT, y]
        d = rem + dist(X, ew, y, x) + dist(X, ew, x, ny) - dist(X, ew, y, ny)
        if d < bd:
            bd = d
            mv[0] = OP_RELOCATE
            mv[1] = x
            mv[2] = y
            mv[3] = 1
    return bd


@njit(**_FLAGS)
def _swap_delta(X, V, ew, a, b):
    pa = V[PRV, a]
    na = V[NXT, a]
    pb = V[PRV, b]
    nb = V[NXT, b]
    if na == b and V[RID, a] == V[RID, b]:
        return dist(X, ew, pa, b) + dist(X, ew, a, nb) - dist(X, ew, pa, a) - dist(X, ew, b, nb)
    if nb == a and V[RID, a] == V[RID, b]:
        return dist(X, ew, pb, a) + dist(X, ew, b, na) - dist(X, ew, pb, b) - dist(X, ew, a, na)
    return (
        dist(X, ew, pa, b) + dist(X, ew, b, na) + dist(X, ew, pb, a) + dist(X, ew, a, nb)
        - dist(X, ew, pa, a) - dist(X, ew, a, na) - dist(X, ew, pb, b) - dist(X, ew, b, nb)
    )


@njit(**_FLAGS)
def _ev_swap(X, dem, V, R, G, x, y, bd, mv):
    ew = G[EW]
    for side in range(2):
        t = V[NXT, y] if side == 0 else V[PRV, y]
        if t == 0 or t == x:
            continue
        rx = V[RID, x]
        rt = V[RID, t]
        if rx != rt:
            if R[LOAD, rx] - dem[x] + dem[t] > G[Q] or R[LOAD, rt] - dem[t] + dem[x] > G[Q]:
                continue
        d = _swap_delta(X, V, ew, x, t)
        if d < bd:
            bd = d
            mv[0] = OP_SWAP
            mv[1] = x
            mv[2] = t
    return bd


@njit(**_FLAGS)
def _ev_two_opt(X, dem, V, R, G, x, y, bd, mv):
    ew = G[EW]
    rx = V[RID, x]
    ry = V[RID, y]
    if rx == ry:
        a, b = (x, y) if V[POS, x] < V[POS, y] else (y, x)
        na = V[NXT, a]
        if na != b:
            nb = V[NXT, b]
            d = dist(X, ew, a, b) + dist(X, ew, na, nb) - dist(X, ew, a, na) - dist(X, ew, b, nb)
            if d < bd:
                bd = d
                mv[0] = OP_TWO_OPT
                mv[1] = 0
                mv[2] = na
                mv[3] = b
        pa = V[PRV, a]
        pb = V[PRV, b]
        if pb != a:
            d = dist(X, ew, pa, pb) + dist(X, ew, a, b) - dist(X, ew, pa, a) - dist(X, ew, pb, b)
            if d < bd:
                bd = d
                mv[0] = OP_TWO_OPT
                mv[1] = 0
                mv[2] = a
                mv[3] = pb
        return bd
    Qc = G[Q]
    lx = R[LOAD, rx]
    ly = R[LOAD, ry]
    px = V[PRV, x]
    nx = V[NXT, x]
    py = V[PRV, y]
    ny = V[NXT, y]
    cxy = dist(X, ew, x, y)
    # tails: A x | B and C | y D  ->  A x y D and C B
    if V[PLOAD, x] + ly - V[PLOAD, py] <= Qc and V[PLOAD, py] + lx - V[PLOAD, x] <= Qc:
        d = cxy + dist(X, ew, py, nx) - dist(X, ew, x, nx) - dist(X, ew, py, y)
        if d < bd:
            bd = d
            mv[0] = OP_TWO_OPT
            mv[1] = 1
            mv[2] = x
            mv[3] = y
    # tails with roles exchanged: C y | D and A | x B  ->  C y x B and A D
    if V[PLOAD, y] + lx - V[PLOAD, px] <= Qc and V[PLOAD, px] + ly - V[PLOAD, y] <= Qc:
        d = cxy + dist(X, ew, px, ny) - dist(X, ew, y, ny) - dist(X, ew, px, x)
        if d < bd:
            bd = d
            mv[0] = OP_TWO_OPT
            mv[1] = 1
            mv[2] = y
            mv[3] = x
    # heads joined through (x, y), tails through (nx, ny)
    if V[PLOAD, x] + V[PLOAD, y] <= Qc and lx - V[PLOAD, x] + ly - V[PLOAD, y] <= Qc:
        d = cxy + dist(X, ew, nx, ny) - dist(X, ew, x, nx) - dist(X, ew, y, ny)
        if d < bd:
            bd = d
            mv[0] = OP_TWO_OPT
            mv[1] = 2
            mv[2] = x
            mv[3] = y
    # tails joined through (x, y), heads through (px, py)
    lpx = V[PLOAD, px]
    lpy = V[PLOAD, py]
    if lpx + lpy <= Qc and lx - lpx + ly - lpy <= Qc:
        d = cxy + dist(X, ew, px, py) - dist(X, ew, px, x) - dist(X, ew, py, y)
        if d < bd:
            bd = d
            mv[0] = OP_TWO_OPT
            mv[1] = 3
            mv[2] = x
            mv[3] = y
    return bd


@njit(**_FLAGS)
def _ev_cross(X, dem, V, R, G, x, y, bd, mv):
    rx = V[RID, x]
    ry = V[RID, y]
    if rx == ry:
        return bd
    ew = G[EW]
    Qc = G[Q]
    lx = R[LOAD, rx]
    ly = R[LOAD, ry]
    p = V[PRV, y]
    cxy = dist(X, ew, x, y)
    base_b = dist(X, ew, p, y)
    for la in range(4):
        # a_end: last vertex of the segment after x (x itself when la == 0)
        a_end = x
        ok = True
        for _ in range(la):
            a_end = V[NXT, a_end]
            if a_end == 0:
                ok = False
                break
        if not ok:
            break
        xn = V[NXT, a_end]
        sum_a = V[PLOAD, a_end] - V[PLOAD, x]
        a1 = V[NXT, x]
        b_end = y
        for lb in range(1, 4):
            if lb > 1:
                b_end = V[NXT, b_end]
                if b_end == 0:
                    break
            if la == 0 and lb == 1:
                continue
            sum_b = V[PLOAD, b_end] - V[PLOAD, p]
            if lx - sum_a + sum_b > Qc or ly - sum_b + sum_a > Qc:
                continue
            yn = V[NXT, b_end]
            if la > 0:
                d = (
                    cxy + dist(X, ew, b_end, xn) + dist(X, ew, p, a1) + dist(X, ew, a_end, yn)
                    - dist(X, ew, x, a1) - dist(X, ew, a_end, xn) - base_b - dist(X, ew, b_end, yn)
                )
            else:
                d = (
                    cxy + dist(X, ew, b_end, xn) + dist(X, ew, p, yn)
                    - dist(X, ew, x, xn) - base_b - dist(X, ew, b_end, yn)
                )
            if d < bd:
                bd = d
                mv[0] = OP_CROSS
                mv[1] = x
                mv[2] = y
                mv[3] = la
                mv[4] = lb
    return bd


@njit(**_FLAGS)
def _ins_delta(X, V, ew, v, k, after):
    if after == 0:
        pk = V[PRV, k]
        return dist(X, ew, pk, v) + dist(X, ew, v, k) - dist(X, ew, pk, k)
    nk = V[NXT, k]
    return dist(X, ew, k, v) + dist(X, ew, v, nk) - dist(X, ew, k, nk)


@njit(**_FLAGS)
def _rep_delta(X, V, ew, v, old):
    """Cost change when v takes old's place (v outside old's route)."""
    p = V[PRV, old]
    s = V[NXT, old]
    return dist(X, ew, p, v) + dist(X, ew, v, s) - dist(X, ew, p, old) - dist(X, ew, old, s)


@njit(**_FLAGS)
def _ev_ejection(X, dem, V, R, G, gens, active, x, y, bd, mv):
    rx = V[RID, x]
    ry = V[RID, y]
    Qc = G[Q]
    if rx == ry or R[LOAD, ry] + dem[x] <= Qc:
        return bd
    ew = G[EW]
    px = V[PRV, x]
    nx = V[NXT, x]
    remx = dist(X, ew, px, nx) - dist(X, ew, px, x) - dist(X, ew, x, nx)
    for s2 in range(2):
        v2 = V[PRV, y] if s2 == 0 else V[NXT, y]
        if v2 == 0 or R[LOAD, ry] + dem[x] - dem[v2] > Qc:
            continue
        g1 = remx + _rep_delta(X, V, ew, x, v2)
        if g1 >= bd:
            continue
        for k2 in range(active[v2]):
            k = gens[v2, k2]
            if k == 0:
                continue
            r3 = V[RID, k]
            if r3 < 0 or r3 == rx or r3 == ry:
                continue
            if R[LOAD, r3] + dem[v2] <= Qc:
                for after in range(2):
                    d = g1 + _ins_delta(X, V, ew, v2, k, after)
                    if d < bd:
                        bd = d
                        mv[0] = OP_EJECTION
                        mv[1] = x
                        mv[2] = v2
                        mv[3] = k
                        mv[4] = after
                        mv[5] = -1
                continue
            for s3 in range(2):
                v3 = V[PRV, k] if s3 == 0 else V[NXT, k]
                if v3 == 0 or R[LOAD, r3] + dem[v2] - dem[v3] > Qc:
                    continue
                g2 = g1 + _rep_delta(X, V, ew, v2, v3)
                if g2 >= bd:
                    continue
                for k3 in range(active[v3]):
                    m = gens[v3, k3]
                    if m == 0:
                        continue
                    r4 = V[RID, m]
                    if r4 < 0 or r4 == rx or r4 == ry or r4 == r3 or R[LOAD, r4] + dem[v3] > Qc:
                        continue
                    for after in range(2):
                        d = g2 + _ins_delta(X, V, ew, v3, m, after)
                        if d < bd:
                            bd = d
                            mv[0] = OP_EJECTION
                            mv[1] = x
                            mv[2] = v2
                            mv[3] = k
                            mv[4] = 2
                            mv[5] = v3
                            mv[6] = m
                            mv[7] = after
    return bd


@njit(**_FLAGS)
def _reverse(dem, V, R, G, CM, J, s, e):
    """Reverse the route segment s..e (s precedes e)."""
    r = V[RID, s]
    a = V[PRV, s]
    seg = []
    v = s
    while True:
        seg.append(v)
        if v == e:
            break
        v = V[NXT, v]
    for v in seg:
        _remove(dem, V, R, G, CM, J, v, a, r)
    pred = a
    for k in range(len(seg) - 1, -1, -1):
        _insert(dem, V, R, G, CM, J, seg[k], pred, r)
        pred = seg[k]


@njit(**_FLAGS)
def _chain_after(V, v):
    out = []
    w = V[NXT, v]
    while w != 0:
        out.append(w)
        w = V[NXT, w]
    return out


@njit(**_FLAGS)
def _chain_from(V, v):
    out = []
    while v != 0:
        out.append(v)
        v = V[NXT, v]
    return out


@njit(**_FLAGS)
def _chain_from_first(V, R, r, last):
    """Customers of route r from the first one up to and including ``last``."""
    out = []
    if last == 0:
        return out
    w = R[FIRST, r]
    while True:
        out.append(w)
        if w == last:
            break
        w = V[NXT, w]
    return out


@njit(**_FLAGS)
def _drop_if_empty(R, RC, G, J, r):
    if R[ALIVE, r] != 0 and R[SIZE, r] == 0:
        _delete(R, RC, G, J, r)


@njit(**_FLAGS)
def _apply_move(dem, V, R, RC, G, CM, J, mv):
    op = mv[0]
    if op == OP_RELOCATE:
        x = mv[1]
        y = mv[2]
        rx = V[RID, x]
        ry = V[RID, y]
        _remove(dem, V, R, G, CM, J, x, V[PRV, x], rx)
        pred = V[PRV, y] if mv[3] == 0 else y
        _insert(dem, V, R, G, CM, J, x, pred, ry)
        _drop_if_empty(R, RC, G, J, rx)
    elif op == OP_SWAP:
        a = mv[1]
        b = mv[2]
        ra = V[RID, a]
        rb = V[RID, b]
        if ra == rb and V[NXT, b] == a:
            a, b = b, a
        if ra == rb and V[NXT, a] == b:
            pa = V[PRV, a]
            _remove(dem, V, R, G, CM, J, b, a, ra)
            _remove(dem, V, R, G, CM, J, a, pa, ra)
            _insert(dem, V, R, G, CM, J, b, pa, ra)
            _insert(dem, V, R, G, CM, J, a, b, ra)
        else:
            pa = V[PRV, a]
            pb = V[PRV, b]
            _remove(dem, V, R, G, CM, J, a, pa, ra)
            _remove(dem, V, R, G, CM, J, b, pb, rb)
            _insert(dem, V, R, G, CM, J, b, pa, ra)
            _insert(dem, V, R, G, CM, J, a, pb, rb)
    elif op == OP_TWO_OPT:
        kind = mv[1]
        if kind == 0:
            _reverse(dem, V, R, G, CM, J, mv[2], mv[3])
        elif kind == 1:
            # A x | B and C | y D  ->  A x y D and C B
            x = mv[2]
            y = mv[3]
            rx = V[RID, x]
            ry = V[RID, y]
            py = V[PRV, y]
            b_seg = _chain_after(V, x)
            d_seg = _chain_from(V, y)
            for v in b_seg:
                _remove(dem, V, R, G, CM, J, v, x, rx)
            for v in d_seg:
                _remove(dem, V, R, G, CM, J, v, py, ry)
            pred = x
            for v in d_seg:
                _insert(dem, V, R, G, CM, J, v, pred, rx)
                pred = v
            pred = py
            for v in b_seg:
                _insert(dem, V, R, G, CM, J, v, pred, ry)
                pred = v
            _drop_if_empty(R, RC, G, J, ry)
        elif kind == 2:
            # A x | B and C y | D  ->  A x y rev(C) and rev(B) D
            x = mv[2]
            y = mv[3]
            rx = V[RID, x]
            ry = V[RID, y]
            b_seg = _chain_after(V, x)
            c_seg = _chain_from_first(V, R, ry, y)
            for v in b_seg:
                _remove(dem, V, R, G, CM, J, v, x, rx)
            for v in c_seg:
                _remove(dem, V, R, G, CM, J, v, 0, ry)
            pred = x
            for k in range(len(c_seg) - 1, -1, -1):
                _insert(dem, V, R, G, CM, J, c_seg[k], pred, rx)
                pred = c_seg[k]
            pred = 0
            for k in range(len(b_seg) - 1, -1, -1):
                _insert(dem, V, R, G, CM, J, b_seg[k], pred, ry)
                pred = b_seg[k]
            _drop_if_empty(R, RC, G, J, ry)
        else:
            # A | x B and C | y D  ->  A rev(C) and rev(B) y D
            x = mv[2]
            y = mv[3]
            rx = V[RID, x]
            ry = V[RID, y]
            px = V[PRV, x]
            py = V[PRV, y]
            b_seg = _chain_from(V, x)
            c_seg = _chain_from_first(V, R, ry, py)
            for v in b_seg:
                _remove(dem, V, R, G, CM, J, v, px, rx)
            for v in c_seg:
                _remove(dem, V, R, G, CM, J, v, 0, ry)
            pred = px
            for k in range(len(c_seg) - 1, -1, -1):
                _insert(dem, V, R, G, CM, J, c_seg[k], pred, rx)
                pred = c_seg[k]
            pred = 0
            for k in range(len(b_seg) - 1, -1, -1):
                _insert(dem, V, R, G, CM, J, b_seg[k], pred, ry)
                pred = b_seg[k]
            _drop_if_empty(R, RC, G, J, rx)
    elif op == OP_CROSS:
        x = mv[1]
        y = mv[2]
        la = mv[3]
        lb = mv[4]
        rx = V[RID, x]
        ry = V[RID, y]
        p = V[PRV, y]
        a_seg = []
        w = x
        for _ in range(la):
            w = V[NXT, w]
            a_seg.append(w)
        b_seg = []
        w = y
        for _ in range(lb):
            b_seg.append(w)
            w = V[NXT, w]
        for v in a_seg:
            _remove(dem, V, R, G, CM, J, v, x, rx)
        for v in b_seg:
            _remove(dem, V, R, G, CM, J, v, p, ry)
        pred = x
        for v in b_seg:
            _insert(dem, V, R, G, CM, J, v, pred, rx)
            pred = v
        pred = p
        for v in a_seg:
            _insert(dem, V, R, G, CM, J, v, pred, ry)
            pred = v
        _drop_if_empty(R, RC, G, J, ry)
    else:
        x = mv[1]
        v2 = mv[2]
        k = mv[3]
        rx = V[RID, x]
        ry = V[RID, v2]
        r3 = V[RID, k]
        _remove(dem, V, R, G, CM, J, x, V[PRV, x], rx)
        p2 = V[PRV, v2]
        _remove(dem, V, R, G, CM, J, v2, p2, ry)
        _insert(dem, V, R, G, CM, J, x, p2, ry)
        if mv[4] < 2:
            pred = V[PRV, k] if mv[4] == 0 else k
            _insert(dem, V, R, G, CM, J, v2, pred, r3)
        else:
            v3 = mv[5]
            m = mv[6]
            r4 = V[RID, m]
            p3 = V[PRV, v3]
            _remove(dem, V, R, G, CM, J, v3, p3, r3)
            _insert(dem, V, R, G, CM, J, v2, p3, r3)
            pred = V[PRV, m] if mv[7] == 0 else m
            _insert(dem, V, R, G, CM, J, v3, pred, r4)
        _drop_if_empty(R, RC, G, J, rx)


@njit(**_FLAGS)
def _scan(X, dem, V, R, G, CM, gens, active, op, bd, mv):
    for slot in range(G[CSIZE]):
        i = CM[slot]
        if V[RID, i] < 0:
            continue
        for k in range(active[i]):
            j = gens[i, k]
            if j == 0 or V[RID, j] < 0:
                continue
            for d in range(2):
                x = i if d == 0 else j
                y = j if d == 0 else i
                if op == OP_RELOCATE:
                    bd = _ev_relocate(X, dem, V, R, G, x, y, bd, mv)
                elif op == OP_SWAP:
                    bd = _ev_swap(X, dem, V, R, G, x, y, bd, mv)
                elif op == OP_TWO_OPT:
                    bd = _ev_two_opt(X, dem, V, R, G, x, y, bd, mv)
                elif op == OP_CROSS:
                    bd = _ev_cross(X, dem, V, R, G, x, y, bd, mv)
                else:
                    bd = _ev_ejection(X, dem, V, R, G, gens, active, x, y, bd, mv)
    return bd


@njit(**_FLAGS)
def k_local_search(X, dem, V, R, RC, G, CM, J, gens, active, op_start, n_ops, eps, margin, check, stats, marks):
    """Variable neighborhood descent seeded from cached vertices.

    Returns the number of moves applied in this call, or ``-1 - op`` when the
    journal needs more room before the scan of ``op`` can continue. ``stats``
    accumulates [total improvement, violations seen in check mode, moves].
    In check mode the journal length after each move is appended to
    ``marks`` (count in ``marks[0]``) while room remains.
    """
    mv = np.zeros(8, dtype=np.int64)
    op = op_start
    moves = 0
    while op < n_ops:
        if G[REC] != 0 and J.shape[0] - G[JLEN] < margin:
            return -1 - op
        for t in range(8):
            mv[t] = 0
        bd = _scan(X, dem, V, R, G, CM, gens, active, op, -eps, mv)
        if bd < -eps:
            before = k_total_cost(R, RC)
            _apply_move(dem, V, R, RC, G, CM, J, mv)
            _fix(X, dem, V, R, RC, G, 0)
            stats[0] += before - k_total_cost(R, RC)
            stats[2] += 1
            if check != 0:
                for r in range(R.shape[1]):
                    if R[ALIVE, r] != 0 and (R[SIZE, r] == 0 or R[LOAD, r] > G[Q]):
                        stats[1] += 1
                if marks[0] + 1 < marks.shape[0]:
                    marks[marks[0] + 1] = G[JLEN]
                    marks[0] += 1
            moves += 1
            op = 0
        else:
            op += 1
    return moves
