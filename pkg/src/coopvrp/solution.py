"""Route-set representation, invertible actions and transactional changes."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels as K
from .instance import Instance


class ProtocolViolation(RuntimeError):
    """A change was undone out of LIFO order or arrived out of sequence."""


class ActionKind(enum.IntEnum):
    INSERT_AFTER = K.INSERT_AFTER
    REMOVE = K.REMOVE
    CREATE_ROUTE = K.CREATE_ROUTE
    DELETE_EMPTY_ROUTE = K.DELETE_EMPTY_ROUTE


_INVERSE = {
    ActionKind.INSERT_AFTER: ActionKind.REMOVE,
    ActionKind.REMOVE: ActionKind.INSERT_AFTER,
    ActionKind.CREATE_ROUTE: ActionKind.DELETE_EMPTY_ROUTE,
    ActionKind.DELETE_EMPTY_ROUTE: ActionKind.CREATE_ROUTE,
}


class Action(NamedTuple):
    """One edit. Vertex edits are anchored to the predecessor (0 = depot)."""

    kind: ActionKind
    v: int = 0
    pred: int = 0
    route: int = 0

    def invert(self) -> "Action":
        return Action(_INVERSE[self.kind], self.v, self.pred, self.route)

    @classmethod
    def insert_after(cls, v: int, pred: int, route: int) -> "Action":
        return cls(ActionKind.INSERT_AFTER, v, pred, route)

    @classmethod
    def remove(cls, v: int, pred: int, route: int) -> "Action":
        return cls(ActionKind.REMOVE, v, pred, route)

    @classmethod
    def create_route(cls, route: int) -> "Action":
        return cls(ActionKind.CREATE_ROUTE, 0, 0, route)

    @classmethod
    def delete_empty_route(cls, route: int) -> "Action":
        return cls(ActionKind.DELETE_EMPTY_ROUTE, 0, 0, route)


class Inapplicable(enum.IntEnum):
    BAD_INDEX = K.E_BAD_INDEX
    VERTEX_ROUTED = K.E_VERTEX_ROUTED
    NOT_IN_ROUTE = K.E_NOT_IN_ROUTE
    ADJACENCY_MISMATCH = K.E_ADJACENCY
    ROUTE_ABSENT = K.E_ROUTE_DEAD
    ROUTE_EXISTS = K.E_ROUTE_ALIVE
    ROUTE_NOT_EMPTY = K.E_ROUTE_NOT_EMPTY
    PRED_NOT_IN_ROUTE = K.E_PRED_NOT_IN_ROUTE


@dataclass(frozen=True)
class ActionResult:
    applied: bool
    reason: Inapplicable | None = None


def actions_to_array(actions: Iterable[Action]) -> np.ndarray:
    rows = [(int(a.kind), a.v, a.pred, a.route) for a in actions]
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def array_to_actions(arr: np.ndarray) -> list[Action]:
    return [Action(ActionKind(int(k)), int(v), int(p), int(r)) for k, v, p, r in arr]


def _frozen(a, dtype=np.int64) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CandidateChange:
    """Immutable action bundle; shared by reference across inboxes."""

    actions: np.ndarray  # int64 [k, 4]
    ruined: np.ndarray = field(default_factory=lambda: _frozen(np.empty(0)))
    touched: np.ndarray = field(default_factory=lambda: _frozen(np.empty(0)))
    generator: int = 0
    sequence_no: int = -1
    delta: float = 0.0
    origin: int = -1  # generator-local serial number

    def __post_init__(self):
        object.__setattr__(self, "actions", _frozen(np.asarray(self.actions).reshape(-1, 4)))
        object.__setattr__(self, "ruined", _frozen(self.ruined))
        object.__setattr__(self, "touched", _frozen(self.touched))

    @classmethod
    def of(cls, actions: Sequence[Action], **kw) -> "CandidateChange":
        return cls(actions_to_array(actions), **kw)

    def action_list(self) -> list[Action]:
        return array_to_actions(self.actions)

    def content_hash(self) -> str:
        h = hashlib.sha256(self.actions.tobytes())
        h.update(self.ruined.tobytes())
        h.update(str(self.generator).encode())
        return h.hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class ChangeResult:
    feasible: bool
    delta: float = 0.0
    code: int = 0


class VertexCache:
    """View of the selective vertex cache stored inside a ``Solution``."""

    def __init__(self, sol: "Solution"):
        self._sol = sol

    @property
    def capacity(self) -> int:
        return int(self._sol.G[K.CCAP])

    def __len__(self) -> int:
        return int(self._sol.G[K.CSIZE])

    def members(self) -> list[int]:
        """Cached vertices, least recently changed first."""
        s = self._sol
        cm = s.CM[: len(self)]
        return [int(v) for v in sorted(cm, key=lambda v: s.V[K.CST, v])]

    def __contains__(self, v: int) -> bool:
        return bool(self._sol.V[K.CPOS, v] >= 0)

    def touch(self, vs: Iterable[int]) -> None:
        s = self._sol
        on = s.G[K.CACHE_ON]
        s.G[K.CACHE_ON] = 1
        K.k_touch_list(s.V, s.G, s.CM, np.asarray(list(vs), dtype=np.int64))
        s.G[K.CACHE_ON] = on

    def clear(self) -> None:
        K.k_clear_cache(self._sol.V, self._sol.G, self._sol.CM)


def cache_touch(cache: VertexCache, vs: Iterable[int]) -> None:
    cache.touch(vs)


class Solution:
    """A (possibly partial) CVRP solution with O(1) structural edits."""

    def __init__(self, inst: Instance, cache_capacity: int = 50, journal_capacity: int | None = None):
        n = inst.n
        self.inst = inst
        self.X = np.ascontiguousarray(inst.coords, dtype=np.float64)
        self.dem = np.ascontiguousarray(inst.demands, dtype=np.int64)
        self.V = np.zeros((9, n), dtype=np.int64)
        self.V[[K.NXT, K.PRV, K.RID, K.POS, K.CPOS], :] = -1
        self.V[[K.NXT, K.PRV, K.RID, K.POS], 0] = 0
        self.V[K.TMARK] = 0
        self.R = np.zeros((7, n), dtype=np.int64)
        self.RC = np.zeros(n, dtype=np.float64)
        self.G = np.zeros(K.G_SIZE, dtype=np.int64)
        self.G[K.Q] = inst.capacity
        self.G[K.EW] = int(inst.edge_weight_kind)
        self.G[K.CCAP] = cache_capacity
        self.G[K.UNROUTED] = n - 1
        self.G[K.TEPOCH] = 1
        self.CM = np.zeros(cache_capacity, dtype=np.int64)
        self.J = np.zeros((journal_capacity or 4 * n + 256, 4), dtype=np.int64)
        self._applied: list[CandidateChange] = []
        self.cache = VertexCache(self)

    # ------------------------------------------------------------ building

    @classmethod
    def from_routes(cls, inst: Instance, routes: Sequence[Sequence[int]], cache_capacity: int = 50) -> "Solution":
        sol = cls(inst, cache_capacity)
        for r, route in enumerate(routes):
            sol._raw(ActionKind.CREATE_ROUTE, 0, 0, r)
            pred = 0
            for v in route:
                sol._raw(ActionKind.INSERT_AFTER, int(v), pred, r)
                pred = int(v)
        K.k_fix(sol.X, sol.dem, sol.V, sol.R, sol.RC, sol.G)
        return sol

    def _raw(self, kind, v, pred, r) -> int:
        code = K._apply_one(self.dem, self.V, self.R, self.RC, self.G, self.CM, self.J, int(kind), v, pred, r)
        if code:
            raise ValueError(f"invalid route data: {Inapplicable(code).name} for vertex {v}")
        return code

    def copy(self) -> "Solution":
        out = Solution.__new__(Solution)
        out.inst = self.inst
        out.X = self.X
        out.dem = self.dem
        out.V = self.V.copy()
        out.R = self.R.copy()
        out.RC = self.RC.copy()
        out.G = self.G.copy()
        out.CM = self.CM.copy()
        out.J = np.zeros_like(self.J)
        out.G[K.JLEN] = 0
        out._applied = []
        out.cache = VertexCache(out)
        return out

    def assign(self, other: "Solution") -> None:
        """Overwrite this solution's structure with another's."""
        np.copyto(self.V, other.V)
        np.copyto(self.R, other.R)
        np.copyto(self.RC, other.RC)
        np.copyto(self.G, other.G)
        np.copyto(self.CM, other.CM)
        self.G[K.JLEN] = 0
        self._applied = []

    # ------------------------------------------------------------- queries

    @property
    def n(self) -> int:
        return self.V.shape[1]

    @property
    def cost(self) -> float:
        return float(K.k_total_cost(self.R, self.RC))

    @property
    def n_routes(self) -> int:
        return int(self.G[K.NROUTES])

    @property
    def n_unrouted(self) -> int:
        return int(self.G[K.UNROUTED])

    def route_ids(self) -> list[int]:
        return [int(r) for r in np.flatnonzero(self.R[K.ALIVE])]

    def route(self, r: int) -> list[int]:
        out = []
        v = int(self.R[K.FIRST, r])
        while v != 0 and len(out) <= self.n:
            out.append(v)
            v = int(self.V[K.NXT, v])
        return out

    def routes(self) -> list[list[int]]:
        return [self.route(r) for r in self.route_ids()]

    def route_of(self, v: int) -> int:
        return int(self.V[K.RID, v])

    def load(self, r: int) -> int:
        return int(self.R[K.LOAD, r])

    def route_cost(self, r: int) -> float:
        return float(self.RC[r])

    def pred(self, v: int) -> int:
        return int(self.V[K.PRV, v])

    def succ(self, v: int) -> int:
        return int(self.V[K.NXT, v])

    def is_routed(self, v: int) -> bool:
        return bool(self.V[K.RID, v] >= 0)

    def unrouted(self) -> list[int]:
        return [int(v) for v in np.flatnonzero(self.V[K.RID, 1:] < 0) + 1]

    def structure(self) -> tuple:
        """Canonical structural description: (route id, customers) pairs."""
        return tuple((r, tuple(self.route(r))) for r in self.route_ids())

    def structural_hash(self) -> str:
        return hashlib.sha256(repr(self.structure()).encode()).hexdigest()

    def state_bytes(self) -> bytes:
        """Every field that defines the solution, for bit-identity checks."""
        v = self.V[[K.NXT, K.PRV, K.RID, K.POS, K.PLOAD]]
        r = self.R[[K.FIRST, K.LAST, K.SIZE, K.LOAD, K.ALIVE]]
        g = self.G[[K.NROUTES, K.UNROUTED]]
        return v.tobytes() + r.tobytes() + self.RC.tobytes() + g.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, Solution) and self.state_bytes() == other.state_bytes()

    __hash__ = None

    # ------------------------------------------------------------- editing

    def apply_action(self, a: Action) -> ActionResult:
        rec = self.G[K.REC]
        self.G[K.REC] = 0
        code = K.k_apply_one(
            self.X, self.dem, self.V, self.R, self.RC, self.G, self.CM, self.J, int(a.kind), a.v, a.pred, a.route
        )
        self.G[K.REC] = rec
        if code:
            return ActionResult(False, Inapplicable(code))
        return ActionResult(True)

    def apply_change(self, ch: CandidateChange) -> ChangeResult:
        """Apply all actions of ``ch`` or none of them."""
        before = self.cost
        code = K.k_apply_change(self.X, self.dem, self.V, self.R, self.RC, self.G, self.CM, self.J, ch.actions)
        if code:
            return ChangeResult(False, 0.0, int(code))
        self._applied.append(ch)
        return ChangeResult(True, self.cost - before)

    def push_applied(self, ch: CandidateChange) -> None:
        """Register a change whose actions were already performed in place."""
        self._applied.append(ch)

    def undo_change(self, ch: CandidateChange) -> None:
        if not self._applied or self._applied[-1] is not ch:
            raise ProtocolViolation("undo_change must target the most recently applied change")
        self._applied.pop()
        code = K.k_revert(self.X, self.dem, self.V, self.R, self.RC, self.G, self.CM, self.J, ch.actions)
        if code:
            raise ProtocolViolation(f"journal inconsistent with solution ({Inapplicable(code).name})")

    def commit(self) -> None:
        """Forget the undo history."""
        self._applied.clear()

    # ------------------------------------------------------------ output

    def to_text(self) -> str:
        lines = [f"Route #{k}: {' '.join(map(str, route))}" for k, route in enumerate(self.routes(), 1)]
        lines.append(f"Cost {format_cost(self.cost)}")
        return "\n".join(lines) + "\n"


def format_cost(c: float) -> str:
    return str(int(c)) if float(c).is_integer() else repr(float(c))


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def full_feasibility_check(sol: Solution, inst: Instance | None = None) -> FeasibilityReport:
    """O(|V|) audit of coverage, links, loads and stored aggregates."""
    inst = inst or sol.inst
    n = inst.n
    out: list[str] = []
    seen = np.zeros(n, dtype=np.int64)
    n_alive = 0
    for r in range(n):
        if not sol.R[K.ALIVE, r]:
            continue
        n_alive += 1
        prev, v, steps, load, cost = 0, int(sol.R[K.FIRST, r]), 0, 0, 0.0
        while v != 0 and steps <= n:
            if v < 0 or v >= n:
                out.append(f"BrokenCycle: route {r} links to {v}")
                break
            if int(sol.V[K.PRV, v]) != prev or int(sol.V[K.RID, v]) != r:
                out.append(f"BrokenCycle: route {r} at vertex {v}")
            seen[v] += 1
            steps += 1
            load += int(inst.demands[v])
            cost += inst.cost(prev, v)
            prev, v = v, int(sol.V[K.NXT, v])
        cost += inst.cost(prev, 0)
        if v != 0:
            out.append(f"BrokenCycle: route {r} does not return to the depot")
        if steps != sol.R[K.SIZE, r] or prev != sol.R[K.LAST, r]:
            out.append(f"BrokenCycle: route {r} size or tail mismatch")
        if steps == 0:
            out.append(f"EmptyRoute: route {r}")
        if load != sol.R[K.LOAD, r]:
            out.append(f"AggregateMismatch: route {r} load {sol.R[K.LOAD, r]} != {load}")
        if abs(cost - sol.RC[r]) > 1e-6:
            out.append(f"AggregateMismatch: route {r} cost {sol.RC[r]} != {cost}")
        if load > inst.capacity:
            out.append(f"CapacityExceeded: route {r} load {load} > {inst.capacity}")
    for v in range(1, n):
        if seen[v] == 0:
            out.append(f"Unvisited: {v}")
        elif seen[v] > 1:
            out.append(f"DuplicateVisit: {v}")
    if n_alive != sol.G[K.NROUTES]:
        out.append("AggregateMismatch: route count")
    return FeasibilityReport(tuple(out))
