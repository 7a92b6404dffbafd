"""Granular local search driven by move generators and the vertex cache."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .instance import Instance, NeighborLists, edge_cost
from .solution import Action, Solution, array_to_actions

OPERATORS = ("relocate", "swap", "two_opt", "cross", "ejection_chain")
IMPROVEMENT_EPS = 1e-7


class InsufficientNeighbors(ValueError):
    pass


@dataclass(frozen=True)
class MoveGeneratorSet:
    """Row i lists the generator arcs (i, j), nearest j first."""

    n_gs: int
    arcs: np.ndarray  # int64 [n, min(n_gs, n - 1)]

    def prefix_length(self, gamma: float, gamma_base: float) -> int:
        g = max(gamma, gamma_base)
        return min(self.arcs.shape[1], math.ceil(self.n_gs * g - 1e-12))

    def mean_arc_cost(self, inst: Instance) -> float:
        costs = [edge_cost(inst, i, int(j)) for i in range(inst.n) for j in self.arcs[i]]
        return float(np.mean(costs)) if costs else 0.0


def init_move_generators(inst: Instance, neighbors: NeighborLists, n_gs: int) -> MoveGeneratorSet:
    have = neighbors.lists.shape[1]
    if n_gs > have and have < inst.n - 1:
        raise InsufficientNeighbors(f"n_gs={n_gs} exceeds neighbor list length {have}")
    arcs = np.ascontiguousarray(neighbors.lists[:, : min(n_gs, have)])
    arcs.setflags(write=False)
    return MoveGeneratorSet(n_gs, arcs)


class Sparsification:
    """Per-vertex sparsification factors and non-improving counters."""

    def __init__(self, gens: MoveGeneratorSet, gamma_base: float, lam: float, threshold: int):
        n = gens.arcs.shape[0]
        self.gens = gens
        self.gamma_base = gamma_base
        self.lam = lam
        self.threshold = threshold
        self.gamma = np.full(n, gamma_base, dtype=np.float64)
        self.counter = np.zeros(n, dtype=np.int64)
        self.active = np.full(n, gens.prefix_length(gamma_base, gamma_base), dtype=np.int64)

    def _refresh(self, vs: np.ndarray) -> None:
        want = np.ceil(self.gens.n_gs * self.gamma[vs] - 1e-12).astype(np.int64)
        self.active[vs] = np.minimum(want, self.gens.arcs.shape[1])

    def copy(self) -> "Sparsification":
        out = Sparsification.__new__(Sparsification)
        out.__dict__.update(self.__dict__)
        out.gamma = self.gamma.copy()
        out.counter = self.counter.copy()
        out.active = self.active.copy()
        return out


def update_sparsification(spars: Sparsification, touched, improved_best: bool) -> None:
    vs = np.asarray(touched, dtype=np.int64)
    if len(vs) == 0:
        return
    if improved_best:
        spars.gamma[vs] = spars.gamma_base
        spars.counter[vs] = 0
    else:
        spars.counter[vs] += 1
        hot = vs[spars.counter[vs] > spars.threshold]
        if len(hot):
            spars.gamma[hot] = np.minimum(spars.gamma[hot] * spars.lam, 1.0)
            spars.counter[hot] = 0
    spars._refresh(vs)


def run_local_search(
    sol: Solution, gens: MoveGeneratorSet, active: np.ndarray, check: bool = False, stats: np.ndarray | None = None,
    n_ops: int = K.N_OPS, marks: np.ndarray | None = None,
) -> int:
    """Descend until no operator improves; returns the number of applied moves.

    With ``check`` and a ``marks`` buffer, the journal offset after every move is recorded.
    """
    stats = np.zeros(3) if stats is None else stats
    marks = np.zeros(1, dtype=np.int64) if marks is None else marks
    moves0 = stats[2]
    margin = 4 * sol.n + 64
    op = 0
    while True:
        rc = K.k_local_search(
            sol.X, sol.dem, sol.V, sol.R, sol.RC, sol.G, sol.CM, sol.J,
            gens.arcs, active, op, n_ops, IMPROVEMENT_EPS, margin, int(check), stats, marks,
        )
        if rc >= 0:
            return int(stats[2] - moves0)
        op = -1 - rc
        grown = np.zeros((2 * len(sol.J) + margin, 4), dtype=np.int64)
        grown[: len(sol.J)] = sol.J
        sol.J = grown


def begin_recording(sol: Solution) -> None:
    """Start a fresh journal and touched-vertex epoch."""
    sol.G[K.REC] = 1
    sol.G[K.TRACK] = 1
    sol.G[K.JLEN] = 0
    sol.G[K.TLEN] = 0
    sol.G[K.TEPOCH] += 1


def end_recording(sol: Solution) -> tuple[np.ndarray, np.ndarray]:
    """Stop recording; returns (actions, touched vertices)."""
    acts = sol.J[: sol.G[K.JLEN]].copy()
    touched = sol.V[K.TLIST, : sol.G[K.TLEN]].copy()
    sol.G[K.REC] = 0
    sol.G[K.TRACK] = 0
    sol.G[K.JLEN] = 0
    return acts, touched


def vnd_descend(
    sol: Solution, gens: MoveGeneratorSet, spars: Sparsification | np.ndarray | None = None, rng=None
) -> tuple[list[Action], bool, set[int]]:
    """Local search from the current cache; ``rng`` is unused (the descent is deterministic)."""
    if spars is None:
        active = np.full(sol.n, gens.arcs.shape[1], dtype=np.int64)
    elif isinstance(spars, Sparsification):
        active = spars.active
    else:
        active = np.asarray(spars, dtype=np.int64)
    sol.G[K.CACHE_ON] = 1
    begin_recording(sol)
    moves = run_local_search(sol, gens, active)
    acts, touched = end_recording(sol)
    return array_to_actions(acts), moves > 0, {int(v) for v in touched}
