"""Solver parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

STANDARD_ITERATIONS = 100_000
LONG_ITERATIONS = 1_000_000


@dataclass(frozen=True)
class SolverParams:
    n_nn: int = 1500
    cache_capacity: int = 50
    n_cw: int = 100
    delta_rm: int = 1000
    n_gs: int = 25
    gamma_base: float = 0.25
    delta: float = 0.5
    lam: float = 2.0
    delta_co: int = STANDARD_ITERATIONS
    omega_base: int | None = None  # None: ceil(ln |V|)
    omega_max: int | None = None  # None: ceil(3 ln |V|)
    omega_min: int = 1
    eps_sim: float = 0.02
    eps_bad: float = 0.10
    t0_factor: float = 0.1
    tf_factor: float = 0.01
    nonimproving_threshold: int | None = None  # None: ceil(delta * 100)
    routemin_decay: float = 0.9
    solvers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma_base <= 1:
            raise ValueError("gamma_base must lie in (0, 1]")
        if not self.lam > 1:
            raise ValueError("lam must exceed 1")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        counts = (self.n_nn, self.cache_capacity, self.n_cw, self.n_gs, self.solvers, self.omega_min)
        if any(c < 1 for c in counts):
            raise ValueError("counts must be positive")
        if self.delta_rm < 0 or self.delta_co < 0:
            raise ValueError("iteration budgets must be non-negative")
        if not 0 < self.tf_factor <= 1 or self.t0_factor <= 0:
            raise ValueError("temperature factors must be positive with tf_factor <= 1")

    def with_(self, **kw) -> "SolverParams":
        return replace(self, **kw)

    def omega_base_for(self, n_vertices: int) -> int:
        if self.omega_base is not None:
            return self.omega_base
        return max(self.omega_min, math.ceil(math.log(n_vertices)))

    def omega_max_for(self, n_vertices: int) -> int:
        if self.omega_max is not None:
            return self.omega_max
        return max(self.omega_base_for(n_vertices), math.ceil(3 * math.log(n_vertices)))

    @property
    def threshold(self) -> int:
        if self.nonimproving_threshold is not None:
            return self.nonimproving_threshold
        return math.ceil(self.delta * 100)
