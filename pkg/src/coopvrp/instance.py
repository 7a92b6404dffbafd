"""CVRPLIB parsing, on-demand edge costs and kd-tree neighbor lists."""

from __future__ import annotations

import enum
import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np


class ParseError(ValueError):
    """Base class for malformed instance files."""


class MissingSection(ParseError):
    pass


class DimensionMismatch(ParseError):
    pass


class UnsupportedEdgeWeightType(ParseError):
    pass


class DemandExceedsCapacity(ParseError):
    pass


class EdgeWeightKind(enum.IntEnum):
    """Integer codes are shared with the compiled kernels."""

    ROUNDED = 0
    EXACT = 1
    FLOOR = 2


_EDGE_KEYWORDS = {
    "EUC_2D": EdgeWeightKind.ROUNDED,
    "EXACT_2D": EdgeWeightKind.EXACT,
    "FLOOR_2D": EdgeWeightKind.FLOOR,
}


@dataclass(frozen=True)
class Instance:
    """Immutable CVRP data; vertex 0 is the depot."""

    name: str
    coords: np.ndarray  # float64 [n, 2]
    demands: np.ndarray  # int64 [n]
    capacity: int
    edge_weight_kind: EdgeWeightKind = EdgeWeightKind.ROUNDED

    def __post_init__(self):
        n = len(self.coords)
        if n < 2:
            raise ParseError("an instance needs a depot and at least one customer")
        if len(self.demands) != n:
            raise DimensionMismatch(f"{len(self.demands)} demands for {n} vertices")
        if self.capacity <= 0:
            raise ParseError("capacity must be positive")
        if self.demands[0] != 0:
            raise ParseError("depot demand must be zero")
        if (self.demands < 0).any():
            raise ParseError("negative demand")
        worst = int(self.demands.max())
        if worst > self.capacity:
            raise DemandExceedsCapacity(f"demand {worst} exceeds capacity {self.capacity}")
        self.coords.setflags(write=False)
        self.demands.setflags(write=False)

    @property
    def n(self) -> int:
        """Number of vertices including the depot."""
        return len(self.coords)

    @property
    def n_customers(self) -> int:
        return len(self.coords) - 1

    def with_kind(self, kind: EdgeWeightKind) -> "Instance":
        return Instance(self.name, self.coords.copy(), self.demands.copy(), self.capacity, kind)

    def cost(self, i: int, j: int) -> float:
        return edge_cost(self, i, j)


def _round_half_up(d: float) -> float:
    return float(math.floor(d + 0.5))


def cost_function(kind: EdgeWeightKind) -> Callable[[float], float]:
    """Map a Euclidean distance to an edge cost for the given metric."""
    if kind == EdgeWeightKind.ROUNDED:
        return _round_half_up
    if kind == EdgeWeightKind.FLOOR:
        return lambda d: float(math.floor(d))
    return float


def edge_cost(inst: Instance, i: int, j: int) -> float:
    if i == j:
        return 0.0
    xi, yi = inst.coords[i]
    xj, yj = inst.coords[j]
    d = math.sqrt((xi - xj) ** 2 + (yi - yj) ** 2)
    return cost_function(inst.edge_weight_kind)(d)


def parse_cvrplib(text: bytes | str, name: str | None = None) -> Instance:
    """Parse a TSPLIB/CVRPLIB CVRP file."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    header: dict[str, str] = {}
    sections: dict[str, list[list[str]]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        head = line.split()[0].rstrip(":")
        if head.endswith("_SECTION"):
            current = head
            sections[current] = []
            continue
        if ":" in line and not line[0].isdigit() and not line[0] == "-":
            key, _, value = line.partition(":")
            header[key.strip().upper()] = value.strip().strip('"')
            current = None
            continue
        if current is None:
            raise ParseError(f"unexpected line: {line!r}")
        sections[current].append(line.split())

    for key in ("DIMENSION", "CAPACITY"):
        if key not in header:
            raise MissingSection(key)
    for key in ("NODE_COORD_SECTION", "DEMAND_SECTION"):
        if key not in sections:
            raise MissingSection(key)
    kind_kw = header.get("EDGE_WEIGHT_TYPE", "EUC_2D").upper()
    if kind_kw not in _EDGE_KEYWORDS:
        raise UnsupportedEdgeWeightType(kind_kw)
    try:
        dim = int(header["DIMENSION"])
        capacity = int(float(header["CAPACITY"]))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc

    coord_rows = sections["NODE_COORD_SECTION"]
    demand_rows = sections["DEMAND_SECTION"]
    for label, rows in (("NODE_COORD_SECTION", coord_rows), ("DEMAND_SECTION", demand_rows)):
        if len(rows) != dim:
            raise DimensionMismatch(f"{label} has {len(rows)} rows, DIMENSION is {dim}")
    try:
        ids = [int(r[0]) for r in coord_rows]
        xy = {int(r[0]): (float(r[1]), float(r[2])) for r in coord_rows}
        dem = {int(r[0]): int(r[1]) for r in demand_rows}
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed section row: {exc}") from exc
    if set(dem) != set(xy) or len(xy) != dim:
        raise DimensionMismatch("node ids differ between sections")

    depot = ids[0]
    if "DEPOT_SECTION" in sections:
        listed = [int(r[0]) for r in sections["DEPOT_SECTION"] if int(r[0]) != -1]
        if listed:
            depot = listed[0]
            if depot not in xy:
                raise ParseError(f"depot {depot} is not a node")
    order = [depot] + [i for i in ids if i != depot]
    coords = np.array([xy[i] for i in order], dtype=np.float64)
    demands = np.array([dem[i] for i in order], dtype=np.int64)
    if demands[0] != 0:
        raise ParseError("depot demand must be zero")
    return Instance(
        name=name or header.get("NAME", "unnamed"),
        coords=coords,
        demands=demands,
        capacity=capacity,
        edge_weight_kind=_EDGE_KEYWORDS[kind_kw],
    )


def load_instance(path, exact_costs: bool = False) -> Instance:
    with open(path, "rb") as fh:
        inst = parse_cvrplib(fh.read())
    if exact_costs:
        inst = inst.with_kind(EdgeWeightKind.EXACT)
    return inst


@dataclass(frozen=True)
class NeighborLists:
    """Row i holds the nearest vertices to i by (cost, index), excluding i."""

    n_nn: int
    lists: np.ndarray  # int64 [n, min(n_nn, n - 1)]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.lists[i]

    def __len__(self) -> int:
        return len(self.lists)


class KDTree:
    """Static 2-d tree with median splits on alternating axes."""

    LEAF_SIZE = 16

    def __init__(self, coords: np.ndarray, leaf_size: int = LEAF_SIZE):
        self.coords = coords
        self.leaf_size = leaf_size
        # node: (lo, hi, axis, split, left, right); leaves have axis -1
        self.nodes: list[tuple[int, int, int, float, int, int]] = []
        self.bbox: list[tuple[float, float, float, float]] = []
        self.perm = np.arange(len(coords))
        self._build(0, len(coords), 0)

    def _build(self, lo: int, hi: int, depth: int) -> int:
        pts = self.coords[self.perm[lo:hi]]
        box = (float(pts[:, 0].min()), float(pts[:, 0].max()), float(pts[:, 1].min()), float(pts[:, 1].max()))
        idx = len(self.nodes)
        self.nodes.append((lo, hi, -1, 0.0, -1, -1))
        self.bbox.append(box)
        if hi - lo <= self.leaf_size:
            return idx
        axis = depth % 2
        seg = self.perm[lo:hi]
        # stable sort so equal coordinates keep index order
        seg = seg[np.argsort(self.coords[seg, axis], kind="stable")]
        self.perm[lo:hi] = seg
        mid = (lo + hi) // 2
        split = float(self.coords[self.perm[mid], axis])
        left = self._build(lo, mid, depth + 1)
        right = self._build(mid, hi, depth + 1)
        self.nodes[idx] = (lo, hi, axis, split, left, right)
        return idx

    def query(self, i: int, k: int, cost: Callable[[float], float]) -> list[int]:
        """k nearest vertices to vertex i (excluding i), ordered by (cost, index)."""
        qx, qy = self.coords[i]
        heap: list[tuple[float, int]] = []  # entries (-cost, -index)
        coords = self.coords
        perm = self.perm

        def visit(node: int) -> None:
            lo, hi, axis, split, left, right = self.nodes[node]
            if len(heap) == k:
                x0, x1, y0, y1 = self.bbox[node]
                dx = max(x0 - qx, 0.0, qx - x1)
                dy = max(y0 - qy, 0.0, qy - y1)
                # a tie on cost can still win on index, so prune only on strict excess
                if cost(math.sqrt(dx * dx + dy * dy)) > -heap[0][0]:
                    return
            if axis < 0:
                for j in perm[lo:hi]:
                    j = int(j)
                    if j == i:
                        continue
                    c = cost(math.sqrt((coords[j, 0] - qx) ** 2 + (coords[j, 1] - qy) ** 2))
                    key = (-c, -j)
                    if len(heap) < k:
                        heapq.heappush(heap, key)
                    elif key > heap[0]:
                        heapq.heapreplace(heap, key)
                return
            near, far = (left, right) if (qx if axis == 0 else qy) < split else (right, left)
            visit(near)
            visit(far)

        visit(0)
        return [-j for _, j in sorted(heap, reverse=True)]


def build_neighbor_lists(inst: Instance, n_nn: int, workers: int = 1) -> NeighborLists:
    """Nearest-neighbor lists for every vertex; output does not depend on workers."""
    if n_nn < 1 or workers < 1:
        raise ValueError("n_nn and workers must be positive")
    n = inst.n
    k = min(n_nn, n - 1)
    tree = KDTree(inst.coords)
    cost = cost_function(inst.edge_weight_kind)
    out = np.empty((n, k), dtype=np.int64)

    def run(chunk: range) -> None:
        for i in chunk:
            out[i] = tree.query(i, k, cost)

    step = max(1, -(-n // workers))
    chunks = [range(s, min(n, s + step)) for s in range(0, n, step)]
    if workers == 1:
        for ch in chunks:
            run(ch)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, chunks))
    out.setflags(write=False)
    return NeighborLists(n_nn=n_nn, lists=out)
