"""3D A* over a voxel grid with obstacles inflated by the drone's size.

Two cost models are supported:

``euclid`` (default)
    edge cost is the step length (1, sqrt 2, sqrt 3), Euclidean heuristic.
``uniform``
    every move costs 1; the Euclidean heuristic is divided by sqrt 3 so it
    stays admissible for diagonal moves.

Path costs are accumulated as integer counts of each move type, so equal
costs compare exactly regardless of summation order.
"""
import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .kernels import blocked_mask

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
MODES = ("euclid", "uniform")
CLOVER4_HALF_EXTENT = (0.1775, 0.1775, 0.0625)

NEIGHBOR_OFFSETS = tuple(
    d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)
)


class PlanningError(ValueError):
    pass


class NoPath(Exception):
    """The frontier emptied before reaching the goal."""


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != 3 or len(self.hi) != 3 or any(h <= l for l, h in zip(self.lo, self.hi)):
            raise PlanningError(f"degenerate obstacle box {self.lo} .. {self.hi}")


@dataclass
class VoxelGrid:
    origin: np.ndarray
    resolution: float
    dims: tuple
    blocked: np.ndarray  # bool, shape dims

    def in_range(self, v):
        return all(0 <= v[a] < self.dims[a] for a in range(3))

    def is_free(self, v):
        return self.in_range(v) and not self.blocked[v]

    def center(self, v):
        return self.origin + (np.asarray(v, dtype=float) + 0.5) * self.resolution

    def voxel_of(self, point):
        idx = np.floor((np.asarray(point, dtype=float) - self.origin) / self.resolution).astype(int)
        return tuple(int(i) for i in idx)

    def blocked_set(self):
        return {tuple(int(i) for i in v) for v in np.argwhere(self.blocked)}


@dataclass
class PlanResult:
    voxels: list
    waypoints: list
    cost: float
    expanded: int
    expansion_f: list = None


def build_grid(obstacles, workspace_lo, workspace_hi, resolution=0.25,
               drone_half_extent=CLOVER4_HALF_EXTENT):
    """Voxelise the workspace.

    A voxel is blocked when its cube overlaps (with positive volume) an
    obstacle grown by ``drone_half_extent``, or when its center lies outside
    the workspace.
    """
    lo = np.asarray(workspace_lo, dtype=float)
    hi = np.asarray(workspace_hi, dtype=float)
    if np.any(hi <= lo):
        raise PlanningError("workspace must have positive extent on every axis")
    if not resolution > 0 or np.any(resolution > hi - lo):
        raise PlanningError(f"resolution {resolution} does not fit the workspace")
    dims = tuple(int(math.ceil((hi[a] - lo[a]) / resolution - 1e-12)) for a in range(3))
    pad = np.asarray(drone_half_extent, dtype=float) + 0.5 * resolution
    if obstacles:
        box_lo = np.array([b.lo for b in obstacles], dtype=float) - pad
        box_hi = np.array([b.hi for b in obstacles], dtype=float) + pad
    else:
        box_lo = np.zeros((0, 3))
        box_hi = np.zeros((0, 3))
    mask = blocked_mask(np.array(dims, dtype=np.int64), lo, float(resolution), lo, hi, box_lo, box_hi)
    return VoxelGrid(lo, float(resolution), dims, mask)


def step_cost(d, mode):
    if mode == "uniform":
        return 1.0
    return (1.0, SQRT2, SQRT3)[sum(abs(c) for c in d) - 1]


def cost_of_counts(counts, mode):
    a, b, c = counts
    if mode == "uniform":
        return float(a + b + c)
    return a + b * SQRT2 + c * SQRT3


def heuristic(a, b, mode="euclid"):
    d = math.sqrt(sum((a[i] - b[i]) ** 2 for i in range(3)))
    return d / SQRT3 if mode == "uniform" else d


def neighbors(v, grid):
    for d in NEIGHBOR_OFFSETS:
        n = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
        if grid.is_free(n):
            yield n, d


def reconstruct_path(came_from, current):
    """Follow parent links back from ``current``; returns start..current."""
    path = [current]
    seen = {current}
    while current in came_from:
        current = came_from[current]
        if current in seen:
            raise RuntimeError("parent chain contains a cycle")
        seen.add(current)
        path.append(current)
    path.reverse()
    return path


def a_star(start, goal, grid, mode="euclid", record_expansion=False):
    """Optimal 26-connected path from ``start`` to ``goal`` (voxel indices).

    Ties on f are broken by smaller h, then by insertion order.  Raises
    ``NoPath`` if the goal is unreachable.
    """
    if mode not in MODES:
        raise PlanningError(f"unknown mode {mode!r}")
    start, goal = tuple(start), tuple(goal)
    for name, v in (("start", start), ("goal", goal)):
        if not grid.in_range(v):
            raise PlanningError(f"{name} {v} is outside the grid")
        if grid.blocked[v]:
            raise PlanningError(f"{name} {v} is blocked")

    counter = itertools.count()
    h0 = heuristic(start, goal, mode)
    frontier = [(h0, h0, next(counter), start)]
    came_from = {}
    g_counts = {start: (0, 0, 0)}
    g_cost = {start: 0.0}
    closed = set()
    expanded = 0
    f_trace = [] if record_expansion else None
    while frontier:
        f, _, _, current = heapq.heappop(frontier)
        if current in closed:
            continue
        closed.add(current)
        expanded += 1
        if record_expansion:
            f_trace.append(f)
        if current == goal:
            voxels = reconstruct_path(came_from, current)
            return PlanResult(voxels, [grid.center(v) for v in voxels],
                              g_cost[current], expanded, f_trace)
        ca, cb, cc = g_counts[current]
        for n, d in neighbors(current, grid):
            if n in closed:
                continue
            kind = sum(abs(c) for c in d)
            counts = (ca + (kind == 1), cb + (kind == 2), cc + (kind == 3))
            g = cost_of_counts(counts, mode)
            if n not in g_cost or g < g_cost[n]:
                came_from[n] = current
                g_counts[n] = counts
                g_cost[n] = g
                h = heuristic(n, goal, mode)
                heapq.heappush(frontier, (g + h, h, next(counter), n))
    raise NoPath(f"no path from {start} to {goal}")


def emit_setpoints(waypoints, rate_hz=1.0):
    """Timed schedule ``[(t, waypoint), ...]`` at ``rate_hz``."""
    if not len(waypoints):
        raise PlanningError("empty path")
    if not rate_hz > 0:
        raise PlanningError("rate must be positive")
    return [(k / rate_hz, np.asarray(w, dtype=float)) for k, w in enumerate(waypoints)]


# -- obstacle map files ----------------------------------------------------------
#
#   # comment
#   workspace_lo = -6 -6 0.5
#   workspace_hi = 6 6 3
#   resolution = 0.25
#   drone_half_extent = 0.1775 0.1775 0.0625
#   box = x0 y0 z0 x1 y1 z1      (repeatable)

@dataclass
class ObstacleMap:
    workspace_lo: tuple
    workspace_hi: tuple
    resolution: float = 0.25
    drone_half_extent: tuple = CLOVER4_HALF_EXTENT
    boxes: tuple = ()

    def grid(self):
        return build_grid(list(self.boxes), self.workspace_lo, self.workspace_hi,
                          self.resolution, self.drone_half_extent)


def _floats(text, n, where):
    parts = text.split()
    if len(parts) != n:
        raise PlanningError(f"{where}: expected {n} numbers, got {len(parts)}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise PlanningError(f"{where}: not a number in {text!r}") from None


def parse_map(text, source="<map>"):
    fields = {}
    boxes = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        where = f"{source}:{lineno}"
        if not sep:
            raise PlanningError(f"{where}: expected 'key = value'")
        if key == "box":
            v = _floats(value, 6, where)
            boxes.append(Box(v[:3], v[3:]))
        elif key in ("workspace_lo", "workspace_hi", "drone_half_extent"):
            fields[key] = _floats(value, 3, where)
        elif key == "resolution":
            fields[key] = _floats(value, 1, where)[0]
        else:
            raise PlanningError(f"{where}: unknown key {key!r}")
    for req in ("workspace_lo", "workspace_hi"):
        if req not in fields:
            raise PlanningError(f"{source}: missing {req}")
    return ObstacleMap(boxes=tuple(boxes), **fields)


def load_map(path):
    with open(path, encoding="utf-8") as fh:
        return parse_map(fh.read(), str(path))
