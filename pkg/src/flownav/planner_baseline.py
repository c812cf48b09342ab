"""Geometric planner baseline: side goals, obstacle inflation, 8-connected A*.

This is the planning half of a detect-then-plan pipeline, driven here by
ground-truth instance boxes. Boxes are normalized (xmin, ymin, xmax, ymax);
the planner rasterizes them (inflated by a fixed pixel radius measured in
the scene raster) onto its own G x G occupancy grid and searches with an
octile-distance heuristic, which is admissible for unit/sqrt(2) step costs.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .field_gen import resample_arclength
from .grid_core import Mask, clamp01

_SQRT2 = float(np.sqrt(2.0))

# Same fixed neighbor order as the geodesic module: E, W, S, N, SE, SW, NE, NW.
_NEIGHBORS = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
              (1, 1, _SQRT2), (-1, 1, _SQRT2), (1, -1, _SQRT2), (-1, -1, _SQRT2))


@dataclass
class PlannerConfig:
    grid_size: int = 128
    inflate_radius: float = 10.0
    side_offset: float = 0.02
    waypoints: int = 100

    def __post_init__(self):
        if self.grid_size <= 0 or self.inflate_radius <= 0 or self.side_offset <= 0:
            raise ConfigurationError("planner parameters must be positive")
        if self.waypoints < 2:
            raise ConfigurationError("waypoints must be at least 2")


def side_goal(bbox, center, side, delta: float = 0.02):
    """Goal point offset from a bbox side, clamped to the unit square.

    bbox is normalized (xmin, ymin, xmax, ymax); ``side`` is one of left,
    right, top, bottom, or None for the plain center.
    """
    xmin, ymin, xmax, ymax = (float(v) for v in bbox)
    if not (xmin < xmax and ymin < ymax):
        raise ValueError(f"malformed bbox {bbox}")
    xc, yc = (float(center[0]), float(center[1]))
    if side is None or side == "none":
        point = (xc, yc)
    elif side == "left":
        point = (xmin - delta, yc)
    elif side == "right":
        point = (xmax + delta, yc)
    elif side == "top":
        point = (xc, ymin - delta)
    elif side == "bottom":
        point = (xc, ymax + delta)
    else:
        raise ValueError(f"unknown side {side!r}")
    return tuple(clamp01(np.array(point)))


def inflate_and_rasterize(boxes, cfg: PlannerConfig, image_width: int) -> Mask:
    """Occupancy grid from normalized boxes inflated by a fixed pixel radius.

    The radius is measured in the scene raster; the normalized margin is
    ``inflate_radius / image_width`` on both axes. A grid cell is occupied
    when its open interior overlaps any inflated box.
    """
    g = cfg.grid_size
    occ = np.zeros((g, g), dtype=bool)
    boxes = np.atleast_2d(np.asarray(boxes, dtype=np.float64))
    if boxes.size == 0:
        return occ
    margin = cfg.inflate_radius / float(image_width)
    edges = np.arange(g + 1, dtype=np.float64) / g
    cell_lo, cell_hi = edges[:-1], edges[1:]
    for xmin, ymin, xmax, ymax in boxes:
        x0, y0 = xmin - margin, ymin - margin
        x1, y1 = xmax + margin, ymax + margin
        cols = (cell_lo < x1) & (cell_hi > x0)
        rows = (cell_lo < y1) & (cell_hi > y0)
        occ |= rows[:, None] & cols[None, :]
    return occ


def _snap_to_free(occ, point):
    """Nearest free cell to a normalized point (row-major tie-breaking).

    Returns (row, col) or None when the grid is fully occupied.
    """
    g = occ.shape[0]
    col = min(int(point[0] * g), g - 1)
    row = min(int(point[1] * g), g - 1)
    if not occ[row, col]:
        return row, col
    free_rows, free_cols = np.nonzero(~occ)
    if len(free_rows) == 0:
        return None
    d2 = (free_rows - row) ** 2 + (free_cols - col) ** 2
    k = int(np.argmin(d2))
    return int(free_rows[k]), int(free_cols[k])


def _octile(dr, dc):
    dr, dc = abs(dr), abs(dc)
    return max(dr, dc) + (_SQRT2 - 1.0) * min(dr, dc)


def _search(occ, start, goal):
    """A* between normalized points; returns (cell path, cost) or None.

    Ties on f are broken by row-major cell index so the search is
    deterministic.
    """
    occ = np.asarray(occ, dtype=bool)
    g = occ.shape[0]
    s = _snap_to_free(occ, clamp01(np.asarray(start, dtype=np.float64)))
    t = _snap_to_free(occ, clamp01(np.asarray(goal, dtype=np.float64)))
    if s is None or t is None:
        return None

    start_i = s[0] * g + s[1]
    goal_i = t[0] * g + t[1]
    dist = {start_i: 0.0}
    parent = {}
    heap = [(_octile(s[0] - t[0], s[1] - t[1]), start_i)]
    closed = set()
    found = False
    while heap:
        _, i = heapq.heappop(heap)
        if i in closed:
            continue
        if i == goal_i:
            found = True
            break
        closed.add(i)
        row, col = divmod(i, g)
        base = dist[i]
        for dc, dr, step in _NEIGHBORS:
            r, c = row + dr, col + dc
            if not (0 <= r < g and 0 <= c < g) or occ[r, c]:
                continue
            j = r * g + c
            nd = base + step
            if nd < dist.get(j, np.inf):
                dist[j] = nd
                parent[j] = i
                heapq.heappush(heap, (nd + _octile(r - t[0], c - t[1]), j))
    if not found:
        return None
    cells = [goal_i]
    while cells[-1] != start_i:
        cells.append(parent[cells[-1]])
    cells.reverse()
    return cells, dist[goal_i]


def astar(occ: Mask, start, goal, waypoints: int = 100):
    """Optimal 8-connected path between normalized points on an occupancy
    grid.

    Start and goal are snapped to the nearest free cell when occupied. The
    returned trajectory is the cell-center polyline converted to normalized
    coordinates and arc-length resampled to ``waypoints`` points. Returns
    None when no path exists (planner failure, not an error).
    """
    hit = _search(occ, start, goal)
    if hit is None:
        return None
    cells, _ = hit
    g = np.asarray(occ).shape[0]
    rows = np.array([c // g for c in cells], dtype=np.float64)
    cols = np.array([c % g for c in cells], dtype=np.float64)
    path = np.stack([(cols + 0.5) / g, (rows + 0.5) / g], axis=1)
    return resample_arclength(path, waypoints)


def path_cost(occ: Mask, start, goal):
    """Optimal 8-connected path cost between two normalized points, or None.

    Exposes the raw A* cost (before resampling) for optimality checks.
    """
    hit = _search(occ, start, goal)
    return None if hit is None else hit[1]
