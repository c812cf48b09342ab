"""Safety-aware cost maps and cost-weighted shortest paths on the pixel grid.

The geodesic solver is a multi-source Dijkstra on the 8-connected grid,
restricted to free pixels. An edge between neighboring free pixels p and q
costs ``0.5 * (C(p) + C(q)) * |p - q|`` with step lengths 1 or sqrt(2).

Determinism contract (needed for golden tests):

* priority-queue ties on distance are broken by row-major pixel index;
* neighbors are expanded in the fixed order E, W, S, N, SE, SW, NE, NW.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigurationError, InternalConsistencyError, UnreachableGoalError
from .grid_core import Mask, ScalarField

# Fixed expansion order: E, W, S, N, SE, SW, NE, NW (x right, y down).
_DX = np.array([1, -1, 0, 0, 1, -1, 1, -1], dtype=np.int64)
_DY = np.array([0, 0, 1, -1, 1, 1, -1, -1], dtype=np.int64)
_STEP = np.array([1.0, 1.0, 1.0, 1.0] + [np.sqrt(2.0)] * 4)

NO_PRED = -1


@dataclass
class GeodesicResult:
    """Cost-weighted distance field, predecessor map, pixel distance field.

    ``pred`` holds, per pixel, the row-major flat index of the next pixel on
    the lowest-cost route to a goal (NO_PRED on goals, obstacles, and
    unreachable pixels).
    """

    d_weighted: ScalarField
    pred: np.ndarray
    d_pixel: ScalarField


def cost_map(d_free: ScalarField, rho_safe: float, lambda_safe: float) -> ScalarField:
    """Traversal cost with a truncated linear penalty inside the safety band.

    C(p) = 1 + lambda_safe * max(0, rho_safe - d_free(p)). The +inf sentinel
    in ``d_free`` (no obstacle anywhere) maps to cost 1.
    """
    if rho_safe < 0 or lambda_safe < 0:
        raise ConfigurationError("rho_safe and lambda_safe must be nonnegative")
    d = np.asarray(d_free, dtype=np.float64)
    penalty = np.maximum(0.0, rho_safe - d)
    penalty[np.isinf(d)] = 0.0
    return 1.0 + lambda_safe * penalty


@njit(cache=True)
def _heap_push(heap_d, heap_i, size, d, i):
    heap_d[size] = d
    heap_i[size] = i
    child = size
    while child > 0:
        parent = (child - 1) >> 1
        pd, pi = heap_d[parent], heap_i[parent]
        cd, ci = heap_d[child], heap_i[child]
        if cd < pd or (cd == pd and ci < pi):
            heap_d[parent], heap_d[child] = cd, pd
            heap_i[parent], heap_i[child] = ci, pi
            child = parent
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(heap_d, heap_i, size):
    top_d = heap_d[0]
    top_i = heap_i[0]
    size -= 1
    heap_d[0] = heap_d[size]
    heap_i[0] = heap_i[size]
    parent = 0
    while True:
        left = 2 * parent + 1
        if left >= size:
            break
        right = left + 1
        best = left
        if right < size:
            ld, li = heap_d[left], heap_i[left]
            rd, ri = heap_d[right], heap_i[right]
            if rd < ld or (rd == ld and ri < li):
                best = right
        bd, bi = heap_d[best], heap_i[best]
        pd, pi = heap_d[parent], heap_i[parent]
        if bd < pd or (bd == pd and bi < pi):
            heap_d[parent], heap_d[best] = bd, pd
            heap_i[parent], heap_i[best] = bi, pi
            parent = best
        else:
            break
    return top_d, top_i, size


@njit(cache=True)
def _dijkstra_kernel(free, cost, goals, dx, dy, step, corner_cut):
    h, w = free.shape
    n = h * w
    dist = np.full(n, np.inf)
    pred = np.full(n, NO_PRED, dtype=np.int64)
    settled = np.zeros(n, dtype=np.uint8)

    cap = 8 * n + goals.size + 1
    heap_d = np.empty(cap, dtype=np.float64)
    heap_i = np.empty(cap, dtype=np.int64)
    size = 0
    for g in goals:
        dist[g] = 0.0
        size = _heap_push(heap_d, heap_i, size, 0.0, g)

    while size > 0:
        d, i, size = _heap_pop(heap_d, heap_i, size)
        if settled[i]:
            continue
        settled[i] = 1
        py = i // w
        px = i - py * w
        ci = cost[py, px]
        for k in range(8):
            qx = px + dx[k]
            qy = py + dy[k]
            if qx < 0 or qx >= w or qy < 0 or qy >= h:
                continue
            if not free[qy, qx]:
                continue
            if k >= 4 and not corner_cut:
                if not (free[py, qx] and free[qy, px]):
                    continue
            j = qy * w + qx
            if settled[j]:
                continue
            nd = d + 0.5 * (ci + cost[qy, qx]) * step[k]
            if nd < dist[j]:
                dist[j] = nd
                pred[j] = i
                size = _heap_push(heap_d, heap_i, size, nd, j)
    return dist, pred


@njit(cache=True)
def _pixel_length_kernel(dist, pred, order, w):
    n = dist.size
    dpix = np.full(n, np.nan)
    for idx in range(n):
        i = order[idx]
        if not np.isfinite(dist[i]):
            dpix[i] = np.inf
            continue
        p = pred[i]
        if p < 0:
            dpix[i] = 0.0
            continue
        if np.isnan(dpix[p]):
            return dpix, False
        iy = i // w
        ix = i - iy * w
        py = p // w
        px = p - py * w
        ddx = float(ix - px)
        ddy = float(iy - py)
        dpix[i] = np.sqrt(ddx * ddx + ddy * ddy) + dpix[p]
    return dpix, True


def geodesic(free: Mask, cost: ScalarField, goals, allow_corner_cutting: bool = True) -> GeodesicResult:
    """Multi-source cost-weighted Dijkstra on the 8-connected pixel grid.

    ``goals`` is an iterable of (px, py) pixels. Goal pixels outside free
    space are dropped with a warning; an empty or fully dropped goal set is
    an error. Disconnected free regions get the +inf sentinel.

    By default a diagonal move between two free pixels is allowed even when
    both orthogonal corner pixels are obstacles; pass
    ``allow_corner_cutting=False`` to require both corners free.
    """
    free = np.asarray(free, dtype=bool)
    cost = np.asarray(cost, dtype=np.float64)
    if cost.shape != free.shape:
        raise ValueError("cost and free mask shapes differ")
    h, w = free.shape

    goal_list = [(int(g[0]), int(g[1])) for g in goals]
    if not goal_list:
        raise ValueError("goal set is empty")
    kept = []
    for px, py in goal_list:
        if 0 <= px < w and 0 <= py < h and free[py, px]:
            kept.append(py * w + px)
        else:
            warnings.warn(f"goal pixel ({px}, {py}) is not in free space; dropped")
    if not kept:
        raise UnreachableGoalError("every goal pixel lies outside free space")
    goal_flat = np.unique(np.array(kept, dtype=np.int64))

    dist, pred = _dijkstra_kernel(free, cost, goal_flat, _DX, _DY, _STEP, allow_corner_cutting)
    d_weighted = dist.reshape(h, w)
    pred = _refine_pred(free, cost, d_weighted, pred.reshape(h, w), goal_flat, allow_corner_cutting)
    d_pixel = pixel_length_from_pred(d_weighted, pred)
    return GeodesicResult(d_weighted=d_weighted, pred=pred, d_pixel=d_pixel)


def _refine_pred(free, cost, dist, pred, goal_flat, corner_cut):
    """Re-aim each predecessor at the goal among cost-equal candidates.

    Many optimal trees exist when edge costs tie (uniform-cost regions);
    the plain Dijkstra tree then encodes elbow-shaped paths (a diagonal run
    followed by an axis run). Among neighbors q with
    dist(q) + w(p, q) == dist(p), this pass picks the one most aligned with
    the straight line from p to its nearest goal pixel, which makes
    backtracked paths hug the chord (stair-stepping). Every choice still
    strictly decreases dist, so the result remains an acyclic optimal tree.
    """
    from scipy import ndimage

    h, w = dist.shape
    goal_mask = np.zeros((h, w), dtype=bool)
    goal_mask.ravel()[goal_flat] = True
    gy, gx = ndimage.distance_transform_edt(~goal_mask, return_distances=False, return_indices=True)
    yy, xx = np.indices((h, w))
    tx = gx - xx
    ty = gy - yy
    tnorm = np.hypot(tx, ty)

    eligible = np.isfinite(dist) & (pred != NO_PRED)
    tol = 1e-9 * np.maximum(np.where(np.isfinite(dist), dist, 0.0), 1.0)
    best_score = np.full((h, w), -np.inf)
    best_pred = pred.copy()
    flat_index = (yy * w + xx).astype(np.int64)

    for k in range(8):
        dx, dy = int(_DX[k]), int(_DY[k])
        step = float(_STEP[k])
        # p ranges where the neighbor q = p + (dx, dy) stays in bounds
        py = slice(max(0, -dy), h - max(0, dy))
        px = slice(max(0, -dx), w - max(0, dx))
        qy = slice(max(0, dy), h + min(0, dy))
        qx = slice(max(0, dx), w + min(0, dx))

        ok = eligible[py, px] & free[qy, qx] & np.isfinite(dist[qy, qx])
        if k >= 4 and not corner_cut:
            ok &= free[py, qx] & free[qy, px]
        edge = 0.5 * (cost[py, px] + cost[qy, qx]) * step
        with np.errstate(invalid="ignore"):  # inf - inf on unreachable pairs
            ok &= np.abs(dist[qy, qx] + edge - dist[py, px]) <= tol[py, px]

        # tnorm is 0 only on goal pixels, which are never eligible
        denom = step * np.maximum(tnorm[py, px], 1e-300)
        score = (dx * tx[py, px] + dy * ty[py, px]) / denom
        better = ok & (score > best_score[py, px])
        region_best = best_score[py, px]
        region_best[better] = score[better]
        best_score[py, px] = region_best
        region_pred = best_pred[py, px]
        region_pred[better] = flat_index[qy, qx][better]
        best_pred[py, px] = region_pred
    return best_pred


def pixel_length_from_pred(d_weighted: ScalarField, pred: np.ndarray) -> ScalarField:
    """Geometric remaining path length (pixels) along the predecessor tree.

    D_pix(p) = |p - pred(p)| + D_pix(pred(p)) with D_pix = 0 at goals,
    evaluated in nondecreasing d_weighted order so every predecessor is
    finished first. Unreachable pixels hold the +inf sentinel.
    """
    d = np.asarray(d_weighted, dtype=np.float64)
    h, w = d.shape
    flat_pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    order = np.argsort(d.ravel(), kind="stable")
    dpix, ok = _pixel_length_kernel(d.ravel(), flat_pred, order, w)
    if not ok:
        raise InternalConsistencyError("predecessor map contains a cycle")
    return dpix.reshape(h, w)


def backtrack(result: GeodesicResult, start) -> np.ndarray:
    """Follow predecessor pointers from ``start`` to a goal pixel.

    Returns the raw pixel polyline as an (L, 2) int array of (px, py),
    beginning at ``start`` and ending on a goal. Raises UnreachableStartError
    if the start has no finite distance.
    """
    from .errors import UnreachableStartError

    px, py = int(start[0]), int(start[1])
    h, w = result.d_weighted.shape
    if not (0 <= px < w and 0 <= py < h) or not np.isfinite(result.d_weighted[py, px]):
        raise UnreachableStartError(f"start pixel ({px}, {py}) cannot reach any goal")
    flat_pred = result.pred.reshape(-1)
    path = [(px, py)]
    i = py * w + px
    limit = h * w
    while flat_pred[i] != NO_PRED:
        i = flat_pred[i]
        path.append((i % w, i // w))
        if len(path) > limit:
            raise InternalConsistencyError("predecessor chain exceeds pixel count (cycle)")
    return np.array(path, dtype=np.int64)
