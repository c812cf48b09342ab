"""Trajectory and field evaluation protocol.

Trajectories are resampled to a fixed waypoint count (default 100) by
uniform arc-length interpolation before any trajectory metric is computed,
so metrics are invariant to the input waypoint count and to monotone
reparameterizations of time.

Per-episode metrics:

* FGE  -- Euclidean distance between the final resampled point and the
  annotated trajectory endpoint.
* CR   -- 1 if any resampled point maps to an obstacle cell (clip-floor
  pixel indexing), else 0; batches report the mean indicator.
* Curv -- mean absolute wrapped heading change over non-degenerate
  consecutive segments (radians).
* PLR  -- predicted over annotated resampled path length.

Field metrics compare two flow grids on the annotated lattice:

* AE -- mean arccos of the clipped cosine similarity, in degrees.
* ME -- mean absolute difference of vector norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field_gen import resample_arclength
from .grid_core import FlowField, Mask, norm_to_pixel

K_WAYPOINTS = 100
EPSILON = 1e-8


@dataclass
class MetricsReport:
    fge: float
    cr: int
    curv: float
    plr: float
    ae: float | None = None
    me: float | None = None

    def to_dict(self) -> dict:
        out = {"fge": self.fge, "cr": self.cr, "curv": self.curv, "plr": self.plr}
        if self.ae is not None:
            out["ae"] = self.ae
        if self.me is not None:
            out["me"] = self.me
        return out


def _resampled(traj, k):
    traj = np.asarray(traj, dtype=np.float64)
    if traj.ndim != 2 or traj.shape[1] != 2 or len(traj) == 0:
        raise ValueError("trajectory must be a nonempty (N, 2) array")
    return resample_arclength(traj, k)


def fge(pred, annotated, k: int = K_WAYPOINTS) -> float:
    """Final goal error: endpoint distance after resampling both inputs."""
    p = _resampled(pred, k)
    a = _resampled(annotated, k)
    return float(np.linalg.norm(p[-1] - a[-1]))


def collision(pred, obstacles: Mask, k: int = K_WAYPOINTS) -> int:
    """1 if any resampled waypoint lands on an obstacle cell, else 0."""
    obstacles = np.asarray(obstacles, dtype=bool)
    if obstacles.ndim != 2:
        raise ValueError("obstacle mask must be 2D")
    p = _resampled(pred, k)
    h, w = obstacles.shape
    idx = norm_to_pixel(p, w, h)
    return int(obstacles[idx[:, 1], idx[:, 0]].any())


def curvature(pred, k: int = K_WAYPOINTS, epsilon: float = EPSILON) -> float:
    """Mean absolute heading change between consecutive non-degenerate
    segments, wrapped to (-pi, pi]. Fewer than two valid segments yields 0
    (no turning to measure)."""
    p = _resampled(pred, k)
    deltas = np.diff(p, axis=0)
    lengths = np.linalg.norm(deltas, axis=1)
    deltas = deltas[lengths > epsilon]
    if len(deltas) < 2:
        return 0.0
    headings = np.arctan2(deltas[:, 1], deltas[:, 0])
    turns = np.diff(headings)
    wrapped = (turns + np.pi) % (2.0 * np.pi) - np.pi
    return float(np.mean(np.abs(wrapped)))


def path_length(traj, k: int = K_WAYPOINTS) -> float:
    """Summed segment length of the resampled trajectory."""
    p = _resampled(traj, k)
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def plr(pred, annotated, k: int = K_WAYPOINTS) -> float:
    """Path length ratio: L(pred) / L(annotated) on the resampled forms."""
    denom = path_length(annotated, k)
    if denom == 0.0:
        raise ValueError("annotated trajectory has zero length")
    return path_length(pred, k) / denom


def field_metrics(pred: FlowField, annotated: FlowField, epsilon: float = EPSILON):
    """(AE degrees, ME) between two equally sized flow grids.

    The annotated grid defines the evaluation lattice; no implicit
    resampling is performed.
    """
    pred = np.asarray(pred, dtype=np.float64)
    annotated = np.asarray(annotated, dtype=np.float64)
    if pred.shape != annotated.shape:
        raise ValueError(f"field resolutions differ: {pred.shape} vs {annotated.shape}")
    if pred.ndim != 3 or pred.shape[2] != 2:
        raise ValueError("flow fields must have shape (H, W, 2)")
    p = pred.reshape(-1, 2)
    a = annotated.reshape(-1, 2)
    pn = np.linalg.norm(p, axis=1)
    an = np.linalg.norm(a, axis=1)
    cos = np.einsum("ij,ij->i", p / (pn[:, None] + epsilon), a / (an[:, None] + epsilon))
    ae = float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))).mean())
    me = float(np.abs(pn - an).mean())
    return ae, me


def evaluate_episode(pred_traj, annotated_traj, obstacles: Mask,
                     pred_field: FlowField | None = None,
                     annotated_field: FlowField | None = None,
                     k: int = K_WAYPOINTS) -> MetricsReport:
    """All metrics for one episode; field metrics only when both fields are
    given."""
    report = MetricsReport(
        fge=fge(pred_traj, annotated_traj, k),
        cr=collision(pred_traj, obstacles, k),
        curv=curvature(pred_traj, k),
        plr=plr(pred_traj, annotated_traj, k),
    )
    if pred_field is not None and annotated_field is not None:
        report.ae, report.me = field_metrics(pred_field, annotated_field)
    return report


def aggregate(reports) -> dict:
    """Batch means over per-episode reports (CR becomes the mean indicator)."""
    reports = list(reports)
    if not reports:
        return {}
    out = {
        "fge": float(np.mean([r.fge for r in reports])),
        "cr": float(np.mean([r.cr for r in reports])),
        "curv": float(np.mean([r.curv for r in reports])),
        "plr": float(np.mean([r.plr for r in reports])),
        "episodes": len(reports),
    }
    with_fields = [r for r in reports if r.ae is not None]
    if with_fields:
        out["ae"] = float(np.mean([r.ae for r in with_fields]))
        out["me"] = float(np.mean([r.me for r in with_fields]))
    return out
