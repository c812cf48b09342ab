"""End-to-end flow-field and reference-trajectory annotation.

Given a semantic map, a label mapping, and a goal description, the pipeline

1. extracts free/obstacle masks and the goal source band,
2. builds a safety-aware cost map and runs the cost-weighted geodesic,
3. stitches a piecewise potential (geodesic distance in free space,
   up-shifted escape distance inside obstacles),
4. smooths the potential, takes its negative normalized gradient, and scales
   free-space magnitudes by the pixel distance-to-go,
5. samples a start pixel and backtracks the predecessor tree into a
   fixed-length, arc-length-resampled reference trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import geodesic as geo
from .errors import (
    ConfigurationError,
    FlowNavError,
    TargetNotFoundError,
    UnreachableGoalError,
    UnreachableSceneError,
    UnreachableStartError,
)
from .grid_core import (
    FlowField,
    LabelMapping,
    Mask,
    ScalarField,
    SemanticMap,
    dto,
    dtf,
    extract_free,
)

SIDES = ("left", "right", "top", "bottom")


@dataclass
class AnnotationConfig:
    """Annotation hyperparameters. Distances are in pixels.

    ``start_min_goal_dist`` and ``start_min_obs_dist`` bound start sampling;
    they are relaxed in that order when no pixel qualifies.
    """

    rho_safe: float = 50.0
    lambda_safe: float = 1.0
    w_g: float = 1.0
    w_obs: float = 10.0
    gaussian_sigma: float = 1.5
    goal_band: int = 2
    start_min_goal_dist: float = 20.0
    start_min_obs_dist: float = 3.0
    traj_waypoints: int = 100
    epsilon: float = 1e-8

    def __post_init__(self):
        for name in ("rho_safe", "lambda_safe", "w_g", "w_obs", "gaussian_sigma",
                     "goal_band", "start_min_goal_dist", "start_min_obs_dist", "epsilon"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")
        if self.traj_waypoints < 2:
            raise ConfigurationError("traj_waypoints must be at least 2")
        if not self.w_obs > self.w_g:
            raise ConfigurationError("w_obs must exceed w_g")


@dataclass(frozen=True)
class GoalSpec:
    """Which target instance to navigate to, and on which side.

    ``instance_index`` indexes the instances of ``target_label`` in map
    order; None means the first. ``side`` is one of left/right/top/bottom
    or None for no side preference.
    """

    target_label: int
    instance_index: int | None = None
    side: str | None = None

    def __post_init__(self):
        if self.side is not None and self.side not in SIDES:
            raise ConfigurationError(f"side must be one of {SIDES} or None, got {self.side!r}")


@dataclass
class Annotation:
    """Annotated flow field, reference trajectory, goal sources, and start.

    ``trajectory`` is a (K, 2) array of normalized (u, v) waypoints;
    ``goal_pixels`` is an (N, 2) int array of (px, py); ``start`` is (px, py).
    """

    field: FlowField
    trajectory: np.ndarray
    goal_pixels: np.ndarray
    start: tuple[int, int]


# ---------------------------------------------------------------------------
# Goal sources
# ---------------------------------------------------------------------------


def compute_goal(smap: SemanticMap, mapping: LabelMapping, spec: GoalSpec,
                 cfg: AnnotationConfig | None = None) -> np.ndarray:
    """Goal source pixels for a target instance.

    Free pixels within ``cfg.goal_band`` (Chebyshev) of the instance's own
    pixels, restricted to the requested side's half-plane about the bbox
    center. Falls back to the single free pixel nearest the instance center
    when the band is empty; raises UnreachableGoalError when the map has no
    free pixel at all.

    Returns an (N, 2) int array of (px, py), sorted row-major.
    """
    cfg = cfg or AnnotationConfig()
    if spec.target_label not in mapping.targetable_labels:
        raise TargetNotFoundError(f"label {spec.target_label} is not targetable")
    candidates = [inst for inst in smap.instances if inst.label == spec.target_label]
    if not candidates:
        raise TargetNotFoundError(f"map has no instance with label {spec.target_label}")
    index = spec.instance_index or 0
    if not 0 <= index < len(candidates):
        raise TargetNotFoundError(
            f"instance index {index} out of range for label {spec.target_label} "
            f"({len(candidates)} instances)"
        )
    inst = candidates[index]

    free = extract_free(smap, mapping)
    x0, y0, x1, y1 = inst.bbox
    inst_mask = np.zeros(smap.labels.shape, dtype=bool)
    region = smap.labels[y0:y1, x0:x1] == spec.target_label
    inst_mask[y0:y1, x0:x1] = region

    band = int(cfg.goal_band)
    size = 2 * band + 1
    dilated = ndimage.binary_dilation(inst_mask, structure=np.ones((size, size), dtype=bool))
    band_mask = dilated & free

    if spec.side is not None:
        cx = (x0 + x1) / 2.0
        cy = (y0 + y1) / 2.0
        yy, xx = np.indices(band_mask.shape)
        if spec.side == "left":
            band_mask &= xx < cx
        elif spec.side == "right":
            band_mask &= xx > cx
        elif spec.side == "top":
            band_mask &= yy < cy
        else:
            band_mask &= yy > cy

    ys, xs = np.nonzero(band_mask)
    if len(ys) == 0:
        # Fall back to the single nearest free pixel to the instance center.
        fys, fxs = np.nonzero(free)
        if len(fys) == 0:
            raise UnreachableGoalError("map has no free pixel to place a goal on")
        ccx, ccy = inst.center
        d2 = (fxs - ccx) ** 2 + (fys - ccy) ** 2
        k = int(np.argmin(d2))  # argmin scans row-major, so ties pick the first
        return np.array([[fxs[k], fys[k]]], dtype=np.int64)
    return np.stack([xs, ys], axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# Potential and flow field
# ---------------------------------------------------------------------------


def potential(d_gw: ScalarField, d_obs: ScalarField, free: Mask,
              cfg: AnnotationConfig | None = None) -> ScalarField:
    """Piecewise potential: w_g * D_g^w in free space, w_obs * D_obs + b_obs
    inside obstacles, with b_obs the maximum geodesic distance over reachable
    free pixels so obstacle potentials dominate at the interface.

    Unreachable free pixels (sentinel in d_gw) take the value b_obs so the
    smoothed gradient does not attract toward sealed regions.
    """
    cfg = cfg or AnnotationConfig()
    free = np.asarray(free, dtype=bool)
    d_gw = np.asarray(d_gw, dtype=np.float64)
    d_obs = np.asarray(d_obs, dtype=np.float64)

    reachable = free & np.isfinite(d_gw)
    if not reachable.any():
        raise UnreachableSceneError("no free pixel can reach the goal sources")
    b_obs = float(d_gw[reachable].max())

    phi = np.where(free, cfg.w_g * d_gw, cfg.w_obs * d_obs + b_obs)
    phi[free & ~np.isfinite(d_gw)] = b_obs
    return phi


def flow_field(phi: ScalarField, free: Mask, d_pix: ScalarField,
               cfg: AnnotationConfig | None = None) -> FlowField:
    """Flow field from a potential: Gaussian-smoothed Sobel gradients,
    normalized to unit direction, distance-to-go magnitude in free space and
    unit-speed escape inside obstacles.

    The Gaussian kernel is truncated at 3 sigma with reflect padding; Sobel
    kernels are the standard 3x3 pair, also reflect-padded. Pixels where the
    smoothed gradient vanishes keep the zero direction. Unreachable free
    pixels (sentinel distance-to-go) get the zero vector.
    """
    cfg = cfg or AnnotationConfig()
    free = np.asarray(free, dtype=bool)
    phi = np.asarray(phi, dtype=np.float64)
    if not np.isfinite(phi).all():
        raise ValueError("potential must be finite after sentinel substitution")
    h, w = phi.shape

    smoothed = ndimage.gaussian_filter(phi, sigma=cfg.gaussian_sigma, mode="reflect", truncate=3.0)
    gx = ndimage.sobel(smoothed, axis=1, mode="reflect")
    gy = ndimage.sobel(smoothed, axis=0, mode="reflect")
    norm = np.hypot(gx, gy)
    ux = -gx / (norm + cfg.epsilon)
    uy = -gy / (norm + cfg.epsilon)

    mag = np.asarray(d_pix, dtype=np.float64).copy()
    mag[~np.isfinite(mag)] = 0.0
    out = np.empty((h, w, 2), dtype=np.float64)
    out[:, :, 0] = np.where(free, ux * mag / w, ux)
    out[:, :, 1] = np.where(free, uy * mag / h, uy)
    return out


# ---------------------------------------------------------------------------
# Start sampling, backtracking, resampling
# ---------------------------------------------------------------------------


def sample_start(free: Mask, d_pix: ScalarField, cfg: AnnotationConfig, rng_seed,
                 d_free: ScalarField | None = None) -> tuple[int, int]:
    """Uniformly sample a start pixel from the reachable free subset.

    Candidates must have finite distance-to-go, distance-to-go at least
    ``start_min_goal_dist``, and obstacle clearance at least
    ``start_min_obs_dist``. If the candidate set is empty the constraints
    are relaxed in that order (goal distance first, then obstacle
    clearance); reachability is never relaxed.
    """
    free = np.asarray(free, dtype=bool)
    d_pix = np.asarray(d_pix, dtype=np.float64)
    if d_free is None:
        d_free = dto(free)

    reachable = free & np.isfinite(d_pix)
    tiers = [
        reachable & (d_pix >= cfg.start_min_goal_dist) & (d_free >= cfg.start_min_obs_dist),
        reachable & (d_free >= cfg.start_min_obs_dist),
        reachable,
    ]
    for cand in tiers:
        flat = np.flatnonzero(cand)
        if flat.size:
            rng = np.random.default_rng(rng_seed)
            i = int(flat[rng.integers(flat.size)])
            return (i % free.shape[1], i // free.shape[1])
    raise UnreachableStartError("no reachable free pixel to start from")


def backtrack(result: geo.GeodesicResult, start) -> np.ndarray:
    """Raw pixel polyline from ``start`` to a goal along the predecessor
    tree. See :func:`flownav.geodesic.backtrack`."""
    return geo.backtrack(result, start)


def resample_arclength(points: np.ndarray, k: int) -> np.ndarray:
    """Resample a polyline to ``k`` waypoints at uniform arc-length spacing.

    Piecewise-linear interpolation; the first and last output points
    coincide with the input endpoints. A zero-length input yields k copies
    of its single point. Units are preserved (callers normalize).
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ValueError("polyline must be an (N, 2) array with N >= 1")
    if len(pts) == 1:
        return np.repeat(pts, k, axis=0)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total == 0.0:
        return np.repeat(pts[:1], k, axis=0)
    targets = np.linspace(0.0, total, k)
    out = np.empty((k, 2), dtype=np.float64)
    out[:, 0] = np.interp(targets, s, pts[:, 0])
    out[:, 1] = np.interp(targets, s, pts[:, 1])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def _pixels_to_norm(poly: np.ndarray, width: int, height: int) -> np.ndarray:
    return np.asarray(poly, dtype=np.float64) / np.array([width, height], dtype=np.float64)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------


def annotate(smap: SemanticMap, mapping: LabelMapping, spec: GoalSpec,
             cfg: AnnotationConfig | None = None, rng_seed=0,
             start: tuple[int, int] | None = None) -> Annotation:
    """Run the full annotation pipeline on one (map, goal) pair.

    ``start`` overrides start sampling with a fixed pixel (it must still be
    reachable). The result is a pure function of (map, mapping, spec, cfg,
    seed, start). Stage errors are re-raised with the failing stage named.
    """
    cfg = cfg or AnnotationConfig()

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FlowNavError as exc:
            raise type(exc)(f"[stage {name}] {exc}") from exc

    free = stage("masks", extract_free, smap, mapping)
    goals = stage("goal", compute_goal, smap, mapping, spec, cfg)
    d_free = dto(free)
    cost = stage("cost", geo.cost_map, d_free, cfg.rho_safe, cfg.lambda_safe)
    # Corner cutting is disabled here: under clip-floor occupancy indexing, a
    # diagonal step with x and y moving in opposite directions passes through
    # an orthogonal corner pixel, so the reference trajectory stays in free
    # space only if both corners are free.
    result = stage("geodesic", geo.geodesic, free, cost, goals, allow_corner_cutting=False)
    d_obs = dtf(~free)
    phi = stage("potential", potential, result.d_weighted, d_obs, free, cfg)
    field_arr = stage("flow", flow_field, phi, free, result.d_pixel, cfg)

    if start is None:
        start = stage("start", sample_start, free, result.d_pixel, cfg, rng_seed, d_free)
    else:
        start = (int(start[0]), int(start[1]))
    poly = stage("backtrack", backtrack, result, start)
    traj_pix = resample_arclength(poly.astype(np.float64), cfg.traj_waypoints)
    trajectory = _pixels_to_norm(traj_pix, smap.width, smap.height)

    ann = Annotation(field=field_arr, trajectory=trajectory, goal_pixels=goals, start=start)
    _check_annotation(ann, free, smap.width, smap.height)
    return ann


def _check_annotation(ann: Annotation, free: Mask, width: int, height: int) -> None:
    # Cheap postcondition checks: trajectory starts at the start pixel, ends
    # on a goal source, and never leaves free space.
    from .errors import InternalConsistencyError
    from .grid_core import norm_to_pixel

    first = ann.trajectory[0] * np.array([width, height])
    if np.linalg.norm(first - np.asarray(ann.start, dtype=np.float64)) > 1.0:
        raise InternalConsistencyError("trajectory does not begin at the start pixel")
    last = ann.trajectory[-1] * np.array([width, height])
    goal_set = {(int(x), int(y)) for x, y in ann.goal_pixels}
    if (int(round(last[0])), int(round(last[1]))) not in goal_set:
        raise InternalConsistencyError("trajectory does not end on a goal pixel")
    idx = norm_to_pixel(ann.trajectory, width, height)
    if not free[idx[:, 1], idx[:, 0]].all():
        raise InternalConsistencyError("trajectory leaves free space")
