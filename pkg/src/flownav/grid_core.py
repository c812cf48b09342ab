"""Raster primitives for 2D navigation maps.

Conventions used throughout the package:

* Rasters are row-major numpy arrays indexed ``arr[py, px]`` with y pointing
  down and x pointing right.
* Normalized coordinates (u, v) live in [0, 1]^2 with u = x / width and
  v = y / height.
* The sentinel for "unreachable / undefined" scalar values is ``+inf``
  (never NaN, so ordering comparisons stay total).

Three raster kinds are used as plain numpy arrays:

* ``Mask``        -- bool, shape (H, W)
* ``ScalarField`` -- float64, shape (H, W), possibly containing +inf
* ``FlowField``   -- float64, shape (H, W, 2), per-pixel (vx, vy) in
  normalized units per unit of normalized time
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FieldFormatError, LabelClassificationError

Mask = np.ndarray
ScalarField = np.ndarray
FlowField = np.ndarray

UNREACHABLE = np.inf

FFLD_MAGIC = b"FFLD"
FFLD_VERSION = 1
_FFLD_HEADER = struct.Struct("<4sIIII")


# ---------------------------------------------------------------------------
# Map types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectInstance:
    """One labeled object: label id, half-open pixel bbox, center pixel.

    ``bbox`` is (xmin, ymin, xmax, ymax) with 0 <= xmin < xmax <= width and
    0 <= ymin < ymax <= height.
    """

    label: int
    bbox: tuple[int, int, int, int]
    center: tuple[int, int]


@dataclass(frozen=True)
class LabelMapping:
    """Partition of label ids into free space and obstacles.

    ``targetable_labels`` must be a subset of ``obstacle_labels``; free and
    obstacle sets must be disjoint.
    """

    free_labels: frozenset
    obstacle_labels: frozenset
    targetable_labels: frozenset

    def __post_init__(self):
        free = frozenset(self.free_labels)
        obs = frozenset(self.obstacle_labels)
        tgt = frozenset(self.targetable_labels)
        object.__setattr__(self, "free_labels", free)
        object.__setattr__(self, "obstacle_labels", obs)
        object.__setattr__(self, "targetable_labels", tgt)
        if free & obs:
            raise ValueError(f"free and obstacle labels overlap: {sorted(free & obs)}")
        if not tgt <= obs:
            raise ValueError("targetable labels must be a subset of obstacle labels")


@dataclass
class SemanticMap:
    """Integer label raster plus recorded object instances."""

    labels: np.ndarray
    instances: list

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise ValueError("labels must be a 2D raster")
        for inst in self.instances:
            x0, y0, x1, y1 = inst.bbox
            if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
                raise ValueError(f"instance bbox {inst.bbox} outside {self.width}x{self.height} raster")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


# ---------------------------------------------------------------------------
# Masks and distance transforms
# ---------------------------------------------------------------------------


def extract_free(smap: SemanticMap, mapping: LabelMapping) -> Mask:
    """Binary free-space mask: True where the pixel label is a free label.

    Raises LabelClassificationError naming the first unclassified label id
    and its pixel.
    """
    free_ids = np.array(sorted(mapping.free_labels), dtype=np.int64)
    obs_ids = np.array(sorted(mapping.obstacle_labels), dtype=np.int64)
    labels = smap.labels
    free = np.isin(labels, free_ids)
    known = free | np.isin(labels, obs_ids)
    if not known.all():
        py, px = np.argwhere(~known)[0]
        raise LabelClassificationError(
            f"label id {int(labels[py, px])} at pixel ({int(px)}, {int(py)}) "
            "is neither free nor obstacle in the label mapping"
        )
    return free


def brute_force_distance_squared(inside: Mask) -> np.ndarray:
    """Reference all-pairs squared distance from each True pixel to the
    nearest False pixel (int64). O(N^2); for oracle testing only."""
    inside = np.asarray(inside, dtype=bool)
    out = np.zeros(inside.shape, dtype=np.int64)
    ys, xs = np.nonzero(~inside)
    if len(ys) == 0:
        raise ValueError("mask has no outside pixel")
    yy, xx = np.indices(inside.shape)
    d2 = (yy[..., None] - ys) ** 2 + (xx[..., None] - xs) ** 2
    out[inside] = d2.min(axis=-1)[inside]
    return out


def distance_squared(inside: Mask) -> np.ndarray:
    """Exact squared Euclidean distance (int64) from each True pixel to the
    nearest False pixel; 0 on False pixels."""
    inside = np.asarray(inside, dtype=bool)
    if inside.all():
        raise ValueError("mask has no outside pixel")
    iy, ix = ndimage.distance_transform_edt(inside, return_distances=False, return_indices=True)
    yy, xx = np.indices(inside.shape)
    return ((yy - iy).astype(np.int64) ** 2 + (xx - ix).astype(np.int64) ** 2)


def dto(free: Mask) -> ScalarField:
    """Distance-to-obstacle transform over free space.

    At every free pixel: exact Euclidean pixel distance to the nearest
    obstacle pixel. Obstacle pixels hold 0. A mask with no obstacle at all
    yields the +inf sentinel on free pixels and a warning.
    """
    free = np.asarray(free, dtype=bool)
    if free.all():
        warnings.warn("free mask has no obstacle pixel; distances set to the unreachable sentinel")
        return np.full(free.shape, UNREACHABLE, dtype=np.float64)
    return np.sqrt(distance_squared(free).astype(np.float64))


def dtf(obstacles: Mask) -> ScalarField:
    """Distance-to-free transform over obstacle space.

    Positive only inside obstacles (distance to the nearest free pixel),
    0 in free space. Mirror of :func:`dto` with the roles swapped.
    """
    obstacles = np.asarray(obstacles, dtype=bool)
    if obstacles.all():
        warnings.warn("obstacle mask has no free pixel; distances set to the unreachable sentinel")
        return np.full(obstacles.shape, UNREACHABLE, dtype=np.float64)
    return np.sqrt(distance_squared(obstacles).astype(np.float64))


# ---------------------------------------------------------------------------
# Coordinate conversion and sampling
# ---------------------------------------------------------------------------


def clamp01(p) -> np.ndarray:
    """Clamp normalized coordinates to [0, 1] componentwise."""
    return np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)


# Tolerance for the pixel-boundary floor: coordinates stored as p / W do not
# always survive the float round trip (p / W) * W == p, so values a few ulp
# below an integer boundary must still index the boundary pixel.
_FLOOR_GUARD = 1e-9


def norm_to_pixel(p, width: int, height: int) -> np.ndarray:
    """Map normalized points to integer pixel indices.

    px = clip(floor(u * W), 0, W - 1) and py = clip(floor(v * H), 0, H - 1),
    after clamping the input to [0, 1]^2. Accepts a single (u, v) pair or an
    (N, 2) array; occupancy is then queried row-major as ``mask[py, px]``.
    """
    p = clamp01(p)
    scale = np.array([width, height], dtype=np.float64)
    idx = np.floor(p * scale + _FLOOR_GUARD).astype(np.int64)
    return np.clip(idx, 0, np.array([width - 1, height - 1], dtype=np.int64))


def bilinear_sample(field: np.ndarray, p) -> np.ndarray:
    """Edge-clamped bilinear interpolation of a raster at normalized points.

    Cell centers sit at ((px + 0.5) / W, (py + 0.5) / H); queries at exact
    centers return the stored value and the outer half-pixel margin clamps
    to the border cell. Works on (H, W) scalar and (H, W, C) vector rasters,
    and on a single point or an (N, 2) batch.

    If a corner with nonzero interpolation weight holds the +inf sentinel,
    the sentinel propagates to the result.
    """
    field = np.asarray(field, dtype=np.float64)
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    pts = clamp01(np.atleast_2d(pts))

    h, w = field.shape[:2]
    x = np.clip(pts[:, 0] * w - 0.5, 0.0, w - 1.0)
    y = np.clip(pts[:, 1] * h - 0.5, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0

    weights = [
        ((1.0 - fx) * (1.0 - fy), y0, x0),
        (fx * (1.0 - fy), y0, x1),
        ((1.0 - fx) * fy, y1, x0),
        (fx * fy, y1, x1),
    ]

    vector = field.ndim == 3
    out_shape = (len(pts), field.shape[2]) if vector else (len(pts),)
    out = np.zeros(out_shape, dtype=np.float64)
    sentinel = np.zeros(len(pts), dtype=bool)
    for wgt, yy, xx in weights:
        vals = field[yy, xx]
        inf_here = np.isinf(vals).any(axis=-1) if vector else np.isinf(vals)
        sentinel |= inf_here & (wgt > 0.0)
        vals = np.where(np.isinf(vals), 0.0, vals)
        out += (wgt[:, None] if vector else wgt) * vals
    if sentinel.any():
        out[sentinel] = UNREACHABLE

    if single:
        return out[0]
    return out


# ---------------------------------------------------------------------------
# Field serialization (FFLD)
# ---------------------------------------------------------------------------
#
# Little-endian binary layout: magic "FFLD", u32 version, u32 width,
# u32 height, u32 channels (1 or 2), then width*height*channels float32
# values in row-major order.


def field_to_bytes(field: np.ndarray) -> bytes:
    field = np.asarray(field)
    if field.ndim == 2:
        channels = 1
    elif field.ndim == 3 and field.shape[2] in (1, 2):
        channels = field.shape[2]
    else:
        raise FieldFormatError(f"unsupported field shape {field.shape}")
    h, w = field.shape[:2]
    header = _FFLD_HEADER.pack(FFLD_MAGIC, FFLD_VERSION, w, h, channels)
    return header + np.ascontiguousarray(field, dtype="<f4").tobytes()


def field_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < _FFLD_HEADER.size:
        raise FieldFormatError("field data shorter than the FFLD header")
    magic, version, w, h, channels = _FFLD_HEADER.unpack_from(data)
    if magic != FFLD_MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}; expected {FFLD_MAGIC!r}")
    if version != FFLD_VERSION:
        raise FieldFormatError(f"unsupported FFLD version {version}")
    if channels not in (1, 2):
        raise FieldFormatError(f"channels must be 1 or 2, got {channels}")
    expected = _FFLD_HEADER.size + 4 * w * h * channels
    if len(data) != expected:
        raise FieldFormatError(f"field payload is {len(data)} bytes; expected {expected}")
    values = np.frombuffer(data, dtype="<f4", offset=_FFLD_HEADER.size)
    arr = values.reshape(h, w, channels).astype(np.float64)
    return arr[:, :, 0] if channels == 1 else arr


def save_field(path, field: np.ndarray) -> None:
    """Write a scalar or flow field as FFLD (atomic: temp file + rename)."""
    _atomic_write_bytes(Path(path), field_to_bytes(field))


def load_field(path) -> np.ndarray:
    return field_from_bytes(Path(path).read_bytes())


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


# ---------------------------------------------------------------------------
# Scene serialization (8-bit PNG + sidecar JSON)
# ---------------------------------------------------------------------------


def save_scene(png_path, json_path, smap: SemanticMap, mapping: LabelMapping, label_names=None) -> None:
    """Store a semantic map as an 8-bit single-channel PNG (pixel value =
    label id) plus a JSON sidecar with the label mapping and instances."""
    from PIL import Image

    labels = smap.labels
    if labels.min() < 0 or labels.max() > 255:
        raise FieldFormatError("PNG scene storage requires label ids in [0, 255]")
    png_path = Path(png_path)
    tmp = png_path.with_name(png_path.name + ".tmp")
    Image.fromarray(labels.astype(np.uint8), mode="L").save(tmp, format="PNG")
    tmp.replace(png_path)

    sidecar = {
        "width": smap.width,
        "height": smap.height,
        "label_mapping": {
            "free": sorted(int(v) for v in mapping.free_labels),
            "obstacle": sorted(int(v) for v in mapping.obstacle_labels),
            "targetable": sorted(int(v) for v in mapping.targetable_labels),
        },
        "instances": [
            {"label": int(i.label), "bbox": [int(b) for b in i.bbox], "center": [int(c) for c in i.center]}
            for i in smap.instances
        ],
        "label_names": {str(k): v for k, v in (label_names or {}).items()},
    }
    _atomic_write_text(Path(json_path), json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_scene(png_path, json_path):
    """Load a semantic map stored by :func:`save_scene`.

    Returns (SemanticMap, LabelMapping, label_names).
    """
    from PIL import Image

    with Image.open(png_path) as img:
        labels = np.asarray(img.convert("L"), dtype=np.int64)
    sidecar = json.loads(Path(json_path).read_text(encoding="utf-8"))
    if (sidecar["height"], sidecar["width"]) != labels.shape:
        raise FieldFormatError(
            f"sidecar says {sidecar['width']}x{sidecar['height']} but PNG is "
            f"{labels.shape[1]}x{labels.shape[0]}"
        )
    lm = sidecar["label_mapping"]
    mapping = LabelMapping(
        free_labels=frozenset(lm["free"]),
        obstacle_labels=frozenset(lm["obstacle"]),
        targetable_labels=frozenset(lm["targetable"]),
    )
    instances = [
        ObjectInstance(label=int(e["label"]), bbox=tuple(int(b) for b in e["bbox"]),
                       center=tuple(int(c) for c in e["center"]))
        for e in sidecar["instances"]
    ]
    label_names = {int(k): v for k, v in sidecar.get("label_names", {}).items()}
    return SemanticMap(labels=labels, instances=instances), mapping, label_names
