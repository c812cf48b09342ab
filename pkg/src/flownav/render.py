"""Static SVG rendering of scenes, fields, and trajectories.

SVG is deterministic text output, which keeps renders diffable in tests.
The scene raster is embedded as a base64 PNG; field arrows are drawn on a
stride-subsampled query grid; the trajectory is a polyline and goal pixels
are small rects.
"""

from __future__ import annotations

import base64
import io

import numpy as np

from .errors import ConfigurationError
from .field_gen import Annotation
from .grid_core import LabelMapping, SemanticMap
from .rollout import GridFieldProvider, query_grid

# Fixed palette: free, wall, then object labels cycle through accent colors.
_FREE_RGB = (245, 245, 240)
_WALL_RGB = (70, 70, 80)
_ACCENTS = [(196, 121, 67), (104, 143, 84), (126, 105, 160), (181, 86, 107),
            (92, 134, 155), (167, 138, 72)]


def _scene_png_base64(smap: SemanticMap, mapping: LabelMapping) -> str:
    from PIL import Image

    labels = smap.labels
    rgb = np.zeros((*labels.shape, 3), dtype=np.uint8)
    rgb[:] = _FREE_RGB
    accents = {}
    for lab in sorted(set(int(v) for v in np.unique(labels))):
        if lab in mapping.free_labels:
            continue
        if lab in mapping.targetable_labels:
            color = accents.setdefault(lab, _ACCENTS[len(accents) % len(_ACCENTS)])
        else:
            color = _WALL_RGB
        rgb[labels == lab] = color
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def render_annotation_svg(smap: SemanticMap, mapping: LabelMapping, ann: Annotation,
                          grid_size: int = 100, stride: int = 10) -> str:
    """SVG overlay: scene raster, subsampled field arrows, trajectory, goal
    band, start marker.

    Arrows are drawn at every ``stride``-th cell of a ``grid_size`` query
    grid on both axes, so the document contains exactly (grid_size /
    stride)^2 arrow elements; ``grid_size`` must be divisible by ``stride``.
    """
    if grid_size % stride != 0:
        raise ConfigurationError("grid_size must be divisible by stride")
    w, h = smap.width, smap.height
    grid = query_grid(GridFieldProvider(ann.field), grid_size)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<image href="data:image/png;base64,{_scene_png_base64(smap, mapping)}" '
        f'x="0" y="0" width="{w}" height="{h}"/>',
    ]

    for x, y in ann.goal_pixels:
        lines.append(f'<rect class="goal" x="{int(x)}" y="{int(y)}" width="1" height="1" '
                     'fill="#2b8a3e" fill-opacity="0.9"/>')

    # Arrow length scales with the local magnitude, capped at one stride cell.
    cell = w / grid_size
    cap = stride * cell * 0.9
    for i in range(0, grid_size, stride):
        for j in range(0, grid_size, stride):
            cx = (j + 0.5) / grid_size * w
            cy = (i + 0.5) / grid_size * h
            vx, vy = grid[i, j]
            mag = float(np.hypot(vx * w, vy * h))
            if mag > 0:
                scale = min(mag, cap) / mag
            else:
                scale = 0.0
            ex = cx + vx * w * scale
            ey = cy + vy * h * scale
            lines.append(
                f'<line class="arrow" x1="{cx:.2f}" y1="{cy:.2f}" x2="{ex:.2f}" y2="{ey:.2f}" '
                'stroke="#1c5d99" stroke-width="0.6"/>'
            )

    pts = " ".join(f"{u * w:.2f},{v * h:.2f}" for u, v in ann.trajectory)
    lines.append(f'<polyline class="trajectory" points="{pts}" fill="none" '
                 'stroke="#c2255c" stroke-width="1.2"/>')
    sx, sy = ann.start
    lines.append(f'<circle class="start" cx="{sx + 0.5}" cy="{sy + 0.5}" r="2.5" '
                 'fill="#e8590c"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
