"""
Annotate a procedurally generated scene
=======================================

Generates one desk-scale semantic scene, derives a goal-conditioned flow
field and reference trajectory for a templated instruction, and renders
everything to an SVG you can open in a browser.
"""

from pathlib import Path

import numpy as np

import flownav as fn
from flownav.render import render_annotation_svg

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# A scene is an integer label raster plus recorded object instances. The
# label mapping partitions ids into free space, obstacles, and the subset
# of obstacles you can navigate to.
smap, mapping = fn.gen_scene(fn.SceneSpec(rng_seed=42))
print(f"scene: {smap.width}x{smap.height}, "
      f"{len(smap.instances)} objects, labels {sorted(np.unique(smap.labels))}")

# Instructions are templated text paired with a machine-readable goal spec,
# so nothing downstream ever parses language.
instruction = fn.gen_instruction(smap, mapping, rng_seed=42)
print(f"instruction: {instruction.text!r} -> {instruction.spec}")

# The annotation pipeline: free mask, goal band, safety-aware cost map,
# cost-weighted geodesic, piecewise potential, smoothed-gradient flow field,
# start sampling, and backtracked reference trajectory.
ann = fn.annotate(smap, mapping, instruction.spec, rng_seed=42)
mags = np.hypot(ann.field[..., 0], ann.field[..., 1])
print(f"flow field: {ann.field.shape}, magnitude range [{mags.min():.4f}, {mags.max():.4f}]")
print(f"trajectory: {len(ann.trajectory)} waypoints from pixel {ann.start} "
      f"to within the {len(ann.goal_pixels)}-pixel goal band")

# Everything serializes: the field as FFLD, the scene as PNG + JSON.
fn.save_field(out / "field_42.ffld", ann.field)
fn.save_scene(out / "scene_42.png", out / "scene_42.json", smap, mapping)
svg = render_annotation_svg(smap, mapping, ann, grid_size=100, stride=5)
(out / "annotation_42.svg").write_text(svg)
print(f"wrote {out / 'annotation_42.svg'}")
