"""Command-line surface.

Subcommands: gen, annotate, rollout, eval, plan, render, loss-eval.

Exit codes: 0 success; 1 usage; 2 input validation; 3 pipeline failure
(e.g., unreachable goal); 4 planner failure treated as data (evaluation
continues).

Dataset layouts are JSONL manifests with paths relative to the manifest
file, so datasets stream and append. All outputs are written atomically
(temp file + rename).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import field_gen, metrics, planner_baseline, rollout, scene_gen, supervision
from .config import RunConfig, load_run_config
from .errors import ConfigurationError, FieldFormatError, FlowNavError, LabelClassificationError
from .grid_core import (
    _atomic_write_text,
    extract_free,
    load_field,
    load_scene,
    save_field,
    save_scene,
)

USAGE_EXIT = 1
INPUT_EXIT = 2
PIPELINE_EXIT = 3
PLANNER_FAILURE_EXIT = 4


class _Parser(argparse.ArgumentParser):
    """argparse that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _write_json(path, payload) -> None:
    _atomic_write_text(Path(path), json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_trajectory(path, traj) -> None:
    # Trajectory files are a bare JSON array of [u, v] pairs.
    pairs = [[float(u), float(v)] for u, v in np.asarray(traj, dtype=np.float64)]
    _atomic_write_text(Path(path), json.dumps(pairs) + "\n")


def _read_trajectory(path) -> np.ndarray:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "failure" in data:
        raise _PlannerFailureData(data["failure"])
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FieldFormatError(f"{path} is not a JSON array of [u, v] pairs")
    return arr


class _PlannerFailureData(Exception):
    """A prediction file records a planner failure; evaluation treats it as
    data, not as an error."""


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def _cmd_gen(args) -> int:
    cfg = load_run_config(args.config)
    cfg = cfg.override("generator", width=args.width, height=args.height,
                       n_rooms=args.n_rooms, n_objects=args.n_objects)
    out = Path(args.out)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    manifest_lines = []
    instr_lines = []
    for i in range(args.count):
        seed = args.seed + i
        spec = dataclasses.replace(cfg.generator, rng_seed=seed)
        smap, mapping = scene_gen.gen_scene(spec)
        instruction = scene_gen.gen_instruction(smap, mapping, seed)
        png = out / "scenes" / f"scene_{seed:05d}.png"
        sidecar = out / "scenes" / f"scene_{seed:05d}.json"
        save_scene(png, sidecar, smap, mapping, scene_gen.DEFAULT_LABEL_NAMES)
        episode = f"ep_{seed:05d}"
        manifest_lines.append({
            "episode": episode,
            "scene_png": f"scenes/{png.name}",
            "scene_json": f"scenes/{sidecar.name}",
            "instruction": {
                "text": instruction.text,
                "target_label": instruction.spec.target_label,
                "instance_index": instruction.spec.instance_index,
                "side": instruction.spec.side,
            },
            "seed": seed,
            "annotation_dir": f"annotations/{episode}",
        })
        instr_lines.append({"episode": episode, "text": instruction.text})
        print(f"gen {episode}: {instruction.text!r}")
    _atomic_write_text(out / "manifest.jsonl",
                       "".join(json.dumps(line, sort_keys=True) + "\n" for line in manifest_lines))
    _atomic_write_text(out / "instructions.jsonl",
                       "".join(json.dumps(line, sort_keys=True) + "\n" for line in instr_lines))
    _write_json(out / "config.json", cfg.to_dict())
    return 0


# ---------------------------------------------------------------------------
# annotate
# ---------------------------------------------------------------------------


def _goal_spec_from_args(args, label_names) -> field_gen.GoalSpec:
    by_name = {v: k for k, v in label_names.items()}
    target = args.target
    if target in by_name:
        label = by_name[target]
    else:
        try:
            label = int(target)
        except ValueError:
            raise ConfigurationError(f"unknown target {target!r}") from None
    side = None if args.side in (None, "none") else args.side
    return field_gen.GoalSpec(target_label=label, instance_index=args.instance, side=side)


def _annotate_one(scene_png, scene_json, spec, seed, out_dir, cfg: RunConfig,
                  instruction_text=None) -> dict:
    smap, mapping, _ = load_scene(scene_png, scene_json)
    ann = field_gen.annotate(smap, mapping, spec, cfg.annotation, seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_field(out_dir / "field.ffld", ann.field)
    _write_trajectory(out_dir / "trajectory.json", ann.trajectory)
    meta = {
        "scene_png": str(scene_png),
        "scene_json": str(scene_json),
        "goal_pixels": [[int(x), int(y)] for x, y in ann.goal_pixels],
        "start": [int(ann.start[0]), int(ann.start[1])],
        "start_norm": [ann.start[0] / smap.width, ann.start[1] / smap.height],
        "seed": int(seed),
        "instruction": instruction_text,
        "goal_spec": {"target_label": spec.target_label,
                      "instance_index": spec.instance_index, "side": spec.side},
        "config": cfg.to_dict(),
    }
    _write_json(out_dir / "meta.json", meta)
    return meta


def _annotate_episode(manifest_dir, line, cfg) -> tuple[str, str]:
    """Batch worker. Returns (episode, status)."""
    episode = line.get("episode", "?")
    try:
        instr = line["instruction"]
        spec = field_gen.GoalSpec(target_label=instr["target_label"],
                                  instance_index=instr.get("instance_index"),
                                  side=instr.get("side"))
        _annotate_one(Path(manifest_dir) / line["scene_png"],
                      Path(manifest_dir) / line["scene_json"],
                      spec, line.get("seed", 0),
                      Path(manifest_dir) / line["annotation_dir"], cfg,
                      instruction_text=instr.get("text"))
        return episode, "ok"
    except FlowNavError as exc:
        return episode, f"failed: {exc}"


def _cmd_annotate(args) -> int:
    cfg = load_run_config(args.config)
    if args.batch:
        return _run_batch(args.batch, args.jobs, _annotate_episode, cfg, "annotate")
    if not (args.scene and args.sidecar and args.target and args.out):
        raise ConfigurationError("annotate needs --scene, --sidecar, --target, and --out (or --batch)")
    _, _, label_names = load_scene(args.scene, args.sidecar)
    spec = _goal_spec_from_args(args, label_names or scene_gen.DEFAULT_LABEL_NAMES)
    _annotate_one(args.scene, args.sidecar, spec, args.seed, args.out, cfg)
    print(f"annotated -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# rollout
# ---------------------------------------------------------------------------


def _rollout_cfg(args, cfg: RunConfig) -> rollout.RolloutConfig:
    return cfg.override("rollout", steps=args.steps, grid_size=args.grid_size,
                        mode=args.mode, alpha=args.alpha, beta=args.beta).rollout


def _rollout_episode(manifest_dir, line, cfg) -> tuple[str, str]:
    episode = line.get("episode", "?")
    bundle = Path(manifest_dir) / line["annotation_dir"]
    try:
        field_arr = load_field(bundle / "field.ffld")
        meta = json.loads((bundle / "meta.json").read_text(encoding="utf-8"))
        traj = rollout.rollout_field(field_arr, meta["start_norm"], cfg.rollout)
        _write_trajectory(bundle / "rollout.json", traj)
        return episode, "ok"
    except (FlowNavError, FileNotFoundError, ValueError) as exc:
        return episode, f"failed: {exc}"


def _cmd_rollout(args) -> int:
    cfg = load_run_config(args.config)
    rcfg = _rollout_cfg(args, cfg)
    cfg = dataclasses.replace(cfg, rollout=rcfg)
    if args.batch:
        return _run_batch(args.batch, args.jobs, _rollout_episode, cfg, "rollout")
    if not (args.field and args.start and args.out):
        raise ConfigurationError("rollout needs --field, --start, and --out (or --batch)")
    field_arr = load_field(args.field)
    start = _parse_point(args.start)
    traj = rollout.rollout_field(field_arr, start, rcfg)
    _write_trajectory(args.out, traj)
    _write_json(str(args.out) + ".meta.json", {"config": cfg.to_dict(), "start": list(start)})
    print(f"rollout ({rcfg.mode}, T={rcfg.steps}, grid={rcfg.grid_size}) -> {args.out}")
    return 0


def _parse_point(text) -> tuple[float, float]:
    try:
        u, v = (float(p) for p in text.split(","))
    except ValueError:
        raise ConfigurationError(f"point must be 'u,v', got {text!r}") from None
    return (u, v)


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def _plan_one(scene_png, scene_json, spec, start, cfg: RunConfig):
    """Side goal + inflated occupancy + A*. Returns trajectory or None."""
    smap, mapping, _ = load_scene(scene_png, scene_json)
    candidates = [i for i in smap.instances if i.label == spec.target_label]
    if not candidates:
        raise field_gen.TargetNotFoundError(f"no instance with label {spec.target_label}")
    index = spec.instance_index or 0
    target = candidates[index]
    scale = np.array([smap.width, smap.height, smap.width, smap.height], dtype=np.float64)
    tbox = np.asarray(target.bbox, dtype=np.float64) / scale
    center = ((tbox[0] + tbox[2]) / 2.0, (tbox[1] + tbox[3]) / 2.0)
    goal = planner_baseline.side_goal(tbox, center, spec.side, cfg.planner.side_offset)

    boxes = [np.asarray(i.bbox, dtype=np.float64) / scale
             for i in smap.instances if i is not target]
    if spec.side is not None:
        boxes.append(tbox)  # approaching a side forbids the box itself
    occ = planner_baseline.inflate_and_rasterize(
        np.array(boxes).reshape(-1, 4), cfg.planner, smap.width)
    return planner_baseline.astar(occ, start, goal, cfg.planner.waypoints)


def _plan_episode(manifest_dir, line, cfg) -> tuple[str, str]:
    episode = line.get("episode", "?")
    bundle = Path(manifest_dir) / line["annotation_dir"]
    try:
        meta = json.loads((bundle / "meta.json").read_text(encoding="utf-8"))
        instr = line["instruction"]
        spec = field_gen.GoalSpec(target_label=instr["target_label"],
                                  instance_index=instr.get("instance_index"),
                                  side=instr.get("side"))
        traj = _plan_one(Path(manifest_dir) / line["scene_png"],
                         Path(manifest_dir) / line["scene_json"],
                         spec, meta["start_norm"], cfg)
        if traj is None:
            _write_json(bundle / "plan.json", {"failure": "no_path"})
            return episode, "planner-failure"
        _write_trajectory(bundle / "plan.json", traj)
        return episode, "ok"
    except (FlowNavError, FileNotFoundError, ValueError) as exc:
        return episode, f"failed: {exc}"


def _cmd_plan(args) -> int:
    cfg = load_run_config(args.config)
    if args.batch:
        return _run_batch(args.batch, args.jobs, _plan_episode, cfg, "plan",
                          soft_states=("planner-failure",))
    if not (args.scene and args.sidecar and args.target and args.start and args.out):
        raise ConfigurationError("plan needs --scene, --sidecar, --target, --start, and --out (or --batch)")
    _, _, label_names = load_scene(args.scene, args.sidecar)
    spec = _goal_spec_from_args(args, label_names or scene_gen.DEFAULT_LABEL_NAMES)
    traj = _plan_one(args.scene, args.sidecar, spec, _parse_point(args.start), cfg)
    if traj is None:
        _write_json(args.out, {"failure": "no_path"})
        print("plan: no path (failure recorded)")
        return PLANNER_FAILURE_EXIT
    _write_trajectory(args.out, traj)
    _write_json(str(args.out) + ".meta.json", {"config": cfg.to_dict()})
    print(f"plan -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _load_bundle(bundle_dir):
    bundle_dir = Path(bundle_dir)
    meta = json.loads((bundle_dir / "meta.json").read_text(encoding="utf-8"))
    annotated = _read_trajectory(bundle_dir / "trajectory.json")
    field_arr = load_field(bundle_dir / "field.ffld")
    smap, mapping, _ = load_scene(meta["scene_png"], meta["scene_json"])
    obstacles = ~extract_free(smap, mapping)
    return meta, annotated, field_arr, obstacles


def _eval_one(pred_path, bundle_dir, pred_field_path=None) -> dict:
    meta, annotated, ann_field, obstacles = _load_bundle(bundle_dir)
    try:
        pred = _read_trajectory(pred_path)
    except _PlannerFailureData as exc:
        return {"failure": str(exc)}
    pred_field = load_field(pred_field_path) if pred_field_path else None
    report = metrics.evaluate_episode(pred, annotated, obstacles,
                                      pred_field=pred_field, annotated_field=ann_field)
    return report.to_dict()


def _eval_episode(manifest_dir, line, cfg_and_pred) -> tuple[str, str]:
    cfg, pred_name = cfg_and_pred
    episode = line.get("episode", "?")
    bundle = Path(manifest_dir) / line["annotation_dir"]
    try:
        row = _eval_one(bundle / pred_name, bundle)
        row["episode"] = episode
        return episode, json.dumps(row, sort_keys=True)
    except (FlowNavError, FileNotFoundError, ValueError) as exc:
        return episode, json.dumps({"episode": episode, "failure": f"{exc}"}, sort_keys=True)


def _cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    if args.batch:
        manifest = Path(args.batch)
        lines = _read_manifest(manifest)
        results = _map_episodes(manifest.parent, lines, args.jobs, _eval_episode,
                                (cfg, args.pred_name))
        rows = [json.loads(status) for _, status in results]
        out = Path(args.out or (manifest.parent / "reports.jsonl"))
        _atomic_write_text(out, "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
        if args.csv:
            _append_csv(args.csv, rows)
        ok = sum(1 for r in rows if "failure" not in r)
        agg = metrics.aggregate([metrics.MetricsReport(**{k: r[k] for k in ("fge", "cr", "curv", "plr")},
                                                       ae=r.get("ae"), me=r.get("me"))
                                 for r in rows if "failure" not in r])
        print(f"eval: {ok}/{len(rows)} episodes evaluated -> {out}")
        if agg:
            print("  " + ", ".join(f"{k}={v:.4f}" for k, v in agg.items() if k != "episodes"))
        return 0
    if not (args.pred and args.annotation and args.out):
        raise ConfigurationError("eval needs --pred, --annotation, and --out (or --batch)")
    row = _eval_one(args.pred, args.annotation, args.pred_field)
    row["config"] = cfg.to_dict()
    _write_json(args.out, row)
    if args.csv:
        _append_csv(args.csv, [row])
    if "failure" in row:
        print(f"eval: prediction records planner failure ({row['failure']})")
        return PLANNER_FAILURE_EXIT
    print("eval: " + ", ".join(f"{k}={row[k]:.4f}" for k in ("fge", "cr", "curv", "plr")))
    return 0


_CSV_COLUMNS = ("episode", "fge", "cr", "curv", "plr", "ae", "me", "failure")


def _append_csv(path, rows) -> None:
    path = Path(path)
    new = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS, extrasaction="ignore")
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------


def _cmd_render(args) -> int:
    from .render import render_annotation_svg

    bundle = Path(args.annotation)
    meta = json.loads((bundle / "meta.json").read_text(encoding="utf-8"))
    smap, mapping, _ = load_scene(meta["scene_png"], meta["scene_json"])
    ann = field_gen.Annotation(
        field=load_field(bundle / "field.ffld"),
        trajectory=_read_trajectory(bundle / "trajectory.json"),
        goal_pixels=np.asarray(meta["goal_pixels"], dtype=np.int64).reshape(-1, 2),
        start=tuple(meta["start"]),
    )
    svg = render_annotation_svg(smap, mapping, ann, grid_size=args.grid_size, stride=args.stride)
    _atomic_write_text(Path(args.out), svg)
    print(f"render -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# loss-eval
# ---------------------------------------------------------------------------


def _cmd_loss_eval(args) -> int:
    pred_field = load_field(args.pred)
    target_field = load_field(args.target)
    batch = supervision.stratified_sample(args.grid, args.samples, args.seed)
    pred = supervision.sample_targets(pred_field, batch)
    target = supervision.sample_targets(target_field, batch)
    report = {
        "direction_loss": supervision.direction_loss(pred, target),
        "magnitude_loss": supervision.magnitude_loss(pred, target),
        "total_loss": supervision.total_loss(pred, target, args.lam),
        "lambda": args.lam,
        "g": batch.grid,
        "n_s": len(batch.points),
        "per_bin": batch.per_bin,
        "seed": args.seed,
    }
    _write_json(args.out, report)
    print(f"loss-eval: total={report['total_loss']:.6f} "
          f"(dir={report['direction_loss']:.6f}, mag={report['magnitude_loss']:.6f})")
    return 0


# ---------------------------------------------------------------------------
# batch helpers
# ---------------------------------------------------------------------------


def _read_manifest(path) -> list:
    lines = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        raw = raw.strip()
        if raw:
            lines.append(json.loads(raw))
    if not lines:
        raise FieldFormatError(f"manifest {path} is empty")
    return lines


def _map_episodes(manifest_dir, lines, jobs, worker, cfg):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(worker, str(manifest_dir), line, cfg) for line in lines]
            return [f.result() for f in futures]
    return [worker(str(manifest_dir), line, cfg) for line in lines]


def _run_batch(manifest_path, jobs, worker, cfg, name, soft_states=()) -> int:
    manifest = Path(manifest_path)
    lines = _read_manifest(manifest)
    results = _map_episodes(manifest.parent, lines, jobs, worker, cfg)
    failed = 0
    for episode, status in results:
        print(f"{name} {episode}: {status}")
        if status != "ok" and status not in soft_states:
            failed += 1
    print(f"{name}: {len(results) - failed}/{len(results)} episodes ok")
    return 0 if failed == 0 else PIPELINE_EXIT


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="flownav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="TOML config file (or FLOWNAV_CONFIG)")

    p = sub.add_parser("gen", help="generate scenes, instructions, and a manifest")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--n-rooms", type=int, default=None, dest="n_rooms")
    p.add_argument("--n-objects", type=int, default=None, dest="n_objects")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("annotate", help="annotate scenes with flow fields and trajectories")
    common(p)
    p.add_argument("--scene", default=None, help="scene PNG")
    p.add_argument("--sidecar", default=None, help="scene sidecar JSON")
    p.add_argument("--target", default=None, help="target label name or id")
    p.add_argument("--instance", type=int, default=None)
    p.add_argument("--side", choices=["left", "right", "top", "bottom", "none"], default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="annotation bundle directory")
    p.add_argument("--batch", default=None, help="manifest JSONL")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("rollout", help="integrate a trajectory out of a flow field")
    common(p)
    p.add_argument("--field", default=None, help="FFLD flow field")
    p.add_argument("--start", default=None, help="start point 'u,v'")
    p.add_argument("--out", default=None, help="trajectory JSON")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--grid-size", type=int, default=None, dest="grid_size")
    p.add_argument("--mode", choices=list(rollout.MODES), default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--batch", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_rollout)

    p = sub.add_parser("plan", help="A* baseline over ground-truth instance boxes")
    common(p)
    p.add_argument("--scene", default=None)
    p.add_argument("--sidecar", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--instance", type=int, default=None)
    p.add_argument("--side", choices=["left", "right", "top", "bottom", "none"], default=None)
    p.add_argument("--start", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--batch", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("eval", help="evaluate trajectories (and optionally fields)")
    common(p)
    p.add_argument("--pred", default=None, help="predicted trajectory JSON")
    p.add_argument("--annotation", default=None, help="annotation bundle directory")
    p.add_argument("--pred-field", default=None, dest="pred_field")
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None, help="append a CSV row per episode")
    p.add_argument("--batch", default=None)
    p.add_argument("--pred-name", default="rollout.json", dest="pred_name",
                   help="prediction filename inside each bundle (batch mode)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("render", help="render an annotation bundle to SVG")
    common(p)
    p.add_argument("--annotation", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-size", type=int, default=100, dest="grid_size")
    p.add_argument("--stride", type=int, default=10)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("loss-eval", help="field-matching losses between two FFLD files")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=10)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_loss_eval)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        return args.func(args)
    except (ConfigurationError, FieldFormatError, LabelClassificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_EXIT
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_EXIT
    except FlowNavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PIPELINE_EXIT


if __name__ == "__main__":
    sys.exit(main())
