"""Batch command-line pipeline with deterministic, file-based stages.

Subcommands: generate, render, fit-map, predict-sim, localize, evaluate.
Every command is a pure function of (input files, flags, seed); re-running
writes byte-identical outputs. Flags can also be supplied through a JSON
config file (top-level keys and/or per-subcommand sections); explicit
flags win. Exit codes: 0 success, 2 bad input, 3 localisation reached no
consensus on any frame.
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import evaluation, fileio, scene_sim
from .geometry import (Pose, image_bearings, load_poses_jsonl,
                       relative_pose_errors, save_poses_jsonl)
from .images import FIRST_INSTANCE_LABEL
from .instance_map import build_instance_map
from .pnp import Correspondences, NoConsensusError, RansacConfig, ransac_pnp

__all__ = ["main"]

_ROC_THRESHOLDS = [round(0.1 * k, 1) for k in range(1, 51)]


class InputError(ValueError):
    """Bad or missing command input (exit code 2)."""


def _parse_dims(text: str):
    try:
        width, height = (int(x) for x in text.lower().split("x"))
    except ValueError as exc:
        raise InputError(f"bad dims {text!r}, expected WxH") from exc
    if width != 2 * height:
        raise InputError(f"dims must satisfy W = 2H, got {text}")
    return width, height


def _require(path, kind: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{kind} not found: {p}")
    return p


def _write_meta(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    skip = {"func", "config"}
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in skip and not callable(v)}
    meta = {"command": command, "seed": flags.get("seed"), "flags": flags}
    with open(out_dir / f"{command.replace('-', '_')}_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, default=str)
        fh.write("\n")


def _frame_files(frames_dir: Path) -> list:
    frames = sorted(p.stem for p in frames_dir.glob("*.scrd"))
    if not frames:
        raise InputError(f"no *.scrd frames in {frames_dir}")
    for frame in frames:
        if not (frames_dir / f"{frame}.lbls").exists():
            raise InputError(f"missing label file for frame {frame}")
    return frames


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.preset:
        preset = scene_sim.SMALL_CITY if args.preset == "small" else scene_sim.LARGE_CITY
        n_buildings, grid = preset["n_buildings"], preset["grid_dims"]
    else:
        if args.buildings is None:
            raise InputError("either --preset or --buildings is required")
        n_buildings = args.buildings
        grid = tuple(int(x) for x in args.grid.lower().split("x"))
    scene = scene_sim.generate_city(n_buildings, grid, seed=args.seed)
    frames = scene_sim.sample_trajectory(scene, args.poses, seed=args.seed,
                                         height=args.camera_height)
    fileio.save_scene(out_dir / "scene.json", scene)
    save_poses_jsonl(out_dir / "poses.jsonl", frames)
    _write_meta(out_dir, "generate", args)
    print(f"generate: {len(scene.buildings)} buildings, {scene.road_segments} road segments, "
          f"{len(frames)} poses -> {out_dir}")
    return 0


def cmd_render(args) -> int:
    scene = fileio.load_scene(_require(args.scene, "scene file"))
    poses = load_poses_jsonl(_require(args.poses, "pose file"))
    dims = _parse_dims(args.dims)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def render_one(item):
        frame, pose = item
        coords, labels = scene_sim.raycast_render(scene, pose, dims)
        fileio.save_coords(out_dir / f"{frame}.scrd", coords)
        fileio.save_labels(out_dir / f"{frame}.lbls", labels)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            list(pool.map(render_one, poses))
    else:
        for item in poses:
            render_one(item)
    _write_meta(out_dir, "render", args)
    print(f"render: {len(poses)} frames at {dims[0]}x{dims[1]} -> {out_dir}")
    return 0


def cmd_fit_map(args) -> int:
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if args.cloud:
        points, labels = fileio.load_ply(_require(args.cloud, "point cloud"))
    elif args.frames:
        frames_dir = _require(args.frames, "frames directory")
        chunks_p, chunks_l = [], []
        for i, frame in enumerate(_frame_files(frames_dir)):
            coords = fileio.load_coords(frames_dir / f"{frame}.scrd")
            labs = fileio.load_labels(frames_dir / f"{frame}.lbls")
            sel = coords.mask & (labs.labels >= FIRST_INSTANCE_LABEL)
            pts = coords.coords[sel]
            lab = labs.labels[sel]
            if args.max_points_per_frame and pts.shape[0] > args.max_points_per_frame:
                gen = np.random.Generator(np.random.Philox(
                    key=np.array([args.seed, 10_000 + i], dtype=np.uint64)))
                keep = np.sort(gen.permutation(pts.shape[0])[:args.max_points_per_frame])
                pts, lab = pts[keep], lab[keep]
            chunks_p.append(pts)
            chunks_l.append(lab)
        points = np.concatenate(chunks_p) if chunks_p else np.empty((0, 3))
        labels = np.concatenate(chunks_l) if chunks_l else np.empty(0, dtype=np.uint32)
    else:
        raise InputError("either --frames or --cloud is required")

    imap = build_instance_map(points, labels)
    fileio.save_instance_map(out_path, imap)
    meta_dir = out_path.parent
    _write_meta(meta_dir, "fit-map", args)
    if imap.skipped:
        with open(meta_dir / "fit_map_skipped.json", "w", encoding="utf-8") as fh:
            json.dump({str(k): v for k, v in sorted(imap.skipped.items())}, fh, indent=1)
            fh.write("\n")
    print(f"fit-map: {len(imap)} instances ({len(imap.skipped)} skipped) -> {out_path}")
    return 0


def cmd_predict_sim(args) -> int:
    frames_dir = _require(args.frames, "frames directory")
    imap = fileio.load_instance_map(_require(args.map, "instance map"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bounds = None
    if args.scene:
        scene = fileio.load_scene(_require(args.scene, "scene file"))
        bounds = scene.aabb(inflate=0.1)

    frames = _frame_files(frames_dir)
    for i, frame in enumerate(frames):
        coords = fileio.load_coords(frames_dir / f"{frame}.scrd")
        labels = fileio.load_labels(frames_dir / f"{frame}.lbls")
        noise = scene_sim.NoiseModel(
            coord_sigma=args.sigma,
            outlier_rate=args.outlier_rate,
            label_flip_rate=args.label_flip_rate,
            seed=args.seed + i,
        )
        pred_coords, pred_labels = scene_sim.simulate_predictions(
            coords, labels, noise, imap, bounds=bounds)
        fileio.save_coords(out_dir / f"{frame}.scrd", pred_coords)
        fileio.save_labels(out_dir / f"{frame}.lbls", pred_labels)
    _write_meta(out_dir, "predict-sim", args)
    print(f"predict-sim: {len(frames)} frames (sigma={args.sigma}, "
          f"outliers={args.outlier_rate}, flips={args.label_flip_rate}) -> {out_dir}")
    return 0


def _localize_frame(index, frame, frames_dir, imap, bearings, dims, args):
    coords = fileio.load_coords(frames_dir / f"{frame}.scrd")
    labels = fileio.load_labels(frames_dir / f"{frame}.lbls")
    if (coords.width, coords.height) != dims:
        raise InputError(f"frame {frame} dims differ from {dims}")
    map_labels = np.array(imap.instance_labels(), dtype=np.uint32)
    sel = coords.mask & np.isin(labels.labels, map_labels)
    rows, cols = np.nonzero(sel)
    if rows.size < 4:
        return frame, None, 0, float("nan"), f"only {rows.size} usable building pixels"

    if args.max_corrs and rows.size > args.max_corrs:
        gen = np.random.Generator(np.random.Philox(
            key=np.array([args.seed, 20_000 + index], dtype=np.uint64)))
        keep = np.sort(gen.permutation(rows.size)[:args.max_corrs])
        rows, cols = rows[keep], cols[keep]

    corrs = Correspondences(
        bearings[rows, cols],
        coords.coords[rows, cols],
        np.stack([cols, rows], axis=1).astype(np.float64),
    )
    cfg = RansacConfig(
        iterations=args.iterations,
        inlier_threshold_deg=args.threshold_deg,
        min_sample=args.min_sample,
        seed=args.seed + index,
    )
    try:
        est = ransac_pnp(corrs, cfg)
    except NoConsensusError as exc:
        return frame, None, 0, float("nan"), str(exc)
    return (frame, est.pose, int(est.inlier_indices.size),
            float(est.mean_inlier_angle_deg), None)


def cmd_localize(args) -> int:
    frames_dir = _require(args.frames, "frames directory")
    imap = fileio.load_instance_map(_require(args.map, "instance map"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    frames = _frame_files(frames_dir)
    first = fileio.load_coords(frames_dir / f"{frames[0]}.scrd")
    dims = (first.width, first.height)
    bearings = image_bearings(*dims)

    def work(item):
        index, frame = item
        return _localize_frame(index, frame, frames_dir, imap, bearings, dims, args)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(work, enumerate(frames)))
    else:
        results = [work(item) for item in enumerate(frames)]

    results.sort(key=lambda r: r[0])
    fileio.save_estimates_jsonl(out_dir / "estimates.jsonl", results)
    _write_meta(out_dir, "localize", args)
    n_failed = sum(1 for r in results if r[1] is None)
    print(f"localize: {len(results) - n_failed}/{len(results)} frames estimated -> {out_dir}")
    if n_failed == len(results):
        print("localize: no frame reached consensus", file=sys.stderr)
        return 3
    return 0


def cmd_evaluate(args) -> int:
    estimates = fileio.load_estimates_jsonl(_require(args.estimates, "estimate file"))
    gt_poses = dict(load_poses_jsonl(_require(args.gt_poses, "ground-truth poses")))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    errors = []
    n_failed = 0
    for frame, pose, _, _, _ in estimates:
        if pose is None:
            n_failed += 1
            continue
        if frame not in gt_poses:
            raise InputError(f"estimate frame {frame} has no ground-truth pose")
        errors.append(relative_pose_errors(pose, gt_poses[frame]))

    percentiles = [float(p) for p in args.percentiles.split(",") if p] if args.percentiles else []
    report = {"conventions": dict(evaluation.CONVENTIONS),
              "frames": {"evaluated": len(errors), "failed": n_failed}}
    if errors:
        report["pose"] = evaluation.pose_metrics(errors, percentiles).as_dict()
        dist_curve, angle_curve = evaluation.error_curves(errors)
        _write_curve(out_dir / "dist_curve.csv", dist_curve)
        _write_curve(out_dir / "angle_curve.csv", angle_curve)

    if args.pred_frames and args.gt_frames:
        pred_dir = _require(args.pred_frames, "predicted frames")
        gt_dir = _require(args.gt_frames, "ground-truth frames")
        dists_all, dists_bld = [], []
        for frame in _frame_files(gt_dir):
            pred = fileio.load_coords(pred_dir / f"{frame}.scrd")
            gt = fileio.load_coords(gt_dir / f"{frame}.scrd")
            gt_labels = fileio.load_labels(gt_dir / f"{frame}.lbls")
            d, n = evaluation.coord_distances(pred, gt)
            if n:
                dists_all.append(d)
            d, n = evaluation.coord_distances(pred, gt, select=gt_labels.instance_mask)
            if n:
                dists_bld.append(d)
        rows = []
        for key, chunks in (("coord", dists_all), ("coord_buildings", dists_bld)):
            if not chunks:
                continue
            dist = np.concatenate(chunks)
            report[key] = evaluation._coord_metrics_from_distances(dist, dist.size).as_dict()
            pct = [100.0 * float((dist <= t).sum()) / dist.size for t in _ROC_THRESHOLDS]
            rows.append((key, pct))
        if rows:
            with open(out_dir / "roc.csv", "w", encoding="utf-8") as fh:
                fh.write("threshold_m," + ",".join(key for key, _ in rows) + "\n")
                for i, t in enumerate(_ROC_THRESHOLDS):
                    fh.write(f"{t:g}," + ",".join(f"{pct[i]!r}" for _, pct in rows) + "\n")

    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_meta(out_dir, "evaluate", args)
    if "pose" in report:
        pm = report["pose"]
        print(f"evaluate: median {pm['median_dist_m']:.4f} m / "
              f"{pm['median_angle_deg']:.4f} deg over {len(errors)} frames -> {out_dir}")
    else:
        print(f"evaluate: no successful frames -> {out_dir}")
    return 0


def _write_curve(path, values) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank,value\n")
        for i, v in enumerate(values):
            fh.write(f"{i},{float(v)!r}\n")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(parser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--config", type=str, default=None,
                        help="JSON config file; explicit flags override it")
    parser.add_argument("--out", type=str, required=False, default="out",
                        help="output directory (or file for fit-map)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="panoloc",
        description="Spherical-panorama relocalisation pipeline on synthetic cuboid cities")
    subs = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = subs.add_parser("generate", help="generate a city and camera trajectory")
    p.add_argument("--preset", choices=["small", "large"], default=None)
    p.add_argument("--buildings", type=int, default=None)
    p.add_argument("--grid", type=str, default="13x12", help="block grid GXxGZ")
    p.add_argument("--poses", type=int, default=100)
    p.add_argument("--camera-height", type=float, default=2.0)
    _add_common(p)
    p.set_defaults(func=cmd_generate)
    subparsers["generate"] = p

    p = subs.add_parser("render", help="ray-cast ground-truth frames")
    p.add_argument("--scene", type=str, required=True)
    p.add_argument("--poses", type=str, required=True)
    p.add_argument("--dims", type=str, default="512x256")
    _add_common(p)
    p.set_defaults(func=cmd_render)
    subparsers["render"] = p

    p = subs.add_parser("fit-map", help="fit per-instance whitening transforms")
    p.add_argument("--frames", type=str, default=None)
    p.add_argument("--cloud", type=str, default=None, help="ASCII PLY point cloud")
    p.add_argument("--max-points-per-frame", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_fit_map, out="map.json")
    subparsers["fit-map"] = p

    p = subs.add_parser("predict-sim", help="simulate predictor output from ground truth")
    p.add_argument("--frames", type=str, required=True)
    p.add_argument("--map", type=str, required=True)
    p.add_argument("--scene", type=str, default=None,
                   help="scene file for the outlier resampling volume")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--outlier-rate", type=float, default=0.0)
    p.add_argument("--label-flip-rate", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=cmd_predict_sim)
    subparsers["predict-sim"] = p

    p = subs.add_parser("localize", help="estimate poses from predicted frames")
    p.add_argument("--frames", type=str, required=True)
    p.add_argument("--map", type=str, required=True)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--threshold-deg", type=float, default=0.22)
    p.add_argument("--min-sample", type=int, default=4)
    p.add_argument("--max-corrs", type=int, default=5000,
                   help="seeded per-frame correspondence cap (0 = no cap)")
    _add_common(p)
    p.set_defaults(func=cmd_localize)
    subparsers["localize"] = p

    p = subs.add_parser("evaluate", help="score estimates and predictions")
    p.add_argument("--estimates", type=str, required=True)
    p.add_argument("--gt-poses", type=str, required=True)
    p.add_argument("--pred-frames", type=str, default=None)
    p.add_argument("--gt-frames", type=str, default=None)
    p.add_argument("--percentiles", type=str, default="",
                   help="extra pose percentiles, e.g. '80'")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)
    subparsers["evaluate"] = p

    return parser, subparsers


def _apply_config(argv, subparsers) -> None:
    config_path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif arg.startswith("--config="):
            config_path = arg.split("=", 1)[1]
    if config_path is None:
        return
    with open(config_path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    command = argv[0] if argv and not argv[0].startswith("-") else None
    merged = {k: v for k, v in config.items() if not isinstance(v, dict)}
    if command in config and isinstance(config[command], dict):
        merged.update(config[command])
    if command in subparsers:
        defaults = {k.replace("-", "_"): v for k, v in merged.items()}
        subparsers[command].set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        _apply_config(argv, subparsers)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
