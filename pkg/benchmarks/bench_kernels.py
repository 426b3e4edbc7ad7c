#!/usr/bin/env python3
"""Benchmark the hot kernels on both execution paths.

Ray-box intersection and batch angular residuals have genuinely separate
numba and vectorized-numpy implementations, timed side by side in-process.
The EPnP/RANSAC kernels are single-source (compiled when numba is
enabled), so the pure path is measured by re-running this script in a
subprocess with PANOLOC_DISABLE_NUMBA=1.

Usage:
    python benchmarks/bench_kernels.py [--repeats 5] [--rays 131072] ...
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from panoloc._accel import NUMBA_ENABLED
from panoloc.geometry import image_bearings, quaternion_to_rotation, Pose
from panoloc.pnp import (Correspondences, RansacConfig, _residuals_numpy,
                         _residuals_scalar, _solve_epnp, ransac_pnp)
from panoloc.scene_sim import (_intersect_boxes_numpy, _intersect_boxes_scalar,
                               generate_city, sample_trajectory)


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def make_inputs(args):
    rng = np.random.default_rng(0)
    scene = generate_city(args.boxes, (13, 12), seed=7)
    _, pose = sample_trajectory(scene, 1, seed=7)[0]
    params, _ = scene.box_arrays()
    height = int(round((args.rays / 2) ** 0.5))
    bearings = image_bearings(2 * height, height).reshape(-1, 3)
    dirs = np.ascontiguousarray(bearings @ pose.rotation.T)
    origin = pose.camera_center

    rot = quaternion_to_rotation(rng.normal(size=4))
    cam_pose = Pose(rot, -rot.T @ rng.uniform(-20, 20, 3))
    center = cam_pose.camera_center
    ray_dirs = rng.normal(size=(args.points, 3))
    ray_dirs /= np.linalg.norm(ray_dirs, axis=1, keepdims=True)
    pts = center + ray_dirs * rng.uniform(2, 50, (args.points, 1))
    cam = cam_pose.world_to_camera(pts)
    brs = np.ascontiguousarray(cam / np.linalg.norm(cam, axis=1, keepdims=True))
    pts = np.ascontiguousarray(pts)

    minimal_pts = np.ascontiguousarray(pts[:4])
    minimal_brs = np.ascontiguousarray(brs[:4])

    ransac_pts = pts[:500].copy()
    ransac_pts[:200] = rng.uniform(-80, 80, (200, 3))
    ransac_corrs = Correspondences(brs[:500], ransac_pts)

    return {
        "origin": origin, "dirs": dirs, "params": params,
        "rot": cam_pose.rotation, "t": cam_pose.translation,
        "pts": pts, "brs": brs,
        "minimal_pts": minimal_pts, "minimal_brs": minimal_brs,
        "ransac_corrs": ransac_corrs,
    }


def run_benchmarks(args):
    data = make_inputs(args)
    results = {}

    # dual-implementation kernels: both paths measured directly
    if NUMBA_ENABLED:
        results["raycast_numba"] = best_of(
            lambda: _intersect_boxes_scalar(data["origin"], data["dirs"], data["params"]),
            args.repeats)
        results["residuals_numba"] = best_of(
            lambda: _residuals_scalar(data["rot"], data["t"], data["pts"], data["brs"]),
            args.repeats)
    results["raycast_numpy"] = best_of(
        lambda: _intersect_boxes_numpy(data["origin"], data["dirs"], data["params"]),
        args.repeats)
    results["residuals_numpy"] = best_of(
        lambda: _residuals_numpy(data["rot"], data["t"], data["pts"], data["brs"]),
        args.repeats)

    # single-source kernels: timing reflects the active mode
    solver = _solve_epnp if NUMBA_ENABLED else _solve_epnp.py_func
    label = "numba" if NUMBA_ENABLED else "pure"

    def epnp_minimal():
        for _ in range(args.solves):
            solver(data["minimal_pts"], data["minimal_brs"])

    results[f"epnp_minimal_x{args.solves}_{label}"] = best_of(epnp_minimal, args.repeats)
    results[f"epnp_refit_n{args.points}_{label}"] = best_of(
        lambda: solver(data["pts"], data["brs"]), args.repeats)
    results[f"ransac_500pts_1000it_{label}"] = best_of(
        lambda: ransac_pnp(data["ransac_corrs"], RansacConfig(seed=1)),
        max(1, args.repeats // 2))
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--rays", type=int, default=131072)
    parser.add_argument("--boxes", type=int, default=102)
    parser.add_argument("--points", type=int, default=100_000)
    parser.add_argument("--solves", type=int, default=200)
    parser.add_argument("--emit-json", action="store_true",
                        help="print raw timings as JSON (used by the subprocess)")
    args = parser.parse_args()

    results = run_benchmarks(args)
    if args.emit_json:
        print(json.dumps(results))
        return

    mode = "numba" if NUMBA_ENABLED else "pure numpy (PANOLOC_DISABLE_NUMBA)"
    print(f"mode: {mode}")
    if NUMBA_ENABLED:
        env = dict(os.environ, PANOLOC_DISABLE_NUMBA="1")
        cmd = [sys.executable, os.path.abspath(__file__), "--emit-json",
               "--repeats", str(args.repeats), "--rays", str(args.rays),
               "--boxes", str(args.boxes), "--points", str(args.points),
               "--solves", str(args.solves)]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        results.update(json.loads(out.stdout.strip().splitlines()[-1]))

    pairs = [
        ("ray-box intersection", "raycast_numba", "raycast_numpy"),
        ("angular residuals", "residuals_numba", "residuals_numpy"),
        (f"epnp minimal x{args.solves}",
         f"epnp_minimal_x{args.solves}_numba", f"epnp_minimal_x{args.solves}_pure"),
        (f"epnp refit n={args.points}",
         f"epnp_refit_n{args.points}_numba", f"epnp_refit_n{args.points}_pure"),
        ("ransac 500 pts / 1000 it",
         "ransac_500pts_1000it_numba", "ransac_500pts_1000it_pure"),
    ]
    print(f"{'kernel':<28} {'numba (s)':>12} {'numpy (s)':>12} {'speedup':>9}")
    for name, nb_key, np_key in pairs:
        nb = results.get(nb_key)
        pure = results.get(np_key)
        if nb is None and pure is None:
            continue
        nb_s = f"{nb:.5f}" if nb is not None else "-"
        np_s = f"{pure:.5f}" if pure is not None else "-"
        speed = f"{pure / nb:8.1f}x" if nb and pure else "-"
        print(f"{name:<28} {nb_s:>12} {np_s:>12} {speed:>9}")


if __name__ == "__main__":
    main()
