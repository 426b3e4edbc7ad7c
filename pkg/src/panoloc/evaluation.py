"""Accuracy metrics for scene coordinates and estimated poses.

Conventions fixed for reproducibility: distance thresholds are inclusive
(d <= t), percentiles interpolate linearly between closest ranks, pixels
without ground truth are excluded from denominators, and predictions
missing where ground truth exists count as failures at every threshold.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .images import SceneCoordinateImage

__all__ = [
    "EmptyMetricsError",
    "percentile_linear",
    "CoordMetrics",
    "PoseMetrics",
    "coord_distances",
    "coord_accuracy",
    "pose_metrics",
    "error_curves",
    "distance_roc",
    "CONVENTIONS",
]

CONVENTIONS = {
    "thresholds": "inclusive (d <= t)",
    "percentile": "linear interpolation between closest ranks",
    "denominator": "pixels valid in ground truth; missing predictions fail all thresholds",
}


class EmptyMetricsError(ValueError):
    """No pixels (or pose errors) to evaluate."""


@dataclass
class CoordMetrics:
    pct_within_0_5m: float
    pct_within_1m: float
    pct_within_3m: float
    mean_dist_within_3m: float
    n_valid: int

    def as_dict(self) -> dict:
        return {
            "pct_within_0_5m": self.pct_within_0_5m,
            "pct_within_1m": self.pct_within_1m,
            "pct_within_3m": self.pct_within_3m,
            "mean_dist_within_3m": self.mean_dist_within_3m,
            "n_valid": self.n_valid,
        }


@dataclass
class PoseMetrics:
    median_dist_m: float
    p95_dist_m: float
    median_angle_deg: float
    p95_angle_deg: float
    extra_percentiles: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "median_dist_m": self.median_dist_m,
            "p95_dist_m": self.p95_dist_m,
            "median_angle_deg": self.median_angle_deg,
            "p95_angle_deg": self.p95_angle_deg,
        }
        if self.extra_percentiles:
            out["extra_percentiles"] = {
                f"{p:g}": {"dist_m": d, "angle_deg": a}
                for p, (d, a) in sorted(self.extra_percentiles.items())
            }
        return out


def coord_distances(pred: SceneCoordinateImage, gt: SceneCoordinateImage,
                    select: np.ndarray = None):
    """Per-pixel distances over ground-truth-valid pixels.

    Pixels where the prediction is missing come back infinite. ``select``
    optionally restricts the evaluation to a boolean pixel mask.
    Returns (distances, n_valid).
    """
    if pred.coords.shape != gt.coords.shape:
        raise ValueError("prediction and ground truth dims differ")
    gt_mask = gt.mask
    if select is not None:
        gt_mask = gt_mask & select
    n_valid = int(gt_mask.sum())
    if n_valid == 0:
        return np.empty(0), 0
    diff = pred.coords[gt_mask] - gt.coords[gt_mask]
    # spelled out per component so a scalar recomputation reproduces the bits
    dist = np.sqrt(diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1]
                   + diff[:, 2] * diff[:, 2])
    dist[~np.isfinite(dist)] = np.inf
    return dist, n_valid


def _coord_metrics_from_distances(dist: np.ndarray, n_valid: int) -> CoordMetrics:
    within3 = dist <= 3.0
    return CoordMetrics(
        pct_within_0_5m=100.0 * float((dist <= 0.5).sum()) / n_valid,
        pct_within_1m=100.0 * float((dist <= 1.0).sum()) / n_valid,
        pct_within_3m=100.0 * float(within3.sum()) / n_valid,
        mean_dist_within_3m=float(dist[within3].mean()) if within3.any() else 0.0,
        n_valid=n_valid,
    )


def coord_accuracy(pred: SceneCoordinateImage, gt: SceneCoordinateImage,
                   select: np.ndarray = None) -> CoordMetrics:
    """Fractions of pixels within 0.5/1/3 m plus the mean error within 3 m."""
    dist, n_valid = coord_distances(pred, gt, select)
    if n_valid == 0:
        raise EmptyMetricsError("no overlapping valid pixels to evaluate")
    return _coord_metrics_from_distances(dist, n_valid)


def percentile_linear(values, q: float) -> float:
    """Percentile by linear interpolation between closest ranks.

    Spelled out (rather than delegated to numpy) so the convention is
    pinned for reproducibility across library versions.
    """
    x = np.sort(np.asarray(values, dtype=np.float64), kind="stable")
    if x.size == 0:
        raise EmptyMetricsError("no values for percentile")
    pos = (x.size - 1) * q / 100.0
    lo = int(math.floor(pos))
    hi = min(lo + 1, x.size - 1)
    return float(x[lo] + (pos - lo) * (x[hi] - x[lo]))


def pose_metrics(errors, percentiles=()) -> PoseMetrics:
    """Median/95th-percentile distance and angular errors.

    ``errors`` is a sequence of (distance_m, angle_deg);
    ``percentiles`` requests extra levels (e.g. 80).
    """
    arr = np.asarray(list(errors), dtype=np.float64)
    if arr.size == 0:
        raise EmptyMetricsError("no pose errors to evaluate")
    arr = arr.reshape(-1, 2)
    dists, angles = arr[:, 0], arr[:, 1]
    extras = {
        float(p): (percentile_linear(dists, p), percentile_linear(angles, p))
        for p in percentiles
    }
    return PoseMetrics(
        median_dist_m=percentile_linear(dists, 50),
        p95_dist_m=percentile_linear(dists, 95),
        median_angle_deg=percentile_linear(angles, 50),
        p95_angle_deg=percentile_linear(angles, 95),
        extra_percentiles=extras,
    )


def error_curves(errors):
    """Ascending-sorted distance and angle sequences for rank plots."""
    arr = np.asarray(list(errors), dtype=np.float64).reshape(-1, 2)
    return np.sort(arr[:, 0], kind="stable"), np.sort(arr[:, 1], kind="stable")


def distance_roc(pred: SceneCoordinateImage, gt: SceneCoordinateImage,
                 thresholds, select: np.ndarray = None):
    """Cumulative accuracy curve: % of pixels within each threshold.

    Agrees exactly with :func:`coord_accuracy` at shared thresholds.
    """
    dist, n_valid = coord_distances(pred, gt, select)
    if n_valid == 0:
        raise EmptyMetricsError("no overlapping valid pixels to evaluate")
    grid = np.asarray(thresholds, dtype=np.float64)
    pct = np.array([100.0 * float((dist <= t).sum()) / n_valid for t in grid])
    return grid, pct
