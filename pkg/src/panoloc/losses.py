"""Scoring losses over predicted scene coordinates, labels and logits.

Directional (reprojection) and Euclidean (reconstruction) terms are sums of
per-pixel norms; cross entropy is averaged over pixels. Every loss returns
its analytic gradient alongside the value so predictions can be validated
against finite differences.
"""

from dataclasses import dataclass
import math

import numpy as np

from .geometry import Pose
from .images import LabelImage, SceneCoordinateImage

__all__ = [
    "LossWeights",
    "LogitImage",
    "loss_l1_repr",
    "loss_l2_rec",
    "loss_l3",
    "cross_entropy",
    "loss_l4",
    "loss_l5",
]

# Camera-frame points shorter than this have no usable direction; the
# normalization gradient blows up, so such pixels are skipped and tallied.
_DIRECTION_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Mixing constants: alpha blends reprojection into reconstruction;
    the rec weights scale the global/local reconstruction terms added to
    cross entropy."""

    alpha: float = 0.02
    w_rec_global: float = 0.1
    w_rec_local: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.w_rec_global <= 0.0 or self.w_rec_local <= 0.0:
            raise ValueError("reconstruction weights must be positive")


@dataclass
class LogitImage:
    """(H, W, L) scores; channel c scores the panoptic label label_ids[c]."""

    scores: np.ndarray
    label_ids: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        ids = np.asarray(self.label_ids)
        if scores.ndim != 3:
            raise ValueError(f"scores must be (H, W, L), got {scores.shape}")
        if ids.ndim != 1 or ids.shape[0] != scores.shape[2]:
            raise ValueError("label_ids must list one label per score channel")
        if len(np.unique(ids)) != ids.shape[0]:
            raise ValueError("label_ids must be unique")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        self.scores = scores
        self.label_ids = ids.astype(np.int64)


def _fsum(values: np.ndarray) -> float:
    """Order-independent sum of the per-pixel terms."""
    return math.fsum(values.tolist())


def loss_l1_repr(pred: SceneCoordinateImage, pose: Pose, bearings: np.ndarray,
                 tally: dict = None):
    """Directional reprojection loss on the unit sphere.

    Sums, over valid pixels, the Euclidean distance between the normalized
    camera-frame prediction and the pixel bearing; invariant to moving a
    prediction along its own ray. Returns (value, d value / d coords).
    Pixels whose camera-frame point is shorter than the direction guard are
    skipped; pass ``tally`` to collect their count under "skipped".
    """
    mask = pred.mask
    coords = pred.coords[mask]
    brs = np.asarray(bearings, dtype=np.float64)[mask]

    cam = coords @ pose.rotation + pose.translation
    norm = np.linalg.norm(cam, axis=1)
    ok = norm >= _DIRECTION_EPS
    if tally is not None:
        tally["skipped"] = tally.get("skipped", 0) + int((~ok).sum())

    unit = np.zeros_like(cam)
    unit[ok] = cam[ok] / norm[ok, None]
    diff = unit - brs
    dist = np.linalg.norm(diff, axis=1)
    value = _fsum(dist[ok])

    active = ok & (dist > 0.0)
    ddir = np.zeros_like(cam)
    if np.any(active):
        h = diff[active] / dist[active, None]
        u = unit[active]
        radial = np.einsum("ij,ij->i", u, h)
        ddir[active] = (h - u * radial[:, None]) / norm[active, None]
    grad_rows = ddir @ pose.rotation.T

    grad = np.zeros_like(pred.coords)
    grad[mask] = grad_rows
    return value, grad


def loss_l2_rec(pred: SceneCoordinateImage, gt: SceneCoordinateImage):
    """Euclidean reconstruction loss over pixels with ground truth."""
    mask = pred.mask & gt.mask
    diff = pred.coords[mask] - gt.coords[mask]
    dist = np.linalg.norm(diff, axis=1)
    value = _fsum(dist)

    rows = np.zeros_like(diff)
    pos = dist > 0.0
    rows[pos] = diff[pos] / dist[pos, None]
    grad = np.zeros_like(pred.coords)
    grad[mask] = rows
    return value, grad


def loss_l3(pred: SceneCoordinateImage, gt: SceneCoordinateImage, pose: Pose,
            bearings: np.ndarray, weights: LossWeights = None):
    """Blend alpha * reprojection + (1 - alpha) * reconstruction."""
    w = weights or LossWeights()
    v1, g1 = loss_l1_repr(pred, pose, bearings)
    v2, g2 = loss_l2_rec(pred, gt)
    return w.alpha * v1 + (1.0 - w.alpha) * v2, w.alpha * g1 + (1.0 - w.alpha) * g2


def _label_channels(logits: LogitImage, labels: LabelImage) -> np.ndarray:
    """(H, W) channel index of each pixel's label; unknown labels raise."""
    order = np.argsort(logits.label_ids, kind="stable")
    sorted_ids = logits.label_ids[order]
    flat = labels.labels.astype(np.int64).ravel()
    pos = np.searchsorted(sorted_ids, flat)
    bad = (pos >= sorted_ids.shape[0]) | (sorted_ids[np.minimum(pos, sorted_ids.shape[0] - 1)] != flat)
    if np.any(bad):
        missing = np.unique(flat[bad])
        raise ValueError(f"labels without a logit channel: {missing.tolist()}")
    return order[pos].reshape(labels.labels.shape)


def cross_entropy(logits: LogitImage, labels: LabelImage):
    """Mean per-pixel negative log softmax of the true label's channel."""
    channels = _label_channels(logits, labels)
    scores = logits.scores
    h, w, _ = scores.shape
    npix = h * w

    peak = scores.max(axis=2, keepdims=True)
    lse = peak[..., 0] + np.log(np.exp(scores - peak).sum(axis=2))
    true_score = np.take_along_axis(scores, channels[..., None], axis=2)[..., 0]
    value = _fsum((lse - true_score).ravel()) / npix

    grad = np.exp(scores - lse[..., None])
    flat = grad.reshape(npix, -1)
    flat[np.arange(npix), channels.ravel()] -= 1.0
    return value, grad / npix


def loss_l4(pred: SceneCoordinateImage, gt: SceneCoordinateImage,
            logits: LogitImage, labels: LabelImage, weights: LossWeights = None):
    """Cross entropy plus weighted world-space reconstruction.

    Returns (value, (d/d coords, d/d logits)).
    """
    w = weights or LossWeights()
    vce, gce = cross_entropy(logits, labels)
    vrec, grec = loss_l2_rec(pred, gt)
    return vce + w.w_rec_global * vrec, (w.w_rec_global * grec, gce)


def loss_l5(local_pred: SceneCoordinateImage, local_gt: SceneCoordinateImage,
            logits: LogitImage, labels: LabelImage, weights: LossWeights = None):
    """Cross entropy plus weighted local-coordinate reconstruction.

    ``local_gt`` holds per-pixel whitened coordinates under the true label;
    pixels whose label carries no whitening transform are NaN there and
    drop out of the reconstruction term.
    """
    w = weights or LossWeights()
    vce, gce = cross_entropy(logits, labels)
    vrec, grec = loss_l2_rec(local_pred, local_gt)
    return vce + w.w_rec_local * vrec, (w.w_rec_local * grec, gce)
