"""Shared fixtures and synthetic-data helpers."""

import numpy as np
import pytest

from panoloc.geometry import Pose, quaternion_to_rotation
from panoloc.pnp import Correspondences


def random_pose(rng) -> Pose:
    rot = quaternion_to_rotation(rng.normal(size=4))
    center = rng.uniform(-20.0, 20.0, 3)
    return Pose(rot, -rot.T @ center)


def synthetic_corrs(pose: Pose, n: int, rng, planar: bool = False,
                    depth=(2.0, 50.0)) -> Correspondences:
    """Exact correspondences generated by forward projection."""
    center = pose.camera_center
    if planar:
        normal = rng.normal(size=3)
        normal /= np.linalg.norm(normal)
        tangent = np.cross(normal, np.array([1.0, 0.31, -0.27]))
        tangent /= np.linalg.norm(tangent)
        bitangent = np.cross(normal, tangent)
        origin = center + normal * rng.uniform(depth[0] + 3.0, depth[1] / 2.0)
        uv = rng.uniform(-10.0, 10.0, (n, 2))
        pts = origin + uv[:, :1] * tangent + uv[:, 1:] * bitangent
    else:
        dirs = rng.normal(size=(n, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = center + dirs * rng.uniform(depth[0], depth[1], (n, 1))
    cam = pose.world_to_camera(pts)
    bearings = cam / np.linalg.norm(cam, axis=1, keepdims=True)
    return Correspondences(bearings, pts)


def numeric_gradient(fn, coords: np.ndarray, indices, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar fn at selected flat indices."""
    out = np.empty(len(indices))
    flat = coords.reshape(-1)
    for k, idx in enumerate(indices):
        orig = flat[idx]
        flat[idx] = orig + h
        up = fn(coords)
        flat[idx] = orig - h
        down = fn(coords)
        flat[idx] = orig
        out[k] = (up - down) / (2.0 * h)
    return out


def gradient_close(analytic, numeric, rel_tol: float = 1e-4) -> bool:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return bool(np.all(np.abs(analytic - numeric) / scale < rel_tol))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
