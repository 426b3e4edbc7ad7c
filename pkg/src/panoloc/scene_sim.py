"""Synthetic cuboid city: generation, ray-cast ground truth, point-cloud
projection, prediction-noise simulation and cuboid map approximation.

The world is y-up with an infinite ground plane at y = 0; buildings are
yawed cuboids resting on the ground, each carrying a globally unique
instance label. Ray casting renders exact per-pixel scene coordinates and
panoptic labels for an equirectangular camera, standing in for a learned
coordinate predictor whose errors are then simulated by a seeded noise
model.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._accel import NUMBA_ENABLED, maybe_njit
from .geometry import Pose, bearing_to_pixel, heading_pose, image_bearings
from .images import (FIRST_INSTANCE_LABEL, ROAD_LABEL, SKY_LABEL, VOID_LABEL,
                     LabelImage, SceneCoordinateImage)
from .instance_map import InstanceMap, unwhiten, whiten

__all__ = [
    "PlacementError",
    "Cuboid",
    "CityLayout",
    "CityScene",
    "NoiseModel",
    "generate_city",
    "sample_trajectory",
    "raycast_render",
    "render_approximate_gt",
    "project_pointcloud",
    "simulate_predictions",
    "remove_buildings",
    "cuboid_approximation",
    "approximate_city",
    "cuboids_overlap",
    "SMALL_CITY",
    "LARGE_CITY",
]

_RAY_EPS = 1e-9

# Building count and block grid of the two stock city sizes. Street
# frontage sections (one per block) are reported as road segments.
SMALL_CITY = {"n_buildings": 102, "grid_dims": (13, 12)}
LARGE_CITY = {"n_buildings": 827, "grid_dims": (42, 23)}


class PlacementError(RuntimeError):
    """City generation could not place the requested buildings."""


@dataclass(frozen=True)
class Cuboid:
    """Yawed box resting on the ground: world = center + Ry(yaw) @ local."""

    center: np.ndarray
    half_extents: np.ndarray
    yaw: float
    label: int

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        half = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        if np.any(half <= 0.0):
            raise ValueError("half_extents must be positive")
        if self.label < FIRST_INSTANCE_LABEL:
            raise ValueError(f"instance labels start at {FIRST_INSTANCE_LABEL}")
        center.setflags(write=False)
        half.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_extents", half)

    def corners(self) -> np.ndarray:
        """(8, 3) world corners in a fixed sign order."""
        signs = np.array([[sx, sy, sz]
                          for sx in (-1.0, 1.0)
                          for sy in (-1.0, 1.0)
                          for sz in (-1.0, 1.0)])
        local = signs * self.half_extents
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        world = np.empty_like(local)
        world[:, 0] = c * local[:, 0] + s * local[:, 2] + self.center[0]
        world[:, 1] = local[:, 1] + self.center[1]
        world[:, 2] = -s * local[:, 0] + c * local[:, 2] + self.center[2]
        return world

    def contains(self, point: np.ndarray, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=np.float64) - self.center
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        local = np.array([c * p[0] - s * p[2], p[1], s * p[0] + c * p[2]])
        return bool(np.all(np.abs(local) <= self.half_extents + margin))

    def surface_distance(self, point: np.ndarray) -> float:
        """Unsigned distance from a point to the box surface."""
        p = np.asarray(point, dtype=np.float64) - self.center
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        local = np.abs(np.array([c * p[0] - s * p[2], p[1], s * p[0] + c * p[2]]))
        d = local - self.half_extents
        outside = np.linalg.norm(np.maximum(d, 0.0))
        inside = -min(0.0, float(np.max(d)))
        return float(outside) if outside > 0.0 else inside


def cuboids_overlap(a: Cuboid, b: Cuboid) -> bool:
    """Separating-axis overlap test for two yawed, ground-aligned boxes."""
    ay0, ay1 = a.center[1] - a.half_extents[1], a.center[1] + a.half_extents[1]
    by0, by1 = b.center[1] - b.half_extents[1], b.center[1] + b.half_extents[1]
    if ay1 <= by0 or by1 <= ay0:
        return False
    # footprint corners (y collapses pairs, any 4 distinct ones suffice)
    rect_a = a.corners()[::2][:, [0, 2]]
    rect_b = b.corners()[::2][:, [0, 2]]
    for yaw in (a.yaw, b.yaw):
        c, s = math.cos(yaw), math.sin(yaw)
        for axis in ((c, -s), (s, c)):
            pa = rect_a @ np.array(axis)
            pb = rect_b @ np.array(axis)
            if pa.max() <= pb.min() or pb.max() <= pa.min():
                return False
    return True


@dataclass(frozen=True)
class CityLayout:
    """Street-grid metadata needed to sample trajectories."""

    grid_dims: tuple
    block: float
    street: float

    @property
    def pitch(self) -> float:
        return self.block + self.street

    def block_center(self, index: int) -> tuple:
        gx, gz = self.grid_dims
        i, j = index % gx, index // gx
        x = (i - (gx - 1) / 2.0) * self.pitch
        z = (j - (gz - 1) / 2.0) * self.pitch
        return x, z

    def segment_center(self, index: int) -> tuple:
        """Centre of the street section fronting block ``index`` (south side)."""
        x, z = self.block_center(index)
        return x, z - (self.block / 2.0 + self.street / 2.0)


@dataclass
class CityScene:
    buildings: tuple
    road_segments: int
    seed: int
    layout: CityLayout = field(default=None, compare=False)

    def __post_init__(self):
        self.buildings = tuple(self.buildings)
        labels = [b.label for b in self.buildings]
        if len(set(labels)) != len(labels):
            raise ValueError("building instance labels must be unique")

    def labels(self) -> list:
        return [b.label for b in self.buildings]

    def box_arrays(self):
        """Packed (B, 8) parameters [cx,cy,cz,hx,hy,hz,cos,sin] plus labels."""
        n = len(self.buildings)
        params = np.empty((n, 8))
        labels = np.empty(n, dtype=np.uint32)
        for i, b in enumerate(self.buildings):
            params[i, 0:3] = b.center
            params[i, 3:6] = b.half_extents
            params[i, 6] = math.cos(b.yaw)
            params[i, 7] = math.sin(b.yaw)
            labels[i] = b.label
        return params, labels

    def aabb(self, inflate: float = 0.0) -> np.ndarray:
        """(2, 3) bounds over building corners and the ground plane."""
        if not self.buildings:
            return np.array([[-1.0, 0.0, -1.0], [1.0, 1.0, 1.0]])
        corners = np.concatenate([b.corners() for b in self.buildings])
        lo = corners.min(axis=0)
        hi = corners.max(axis=0)
        lo[1] = min(lo[1], 0.0)
        span = hi - lo
        return np.array([lo - inflate * span, hi + inflate * span])


@dataclass(frozen=True)
class NoiseModel:
    """Surrogate for coordinate-predictor error.

    Gaussian jitter on coordinates, a fraction of pixels resampled
    uniformly inside the scene volume, and a fraction of building pixels
    whose instance label flips: the pixel keeps its local coordinates but
    is unwhitened with the wrong instance's transform, reproducing the
    dominant instance-misrecognition failure.
    """

    coord_sigma: float = 0.0
    outlier_rate: float = 0.0
    label_flip_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.coord_sigma < 0.0:
            raise ValueError("coord_sigma must be >= 0")
        for name in ("outlier_rate", "label_flip_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def generate_city(n_buildings: int, grid_dims=(13, 12), seed: int = 0, *,
                  block: float = 20.0, street: float = 8.0,
                  footprint=(3.5, 6.5), height=(3.0, 15.0),
                  yaw_max: float = 0.3) -> CityScene:
    """Procedural street-grid city, deterministic per seed.

    Buildings occupy distinct blocks of an axis-aligned street grid with
    jittered footprints, heights and yaw; every building stays inside its
    block, so the scene is overlap-free by construction.
    """
    gx, gz = grid_dims
    n_blocks = gx * gz
    if n_buildings > n_blocks:
        raise PlacementError(
            f"cannot place {n_buildings} buildings on a {gx}x{gz} grid ({n_blocks} blocks)")
    if footprint[1] * math.sqrt(2.0) >= block / 2.0:
        raise PlacementError("footprint range too large for the block size")

    layout = CityLayout((gx, gz), float(block), float(street))
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    chosen = np.sort(rng.permutation(n_blocks)[:n_buildings])

    buildings = []
    for k, blk in enumerate(chosen):
        bx, bz = layout.block_center(int(blk))
        hx = rng.uniform(footprint[0], footprint[1])
        hz = rng.uniform(footprint[0], footprint[1])
        hy = rng.uniform(height[0], height[1])
        yaw = rng.uniform(-yaw_max, yaw_max) if yaw_max > 0.0 else 0.0
        margin = block / 2.0 - math.hypot(hx, hz) - 0.25
        ox = rng.uniform(-margin, margin) if margin > 0.0 else 0.0
        oz = rng.uniform(-margin, margin) if margin > 0.0 else 0.0
        buildings.append(Cuboid(
            center=np.array([bx + ox, hy, bz + oz]),
            half_extents=np.array([hx, hy, hz]),
            yaw=float(yaw),
            label=FIRST_INSTANCE_LABEL + k,
        ))
    return CityScene(tuple(buildings), n_blocks, int(seed), layout)


def sample_trajectory(scene: CityScene, n_poses: int, seed: int = 0, *,
                      height: float = 2.0, heading_jitter: float = 0.25) -> list:
    """[(frame_id, Pose)] cameras near road-segment centres.

    Cameras sit on street centrelines (buildings never reach them), at
    ``height`` above ground, heading along the street with seeded jitter.
    """
    if scene.layout is None:
        raise ValueError("scene carries no layout; trajectories are sampled at generation time")
    layout = scene.layout
    n_segments = scene.road_segments
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 1], dtype=np.uint64)))
    frames = []
    for i in range(n_poses):
        seg = int(rng.integers(0, n_segments))
        x, z = layout.segment_center(seg)
        x += rng.uniform(-0.4, 0.4) * layout.block
        heading = math.pi / 2.0 + rng.uniform(-heading_jitter, heading_jitter)
        if rng.integers(0, 2):
            heading += math.pi
        frames.append((f"{i:06d}", heading_pose(np.array([x, height, z]), heading)))
    return frames


def remove_buildings(scene: CityScene, fraction: float, seed: int = 0) -> CityScene:
    """Drop a seeded uniform sample of floor(fraction * N) buildings."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    n = len(scene.buildings)
    k = int(math.floor(fraction * n))
    if k == 0:
        return CityScene(scene.buildings, scene.road_segments, scene.seed, scene.layout)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 2], dtype=np.uint64)))
    removed = set(rng.permutation(n)[:k].tolist())
    kept = tuple(b for i, b in enumerate(scene.buildings) if i not in removed)
    return CityScene(kept, scene.road_segments, scene.seed, scene.layout)


# ---------------------------------------------------------------------------
# Ray casting
# ---------------------------------------------------------------------------


@maybe_njit(cache=True, nogil=True)
def _intersect_boxes_scalar(origin, dirs, params):
    """Nearest slab-test hit per ray: (t, box index or -1)."""
    n = dirs.shape[0]
    nb = params.shape[0]
    t_out = np.full(n, np.inf)
    idx_out = np.full(n, -1, dtype=np.int64)
    for r in range(n):
        best_t = np.inf
        best_b = -1
        for b in range(nb):
            cx, cy, cz = params[b, 0], params[b, 1], params[b, 2]
            hx, hy, hz = params[b, 3], params[b, 4], params[b, 5]
            cy_, sy_ = params[b, 6], params[b, 7]
            wx = origin[0] - cx
            wy = origin[1] - cy
            wz = origin[2] - cz
            ox = cy_ * wx - sy_ * wz
            oy = wy
            oz = sy_ * wx + cy_ * wz
            dx0 = dirs[r, 0]
            dy0 = dirs[r, 1]
            dz0 = dirs[r, 2]
            dx = cy_ * dx0 - sy_ * dz0
            dy = dy0
            dz = sy_ * dx0 + cy_ * dz0
            tmin = -np.inf
            tmax = np.inf
            miss = False
            for axis in range(3):
                if axis == 0:
                    o, d, h = ox, dx, hx
                elif axis == 1:
                    o, d, h = oy, dy, hy
                else:
                    o, d, h = oz, dz, hz
                if d == 0.0:
                    if o < -h or o > h:
                        miss = True
                        break
                else:
                    t1 = (-h - o) / d
                    t2 = (h - o) / d
                    if t1 < t2:
                        tn, tf = t1, t2
                    else:
                        tn, tf = t2, t1
                    if tn > tmin:
                        tmin = tn
                    if tf < tmax:
                        tmax = tf
            if miss or tmax < tmin:
                continue
            if tmin > _RAY_EPS and tmin < best_t:
                best_t = tmin
                best_b = b
        t_out[r] = best_t
        idx_out[r] = best_b
    return t_out, idx_out


def _intersect_boxes_numpy(origin, dirs, params):
    """Vectorized twin of :func:`_intersect_boxes_scalar` (same arithmetic)."""
    n = dirs.shape[0]
    t_out = np.full(n, np.inf)
    idx_out = np.full(n, -1, dtype=np.int64)
    for b in range(params.shape[0]):
        cx, cy, cz, hx, hy, hz, cy_, sy_ = params[b]
        wx, wy, wz = origin[0] - cx, origin[1] - cy, origin[2] - cz
        o = np.array([cy_ * wx - sy_ * wz, wy, sy_ * wx + cy_ * wz])
        d = np.empty_like(dirs)
        d[:, 0] = cy_ * dirs[:, 0] - sy_ * dirs[:, 2]
        d[:, 1] = dirs[:, 1]
        d[:, 2] = sy_ * dirs[:, 0] + cy_ * dirs[:, 2]
        half = np.array([hx, hy, hz])

        tmin = np.full(n, -np.inf)
        tmax = np.full(n, np.inf)
        for axis in range(3):
            da = d[:, axis]
            zero = da == 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-half[axis] - o[axis]) / da
                t2 = (half[axis] - o[axis]) / da
            tn = np.minimum(t1, t2)
            tf = np.maximum(t1, t2)
            inside = (o[axis] >= -half[axis]) & (o[axis] <= half[axis])
            tn = np.where(zero, np.where(inside, -np.inf, np.inf), tn)
            tf = np.where(zero, np.where(inside, np.inf, -np.inf), tf)
            tmin = np.maximum(tmin, tn)
            tmax = np.minimum(tmax, tf)
        hit = (tmax >= tmin) & (tmin > _RAY_EPS) & (tmin < t_out)
        t_out[hit] = tmin[hit]
        idx_out[hit] = b
    return t_out, idx_out


def _intersect_boxes(origin, dirs, params):
    if NUMBA_ENABLED:
        return _intersect_boxes_scalar(origin, dirs, params)
    return _intersect_boxes_numpy(origin, dirs, params)


def raycast_render(scene: CityScene, pose: Pose, dims) -> tuple:
    """Exact ground truth: nearest cuboid/ground hit per pixel bearing.

    Returns (SceneCoordinateImage, LabelImage); rays that escape the scene
    get the sky label and NaN coordinates.
    """
    width, height = dims
    origin = pose.camera_center
    for b in scene.buildings:
        if b.contains(origin):
            raise ValueError(f"camera centre lies inside building {b.label}")

    bearings = image_bearings(width, height)
    dirs = np.ascontiguousarray(bearings.reshape(-1, 3) @ pose.rotation.T)
    n = dirs.shape[0]

    params, labels = scene.box_arrays()
    if params.shape[0]:
        t_box, idx_box = _intersect_boxes(origin, dirs, params)
    else:
        t_box = np.full(n, np.inf)
        idx_box = np.full(n, -1, dtype=np.int64)

    dy = dirs[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = -origin[1] / dy
    ground_ok = (dy != 0.0) & (t_ground > _RAY_EPS)
    t_ground = np.where(ground_ok, t_ground, np.inf)

    take_ground = ground_ok & (t_ground < t_box)
    t_hit = np.where(take_ground, t_ground, t_box)
    hit = np.isfinite(t_hit)

    coords = np.full((n, 3), np.nan)
    coords[hit] = origin + t_hit[hit, None] * dirs[hit]
    out_labels = np.full(n, SKY_LABEL, dtype=np.uint32)
    out_labels[take_ground] = ROAD_LABEL
    box_hit = hit & ~take_ground
    out_labels[box_hit] = labels[idx_box[box_hit]]

    return (SceneCoordinateImage(coords.reshape(height, width, 3)),
            LabelImage(out_labels.reshape(height, width)))


def render_approximate_gt(approx_scene: CityScene, pose: Pose, dims) -> tuple:
    """Ground truth against a cuboid-approximated map; same contract as
    :func:`raycast_render`."""
    return raycast_render(approx_scene, pose, dims)


# ---------------------------------------------------------------------------
# Point-cloud projection
# ---------------------------------------------------------------------------


def project_pointcloud(points: np.ndarray, point_labels: np.ndarray, pose: Pose,
                       dims, reference_labels: LabelImage = None) -> tuple:
    """Z-buffer a labelled point cloud into an image, instance-consistently.

    Each point lands on the pixel of its bearing. Per pixel the nearest
    point whose label matches the pixel's reference label wins; the
    reference is the supplied label image when given, otherwise the label
    of the overall nearest point.
    """
    width, height = dims
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    labs = np.asarray(point_labels).reshape(-1).astype(np.uint32)
    if pts.shape[0] == 0:
        raise ValueError("point cloud is empty")

    cam = pose.world_to_camera(pts)
    depth = np.linalg.norm(cam, axis=1)
    usable = depth > 1e-9
    u, v = bearing_to_pixel(cam[usable] / depth[usable, None], width, height)
    cols = np.rint(u).astype(np.int64) % width
    rows = np.clip(np.rint(v).astype(np.int64), 0, height - 1)
    pix = rows * width + cols
    pdepth = depth[usable]
    pidx = np.flatnonzero(usable)

    order = np.lexsort((pdepth, pix))
    pix_sorted = pix[order]
    first = np.ones(order.shape[0], dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]

    if reference_labels is None:
        ref = np.zeros(width * height, dtype=np.uint32)
        ref[pix_sorted[first]] = labs[pidx[order[first]]]
    else:
        ref = reference_labels.labels.reshape(-1)

    match = labs[pidx[order]] == ref[pix_sorted]
    morder = order[match]
    mpix = pix[morder]
    mfirst = np.ones(morder.shape[0], dtype=bool)
    mfirst[1:] = mpix[1:] != mpix[:-1]
    chosen = morder[mfirst]

    coords = np.full((width * height, 3), np.nan)
    out_labels = np.full(width * height, VOID_LABEL, dtype=np.uint32)
    coords[pix[chosen]] = pts[pidx[chosen]]
    out_labels[pix[chosen]] = labs[pidx[chosen]]
    return (SceneCoordinateImage(coords.reshape(height, width, 3)),
            LabelImage(out_labels.reshape(height, width)))


# ---------------------------------------------------------------------------
# Prediction simulation
# ---------------------------------------------------------------------------


def simulate_predictions(gt_coords: SceneCoordinateImage, gt_labels: LabelImage,
                         noise: NoiseModel, imap: InstanceMap,
                         bounds: np.ndarray = None) -> tuple:
    """Corrupt exact ground truth into surrogate predictions.

    Deterministic per ``noise.seed``. ``bounds`` is the (2, 3) volume for
    outlier resampling; defaults to the frame's own coordinate box
    inflated by 10%.
    """
    coords = gt_coords.coords.copy()
    labels = gt_labels.labels.copy()
    valid = gt_coords.mask
    n_valid = int(valid.sum())
    if n_valid == 0:
        return SceneCoordinateImage(coords), LabelImage(labels)

    rng = np.random.Generator(np.random.Philox(key=np.array([noise.seed, 3], dtype=np.uint64)))

    if noise.coord_sigma > 0.0:
        coords[valid] += rng.normal(0.0, noise.coord_sigma, size=(n_valid, 3))

    if noise.outlier_rate > 0.0:
        if bounds is None:
            pts = gt_coords.coords[valid]
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            span = np.maximum(hi - lo, 1.0)
            bounds = np.array([lo - 0.1 * span, hi + 0.1 * span])
        pick = rng.uniform(size=n_valid) < noise.outlier_rate
        coords[valid] = np.where(
            pick[:, None],
            rng.uniform(bounds[0], bounds[1], size=(n_valid, 3)),
            coords[valid])

    if noise.label_flip_rate > 0.0 and len(imap) >= 2:
        map_labels = np.array(imap.instance_labels(), dtype=np.uint32)
        flippable = valid & np.isin(labels, map_labels)
        n_flip_pool = int(flippable.sum())
        if n_flip_pool:
            pick = rng.uniform(size=n_flip_pool) < noise.label_flip_rate
            flip_mask = np.zeros_like(flippable)
            flip_mask[flippable] = pick
            n_flips = int(flip_mask.sum())
            if n_flips:
                old = labels[flip_mask]
                pos = np.searchsorted(map_labels, old)
                draw = rng.integers(0, len(map_labels) - 1, size=n_flips)
                draw = np.where(draw >= pos, draw + 1, draw)
                new = map_labels[draw]
                local = np.empty((n_flips, 3))
                flat_coords = coords[flip_mask]
                for lab in np.unique(old):
                    sel = old == lab
                    local[sel] = whiten(imap.get(int(lab)), flat_coords[sel])
                for lab in np.unique(new):
                    sel = new == lab
                    flat_coords[sel] = unwhiten(imap.get(int(lab)), local[sel])
                coords[flip_mask] = flat_coords
                labels[flip_mask] = new

    return SceneCoordinateImage(coords), LabelImage(labels)


# ---------------------------------------------------------------------------
# Cuboid approximation
# ---------------------------------------------------------------------------


def cuboid_approximation(points: np.ndarray, label: int) -> Cuboid:
    """Fit a ground-aligned cuboid to one instance's point cloud.

    Yaw comes from the principal horizontal axis of the footprint
    (canonicalized to [-pi/4, pi/4); a box is symmetric under quarter
    turns), extents and centre from the bounds in the yawed frame. A
    footprint with no preferred direction falls back to zero yaw.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < 4:
        raise ValueError(f"need at least 4 points to fit a cuboid, got {pts.shape[0]}")

    xz = pts[:, [0, 2]]
    centered = xz - xz.mean(axis=0)
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    spread = evals[1] - evals[0]
    if evals[1] <= 1e-12 or spread <= 1e-9 * max(evals[1], 1e-12):
        yaw = 0.0
    else:
        dx, dz = evecs[0, 1], evecs[1, 1]
        yaw = math.atan2(-dz, dx)
        yaw -= round(yaw / (math.pi / 2.0)) * (math.pi / 2.0)

    c, s = math.cos(yaw), math.sin(yaw)
    local = np.empty_like(pts)
    local[:, 0] = c * pts[:, 0] - s * pts[:, 2]
    local[:, 1] = pts[:, 1]
    local[:, 2] = s * pts[:, 0] + c * pts[:, 2]
    lo, hi = local.min(axis=0), local.max(axis=0)
    center_local = (lo + hi) / 2.0
    half = np.maximum((hi - lo) / 2.0, 1e-6)
    center = np.array([
        c * center_local[0] + s * center_local[2],
        center_local[1],
        -s * center_local[0] + c * center_local[2],
    ])
    return Cuboid(center, half, yaw, int(label))


def _same_box_geometry(a: Cuboid, b: Cuboid, tol: float = 1e-6) -> bool:
    ca = a.corners()
    cb = b.corners()
    ca = ca[np.lexsort((ca[:, 2], ca[:, 1], ca[:, 0]))]
    cb = cb[np.lexsort((cb[:, 2], cb[:, 1], cb[:, 0]))]
    return bool(np.max(np.abs(ca - cb)) <= tol)


def approximate_city(scene: CityScene) -> CityScene:
    """Replace every building by its fitted cuboid approximation.

    Fitting runs on each building's corner cloud. When the fit reproduces
    the instance's geometry (the instance already is a cuboid), the
    original parameters are kept, making cuboid scenes exact fixed points
    of the approximation.
    """
    out = []
    for b in scene.buildings:
        fit = cuboid_approximation(b.corners(), b.label)
        out.append(b if _same_box_geometry(fit, b) else fit)
    return CityScene(tuple(out), scene.road_segments, scene.seed, scene.layout)
