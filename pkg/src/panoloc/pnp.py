"""Absolute pose from 2D-3D correspondences on a spherical camera.

The solver generalizes the EPnP control-point method to central bearing
vectors: each bearing contributes two linear constraints by projecting the
camera-frame point expression onto an orthonormal basis of the plane
perpendicular to the bearing (panoramas have no single image plane to
express the classic pinhole constraints in). A deterministic RANSAC loop
with an angular inlier test wraps the minimal solver; iterations draw
samples from counter-based generators keyed by (seed, iteration), so
results do not depend on evaluation order and are reproducible bit for bit
whether iterations run serially or across threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from ._accel import NUMBA_ENABLED, maybe_njit
from .geometry import Pose

__all__ = [
    "DegenerateConfigError",
    "NoConsensusError",
    "Correspondence",
    "Correspondences",
    "RansacConfig",
    "PoseEstimate",
    "epnp_bearing",
    "angular_residual",
    "angular_residuals",
    "ransac_pnp",
]

_GN_ITERATIONS = 10
_CENTER_EPS = 1e-12
# Relative eigenvalue-of-scatter thresholds (squared singular value ratios).
_PLANAR_TOL = 1e-14
_COLLINEAR_TOL = 1e-14


class DegenerateConfigError(ValueError):
    """Correspondence geometry does not constrain a pose (e.g. collinear)."""


class NoConsensusError(RuntimeError):
    """RANSAC found no model with more inliers than the minimal sample.

    The best-effort estimate (possibly None) is attached as ``.estimate``.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class Correspondence:
    """One bearing/world-point pair; pixel is provenance only."""

    bearing: np.ndarray
    world_point: np.ndarray
    pixel: tuple = None


class Correspondences:
    """Array-backed set of correspondences.

    Bearings are normalized on construction; zero-length bearings raise.
    """

    def __init__(self, bearings: np.ndarray, world_points: np.ndarray, pixels=None):
        b = np.ascontiguousarray(bearings, dtype=np.float64).reshape(-1, 3)
        w = np.ascontiguousarray(world_points, dtype=np.float64).reshape(-1, 3)
        if b.shape[0] != w.shape[0]:
            raise ValueError("bearings and world_points must have matching lengths")
        norms = np.linalg.norm(b, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("bearings must be nonzero")
        self.bearings = b / norms[:, None]
        self.world_points = w
        self.pixels = None if pixels is None else np.asarray(pixels, dtype=np.float64).reshape(-1, 2)

    @classmethod
    def from_items(cls, items) -> "Correspondences":
        items = list(items)
        bearings = np.array([c.bearing for c in items], dtype=np.float64)
        points = np.array([c.world_point for c in items], dtype=np.float64)
        pixels = None
        if items and items[0].pixel is not None:
            pixels = np.array([c.pixel for c in items], dtype=np.float64)
        return cls(bearings, points, pixels)

    def __len__(self) -> int:
        return self.bearings.shape[0]

    def subset(self, indices) -> "Correspondences":
        idx = np.asarray(indices)
        pixels = None if self.pixels is None else self.pixels[idx]
        return Correspondences(self.bearings[idx], self.world_points[idx], pixels)


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 1000
    inlier_threshold_deg: float = 0.22
    min_sample: int = 4
    seed: int = 0
    refit_on_inliers: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.inlier_threshold_deg < 90.0:
            raise ValueError("inlier threshold must be in (0, 90) degrees")
        if self.min_sample < 4:
            raise ValueError("min_sample must be >= 4")


@dataclass
class PoseEstimate:
    pose: Pose
    inlier_indices: np.ndarray
    mean_inlier_angle_deg: float
    iterations_used: int
    config: RansacConfig = None


# ---------------------------------------------------------------------------
# Kernels (numba-compatible; run as plain Python when acceleration is off)
# ---------------------------------------------------------------------------


@maybe_njit(cache=True, nogil=True)
def _residuals_scalar(rot, t, pts, brs):
    """Angular residuals in degrees; R is camera-to-world, t the pose offset.

    atan2(|g x b|, g . b) stays exact near zero where acos saturates.
    """
    n = pts.shape[0]
    out = np.empty(n)
    for i in range(n):
        g0 = rot[0, 0] * pts[i, 0] + rot[1, 0] * pts[i, 1] + rot[2, 0] * pts[i, 2] + t[0]
        g1 = rot[0, 1] * pts[i, 0] + rot[1, 1] * pts[i, 1] + rot[2, 1] * pts[i, 2] + t[1]
        g2 = rot[0, 2] * pts[i, 0] + rot[1, 2] * pts[i, 1] + rot[2, 2] * pts[i, 2] + t[2]
        ng = math.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
        if ng < _CENTER_EPS:
            out[i] = 180.0
            continue
        bx, by, bz = brs[i, 0], brs[i, 1], brs[i, 2]
        cx = g1 * bz - g2 * by
        cy = g2 * bx - g0 * bz
        cz = g0 * by - g1 * bx
        sin_part = math.sqrt(cx * cx + cy * cy + cz * cz)
        cos_part = g0 * bx + g1 * by + g2 * bz
        out[i] = math.degrees(math.atan2(sin_part, cos_part))
    return out


def _residuals_numpy(rot, t, pts, brs):
    """Vectorized twin of :func:`_residuals_scalar`."""
    g = pts @ rot + t
    ng = np.sqrt(np.einsum("ij,ij->i", g, g))
    cross = np.cross(g, brs)
    sin_part = np.sqrt(np.einsum("ij,ij->i", cross, cross))
    cos_part = np.einsum("ij,ij->i", g, brs)
    out = np.degrees(np.arctan2(sin_part, cos_part))
    out[ng < _CENTER_EPS] = 180.0
    return out


@maybe_njit(cache=True, nogil=True)
def _solve_normal_eqs(mat, rhs):
    """Least-squares x for mat @ x ~= rhs via damped normal equations.

    The systems here are tiny (<= 6 unknowns); direct solves beat the
    SVD-based lstsq by orders of magnitude inside the RANSAC loop.
    """
    rows, cols = mat.shape
    gram = np.zeros((cols, cols))
    proj = np.zeros(cols)
    for r in range(rows):
        for a in range(cols):
            proj[a] += mat[r, a] * rhs[r]
            for b in range(cols):
                gram[a, b] += mat[r, a] * mat[r, b]
    trace = 0.0
    for a in range(cols):
        trace += gram[a, a]
    damp = 1e-12 * (trace / cols) + 1e-300
    for a in range(cols):
        gram[a, a] += damp
    # Cholesky + substitutions in place: the damped Gram matrix is SPD and
    # tiny, so this beats a LAPACK round trip inside the RANSAC loop.
    chol = np.zeros((cols, cols))
    for i in range(cols):
        for j in range(i + 1):
            s = gram[i, j]
            for k in range(j):
                s -= chol[i, k] * chol[j, k]
            if i == j:
                chol[i, i] = math.sqrt(s) if s > 0.0 else 1e-150
            else:
                chol[i, j] = s / chol[j, j]
    y = np.empty(cols)
    for i in range(cols):
        s = proj[i]
        for k in range(i):
            s -= chol[i, k] * y[k]
        y[i] = s / chol[i, i]
    x = np.empty(cols)
    for i in range(cols - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, cols):
            s -= chol[k, i] * x[k]
        x[i] = s / chol[i, i]
    return x


@maybe_njit(cache=True, nogil=True)
def _barycentric(pts, ctrl):
    """(n, m) coordinates expressing each point in the control-point frame."""
    n = pts.shape[0]
    m = ctrl.shape[0]
    a = np.empty((4, m))
    for j in range(m):
        for k in range(3):
            a[k, j] = ctrl[j, k]
        a[3, j] = 1.0
    b = np.empty((4, n))
    for i in range(n):
        for k in range(3):
            b[k, i] = pts[i, k]
        b[3, i] = 1.0
    if m == 4:
        x = np.linalg.solve(a, b)
    else:
        # coplanar points: 3 control points determine them exactly
        at = np.ascontiguousarray(a.T)
        gram = at @ a
        x = np.linalg.solve(gram, at @ b)
    return np.ascontiguousarray(x.T)


@maybe_njit(cache=True, nogil=True)
def _constraint_normal_matrix(alphas, brs):
    """M^T M of the stacked tangent-plane constraints (3m x 3m)."""
    n = alphas.shape[0]
    m = alphas.shape[1]
    big = np.zeros((2 * n, 3 * m))
    for i in range(n):
        vx, vy, vz = brs[i, 0], brs[i, 1], brs[i, 2]
        # axis least aligned with the bearing
        ax, ay, az = abs(vx), abs(vy), abs(vz)
        if ax <= ay and ax <= az:
            e1x, e1y, e1z = 0.0, -vz, vy
        elif ay <= az:
            e1x, e1y, e1z = vz, 0.0, -vx
        else:
            e1x, e1y, e1z = -vy, vx, 0.0
        inv = 1.0 / math.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
        e1x *= inv
        e1y *= inv
        e1z *= inv
        e2x = vy * e1z - vz * e1y
        e2y = vz * e1x - vx * e1z
        e2z = vx * e1y - vy * e1x
        for j in range(m):
            w = alphas[i, j]
            big[2 * i, 3 * j] = w * e1x
            big[2 * i, 3 * j + 1] = w * e1y
            big[2 * i, 3 * j + 2] = w * e1z
            big[2 * i + 1, 3 * j] = w * e2x
            big[2 * i + 1, 3 * j + 1] = w * e2y
            big[2 * i + 1, 3 * j + 2] = w * e2z
    bt = np.ascontiguousarray(big.T)
    return bt @ big


@maybe_njit(cache=True, nogil=True)
def _pair_diff_blocks(kernel, n_active, m):
    """(npairs, 3, N) control-point difference blocks of the kernel columns."""
    npairs = m * (m - 1) // 2
    d = np.empty((npairs, 3, n_active))
    p = 0
    for i in range(m):
        for j in range(i + 1, m):
            for r in range(3):
                for k in range(n_active):
                    d[p, r, k] = kernel[3 * i + r, k] - kernel[3 * j + r, k]
            p += 1
    return d


@maybe_njit(cache=True, nogil=True)
def _init_betas(diffs, rho, n_active):
    """Closed-form initialization of the null-space coefficients per case."""
    npairs = diffs.shape[0]
    beta = np.zeros(n_active)
    if n_active == 1:
        num = 0.0
        den = 0.0
        for p in range(npairs):
            d2 = 0.0
            for r in range(3):
                d2 += diffs[p, r, 0] * diffs[p, r, 0]
            dc = math.sqrt(d2)
            num += dc * math.sqrt(rho[p])
            den += d2
        beta[0] = num / den if den > 0.0 else 0.0
        return beta

    if n_active == 2:
        mat = np.empty((npairs, 3))
        for p in range(npairs):
            s11 = 0.0
            s12 = 0.0
            s22 = 0.0
            for r in range(3):
                s11 += diffs[p, r, 0] * diffs[p, r, 0]
                s12 += diffs[p, r, 0] * diffs[p, r, 1]
                s22 += diffs[p, r, 1] * diffs[p, r, 1]
            mat[p, 0] = s11
            mat[p, 1] = 2.0 * s12
            mat[p, 2] = s22
        sol = _solve_normal_eqs(mat, rho)
        beta[0] = math.sqrt(abs(sol[0]))
        sign = -1.0 if (sol[0] > 0.0) != (sol[1] > 0.0) else 1.0
        beta[1] = sign * math.sqrt(abs(sol[2]))
        return beta

    if n_active == 3:
        mat = np.empty((npairs, 6))
        for p in range(npairs):
            col = 0
            for a in range(3):
                for b in range(a, 3):
                    s = 0.0
                    for r in range(3):
                        s += diffs[p, r, a] * diffs[p, r, b]
                    mat[p, col] = s if a == b else 2.0 * s
                    col += 1
        sol = _solve_normal_eqs(mat, rho)
        beta[0] = math.sqrt(abs(sol[0]))
        sign1 = -1.0 if (sol[0] > 0.0) != (sol[1] > 0.0) else 1.0
        beta[1] = sign1 * math.sqrt(abs(sol[3]))
        sign2 = -1.0 if (sol[0] > 0.0) != (sol[2] > 0.0) else 1.0
        beta[2] = sign2 * math.sqrt(abs(sol[5]))
        return beta

    # n_active == 4: solve for the products (B11, B12, B13, B14) and divide.
    mat = np.empty((npairs, 4))
    for p in range(npairs):
        for b in range(4):
            s = 0.0
            for r in range(3):
                s += diffs[p, r, 0] * diffs[p, r, b]
            mat[p, b] = s if b == 0 else 2.0 * s
    sol = _solve_normal_eqs(mat, rho)
    b1 = math.sqrt(abs(sol[0]))
    beta[0] = b1
    if b1 > 1e-12:
        beta[1] = sol[1] / b1
        beta[2] = sol[2] / b1
        beta[3] = sol[3] / b1
    return beta


@maybe_njit(cache=True, nogil=True)
def _refine_betas(diffs, beta, rho, iterations):
    """Gauss-Newton on the control-point inter-distance residuals."""
    npairs = diffs.shape[0]
    n_active = beta.shape[0]
    gram = np.empty((npairs, n_active, n_active))
    for p in range(npairs):
        for a in range(n_active):
            for b in range(n_active):
                s = 0.0
                for r in range(3):
                    s += diffs[p, r, a] * diffs[p, r, b]
                gram[p, a, b] = s
    out = beta.copy()
    jac = np.empty((npairs, n_active))
    res = np.empty(npairs)
    for _ in range(iterations):
        for p in range(npairs):
            quad = 0.0
            for a in range(n_active):
                gb = 0.0
                for b in range(n_active):
                    gb += gram[p, a, b] * out[b]
                jac[p, a] = 2.0 * gb
                quad += out[a] * gb
            res[p] = rho[p] - quad
        step = _solve_normal_eqs(jac, res)
        for a in range(n_active):
            out[a] += step[a]
    return out


@maybe_njit(cache=True, nogil=True)
def _align_control_points(ctrl_w, ctrl_c):
    """Rigid map A, t with ctrl_c ~= A @ ctrl_w + t (A proper rotation)."""
    m = ctrl_w.shape[0]
    cw = np.zeros(3)
    cc = np.zeros(3)
    for i in range(m):
        for k in range(3):
            cw[k] += ctrl_w[i, k]
            cc[k] += ctrl_c[i, k]
    cw /= m
    cc /= m
    h = np.zeros((3, 3))
    for i in range(m):
        for a in range(3):
            for b in range(3):
                h[a, b] += (ctrl_w[i, a] - cw[a]) * (ctrl_c[i, b] - cc[b])
    u, s, vt = np.linalg.svd(h)
    v = np.ascontiguousarray(vt.T)
    ut = np.ascontiguousarray(u.T)
    amat = v @ ut
    if np.linalg.det(amat) < 0.0:
        for k in range(3):
            v[k, 2] = -v[k, 2]
        amat = v @ ut
    t = np.empty(3)
    for k in range(3):
        t[k] = cc[k] - (amat[k, 0] * cw[0] + amat[k, 1] * cw[1] + amat[k, 2] * cw[2])
    return amat, t


@maybe_njit(cache=True, nogil=True)
def _solve_epnp(pts, brs):
    """Minimal/refit EPnP solve.

    Returns (ok, R, T, mean_residual_deg) with R camera-to-world and T the
    world->camera offset. ``ok`` is False for degenerate geometry.
    """
    n = pts.shape[0]
    eye = np.eye(3)
    zero = np.zeros(3)

    mean = np.zeros(3)
    for i in range(n):
        for k in range(3):
            mean[k] += pts[i, k]
    mean /= n
    centered = pts - mean
    scatter = np.ascontiguousarray(centered.T) @ centered
    evals, evecs = np.linalg.eigh(scatter)
    if evals[2] <= 1e-20:
        return False, eye, zero, 1e300
    if evals[1] / evals[2] <= _COLLINEAR_TOL:
        return False, eye, zero, 1e300
    planar = evals[0] / evals[2] <= _PLANAR_TOL

    m = 3 if planar else 4
    ctrl_w = np.empty((m, 3))
    for k in range(3):
        ctrl_w[0, k] = mean[k]
    for j in range(m - 1):
        scale = math.sqrt(evals[2 - j] / n)
        for k in range(3):
            ctrl_w[j + 1, k] = mean[k] + evecs[k, 2 - j] * scale

    alphas = _barycentric(pts, ctrl_w)
    mtm = _constraint_normal_matrix(alphas, brs)
    _, vecs = np.linalg.eigh(mtm)
    kernel_dim = 2 if planar else 4
    kernel = np.ascontiguousarray(vecs[:, :kernel_dim])

    npairs = m * (m - 1) // 2
    rho = np.empty(npairs)
    p = 0
    for i in range(m):
        for j in range(i + 1, m):
            s = 0.0
            for k in range(3):
                d = ctrl_w[i, k] - ctrl_w[j, k]
                s += d * d
            rho[p] = s
            p += 1

    best_ok = False
    best_res = 1e300
    best_rot = eye
    best_t = zero
    for n_active in range(1, kernel_dim + 1):
        diffs = _pair_diff_blocks(kernel, n_active, m)
        beta = _init_betas(diffs, rho, n_active)
        beta = _refine_betas(diffs, beta, rho, _GN_ITERATIONS)

        ctrl_c = np.zeros((m, 3))
        for j in range(m):
            for k in range(3):
                s = 0.0
                for a in range(n_active):
                    s += kernel[3 * j + k, a] * beta[a]
                ctrl_c[j, k] = s

        cam = alphas @ ctrl_c
        dots = np.empty(n)
        for i in range(n):
            dots[i] = (cam[i, 0] * brs[i, 0] + cam[i, 1] * brs[i, 1]
                       + cam[i, 2] * brs[i, 2])
        if np.median(dots) < 0.0:
            ctrl_c = -ctrl_c

        amat, t = _align_control_points(ctrl_w, ctrl_c)
        rot = np.ascontiguousarray(amat.T)
        res = _residuals_scalar(rot, t, pts, brs)
        mres = res.mean()
        if mres < best_res:
            best_ok = True
            best_res = mres
            best_rot = rot
            best_t = t
    return best_ok, best_rot, best_t, best_res


@maybe_njit(cache=True, nogil=True)
def _ransac_scan(pts, brs, samples, threshold_deg, lo, hi, oks, counts, sums, rots, ts):
    """Evaluate RANSAC iterations [lo, hi); writes per-iteration results."""
    k = samples.shape[1]
    spts = np.empty((k, 3))
    sbrs = np.empty((k, 3))
    for it in range(lo, hi):
        for a in range(k):
            idx = samples[it, a]
            for b in range(3):
                spts[a, b] = pts[idx, b]
                sbrs[a, b] = brs[idx, b]
        ok, rot, t, _ = _solve_epnp(spts, sbrs)
        if not ok:
            oks[it] = False
            continue
        res = _residuals_scalar(rot, t, pts, brs)
        cnt = 0
        ssum = 0.0
        for i in range(res.shape[0]):
            if res[i] < threshold_deg:
                cnt += 1
                ssum += res[i]
        oks[it] = True
        counts[it] = cnt
        sums[it] = ssum
        rots[it] = rot
        ts[it] = t


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def epnp_bearing(corrs: Correspondences) -> Pose:
    """Absolute pose from >= 4 bearing/world-point correspondences."""
    if len(corrs) < 4:
        raise ValueError(f"need at least 4 correspondences, got {len(corrs)}")
    solver = _solve_epnp if NUMBA_ENABLED else _solve_epnp.py_func
    ok, rot, t, _ = solver(corrs.world_points, corrs.bearings)
    if not ok:
        raise DegenerateConfigError("correspondences are collinear or otherwise degenerate")
    return Pose(rot, t)


def angular_residual(pose: Pose, corr: Correspondence) -> float:
    """Angle in degrees between the bearing and the predicted direction.

    A world point coinciding with the camera centre has no direction and
    scores 180 degrees (always an outlier).
    """
    g = pose.rotation.T @ np.asarray(corr.world_point, dtype=np.float64) + pose.translation
    if np.linalg.norm(g) < _CENTER_EPS:
        return 180.0
    b = np.asarray(corr.bearing, dtype=np.float64)
    b = b / np.linalg.norm(b)
    sin_part = np.linalg.norm(np.cross(g, b))
    return math.degrees(math.atan2(sin_part, float(g @ b)))


def angular_residuals(pose: Pose, corrs: Correspondences) -> np.ndarray:
    """Batch angular residuals in degrees."""
    if NUMBA_ENABLED:
        return _residuals_scalar(pose.rotation, pose.translation,
                                 corrs.world_points, corrs.bearings)
    return _residuals_numpy(pose.rotation, pose.translation,
                            corrs.world_points, corrs.bearings)


def _draw_samples(seed: int, iterations: int, n: int, k: int) -> np.ndarray:
    """(iterations, k) distinct-index samples from Philox keyed by (seed, i)."""
    out = np.empty((iterations, k), dtype=np.int64)
    for it in range(iterations):
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, it], dtype=np.uint64)))
        count = 0
        while count < k:
            cand = int(gen.integers(0, n))
            duplicate = False
            for j in range(count):
                if out[it, j] == cand:
                    duplicate = True
                    break
            if not duplicate:
                out[it, count] = cand
                count += 1
    return out


def ransac_pnp(corrs: Correspondences, cfg: RansacConfig = None, threads: int = 1) -> PoseEstimate:
    """Robust pose estimate; see module docstring for determinism contract.

    The best model maximizes the inlier count; ties break on lower mean
    inlier residual, then on lower iteration index. With
    ``cfg.refit_on_inliers`` the winner is re-solved over its inliers and
    the inlier set recomputed once against the refit pose.
    """
    if cfg is None:
        cfg = RansacConfig()
    n = len(corrs)
    if n < cfg.min_sample:
        raise ValueError(f"need at least {cfg.min_sample} correspondences, got {n}")

    pts = corrs.world_points
    brs = corrs.bearings
    samples = _draw_samples(cfg.seed, cfg.iterations, n, cfg.min_sample)

    oks = np.zeros(cfg.iterations, dtype=np.bool_)
    counts = np.zeros(cfg.iterations, dtype=np.int64)
    sums = np.zeros(cfg.iterations)
    rots = np.zeros((cfg.iterations, 3, 3))
    ts = np.zeros((cfg.iterations, 3))

    if NUMBA_ENABLED:
        scan = _ransac_scan
        if threads > 1:
            bounds = np.linspace(0, cfg.iterations, threads + 1).astype(int)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(scan, pts, brs, samples, cfg.inlier_threshold_deg,
                                int(lo), int(hi), oks, counts, sums, rots, ts)
                    for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
                ]
                for fut in futures:
                    fut.result()
        else:
            scan(pts, brs, samples, cfg.inlier_threshold_deg, 0, cfg.iterations,
                 oks, counts, sums, rots, ts)
    else:
        solver = _solve_epnp.py_func
        for it in range(cfg.iterations):
            idx = samples[it]
            ok, rot, t, _ = solver(np.ascontiguousarray(pts[idx]),
                                   np.ascontiguousarray(brs[idx]))
            if not ok:
                continue
            res = _residuals_numpy(rot, t, pts, brs)
            inl = res < cfg.inlier_threshold_deg
            oks[it] = True
            counts[it] = int(inl.sum())
            sums[it] = float(res[inl].sum())
            rots[it] = rot
            ts[it] = t

    best_it = -1
    best_count = 0
    best_mean = np.inf
    for it in range(cfg.iterations):
        if not oks[it] or counts[it] == 0:
            continue
        mean_r = sums[it] / counts[it]
        if counts[it] > best_count or (counts[it] == best_count and mean_r < best_mean):
            best_it = it
            best_count = int(counts[it])
            best_mean = mean_r

    best_effort = None
    if best_it >= 0:
        pose = Pose(rots[best_it], ts[best_it])
        res = angular_residuals(pose, corrs)
        inliers = np.flatnonzero(res < cfg.inlier_threshold_deg)
        best_effort = PoseEstimate(pose, inliers,
                                   float(res[inliers].mean()) if inliers.size else 180.0,
                                   cfg.iterations, cfg)

    if best_it < 0 or best_count < cfg.min_sample + 1:
        raise NoConsensusError(
            f"no model with more than {cfg.min_sample} inliers after {cfg.iterations} iterations",
            estimate=best_effort)

    estimate = best_effort
    if cfg.refit_on_inliers and estimate.inlier_indices.size >= 4:
        try:
            refit = epnp_bearing(corrs.subset(estimate.inlier_indices))
        except DegenerateConfigError:
            refit = None
        if refit is not None:
            res = angular_residuals(refit, corrs)
            inliers = np.flatnonzero(res < cfg.inlier_threshold_deg)
            if inliers.size:
                estimate = PoseEstimate(refit, inliers, float(res[inliers].mean()),
                                        cfg.iterations, cfg)
    return estimate
