"""Metric camera calibration from court keypoint correspondences.

A broadcast frame is calibrated in two stages:

  1. A normalized DLT homography is fit to the coplanar ground keypoints
     (court corners). Intrinsics are initialized from the homography's
     orthogonality constraints assuming the principal point sits at the
     image center; when that system is degenerate the focal falls back to
     the image diagonal. The homography is then decomposed under that
     intrinsics guess into an initial rotation and translation.
  2. A damped Gauss-Newton refinement jointly adjusts focal length(s),
     optionally the principal point, and the pose against every
     correspondence, including off-plane net points. Rotation updates use a
     minimal 3-vector right-multiplied as a rotation exponential and the
     estimate is re-orthonormalized after each accepted step.

Conventions: world frame per courtscene.court (Z up, plane at the surface
height); R, t map world to camera, x_cam = R X + t; pixels are (u, v) with
u rightward and v downward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class CalibrationError(RuntimeError):
    pass


class InsufficientCorrespondencesError(CalibrationError):
    pass


class DegenerateGeometryError(CalibrationError):
    pass


class CalibrationFailedError(CalibrationError):
    """Refinement finished but the reprojection RMSE exceeded the ceiling."""

    def __init__(self, message: str, report: "FitReport"):
        super().__init__(message)
        self.report = report


class InvalidCameraError(CalibrationError):
    pass


# Image points may sit slightly outside the frame (clicks near the border of
# a zoomed view); beyond 10% of the image size they are rejected.
_IMAGE_BOUNDS_SLACK = 0.10

_PLANE_Z_TOL = 1e-6  # world-Z spread below this counts as one plane


@dataclass
class PinholeCamera:
    """Calibrated pinhole camera: intrinsics plus world-to-camera pose."""

    fx: float
    fy: float
    cx: float
    cy: float
    R: np.ndarray
    t: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=float).reshape(3)

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, C = -R^T t."""
        return -self.R.T @ self.t

    def validate(self, world_points=None, surface_z: float | None = None) -> None:
        """Raise InvalidCameraError on any violated camera invariant."""
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidCameraError(f"non-positive focal ({self.fx}, {self.fy})")
        err = np.abs(self.R @ self.R.T - np.eye(3)).max()
        if err > 1e-9:
            raise InvalidCameraError(f"R not orthonormal (max dev {err:.2e})")
        if abs(np.linalg.det(self.R) - 1.0) > 1e-9:
            raise InvalidCameraError(f"det(R) = {np.linalg.det(self.R)!r}, want +1")
        if surface_z is not None and not self.center[2] > surface_z:
            raise InvalidCameraError(
                f"camera center Z {self.center[2]:.3f} not above plane {surface_z:.3f}"
            )
        if world_points is not None:
            pts = np.asarray(world_points, dtype=float).reshape(-1, 3)
            depths = (pts @ self.R.T + self.t)[:, 2]
            if not np.all(depths > 0):
                raise InvalidCameraError("court keypoint behind the camera")

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "R": [[float(v) for v in row] for row in self.R],
            "t": [float(v) for v in self.t],
            "image_size": [int(self.image_size[0]), int(self.image_size[1])],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PinholeCamera":
        return cls(
            fx=float(d["fx"]), fy=float(d["fy"]),
            cx=float(d["cx"]), cy=float(d["cy"]),
            R=np.array(d["R"], dtype=float),
            t=np.array(d["t"], dtype=float),
            image_size=(int(d["image_size"][0]), int(d["image_size"][1])),
        )


@dataclass(frozen=True)
class Correspondence:
    """One annotated keypoint: image click and its known world position."""

    name: str
    image_point: tuple[float, float]
    world_point: tuple[float, float, float]


@dataclass
class PnPOptions:
    simplified: bool = False          # single focal, principal point pinned to center
    fix_principal_point: bool = True  # full mode: keep (cx, cy) at image center
    net_weight: float = 2.0           # residual weight for off-plane points
    rmse_ceiling_px: float = 8.0
    max_iterations: int = 200
    step_norm_tol: float = 1e-12
    rel_cost_tol: float = 1e-14


@dataclass
class FitReport:
    rmse_px: float
    per_point_residuals_px: dict[str, float]
    iterations: int
    cost_history: list[float] = field(default_factory=list)
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "rmse_px": self.rmse_px,
            "per_point_residuals_px": dict(self.per_point_residuals_px),
            "iterations": self.iterations,
            "cost_history": [float(c) for c in self.cost_history],
            "converged": self.converged,
        }


def reproject(camera: PinholeCamera, world_points) -> tuple[np.ndarray, np.ndarray]:
    """Project world points; returns (pixels (N,2), behind (N,) bool).

    Non-positive camera-frame depth is flagged, never clamped; the pixel for
    a flagged point is whatever the division produced (NaN at depth zero).
    """
    pts = np.asarray(world_points, dtype=float).reshape(-1, 3)
    cam = pts @ camera.R.T + camera.t
    z = cam[:, 2]
    behind = z <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * cam[:, 0] / z + camera.cx
        v = camera.fy * cam[:, 1] / z + camera.cy
    return np.stack([u, v], axis=1), behind


def project_point(camera: PinholeCamera, world_point) -> tuple[float, float]:
    """Single-point convenience wrapper around reproject; raises if behind."""
    pix, behind = reproject(camera, [world_point])
    if behind[0]:
        raise InvalidCameraError("point has non-positive camera-frame depth")
    return float(pix[0, 0]), float(pix[0, 1])


def focal_error(pred: PinholeCamera, gt: PinholeCamera) -> tuple[float, float]:
    """Relative focal errors in percent: 100 * |pred - gt| / gt, per axis."""
    return (
        100.0 * abs(pred.fx - gt.fx) / gt.fx,
        100.0 * abs(pred.fy - gt.fy) / gt.fy,
    )


# ── homography fitting and decomposition ───────────────────────────────────


def _normalizing_transform(pts: np.ndarray) -> np.ndarray:
    """Hartley normalization: centroid to origin, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    s = math.sqrt(2.0) / d if d > 0 else 1.0
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def _fit_homography(plane_xy: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Normalized DLT homography mapping plane (X, Y) to pixels (u, v)."""
    Tw = _normalizing_transform(plane_xy)
    Ti = _normalizing_transform(pixels)
    n = plane_xy.shape[0]
    src = np.column_stack([plane_xy, np.ones(n)]) @ Tw.T
    dst = np.column_stack([pixels, np.ones(n)]) @ Ti.T

    A = np.zeros((2 * n, 9))
    for i in range(n):
        X, Y, _ = src[i]
        u, v, _ = dst[i]
        A[2 * i] = [-X, -Y, -1, 0, 0, 0, u * X, u * Y, u]
        A[2 * i + 1] = [0, 0, 0, -X, -Y, -1, v * X, v * Y, v]
    _, s, Vt = np.linalg.svd(A)
    if s[-2] < 1e-12:
        raise DegenerateGeometryError("homography system rank deficient")
    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(Ti) @ Hn @ Tw
    return H / H[2, 2]


def _focal_from_homography(
    H: np.ndarray, cx: float, cy: float, single: bool
) -> tuple[float, float] | None:
    """Focal estimate from the r1/r2 orthogonality constraints of H.

    With the principal point pinned, the two constraints are linear in
    (1/fx^2, 1/fy^2). Returns None when the system is ill-conditioned or
    produces non-positive squares (near fronto-parallel views).
    """
    p = H[0] - cx * H[2]   # row combinations give the shifted first rows
    q = H[1] - cy * H[2]
    r = H[2]
    # Column j of the shifted, K-normalized homography is
    # (a^.5 p_j, b^.5 q_j, r_j) with a = 1/fx^2, b = 1/fy^2.
    c1 = [p[0] * p[1], q[0] * q[1], r[0] * r[1]]
    c2 = [p[0] ** 2 - p[1] ** 2, q[0] ** 2 - q[1] ** 2, r[0] ** 2 - r[1] ** 2]
    if single:
        A = np.array([c1[0] + c1[1], c2[0] + c2[1]])
        y = -np.array([c1[2], c2[2]])
        denom = float(A @ A)
        if denom < 1e-12:
            return None
        a = float(A @ y) / denom
        if a <= 0:
            return None
        f = 1.0 / math.sqrt(a)
        return f, f
    A = np.array([[c1[0], c1[1]], [c2[0], c2[1]]])
    y = -np.array([c1[2], c2[2]])
    if abs(np.linalg.det(A)) < 1e-12 * max(1.0, float(np.abs(A).max()) ** 2):
        return None
    a, b = np.linalg.solve(A, y)
    if a <= 0 or b <= 0:
        return None
    return 1.0 / math.sqrt(a), 1.0 / math.sqrt(b)


def _orthonormalize(M: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        R = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return R


def _decompose_homography(
    H: np.ndarray, K: np.ndarray, plane_z: float, sample_xy: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Initial (R, t) from a ground-plane homography under intrinsics K.

    H maps plane coordinates (X, Y, 1) of world points (X, Y, plane_z) to
    pixels, so H ~ K [r1, r2, plane_z * r3 + t].
    """
    M = np.linalg.inv(K) @ H
    n1, n2 = np.linalg.norm(M[:, 0]), np.linalg.norm(M[:, 1])
    if n1 < 1e-12 or n2 < 1e-12:
        raise DegenerateGeometryError("homography decomposition collapsed")
    lam = 2.0 / (n1 + n2)
    r1, r2, m3 = lam * M[:, 0], lam * M[:, 1], lam * M[:, 2]
    R = _orthonormalize(np.column_stack([r1, r2, np.cross(r1, r2)]))
    t = m3 - plane_z * R[:, 2]

    # Two sign choices put the plane in front of or behind the camera; pick
    # the one with positive depths at the sample points.
    pts = np.column_stack([sample_xy, np.full(len(sample_xy), plane_z)])
    if np.median((pts @ R.T + t)[:, 2]) < 0:
        r1, r2, m3 = -r1, -r2, -m3
        R = _orthonormalize(np.column_stack([r1, r2, np.cross(r1, r2)]))
        t = m3 - plane_z * R[:, 2]
    return R, t


# ── joint refinement ───────────────────────────────────────────────────────


def _rodrigues(w: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(w)
    K = np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )
    if theta < 1e-12:
        return np.eye(3) + K + 0.5 * (K @ K)
    A = math.sin(theta) / theta
    B = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + A * K + B * (K @ K)


def _residuals(
    intr: np.ndarray, mode: str, base_cx: float, base_cy: float,
    R: np.ndarray, t: np.ndarray, world: np.ndarray, obs: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    fx, fy, cx, cy = _unpack_intrinsics(intr, mode, base_cx, base_cy)
    cam = world @ R.T + t
    z = cam[:, 2]
    res = np.empty(2 * len(world))
    bad = z < 1e-9
    zsafe = np.where(bad, 1.0, z)
    u = fx * cam[:, 0] / zsafe + cx
    v = fy * cam[:, 1] / zsafe + cy
    res[0::2] = (u - obs[:, 0]) * weights
    res[1::2] = (v - obs[:, 1]) * weights
    # Points that wandered behind the camera poison the step; make the cost
    # large so the damping schedule rejects it.
    res[0::2][bad] = 1e9
    res[1::2][bad] = 1e9
    return res


def _unpack_intrinsics(intr, mode, base_cx, base_cy):
    if mode == "simplified":
        return intr[0], intr[0], base_cx, base_cy
    if mode == "full_fixed_pp":
        return intr[0], intr[1], base_cx, base_cy
    return intr[0], intr[1], intr[2], intr[3]


def _jacobian(
    intr: np.ndarray, mode: str, base_cx: float, base_cy: float,
    R: np.ndarray, t: np.ndarray, world: np.ndarray, weights: np.ndarray,
) -> np.ndarray:
    fx, fy, _, _ = _unpack_intrinsics(intr, mode, base_cx, base_cy)
    n = len(world)
    n_intr = len(intr)
    J = np.zeros((2 * n, n_intr + 6))
    cam = world @ R.T + t
    x, y, z = cam[:, 0], cam[:, 1], cam[:, 2]
    z = np.where(z < 1e-9, 1.0, z)
    xn, yn = x / z, y / z

    # intrinsics block
    if mode == "simplified":
        J[0::2, 0] = xn
        J[1::2, 0] = yn
    else:
        J[0::2, 0] = xn
        J[1::2, 1] = yn
        if mode == "full_free_pp":
            J[0::2, 2] = 1.0
            J[1::2, 3] = 1.0

    # d(u,v)/d(cam point)
    du = np.stack([fx / z, np.zeros(n), -fx * xn / z], axis=1)
    dv = np.stack([np.zeros(n), fy / z, -fy * yn / z], axis=1)

    # cam = R exp([w]x) X + t around w = 0: d(cam)/dw = -R [X]x
    for i in range(n):
        X = world[i]
        skew = np.array(
            [[0.0, -X[2], X[1]], [X[2], 0.0, -X[0]], [-X[1], X[0], 0.0]]
        )
        dcam_dw = -R @ skew
        J[2 * i, n_intr:n_intr + 3] = du[i] @ dcam_dw
        J[2 * i + 1, n_intr:n_intr + 3] = dv[i] @ dcam_dw
        J[2 * i, n_intr + 3:] = du[i]
        J[2 * i + 1, n_intr + 3:] = dv[i]

    J *= np.repeat(weights, 2)[:, None]
    return J


def _refine(
    intr0: np.ndarray, mode: str, base_cx: float, base_cy: float,
    R0: np.ndarray, t0: np.ndarray, world: np.ndarray, obs: np.ndarray,
    weights: np.ndarray, opts: PnPOptions,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[float], int, bool]:
    intr, R, t = intr0.copy(), R0.copy(), t0.copy()
    r = _residuals(intr, mode, base_cx, base_cy, R, t, world, obs, weights)
    cost = float(r @ r)
    history = [cost]
    mu = 1e-3
    converged = False
    iters = 0

    for iters in range(1, opts.max_iterations + 1):
        J = _jacobian(intr, mode, base_cx, base_cy, R, t, world, weights)
        g = J.T @ r
        H = J.T @ J
        diag = np.clip(np.diag(H), 1e-12, None)

        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(H + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            intr_new = intr + step[:len(intr)]
            R_new = _orthonormalize(R @ _rodrigues(step[len(intr):len(intr) + 3]))
            t_new = t + step[len(intr) + 3:]
            r_new = _residuals(
                intr_new, mode, base_cx, base_cy, R_new, t_new, world, obs, weights
            )
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                accepted = True
                mu = max(mu / 3.0, 1e-14)
                break
            mu *= 10.0
            if mu > 1e16:
                break

        if not accepted:
            converged = True  # no descent direction left at any damping
            break

        step_norm = float(np.linalg.norm(step))
        rel_drop = (cost - cost_new) / cost if cost > 0 else 0.0
        intr, R, t, r, cost = intr_new, R_new, t_new, r_new, cost_new
        history.append(cost)
        if step_norm < opts.step_norm_tol or rel_drop < opts.rel_cost_tol:
            converged = True
            break

    return intr, R, t, history, iters, converged


def solve_pnp(
    correspondences: list[Correspondence],
    image_size: tuple[int, int],
    options: PnPOptions | None = None,
) -> tuple[PinholeCamera, FitReport]:
    """Calibrate a camera from court keypoint correspondences.

    Needs at least four ground-plane points; full-intrinsics mode (the
    default) additionally needs at least one off-plane point (a net top) to
    separate the two focal lengths from the pose. Raises
    CalibrationFailedError when the refined RMSE exceeds the ceiling.
    """
    opts = options or PnPOptions()
    w, h = image_size
    if w <= 0 or h <= 0:
        raise ValueError(f"bad image size {image_size}")

    names = [c.name for c in correspondences]
    if len(set(names)) != len(names):
        raise ValueError("duplicate correspondence names")
    obs = np.array([c.image_point for c in correspondences], dtype=float)
    world = np.array([c.world_point for c in correspondences], dtype=float)

    slack_u, slack_v = _IMAGE_BOUNDS_SLACK * w, _IMAGE_BOUNDS_SLACK * h
    inside = (
        (obs[:, 0] >= -slack_u) & (obs[:, 0] <= w + slack_u)
        & (obs[:, 1] >= -slack_v) & (obs[:, 1] <= h + slack_v)
    )
    if not np.all(inside):
        bad = [names[i] for i in np.flatnonzero(~inside)]
        raise ValueError(f"image points outside bounds (+10% slack): {', '.join(bad)}")

    plane_z = float(world[:, 2].min())
    on_plane = np.abs(world[:, 2] - plane_z) < _PLANE_Z_TOL
    n_ground = int(on_plane.sum())
    if n_ground < 4:
        raise InsufficientCorrespondencesError(
            f"{n_ground} ground-plane points, need at least 4"
        )
    if not opts.simplified and not np.any(~on_plane):
        raise InsufficientCorrespondencesError(
            "full-intrinsics mode needs at least one off-plane (net) point"
        )

    ground_xy = world[on_plane][:, :2]
    centered = ground_xy - ground_xy.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[1] < 1e-9 * max(svals[0], 1.0):
        raise DegenerateGeometryError("ground points are collinear")

    # Stage 1: homography from the ground points, intrinsics guesses.
    H = _fit_homography(ground_xy, obs[on_plane])
    cx0, cy0 = w / 2.0, h / 2.0
    diag = math.hypot(w, h)
    focal_seeds: list[tuple[float, float]] = []
    guess = _focal_from_homography(H, cx0, cy0, single=opts.simplified)
    if guess is not None:
        focal_seeds.append(guess)
    # Fallback seeds: the image diagonal and scaled variants. With noisy
    # clicks the analytic guess occasionally lands in a basin the damping
    # schedule cannot leave, so refinement restarts from each seed and the
    # lowest-cost run wins.
    focal_seeds += [(diag, diag), (0.5 * diag, 0.5 * diag), (2.0 * diag, 2.0 * diag)]

    weights = np.where(on_plane, 1.0, opts.net_weight)
    best = None
    for fx0, fy0 in focal_seeds:
        K0 = np.array([[fx0, 0.0, cx0], [0.0, fy0, cy0], [0.0, 0.0, 1.0]])
        try:
            R0, t0 = _decompose_homography(H, K0, plane_z, ground_xy)
        except DegenerateGeometryError:
            continue
        if opts.simplified:
            mode, intr0 = "simplified", np.array([fx0])
        elif opts.fix_principal_point:
            mode, intr0 = "full_fixed_pp", np.array([fx0, fy0])
        else:
            mode, intr0 = "full_free_pp", np.array([fx0, fy0, cx0, cy0])

        # Stage 2: joint refinement over every correspondence.
        result = _refine(intr0, mode, cx0, cy0, R0, t0, world, obs, weights, opts)
        if best is None or result[3][-1] < best[0][3][-1]:
            best = (result, mode)
        # A fit at numerical noise level cannot be beaten meaningfully.
        if best[0][3][-1] < 1e-16 * len(world):
            break
    if best is None:
        raise DegenerateGeometryError("homography decomposition failed for every seed")

    (intr, R, t, history, iters, converged), mode = best
    fx, fy, cx, cy = _unpack_intrinsics(intr, mode, cx0, cy0)

    camera = PinholeCamera(
        fx=float(fx), fy=float(fy), cx=float(cx), cy=float(cy),
        R=R, t=t, image_size=(int(w), int(h)),
    )

    pred, behind = reproject(camera, world)
    errs = np.linalg.norm(pred - obs, axis=1)
    rmse = float(np.sqrt(np.mean(errs ** 2)))
    report = FitReport(
        rmse_px=rmse,
        per_point_residuals_px={names[i]: float(errs[i]) for i in range(len(names))},
        iterations=iters,
        cost_history=[float(c) for c in history],
        converged=converged,
    )

    if np.any(behind):
        raise CalibrationFailedError("correspondence behind the camera after refinement", report)
    if rmse > opts.rmse_ceiling_px:
        raise CalibrationFailedError(
            f"reprojection RMSE {rmse:.2f} px exceeds ceiling {opts.rmse_ceiling_px:.2f} px",
            report,
        )
    camera.validate(world_points=world, surface_z=plane_z)
    return camera, report


# ── keypoint propagation across frames ─────────────────────────────────────


@dataclass(frozen=True)
class RelativeCamera:
    """Adjacent-frame camera: pose relative to the reference plus intrinsics."""

    R: np.ndarray  # reference-camera frame to adjacent-camera frame
    t: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float


@dataclass(frozen=True)
class PropagatedKeypoint:
    pixel: tuple[float, float] | None
    ok: bool
    reason: str = ""


def propagate_keypoints(
    ref_pixels,
    ref_depth: np.ndarray,
    ref_camera: PinholeCamera,
    adjacent: RelativeCamera,
) -> list[PropagatedKeypoint]:
    """Carry 2D keypoints into an adjacent frame via per-pixel depth.

    Each keypoint is back-projected with the depth sampled at its nearest
    pixel, moved by the relative pose, and re-projected with the adjacent
    intrinsics. Pure geometry: depth and relative pose are external inputs.
    Missing or non-positive depth yields a per-keypoint failure entry rather
    than an exception.
    """
    H, W = ref_depth.shape
    Rrel = np.asarray(adjacent.R, dtype=float).reshape(3, 3)
    trel = np.asarray(adjacent.t, dtype=float).reshape(3)
    out: list[PropagatedKeypoint] = []
    for u, v in np.asarray(ref_pixels, dtype=float).reshape(-1, 2):
        ix, iy = int(round(u)), int(round(v))
        if not (0 <= ix < W and 0 <= iy < H):
            out.append(PropagatedKeypoint(None, False, "outside depth map"))
            continue
        d = float(ref_depth[iy, ix])
        if not math.isfinite(d) or d <= 0.0:
            out.append(PropagatedKeypoint(None, False, "no depth"))
            continue
        xc = np.array(
            [d * (u - ref_camera.cx) / ref_camera.fx,
             d * (v - ref_camera.cy) / ref_camera.fy,
             d]
        )
        xa = Rrel @ xc + trel
        if xa[2] <= 0.0:
            out.append(PropagatedKeypoint(None, False, "behind adjacent camera"))
            continue
        out.append(
            PropagatedKeypoint(
                (float(adjacent.fx * xa[0] / xa[2] + adjacent.cx),
                 float(adjacent.fy * xa[1] / xa[2] + adjacent.cy)),
                True,
            )
        )
    return out
