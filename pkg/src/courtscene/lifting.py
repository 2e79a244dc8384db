"""Lifting 2D annotations into metric 3D: rays, planes, balls, meshes, arcs.

The core identity is the back-projection ray of a pixel p under a calibrated
camera,

    X(lam) = C + lam * d,    C = -R^T t,   d ~ R^T K^-1 [u, v, 1]^T,

with d normalized so lam is metric distance and oriented so camera-frame
depth grows with lam. Intersecting that ray with a horizontal plane Z = z
turns single clicks into world points; a ball pixel plus a ground click
(where the annotator judges the ball's vertical shadow to land) resolves
the depth ambiguity along the ball ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import PinholeCamera, reproject

_PARALLEL_TOL = 1e-12


class LiftingError(RuntimeError):
    pass


class NoIntersectionError(LiftingError):
    """Ray runs parallel to the requested plane."""


class BehindCameraError(LiftingError):
    """Solution exists only at non-positive distance along the ray."""


class DegenerateRayError(LiftingError):
    pass


class IllConditionedError(LiftingError):
    pass


@dataclass(frozen=True)
class Ray:
    """Metric back-projection ray; direction is unit length."""

    origin: np.ndarray
    direction: np.ndarray
    source_pixel: tuple[float, float]

    def at(self, lam: float) -> np.ndarray:
        return self.origin + lam * self.direction


def pixel_ray(camera: PinholeCamera, pixel) -> Ray:
    u, v = float(pixel[0]), float(pixel[1])
    d_cam = np.array([(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0])
    d_world = camera.R.T @ d_cam
    return Ray(
        origin=camera.center,
        direction=d_world / np.linalg.norm(d_world),
        source_pixel=(u, v),
    )


def intersect_plane(ray: Ray, plane_z: float) -> np.ndarray:
    """Point where the ray meets the horizontal plane Z = plane_z."""
    dz = ray.direction[2]
    if abs(dz) < _PARALLEL_TOL:
        raise NoIntersectionError(f"ray parallel to plane Z = {plane_z}")
    lam = (plane_z - ray.origin[2]) / dz
    if lam <= 0.0:
        raise BehindCameraError(f"plane Z = {plane_z} behind the camera (lam = {lam:.3g})")
    return ray.at(lam)


@dataclass(frozen=True)
class ProjectionLine:
    """Image of the ball ray's vertical ground projection.

    The ground projection G(lam) = (X.x, X.y, surface_z) of a ray is a
    straight 3D segment, so its image is the straight pixel segment between
    the endpoint projections. A vertical ray collapses to a single pixel.
    """

    kind: str  # "segment" or "point"
    endpoints: tuple[tuple[float, float], ...]

    @property
    def pixel(self) -> tuple[float, float]:
        return self.endpoints[0]


def projection_line(
    camera: PinholeCamera,
    ball_pixel,
    surface_z: float = 0.0,
    depth_range: tuple[float, float] | None = None,
) -> ProjectionLine:
    """Assistive overlay segment for placing a ball's ground click.

    Default depth range runs from the ray point 0.1 m below camera height
    down to the playing surface.
    """
    ray = pixel_ray(camera, ball_pixel)
    ox, oy, oz = ray.origin
    dx, dy, dz = ray.direction

    if dx * dx + dy * dy < _PARALLEL_TOL ** 2:
        ground = np.array([ox, oy, surface_z])
        pix, behind = reproject(camera, [ground])
        if behind[0]:
            raise BehindCameraError("vertical ray's ground point behind the camera")
        return ProjectionLine(kind="point", endpoints=((float(pix[0, 0]), float(pix[0, 1])),))

    if depth_range is None:
        if abs(dz) < _PARALLEL_TOL:
            raise NoIntersectionError("level ray never reaches the surface")
        lam_near = -0.1 / dz
        lam_far = (surface_z - oz) / dz
        depth_range = (min(lam_near, lam_far), max(lam_near, lam_far))
    lam_min, lam_max = depth_range
    if lam_min <= 0.0 or lam_max <= 0.0:
        raise BehindCameraError("depth range extends behind the camera")

    ends = []
    for lam in (lam_min, lam_max):
        p = ray.at(lam)
        ends.append(np.array([p[0], p[1], surface_z]))
    pix, behind = reproject(camera, ends)
    if behind.any():
        raise BehindCameraError("ground projection endpoint behind the camera")
    return ProjectionLine(
        kind="segment",
        endpoints=(
            (float(pix[0, 0]), float(pix[0, 1])),
            (float(pix[1, 0]), float(pix[1, 1])),
        ),
    )


@dataclass(frozen=True)
class LiftResult:
    point: np.ndarray
    residual_m: float
    inconsistent_click: bool  # residual above the tolerance, click likely off


def lift_ball(
    camera: PinholeCamera,
    ball_pixel,
    ground_click_pixel,
    surface_z: float = 0.0,
    click_tolerance_m: float = 0.05,
) -> LiftResult:
    """Lift a ball pixel to 3D using its annotated vertical ground point.

    The ground click back-projects to G* on the playing surface; the ball
    sits at the point of its own ray whose horizontal position best matches
    G* (a single-unknown linear least squares with a closed-form solution).
    The planar residual measures how consistent the two clicks are; clicking
    the ball itself as its own ground point lands exactly on the surface.
    """
    ground = intersect_plane(pixel_ray(camera, ground_click_pixel), surface_z)
    ray = pixel_ray(camera, ball_pixel)
    ox, oy, _ = ray.origin
    dx, dy, dz = ray.direction

    denom = dx * dx + dy * dy
    if denom < _PARALLEL_TOL ** 2:
        # Vertical ball ray: horizontal position is fixed, take the surface
        # intersection depth and report how far the ground click landed.
        lam = (surface_z - ray.origin[2]) / dz
    else:
        lam = (dx * (ground[0] - ox) + dy * (ground[1] - oy)) / denom
    if lam <= 0.0:
        raise BehindCameraError("ground click places the ball behind the camera")

    point = ray.at(lam)
    residual = math.hypot(point[0] - ground[0], point[1] - ground[1])
    return LiftResult(
        point=point,
        residual_m=residual,
        inconsistent_click=residual > click_tolerance_m,
    )


# ── trajectories ───────────────────────────────────────────────────────────


@dataclass(frozen=True)
class TrajectorySegment:
    """Constant-acceleration arc p(t) = p0 + v0 dt + a dt^2 / 2."""

    t0: float
    p0: np.ndarray
    v0: np.ndarray
    a: np.ndarray
    valid_interval: tuple[float, float]

    def evaluate(self, t: float) -> np.ndarray:
        dt = t - self.t0
        return self.p0 + self.v0 * dt + 0.5 * self.a * dt * dt

    def sample(self, times) -> np.ndarray:
        dt = np.asarray(times, dtype=float) - self.t0
        return (
            self.p0[None, :]
            + self.v0[None, :] * dt[:, None]
            + 0.5 * self.a[None, :] * (dt ** 2)[:, None]
        )

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "p0": [float(x) for x in self.p0],
            "v0": [float(x) for x in self.v0],
            "a": [float(x) for x in self.a],
            "valid_interval": [self.valid_interval[0], self.valid_interval[1]],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySegment":
        return cls(
            t0=float(d["t0"]),
            p0=np.array(d["p0"], dtype=float),
            v0=np.array(d["v0"], dtype=float),
            a=np.array(d["a"], dtype=float),
            valid_interval=(float(d["valid_interval"][0]), float(d["valid_interval"][1])),
        )


def fit_trajectory(samples, frame_rate: float = 30.0) -> TrajectorySegment:
    """Fit the constant-acceleration arc through exactly three timed points.

    p0 is pinned to the first sample; the remaining two samples give a 2x2
    linear system per axis for (v0, a). Time gaps shorter than a tenth of a
    frame period make the system ill-conditioned and are rejected.
    """
    samples = list(samples)
    if len(samples) != 3:
        raise ValueError(f"need exactly 3 samples, got {len(samples)}")
    times = np.array([float(t) for t, _ in samples])
    pts = np.array([np.asarray(p, dtype=float) for _, p in samples])
    if not (times[0] < times[1] < times[2]):
        raise ValueError("sample times must be strictly increasing")
    min_gap = 1.0 / (10.0 * frame_rate)
    if (times[1] - times[0]) < min_gap or (times[2] - times[1]) < min_gap:
        raise IllConditionedError(
            f"time gaps {times[1]-times[0]:.4g}, {times[2]-times[1]:.4g} below {min_gap:.4g} s"
        )

    dt1, dt2 = times[1] - times[0], times[2] - times[0]
    A = np.array([[dt1, 0.5 * dt1 * dt1], [dt2, 0.5 * dt2 * dt2]])
    rhs = pts[1:] - pts[0]          # (2, 3)
    va = np.linalg.solve(A, rhs)    # rows: v0, a
    segment = TrajectorySegment(
        t0=times[0], p0=pts[0], v0=va[0], a=va[1],
        valid_interval=(times[0], times[2]),
    )
    # The fit is exact by construction; anything else is a numerical bug.
    recon = segment.sample(times)
    assert np.abs(recon - pts).max() < 1e-9, "trajectory fit failed to interpolate samples"
    return segment


@dataclass(frozen=True)
class TrajectoryQuality:
    mean_error_px: float
    per_frame_px: tuple[float, ...]
    passed: bool


def trajectory_quality(
    segment: TrajectorySegment,
    detections,
    camera: PinholeCamera,
    threshold_px: float = 5.0,
    interval_slack_s: float = 1e-9,
) -> TrajectoryQuality:
    """Mean pixel gap between reprojected arc points and 2D detections."""
    detections = list(detections)
    if not detections:
        raise ValueError("no detections to check against")
    lo, hi = segment.valid_interval
    for t, _ in detections:
        if not (lo - interval_slack_s <= t <= hi + interval_slack_s):
            raise ValueError(f"detection at t = {t} outside valid interval [{lo}, {hi}]")
    times = [t for t, _ in detections]
    obs = np.array([pix for _, pix in detections], dtype=float)
    pix, behind = reproject(camera, segment.sample(times))
    if behind.any():
        raise BehindCameraError("arc point behind the camera")
    errs = np.linalg.norm(pix - obs, axis=1)
    mean = float(errs.mean())
    return TrajectoryQuality(
        mean_error_px=mean,
        per_frame_px=tuple(float(e) for e in errs),
        passed=mean <= threshold_px,
    )


# ── player meshes ──────────────────────────────────────────────────────────

_UP = np.array([0.0, 0.0, 1.0])


def facing_from_joints(joints: dict[str, np.ndarray]) -> np.ndarray:
    """Unit playing-plane forward direction from the hip joints.

    forward = cross(left_hip - right_hip, up) projected to the plane; the
    hip axis is stable under arm and leg pose, which is why it anchors the
    heading.
    """
    try:
        lh = np.asarray(joints["left_hip"], dtype=float)
        rh = np.asarray(joints["right_hip"], dtype=float)
    except KeyError as e:
        raise ValueError(f"missing joint {e.args[0]!r} for facing") from None
    fwd = np.cross(lh - rh, _UP)[:2]
    norm = np.linalg.norm(fwd)
    if norm < 1e-9:
        raise DegenerateRayError("hip axis is vertical, heading undefined")
    return fwd / norm


@dataclass
class PlayerMesh:
    """Recovered player body mesh in world coordinates."""

    player_id: str
    vertices: np.ndarray            # (N, 3)
    joints: dict[str, np.ndarray]   # named 3D joints, includes "pelvis"
    facing: np.ndarray              # unit 2-vector in the playing plane
    source: str = ""

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.joints = {k: np.asarray(v, dtype=float).reshape(3) for k, v in self.joints.items()}
        self.facing = np.asarray(self.facing, dtype=float).reshape(2)
        if "pelvis" not in self.joints:
            raise ValueError("mesh joints must include 'pelvis'")
        norm = np.linalg.norm(self.facing)
        if not math.isclose(norm, 1.0, abs_tol=1e-6):
            if norm < 1e-9:
                raise ValueError("facing vector has no direction")
            self.facing = self.facing / norm
        if len(self.vertices):
            lo = self.vertices.min(axis=0) - 1e-6
            hi = self.vertices.max(axis=0) + 1e-6
            p = self.joints["pelvis"]
            if not (np.all(p >= lo) and np.all(p <= hi)):
                raise ValueError("pelvis outside the vertex bounding box")

    @property
    def pelvis(self) -> np.ndarray:
        return self.joints["pelvis"]

    @property
    def lowest_point(self) -> np.ndarray:
        return self.vertices[int(np.argmin(self.vertices[:, 2]))]


def mesh_to_world(
    vertices_cam: np.ndarray, joints_cam: dict[str, np.ndarray], camera: PinholeCamera
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Convert camera-frame mesh data to world frame: X_w = R^T (X_c - t)."""
    V = np.asarray(vertices_cam, dtype=float).reshape(-1, 3)
    world_v = (V - camera.t) @ camera.R
    world_j = {
        k: camera.R.T @ (np.asarray(v, dtype=float) - camera.t) for k, v in joints_cam.items()
    }
    return world_v, world_j


def realign_mesh(
    camera: PinholeCamera, mesh: PlayerMesh, annotated_height: float
) -> tuple[PlayerMesh, float]:
    """Rescale a mesh about the camera center so its lowest vertex hits a height.

    Monocular mesh recovery leaves a depth/scale ambiguity along the viewing
    rays; a camera-centered similarity X' = s X + (1 - s) C slides the whole
    body along those rays without changing its image. The scale is chosen so
    the lowest vertex lands on the annotated support height (usually the
    playing surface). Returns the realigned mesh and s.
    """
    if len(mesh.vertices) == 0:
        raise ValueError("mesh has no vertices")
    C = camera.center
    if not C[2] > annotated_height:
        raise LiftingError(
            f"camera height {C[2]:.3f} not above annotated height {annotated_height:.3f}"
        )
    low_idx = int(np.argmin(mesh.vertices[:, 2]))
    v = mesh.vertices[low_idx]
    dirv = v - C
    if abs(dirv[2]) < _PARALLEL_TOL:
        raise DegenerateRayError("ray to lowest vertex runs parallel to the plane")
    s = (annotated_height - C[2]) / dirv[2]
    if s <= 0.0:
        raise LiftingError("annotated height is on the wrong side of the camera")

    new_vertices = s * mesh.vertices + (1.0 - s) * C
    new_joints = {k: s * p + (1.0 - s) * C for k, p in mesh.joints.items()}
    try:
        facing = facing_from_joints(new_joints)
    except (ValueError, DegenerateRayError):
        facing = mesh.facing  # direction is scale-invariant anyway
    realigned = PlayerMesh(
        player_id=mesh.player_id,
        vertices=new_vertices,
        joints=new_joints,
        facing=facing,
        source=mesh.source,
    )
    return realigned, float(s)
