"""Synthetic broadcast cameras and scenes for experiments and self-checks.

Geometry only: cameras are placed behind the near baseline at configurable
elevation and range, the way broadcast net-sport footage is shot, and scene
entities (ball, players) are sampled inside the playing volume. Everything
is seeded and deterministic.
"""

from __future__ import annotations

import math
import random

import numpy as np

from .calibration import (
    Correspondence,
    InvalidCameraError,
    PinholeCamera,
    project_point,
    reproject,
)
from .court import CourtSpec, court_spec
from .scene import BallState, PlayerState, SceneState, label_players_by_bbox

DEFAULT_IMAGE_SIZE = (1920, 1080)

# The six keypoints a broadcast annotator clicks: ground corners plus the
# two net post tops.
CLICK_KEYPOINTS = (
    "far_left_corner",
    "far_right_corner",
    "near_right_corner",
    "near_left_corner",
    "net_left_top",
    "net_right_top",
)


def look_at_camera(
    position,
    target,
    fx: float,
    fy: float,
    cx: float,
    cy: float,
    image_size=DEFAULT_IMAGE_SIZE,
) -> PinholeCamera:
    """Camera at `position` looking at `target`, image-up aligned with world-up."""
    position = np.asarray(position, dtype=float)
    target = np.asarray(target, dtype=float)
    forward = target - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("camera position coincides with target")
    forward /= norm
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-9:
        raise ValueError("camera looking straight along world up")
    right /= rnorm
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])  # rows: camera axes in world coords
    t = -R @ position
    return PinholeCamera(fx=fx, fy=fy, cx=cx, cy=cy, R=R, t=t, image_size=image_size)


def make_broadcast_camera(
    spec: CourtSpec,
    rng: random.Random,
    elevation_deg_range=(15.0, 45.0),
    range_m=(8.0, 40.0),
    image_size=DEFAULT_IMAGE_SIZE,
    fx_fy_ratio_range=(0.98, 1.02),
) -> PinholeCamera:
    """Sample a broadcast-style camera that frames the whole court.

    Position: behind the near baseline, slight lateral offset, range and
    elevation drawn from the given intervals measured from the court center.
    Focal is chosen so the court footprint spans most of the image width.
    """
    w, h = image_size
    center = np.array([spec.length_m / 2.0, spec.width_m / 2.0, spec.surface_height_m])
    # Table-height surfaces sit closer to the lens; scale range down so the
    # table still fills a sensible share of the frame.
    scale = 1.0 if spec.length_m > 5.0 else 0.25
    dist = rng.uniform(range_m[0] * scale, range_m[1] * scale)
    elev = math.radians(rng.uniform(*elevation_deg_range))
    azim = math.radians(rng.uniform(-12.0, 12.0))

    horiz = dist * math.cos(elev)
    position = center + np.array(
        [horiz * math.cos(azim), horiz * math.sin(azim), dist * math.sin(elev)]
    )

    # Focal that puts the court diagonal at ~70-90% of the image width.
    court_diag = math.hypot(spec.length_m, spec.width_m)
    fill = rng.uniform(0.7, 0.9)
    fx = fill * w * dist / court_diag
    fy = fx / rng.uniform(*fx_fy_ratio_range)
    cam = look_at_camera(position, center, fx, fy, w / 2.0, h / 2.0, image_size)

    keypoints = np.array([spec.keypoints[k] for k in CLICK_KEYPOINTS])
    pix, behind = reproject(cam, keypoints)
    if behind.any() or (pix < 0).any() or (pix[:, 0] > w).any() or (pix[:, 1] > h).any():
        # Resample rather than hand back a camera that cannot see the court.
        return make_broadcast_camera(
            spec, rng, elevation_deg_range, range_m, image_size, fx_fy_ratio_range
        )
    return cam


def court_correspondences(
    spec: CourtSpec,
    camera: PinholeCamera,
    noise_px: float = 0.0,
    rng: random.Random | None = None,
    keypoint_names=CLICK_KEYPOINTS,
) -> list[Correspondence]:
    """Project the click keypoints through a ground-truth camera."""
    out = []
    for name in keypoint_names:
        wp = spec.keypoints[name]
        u, v = project_point(camera, wp)
        if noise_px > 0.0:
            assert rng is not None, "noise needs a seeded rng"
            u += rng.gauss(0.0, noise_px)
            v += rng.gauss(0.0, noise_px)
        out.append(Correspondence(name=name, image_point=(u, v), world_point=wp))
    return out


def sample_court_point(
    spec: CourtSpec, rng: random.Random, z_range=(0.0, 3.0), margin_m: float = 0.0
) -> np.ndarray:
    """Uniform point over the court footprint (optionally padded) at a sampled height."""
    zs = spec.surface_height_m
    return np.array(
        [
            rng.uniform(-margin_m, spec.length_m + margin_m),
            rng.uniform(-margin_m, spec.width_m + margin_m),
            zs + rng.uniform(*z_range),
        ]
    )


def sample_scene(
    spec: CourtSpec,
    rng: random.Random,
    scene_id: str = "scene-0",
    frame_id: str = "frame-0",
    n_players: int | None = None,
    ball_mode: str | None = None,
) -> SceneState:
    """Random but physically consistent scene over a broadcast camera.

    n_players defaults to 0-4; ball_mode is "visible", "invisible",
    "absent", or None for a weighted random pick. Player pelvises sit over
    the court footprint at standing height so their projections land inside
    the frame for any camera produced by make_broadcast_camera.
    """
    camera = make_broadcast_camera(spec, rng)
    zs = spec.surface_height_m
    if n_players is None:
        n_players = rng.randint(0, 4)
    # Table-size courts pack players near the table edges instead of on it.
    on_table = spec.sport == "table_tennis"

    players = []
    for i in range(n_players):
        if on_table:
            x = rng.uniform(-0.9, spec.length_m + 0.9)
            y = rng.uniform(-0.9, spec.width_m + 0.9)
            ground_z = 0.0
        else:
            x = rng.uniform(0.0, spec.length_m)
            y = rng.uniform(0.0, spec.width_m)
            ground_z = zs
        pelvis = np.array([x, y, ground_z + rng.uniform(0.85, 1.05)])
        angle = rng.uniform(0.0, 2.0 * math.pi)
        facing = np.array([math.cos(angle), math.sin(angle)])
        lowest = np.array([x + rng.uniform(-0.1, 0.1), y + rng.uniform(-0.1, 0.1), ground_z])
        try:
            u, v = project_point(camera, pelvis)
        except InvalidCameraError:  # broadcast cameras never see this; stay valid
            u, v = camera.cx, camera.cy
        half_w = rng.uniform(25.0, 60.0)
        half_h = rng.uniform(60.0, 120.0)
        bbox = (u - half_w, v - half_h, u + half_w, v + half_h)
        players.append(
            PlayerState(
                player_id=f"p{i}",
                label=i + 1,  # placeholder, reassigned from bboxes below
                bbox=bbox,
                pelvis=pelvis,
                facing=facing,
                lowest_point=lowest,
            )
        )
    label_players_by_bbox(players)

    if ball_mode is None:
        ball_mode = rng.choices(("visible", "invisible", "absent"), (0.8, 0.1, 0.1))[0]
    if ball_mode == "absent":
        ball = None
    elif ball_mode == "invisible":
        ball = BallState(position=None, visible=False)
    else:
        z_hi = 0.6 if on_table else 3.0
        ball = BallState(
            position=sample_court_point(spec, rng, z_range=(0.0, z_hi)), visible=True
        )

    return SceneState(
        scene_id=scene_id,
        frame_id=frame_id,
        sport=spec.sport,
        camera=camera,
        ball=ball,
        players=players,
    )
