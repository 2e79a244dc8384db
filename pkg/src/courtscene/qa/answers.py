"""Ground-truth answer derivation from reconstructed scene state.

Every question type maps to one deterministic rule over the scene's 3D
state (camera center, ball position, player pelvises) plus the court
registry. Alongside the answer, each rule reports its distance to the
decision boundary; when that margin falls below the sport's ambiguity
threshold the item is flagged so downstream filtering can drop it.

Entities are referenced by compact strings: "ball", "camera", or
"player:<label>". These appear in item metadata and ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..court import CourtSpec, OutOfPlayError, line_distance, zone_of
from ..calibration import InvalidCameraError, project_point, reproject
from ..scene import PlayerState, SceneState

# Decision thresholds without a per-sport metric interpretation: the minimum
# angle between facing and displacement for an egocentric call, and the
# minimum horizontal pixel separation for a camera-view call.
EGO_MIN_ANGLE_DEG = 5.0
CAMERA_VIEW_MIN_PX = 8.0

# Fixed option sets, printed order. Indices are the canonical answer values.
ZONE_OPTION_INDEX = {"forecourt": 0, "midcourt": 1, "backcourt": 2}
EGO_LEFT, EGO_RIGHT = 0, 1
CAM_LEFT, CAM_RIGHT, CAM_INLINE = 0, 1, 2
SIDE_LEFT, SIDE_RIGHT, SIDE_CENTER = 0, 1, 2
NET_ABOVE, NET_BELOW = 0, 1
VIS_YES, VIS_NO = 0, 1


class AnswerError(ValueError):
    pass


class MissingEntityError(AnswerError):
    pass


def parse_entity(ref: str) -> tuple[str, int | None]:
    if ref == "ball" or ref == "camera":
        return ref, None
    if ref.startswith("player:"):
        return "player", int(ref.split(":", 1)[1])
    raise MissingEntityError(f"bad entity reference {ref!r}")


def entity_position(scene: SceneState, ref: str) -> np.ndarray:
    """World position of an entity: ball center, player pelvis, camera center."""
    kind, label = parse_entity(ref)
    if kind == "camera":
        return scene.camera.center
    if kind == "ball":
        if scene.ball is None or scene.ball.position is None:
            raise MissingEntityError(f"{scene.scene_id}: no ball position")
        return scene.ball.position
    try:
        return scene.player_by_label(label).pelvis
    except KeyError:
        raise MissingEntityError(f"{scene.scene_id}: no player labeled {label}") from None


def entity_name(scene: SceneState, court: CourtSpec, ref: str) -> str:
    kind, label = parse_entity(ref)
    if kind == "ball":
        return court.ball_name
    if kind == "camera":
        return "the camera"
    return scene.player_by_label(label).display_name


def player_entity(player: PlayerState) -> str:
    return f"player:{player.label}"


@dataclass
class DerivedAnswer:
    """Typed ground truth plus how close it sits to the decision boundary.

    value holds a float (meters), an int (count), a 3-tuple (coordinate), an
    option index (fixed-option MCQ), or an entity string (entity MCQ).
    margin is math.inf for questions with no decision boundary.
    """

    qtype: str
    value: float | int | tuple[float, float, float] | str
    margin: float = math.inf
    threshold: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def ambiguous(self) -> bool:
        return self.margin < self.threshold


def _require_players(scene: SceneState, n: int, qtype: str) -> None:
    if len(scene.players) < n:
        raise MissingEntityError(
            f"{scene.scene_id}: {qtype} needs {n} players, scene has {len(scene.players)}"
        )


def _pelvis_in_image(scene: SceneState, player: PlayerState) -> bool:
    pixels, behind = reproject(scene.camera, [player.pelvis])
    if behind[0]:
        return False
    u, v = pixels[0]
    w, h = scene.camera.image_size
    return 0.0 <= u <= w and 0.0 <= v <= h


def _image_u(scene: SceneState, ref: str) -> float:
    try:
        u, _ = project_point(scene.camera, entity_position(scene, ref))
    except InvalidCameraError:
        raise AnswerError(f"{scene.scene_id}: {ref} is behind the camera") from None
    return u


def _nearest(
    scene: SceneState,
    anchor: np.ndarray,
    candidates: list[PlayerState],
    threshold: float,
    qtype: str,
) -> DerivedAnswer:
    """Argmin of pelvis distances; margin is the winner/runner-up gap."""
    dists = sorted(
        (float(np.linalg.norm(p.pelvis - anchor)), player_entity(p)) for p in candidates
    )
    margin = dists[1][0] - dists[0][0] if len(dists) > 1 else math.inf
    return DerivedAnswer(
        qtype=qtype,
        value=dists[0][1],
        margin=margin,
        threshold=threshold,
        extras={"distances": {ref: d for d, ref in dists}},
    )


def _ego_side(facing: np.ndarray, displacement_xy: np.ndarray, qtype: str) -> DerivedAnswer:
    """Side of a displacement seen from an observer facing along `facing`.

    Sign of the planar cross product: positive z -> the target is to the
    observer's left. Margin is |sin| of the facing/displacement angle, so a
    target nearly dead ahead (or behind) is flagged.
    """
    norm = float(np.linalg.norm(displacement_xy))
    threshold = math.sin(math.radians(EGO_MIN_ANGLE_DEG))
    if norm < 1e-12:
        return DerivedAnswer(qtype=qtype, value=EGO_RIGHT, margin=0.0, threshold=threshold)
    cross_z = float(facing[0] * displacement_xy[1] - facing[1] * displacement_xy[0])
    sin_angle = abs(cross_z) / norm  # facing is unit length
    value = EGO_LEFT if cross_z > 0 else EGO_RIGHT
    return DerivedAnswer(qtype=qtype, value=value, margin=sin_angle, threshold=threshold)


def _camera_side(u_subject: float, u_reference: float, qtype: str) -> DerivedAnswer:
    """Left/right in the image frame; near-equal u means in line with it."""
    du = u_subject - u_reference
    if abs(du) < CAMERA_VIEW_MIN_PX:
        value = CAM_INLINE
    else:
        value = CAM_LEFT if du < 0 else CAM_RIGHT
    return DerivedAnswer(
        qtype=qtype,
        value=value,
        margin=abs(du),
        threshold=CAMERA_VIEW_MIN_PX,
        extras={"du_px": du},
    )


def _zone_answer(
    point: np.ndarray, court: CourtSpec, qtype: str, threshold: float
) -> DerivedAnswer:
    zone, half = zone_of(point, court)
    # Distance to the nearest longitudinal decision boundary. Crossing the
    # net swaps halves but not the zone name, so only the baseline and the
    # service-line offsets count.
    x = float(point[0])
    offset = x if x < court.net_x else court.length_m - x
    boundaries = (0.0, court.zone_boundary_from_baseline_m)
    margin = min(abs(offset - b) for b in boundaries)
    return DerivedAnswer(
        qtype=qtype,
        value=ZONE_OPTION_INDEX[zone],
        margin=margin,
        threshold=threshold,
        extras={"zone": zone, "half": half},
    )


def derive_answer(
    scene: SceneState,
    court: CourtSpec,
    qtype: str,
    params: dict,
    thresholds=None,
) -> DerivedAnswer:
    """Apply the question type's rule; raise MissingEntityError on bad refs."""
    th = thresholds if thresholds is not None else court.ambiguity_thresholds

    if qtype == "camera_object_distance":
        pos = entity_position(scene, params["object"])
        d = float(np.linalg.norm(pos - scene.camera.center))
        return DerivedAnswer(qtype=qtype, value=d, extras={"distance_m": d})

    if qtype == "object_object_distance":
        a = entity_position(scene, params["object1"])
        b = entity_position(scene, params["object2"])
        d = float(np.linalg.norm(a - b))
        return DerivedAnswer(qtype=qtype, value=d, extras={"distance_m": d})

    if qtype == "object_line_distance":
        pos = entity_position(scene, params["object"])
        d = line_distance(pos, params["line"], court)
        return DerivedAnswer(qtype=qtype, value=d, extras={"distance_m": d, "line": params["line"]})

    if qtype == "height_above_surface":
        pos = entity_position(scene, params["object"])
        return DerivedAnswer(qtype=qtype, value=float(pos[2]) - court.surface_height_m)

    if qtype == "count_players":
        count = sum(1 for p in scene.players if _pelvis_in_image(scene, p))
        return DerivedAnswer(qtype=qtype, value=count)

    if qtype == "ball_visibility":
        visible = scene.ball is not None and scene.ball.visible
        return DerivedAnswer(qtype=qtype, value=VIS_YES if visible else VIS_NO)

    if qtype == "localize_object":
        pos = entity_position(scene, params["object"])
        return DerivedAnswer(qtype=qtype, value=(float(pos[0]), float(pos[1]), float(pos[2])))

    if qtype == "player_player_nearest":
        _require_players(scene, 3, qtype)
        observer = scene.player_by_label(parse_entity(params["player"])[1])
        others = [p for p in scene.players if p.label != observer.label]
        return _nearest(scene, observer.pelvis, others, th.lateral_m, qtype)

    if qtype == "ball_player_nearest":
        _require_players(scene, 2, qtype)
        return _nearest(scene, entity_position(scene, "ball"), scene.players, th.lateral_m, qtype)

    if qtype == "camera_player_nearest":
        _require_players(scene, 2, qtype)
        return _nearest(scene, scene.camera.center, scene.players, th.lateral_m, qtype)

    if qtype == "player_line_nearest":
        _require_players(scene, 2, qtype)
        dists = sorted(
            (line_distance(p.pelvis, params["line"], court), player_entity(p))
            for p in scene.players
        )
        margin = dists[1][0] - dists[0][0] if len(dists) > 1 else math.inf
        return DerivedAnswer(
            qtype=qtype,
            value=dists[0][1],
            margin=margin,
            threshold=th.lateral_m,
            extras={"distances": {ref: d for d, ref in dists}, "line": params["line"]},
        )

    if qtype == "player_player_ego_side":
        observer = scene.player_by_label(parse_entity(params["observer"])[1])
        target = entity_position(scene, params["target"])
        return _ego_side(observer.facing, (target - observer.pelvis)[:2], qtype)

    if qtype == "ball_player_ego_side":
        observer = scene.player_by_label(parse_entity(params["player"])[1])
        ball = entity_position(scene, "ball")
        return _ego_side(observer.facing, (ball - observer.pelvis)[:2], qtype)

    if qtype == "camera_player_ego_side":
        observer = scene.player_by_label(parse_entity(params["player"])[1])
        cam = scene.camera.center
        return _ego_side(observer.facing, (cam - observer.pelvis)[:2], qtype)

    if qtype == "player_player_camera_side":
        return _camera_side(
            _image_u(scene, params["player_a"]), _image_u(scene, params["player_b"]), qtype
        )

    if qtype == "ball_player_camera_side":
        return _camera_side(_image_u(scene, params["player"]), _image_u(scene, "ball"), qtype)

    if qtype == "camera_player_camera_side":
        return _camera_side(_image_u(scene, params["player"]), scene.camera.cx, qtype)

    if qtype == "ball_zone_longitudinal":
        return _zone_answer(entity_position(scene, "ball"), court, qtype, th.depth_m)

    if qtype == "player_zone_classify":
        player = scene.player_by_label(parse_entity(params["player"])[1])
        return _zone_answer(player.lowest_point, court, qtype, th.depth_m)

    if qtype == "ball_net_above_below":
        z = float(entity_position(scene, "ball")[2])
        level = court.surface_height_m + court.net_height_center_m
        return DerivedAnswer(
            qtype=qtype,
            value=NET_ABOVE if z > level else NET_BELOW,
            margin=abs(z - level),
            threshold=th.lateral_m,
        )

    if qtype == "ball_table_side":
        y = float(entity_position(scene, "ball")[1])
        off = y - court.width_m / 2.0
        if abs(off) < th.lateral_m:
            value = SIDE_CENTER
        else:
            # +Y is the camera's right, so larger Y reads as the right side.
            value = SIDE_RIGHT if off > 0 else SIDE_LEFT
        return DerivedAnswer(qtype=qtype, value=value, margin=abs(off), threshold=th.lateral_m)

    raise AnswerError(f"unknown question type {qtype!r}")


__all__ = [
    "AnswerError",
    "MissingEntityError",
    "DerivedAnswer",
    "derive_answer",
    "entity_name",
    "entity_position",
    "parse_entity",
    "player_entity",
    "EGO_MIN_ANGLE_DEG",
    "CAMERA_VIEW_MIN_PX",
]
