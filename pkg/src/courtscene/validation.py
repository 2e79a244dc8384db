"""Quality-control oracles: triangulation, skeleton error, engine audits.

Single-frame reconstructions are certified against an independent source of
truth, typically a synchronized multi-view capture: 2D keypoints seen from
several calibrated cameras triangulate to reference 3D points, and engine
outputs are compared against those references as focal, ball, pelvis, and
per-joint error statistics with per-sport breakdowns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import PinholeCamera
from .lifting import pixel_ray

PARALLEL_RAY_ANGLE_DEG = 0.5


class ValidationError(ValueError):
    pass


# ── multi-view triangulation ────────────────────────────────────────────────


@dataclass
class TriangulationResult:
    point: np.ndarray        # world meters
    residual_m: float        # RMS point-to-ray distance
    ill_conditioned: bool    # all ray pairs within the parallel threshold

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float).reshape(3)


def triangulate(observations) -> TriangulationResult:
    """Least-squares intersection of back-projected rays (mid-point method).

    observations: iterable of (PinholeCamera, pixel). Minimizes the sum of
    squared point-to-ray distances via a closed-form 3x3 solve. Rays that
    are all near-parallel (under 0.5 degrees apart) still produce a result,
    flagged ill-conditioned.
    """
    obs = list(observations)
    if len(obs) < 2:
        raise ValidationError(f"triangulation needs at least 2 views, got {len(obs)}")
    rays = [pixel_ray(camera, pixel) for camera, pixel in obs]

    A = np.zeros((3, 3))
    b = np.zeros(3)
    for ray in rays:
        d = ray.direction
        P = np.eye(3) - np.outer(d, d)
        A += P
        b += P @ ray.origin
    try:
        point = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        point = np.linalg.lstsq(A, b, rcond=None)[0]

    sq = 0.0
    for ray in rays:
        v = point - ray.origin
        perp = v - ray.direction * float(v @ ray.direction)
        sq += float(perp @ perp)
    residual = math.sqrt(sq / len(rays))

    cos_limit = math.cos(math.radians(PARALLEL_RAY_ANGLE_DEG))
    widest = max(
        abs(float(r1.direction @ r2.direction))
        for i, r1 in enumerate(rays)
        for r2 in rays[i + 1:]
    )
    return TriangulationResult(
        point=point, residual_m=residual, ill_conditioned=widest > cos_limit
    )


# ── skeleton error ──────────────────────────────────────────────────────────


def mpjpe(pred_joints: dict, gt_joints: dict, root_align: bool = False,
          root_joint: str = "pelvis") -> float:
    """Mean per-joint position error in meters over matched named joints.

    Computed in the world frame by default. root_align subtracts the root
    joint from both sets first, measuring pose error net of placement.
    """
    if set(pred_joints) != set(gt_joints):
        missing = set(pred_joints) ^ set(gt_joints)
        raise ValidationError(f"joint name sets differ: {sorted(missing)}")
    if not pred_joints:
        raise ValidationError("empty joint sets")
    pred = {k: np.asarray(v, dtype=float).reshape(3) for k, v in pred_joints.items()}
    gt = {k: np.asarray(v, dtype=float).reshape(3) for k, v in gt_joints.items()}
    if root_align:
        if root_joint not in pred:
            raise ValidationError(f"root joint {root_joint!r} not in the joint sets")
        pred_root, gt_root = pred[root_joint], gt[root_joint]
        pred = {k: v - pred_root for k, v in pred.items()}
        gt = {k: v - gt_root for k, v in gt.items()}
    return float(
        np.mean([np.linalg.norm(pred[k] - gt[k]) for k in sorted(pred)])
    )


# ── engine error statistics ─────────────────────────────────────────────────


@dataclass
class MatchedRecord:
    """One frame's engine output paired with oracle ground truth.

    Any section may be absent; statistics are computed over whatever is
    present. Ball and pelvis positions are world meters.
    """

    sport: str = "unknown"
    pred_camera: PinholeCamera | None = None
    gt_camera: PinholeCamera | None = None
    ball_pred: np.ndarray | None = None
    ball_gt: np.ndarray | None = None
    pelvis_pairs: list[tuple] = field(default_factory=list)
    joint_pairs: list[tuple] = field(default_factory=list)


METRIC_KEYS = (
    "e_fx_pct",
    "e_fy_pct",
    "ball_x_cm",
    "ball_y_cm",
    "ball_z_cm",
    "pelvis_cm",
    "mpjpe_cm",
)


@dataclass
class ErrorStats:
    """Mean/median/count per metric, globally and per sport."""

    overall: dict[str, dict]
    per_sport: dict[str, dict[str, dict]]
    records: int

    def to_dict(self) -> dict:
        return {
            "records": self.records,
            "overall": self.overall,
            "per_sport": self.per_sport,
        }


def _summarize(samples: dict[str, list[float]]) -> dict[str, dict]:
    out = {}
    for key in METRIC_KEYS:
        values = sorted(samples.get(key, []))  # fixed order: stats don't drift with input order
        if values:
            out[key] = {
                "mean": float(np.mean(values)),
                "median": float(np.median(values)),
                "count": len(values),
            }
    return out


def engine_error_report(records) -> ErrorStats:
    """Assemble error statistics from matched engine/oracle records."""
    records = list(records)
    if not records:
        raise ValidationError("no matched records")
    overall: dict[str, list[float]] = {}
    per_sport: dict[str, dict[str, list[float]]] = {}

    def push(sport, key, value):
        if value < 0:
            raise ValidationError(f"negative error sample for {key}")
        overall.setdefault(key, []).append(value)
        per_sport.setdefault(sport, {}).setdefault(key, []).append(value)

    for rec in records:
        if rec.pred_camera is not None and rec.gt_camera is not None:
            push(rec.sport, "e_fx_pct",
                 100.0 * abs(rec.pred_camera.fx - rec.gt_camera.fx) / rec.gt_camera.fx)
            push(rec.sport, "e_fy_pct",
                 100.0 * abs(rec.pred_camera.fy - rec.gt_camera.fy) / rec.gt_camera.fy)
        if rec.ball_pred is not None and rec.ball_gt is not None:
            diff = np.abs(np.asarray(rec.ball_pred, float) - np.asarray(rec.ball_gt, float))
            push(rec.sport, "ball_x_cm", 100.0 * float(diff[0]))
            push(rec.sport, "ball_y_cm", 100.0 * float(diff[1]))
            push(rec.sport, "ball_z_cm", 100.0 * float(diff[2]))
        for pred, gt in rec.pelvis_pairs:
            err = float(np.linalg.norm(np.asarray(pred, float) - np.asarray(gt, float)))
            push(rec.sport, "pelvis_cm", 100.0 * err)
        for pred_joints, gt_joints in rec.joint_pairs:
            push(rec.sport, "mpjpe_cm", 100.0 * mpjpe(pred_joints, gt_joints))

    return ErrorStats(
        overall=_summarize(overall),
        per_sport={sport: _summarize(vals) for sport, vals in sorted(per_sport.items())},
        records=len(records),
    )


_METRIC_DISPLAY = {
    "e_fx_pct": "e_fx %",
    "e_fy_pct": "e_fy %",
    "ball_x_cm": "ball X cm",
    "ball_y_cm": "ball Y cm",
    "ball_z_cm": "ball Z cm",
    "pelvis_cm": "pelvis cm",
    "mpjpe_cm": "MPJPE cm",
}


def format_error_table(stats: ErrorStats) -> str:
    """Fixed-width table of engine errors: sports as rows, metrics as columns.

    Each cell shows mean and median; "-" marks metrics with no samples.
    """
    cols = [k for k in METRIC_KEYS if k in stats.overall]
    widths = {k: max(len(_METRIC_DISPLAY[k]), 11) for k in cols}
    sports = list(stats.per_sport)
    name_w = max([len("Sport"), len("All")] + [len(s) for s in sports])

    def cell(summary, key):
        entry = summary.get(key)
        if entry is None:
            return "-".rjust(widths[key])
        return f"{entry['mean']:.1f} / {entry['median']:.1f}".rjust(widths[key])

    lines = [
        "Engine error vs oracle: mean / median per cell.",
        " | ".join(["Sport".ljust(name_w)] + [_METRIC_DISPLAY[k].rjust(widths[k]) for k in cols]),
    ]
    for sport in sports:
        lines.append(
            " | ".join([sport.ljust(name_w)] + [cell(stats.per_sport[sport], k) for k in cols])
        )
    lines.append(" | ".join(["All".ljust(name_w)] + [cell(stats.overall, k) for k in cols]))
    return "\n".join(lines)


# ── multi-view annotation files ─────────────────────────────────────────────


def load_multiview_annotations(path: str | Path) -> list[dict]:
    """Read a multi-view annotation file: frames of calibrated 2D keypoints.

    Line-delimited JSON; each line holds {"frame_id": ..., "views": [{"camera":
    <camera dict>, "keypoints": {name: [u, v]}}, ...]}.
    """
    frames = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            if "frame_id" not in raw or "views" not in raw:
                raise ValidationError(f"{path}:{line_no}: frame needs frame_id and views")
            views = []
            for view in raw["views"]:
                views.append(
                    {
                        "camera": PinholeCamera.from_dict(view["camera"]),
                        "keypoints": {
                            name: (float(px[0]), float(px[1]))
                            for name, px in view["keypoints"].items()
                        },
                    }
                )
            frames.append({"frame_id": raw["frame_id"], "views": views})
    return frames


def triangulate_frame(frame: dict) -> dict[str, TriangulationResult]:
    """Triangulate every keypoint observed in at least two of a frame's views."""
    by_name: dict[str, list] = {}
    for view in frame["views"]:
        for name, pixel in view["keypoints"].items():
            by_name.setdefault(name, []).append((view["camera"], pixel))
    return {
        name: triangulate(obs)
        for name, obs in sorted(by_name.items())
        if len(obs) >= 2
    }


def _opt_point(value):
    return None if value is None else np.asarray(value, dtype=float).reshape(3)


def _opt_camera(value):
    return None if value is None else PinholeCamera.from_dict(value)


def record_from_dict(d: dict) -> MatchedRecord:
    """Parse one matched engine-output/ground-truth record.

    Accepted fields (all optional except sport defaults): sport, pred_camera
    / gt_camera (camera dicts), ball_pred / ball_gt ([x, y, z]), pelvis_pairs
    ([[pred, gt], ...]), joint_pairs ([[{name: xyz}, {name: xyz}], ...]).
    """
    return MatchedRecord(
        sport=d.get("sport", "unknown"),
        pred_camera=_opt_camera(d.get("pred_camera")),
        gt_camera=_opt_camera(d.get("gt_camera")),
        ball_pred=_opt_point(d.get("ball_pred")),
        ball_gt=_opt_point(d.get("ball_gt")),
        pelvis_pairs=[
            (_opt_point(pred), _opt_point(gt)) for pred, gt in d.get("pelvis_pairs", [])
        ],
        joint_pairs=[
            (
                {k: _opt_point(v) for k, v in pred.items()},
                {k: _opt_point(v) for k, v in gt.items()},
            )
            for pred, gt in d.get("joint_pairs", [])
        ],
    )


def load_matched_records(path: str | Path) -> list[MatchedRecord]:
    """Read matched records from a line-delimited JSON file."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (KeyError, TypeError, ValueError) as e:
                raise ValidationError(f"{path}:{line_no}: bad record: {e}") from e
    return records


__all__ = [
    "PARALLEL_RAY_ANGLE_DEG",
    "ErrorStats",
    "MatchedRecord",
    "TriangulationResult",
    "ValidationError",
    "engine_error_report",
    "format_error_table",
    "load_matched_records",
    "load_multiview_annotations",
    "mpjpe",
    "record_from_dict",
    "triangulate",
    "triangulate_frame",
]
