"""Command-line front end for the scene toolkit.

Subcommands wrap one module operation each over files, so every value in an
annotation store can be reproduced by replaying the stored inputs:

  calibrate       solve a camera from a frame's stored court clicks
  lift-ball       lift a frame's stored ball/ground clicks to 3D
  fit-trajectory  fit a constant-acceleration arc through 3 lifted balls
  realign         rescale a recovered player mesh to an annotated height
  gen-qa          sample a question-answer dataset from a scene file
  eval            score a prediction file against a QA file
  report          render an engine error report from matched records
  validate        triangulate a multi-view annotation file
  serve           run the annotation HTTP service

Exit status: 0 success, 1 operation failure (diagnostic on stderr), 2 usage
error. The annotation store root comes from --store, else the
COURTSCENE_STORE environment variable, else ./annotations.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import CalibrationError, Correspondence, PinholeCamera, PnPOptions, solve_pnp
from .court import CourtSpec, court_spec, load_court_config, resolve_court_spec
from .lifting import (
    LiftingError,
    PlayerMesh,
    TrajectorySegment,
    facing_from_joints,
    fit_trajectory,
    lift_ball,
    mesh_to_world,
    realign_mesh,
)
from .evaluation import (
    EvaluationError,
    aggregate,
    ambiguity_curve,
    format_report_table,
    predict_from_text,
)
from .qa import (
    GenerationError,
    generate_dataset,
    load_manifest,
    read_items_jsonl,
    split_scenes,
    write_items_jsonl,
)
from .scene import SceneValidationError, read_scenes_jsonl
from .store import AnnotationStore, StoreError, default_store_root
from .validation import (
    ValidationError,
    engine_error_report,
    format_error_table,
    load_matched_records,
    load_multiview_annotations,
    triangulate_frame,
)


class CommandError(RuntimeError):
    """Operation-level failure; maps to exit status 1."""


def _store(args) -> AnnotationStore:
    return AnnotationStore(args.store if args.store else default_store_root())


def _load_frame(store: AnnotationStore, scene_id: str, frame_id: str) -> tuple[dict, dict]:
    doc = store.load(scene_id)
    frame = doc["frames"].get(frame_id)
    if frame is None:
        known = ", ".join(sorted(doc["frames"])) or "none"
        raise CommandError(f"frame {frame_id!r} not in scene {scene_id!r} (frames: {known})")
    return doc, frame


def _scene_court(doc: dict, court_config: str | None) -> CourtSpec:
    if court_config:
        spec = load_court_config(court_config)
        if spec.sport != doc["sport"]:
            raise CommandError(
                f"court config is for {spec.sport!r}, scene is {doc['sport']!r}"
            )
        return spec
    return court_spec(doc["sport"])


def _frame_camera(frame: dict, scene_id: str, frame_id: str) -> PinholeCamera:
    cam = frame.get("camera")
    if cam is None:
        raise CommandError(
            f"scene {scene_id!r} frame {frame_id!r} has no solved camera; "
            "run `courtscene calibrate` first"
        )
    return PinholeCamera.from_dict(cam)


def _write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ── subcommands ──────────────────────────────────────────────────────────────


def cmd_calibrate(args) -> int:
    store = _store(args)
    doc, frame = _load_frame(store, args.scene, args.frame)
    clicks = frame.get("court_clicks")
    if not clicks:
        raise CommandError(f"frame {args.frame!r} has no stored court clicks")
    image_size = frame.get("image_size")
    if not image_size:
        raise CommandError(f"frame {args.frame!r} has no image_size")
    spec = _scene_court(doc, args.court_config)

    corr = []
    for click in clicks:
        name = click["name"]
        if name not in spec.keypoints:
            raise CommandError(
                f"click {name!r} is not a {spec.sport} court keypoint; "
                f"known: {', '.join(sorted(spec.keypoints))}"
            )
        corr.append(Correspondence(name, (click["u"], click["v"]), spec.keypoint(name)))
    options = PnPOptions(simplified=args.mode == "simplified", net_weight=args.net_weight)
    camera, report = solve_pnp(corr, tuple(image_size), options)

    frame["camera"] = camera.to_dict()
    frame["calibration"] = {
        "rmse_px": report.rmse_px,
        "mode": args.mode,
        "converged": report.converged,
        "per_point_residuals_px": report.per_point_residuals_px,
    }
    store.save(args.scene, doc, base_version=doc["version"])
    print(
        f"scene {args.scene} frame {args.frame}: "
        f"fx={camera.fx:.2f} fy={camera.fy:.2f} rmse_px={report.rmse_px:.4f}"
    )
    return 0


def cmd_lift_ball(args) -> int:
    store = _store(args)
    doc, frame = _load_frame(store, args.scene, args.frame)
    camera = _frame_camera(frame, args.scene, args.frame)
    ball = frame.get("ball")
    if not ball or "pixel" not in ball or "ground_pixel" not in ball:
        raise CommandError(
            f"frame {args.frame!r} needs ball.pixel and ball.ground_pixel clicks"
        )
    spec = _scene_court(doc, args.court_config)
    result = lift_ball(
        camera,
        ball["pixel"],
        ball["ground_pixel"],
        surface_z=spec.surface_height_m,
        click_tolerance_m=args.click_tolerance,
    )
    ball["position"] = [float(x) for x in result.point]
    ball["residual_m"] = result.residual_m
    ball["inconsistent_click"] = result.inconsistent_click
    store.save(args.scene, doc, base_version=doc["version"])
    x, y, z = result.point
    flag = "  (inconsistent click)" if result.inconsistent_click else ""
    print(
        f"scene {args.scene} frame {args.frame}: ball at "
        f"({x:.3f}, {y:.3f}, {z:.3f}) m, residual {result.residual_m:.4f} m{flag}"
    )
    return 0


def _frame_time(frame: dict, frame_id: str, frame_rate: float) -> float:
    if "time_s" in frame:
        return float(frame["time_s"])
    try:
        return int(frame_id) / frame_rate
    except ValueError:
        raise CommandError(
            f"frame {frame_id!r} has no time_s and its id is not a frame number"
        ) from None


def cmd_fit_trajectory(args) -> int:
    store = _store(args)
    doc = store.load(args.scene)
    samples = []
    for frame_id in args.frames:
        frame = doc["frames"].get(frame_id)
        if frame is None:
            raise CommandError(f"frame {frame_id!r} not in scene {args.scene!r}")
        position = (frame.get("ball") or {}).get("position")
        if position is None:
            raise CommandError(
                f"frame {frame_id!r} has no lifted ball position; run `courtscene lift-ball`"
            )
        samples.append((_frame_time(frame, frame_id, args.frame_rate), position))
    segment = fit_trajectory(samples, frame_rate=args.frame_rate)

    entry = {
        "frames": list(args.frames),
        "frame_rate": args.frame_rate,
        "segment": segment.to_dict(),
    }
    trajectories = [t for t in doc["trajectories"] if t.get("frames") != entry["frames"]]
    trajectories.append(entry)
    doc["trajectories"] = trajectories
    store.save(args.scene, doc, base_version=doc["version"])
    p0, v0, a = segment.p0, segment.v0, segment.a
    print(
        f"scene {args.scene} frames {','.join(args.frames)}: "
        f"p0=({p0[0]:.3f}, {p0[1]:.3f}, {p0[2]:.3f}) "
        f"v0=({v0[0]:.3f}, {v0[1]:.3f}, {v0[2]:.3f}) "
        f"a=({a[0]:.3f}, {a[1]:.3f}, {a[2]:.3f})"
    )
    return 0


def _mesh_from_file(path: str, camera: PinholeCamera) -> PlayerMesh:
    """Read a recovered-mesh file and express it in world coordinates.

    Expected JSON: {"player_id", "vertices": [[x,y,z],...], "joints":
    {name: [x,y,z]}, "frame": "camera"|"world", "facing": [x,y]?, "source"?}.
    Camera-frame inputs (the recovery tool's native output) are converted
    with the scene camera.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CommandError(f"cannot read mesh file {path}: {e}") from e
    vertices = np.asarray(raw.get("vertices", []), dtype=float).reshape(-1, 3)
    joints = {k: np.asarray(v, dtype=float) for k, v in raw.get("joints", {}).items()}
    if raw.get("frame", "camera") == "camera":
        vertices, joints = mesh_to_world(vertices, joints, camera)
    facing = raw.get("facing")
    if facing is None:
        facing = facing_from_joints(joints)
    return PlayerMesh(
        player_id=str(raw.get("player_id", "p1")),
        vertices=vertices,
        joints=joints,
        facing=facing,
        source=str(raw.get("source", path)),
    )


def cmd_realign(args) -> int:
    store = _store(args)
    doc, frame = _load_frame(store, args.scene, args.frame)
    camera = _frame_camera(frame, args.scene, args.frame)
    mesh = _mesh_from_file(args.mesh, camera)
    realigned, scale = realign_mesh(camera, mesh, args.height)

    players = frame.setdefault("players", {})
    players[realigned.player_id] = {
        "annotated_height": args.height,
        "scale": scale,
        "pelvis": [float(x) for x in realigned.pelvis],
        "lowest_point": [float(x) for x in realigned.lowest_point],
        "facing": [float(x) for x in realigned.facing],
        "mesh_file": str(args.mesh),
    }
    store.save(args.scene, doc, base_version=doc["version"])
    if args.out:
        _write_json(
            args.out,
            {
                "player_id": realigned.player_id,
                "frame": "world",
                "scale": scale,
                "vertices": realigned.vertices.tolist(),
                "joints": {k: v.tolist() for k, v in realigned.joints.items()},
                "facing": realigned.facing.tolist(),
                "source": realigned.source,
            },
        )
    px, py, pz = realigned.pelvis
    print(
        f"scene {args.scene} frame {args.frame} player {realigned.player_id}: "
        f"scale={scale:.4f} pelvis=({px:.3f}, {py:.3f}, {pz:.3f})"
    )
    return 0


def cmd_gen_qa(args) -> int:
    try:
        scenes = read_scenes_jsonl(args.scenes)
    except (OSError, SceneValidationError, json.JSONDecodeError) as e:
        raise CommandError(f"cannot read scenes file {args.scenes}: {e}") from e

    targets = None
    if args.targets:
        targets = json.loads(Path(args.targets).read_text(encoding="utf-8"))
    manifest = load_manifest(args.templates) if args.templates else None
    overrides = {}
    for path in args.court_config or []:
        spec = load_court_config(path)
        overrides[spec.sport] = spec
    split = None
    if args.split:
        split = split_scenes(
            [s.scene_id for s in scenes], bench_fraction=args.bench_fraction, seed=args.seed
        )

    items, run_manifest = generate_dataset(
        scenes,
        targets=targets,
        seed=args.seed,
        manifest=manifest,
        court_overrides=overrides or None,
        keep_ambiguous=args.keep_ambiguous,
        split=split,
    )
    write_items_jsonl(items, args.out)
    manifest_out = args.manifest_out or f"{args.out}.manifest.json"
    _write_json(manifest_out, run_manifest)

    shortfalls = run_manifest.get("shortfalls") or {}
    print(f"wrote {len(items)} items to {args.out} (manifest: {manifest_out})")
    for subcategory, missing in sorted(shortfalls.items()):
        print(f"  shortfall {subcategory}: {missing} under target", file=sys.stderr)
    return 0


def _read_predictions(path: str) -> dict[str, str]:
    """Prediction file: one JSON object per line, {"item_id": ..., "text": ...}."""
    preds: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                preds[str(raw["item_id"])] = str(raw["text"])
            except (KeyError, TypeError, json.JSONDecodeError) as e:
                raise CommandError(f"{path}:{line_no}: bad prediction line: {e}") from e
    return preds


def cmd_eval(args) -> int:
    items = read_items_jsonl(args.qa)
    if not items:
        raise CommandError(f"no items in {args.qa}")
    texts = _read_predictions(args.pred)
    predictions = [
        predict_from_text(item, texts[item.id], mode=args.mode)
        for item in items
        if item.id in texts
    ]
    report = aggregate(items, predictions)
    print(format_report_table(report))
    if args.out:
        _write_json(args.out, report.to_dict())
    if args.curve_out:
        curve = ambiguity_curve(items, predictions)
        _write_json(args.curve_out, {"curve": curve})
    return 0


def cmd_report(args) -> int:
    records = load_matched_records(args.records)
    if not records:
        raise CommandError(f"no records in {args.records}")
    stats = engine_error_report(records)
    table = format_error_table(stats)
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n", encoding="utf-8")
    if args.json_out:
        _write_json(args.json_out, stats.to_dict())
    return 0


def cmd_validate(args) -> int:
    frames = load_multiview_annotations(args.multiview)
    if not frames:
        raise CommandError(f"no frames in {args.multiview}")
    total = 0
    flagged = 0
    residuals = []
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else None
    try:
        for frame in frames:
            results = triangulate_frame(frame)
            row = {"frame_id": frame["frame_id"], "points": {}}
            for name, res in results.items():
                total += 1
                flagged += int(res.ill_conditioned)
                residuals.append(res.residual_m)
                row["points"][name] = {
                    "point": [float(x) for x in res.point],
                    "residual_m": res.residual_m,
                    "ill_conditioned": res.ill_conditioned,
                }
            if out_fh:
                out_fh.write(json.dumps(row, sort_keys=True) + "\n")
    finally:
        if out_fh:
            out_fh.close()
    if total == 0:
        raise CommandError("no keypoint seen by at least two views; nothing to triangulate")
    print(
        f"{len(frames)} frames, {total} triangulated points: "
        f"mean residual {float(np.mean(residuals)):.6f} m, "
        f"max {float(np.max(residuals)):.6f} m, {flagged} ill-conditioned"
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        store_root=args.store if args.store else default_store_root(),
        image_root=args.images,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level)
    return 0


# ── parser ───────────────────────────────────────────────────────────────────


def _add_store_option(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--store",
        default=None,
        help="annotation store root (default: $COURTSCENE_STORE or ./annotations)",
    )


def _add_court_config_option(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--court-config",
        default=None,
        help="court dimension config file overriding the built-in registry",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="courtscene",
        description="Metric scene reconstruction, QA generation, and scoring for net sports.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("calibrate", help="solve a camera from a frame's stored court clicks")
    p.add_argument("--scene", required=True, help="scene id in the store")
    p.add_argument("--frame", required=True, help="frame id within the scene")
    p.add_argument(
        "--mode",
        choices=("full", "simplified"),
        default="full",
        help="full: fx/fy free, principal point centered; simplified: single focal",
    )
    p.add_argument(
        "--net-weight", type=float, default=2.0, help="residual weight for net-top clicks"
    )
    _add_store_option(p)
    _add_court_config_option(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("lift-ball", help="lift a frame's stored ball clicks to 3D")
    p.add_argument("--scene", required=True, help="scene id in the store")
    p.add_argument("--frame", required=True, help="frame id within the scene")
    p.add_argument(
        "--click-tolerance",
        type=float,
        default=0.05,
        help="planar residual (m) above which the ground click is flagged",
    )
    _add_store_option(p)
    _add_court_config_option(p)
    p.set_defaults(func=cmd_lift_ball)

    p = sub.add_parser(
        "fit-trajectory", help="fit a constant-acceleration arc through 3 lifted balls"
    )
    p.add_argument("--scene", required=True, help="scene id in the store")
    p.add_argument(
        "--frames", nargs=3, required=True, metavar="FRAME", help="exactly three frame ids"
    )
    p.add_argument(
        "--frame-rate",
        type=float,
        default=30.0,
        help="frames per second; times default to frame-number / rate",
    )
    _add_store_option(p)
    p.set_defaults(func=cmd_fit_trajectory)

    p = sub.add_parser("realign", help="rescale a recovered player mesh to an annotated height")
    p.add_argument("--scene", required=True, help="scene id in the store")
    p.add_argument("--frame", required=True, help="frame id within the scene")
    p.add_argument("--mesh", required=True, help="mesh JSON file (camera- or world-frame)")
    p.add_argument(
        "--height",
        type=float,
        required=True,
        help="annotated height (m) of the player's lowest vertex",
    )
    p.add_argument("--out", default=None, help="write the realigned world-frame mesh here")
    _add_store_option(p)
    p.set_defaults(func=cmd_realign)

    p = sub.add_parser("gen-qa", help="sample a question-answer dataset from a scene file")
    p.add_argument("--scenes", required=True, help="scene state file (JSON lines)")
    p.add_argument("--out", required=True, help="output QA file (JSON lines)")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument(
        "--targets", default=None, help="JSON file of per-subcategory item counts"
    )
    p.add_argument("--templates", default=None, help="template manifest overriding the built-in")
    p.add_argument(
        "--court-config",
        action="append",
        default=None,
        metavar="FILE",
        help="court config override; repeatable, one per sport",
    )
    p.add_argument(
        "--keep-ambiguous",
        action="store_true",
        help="keep items whose answer margin is under the sport threshold",
    )
    p.add_argument(
        "--split", action="store_true", help="hold out a scene-level benchmark split"
    )
    p.add_argument(
        "--bench-fraction", type=float, default=0.2, help="benchmark share of scenes"
    )
    p.add_argument(
        "--manifest-out", default=None, help="run manifest path (default: OUT.manifest.json)"
    )
    p.set_defaults(func=cmd_gen_qa)

    p = sub.add_parser("eval", help="score a prediction file against a QA file")
    p.add_argument("--qa", required=True, help="QA file (JSON lines)")
    p.add_argument(
        "--pred",
        required=True,
        help='prediction file: JSON lines of {"item_id": ..., "text": ...}',
    )
    p.add_argument(
        "--mode",
        choices=("auto", "strict", "lenient"),
        default="auto",
        help="auto: strict format first, else last well-formed value; or force one parser",
    )
    p.add_argument("--out", default=None, help="write the report as JSON here")
    p.add_argument(
        "--curve-out", default=None, help="write the ambiguity-ratio accuracy curve here"
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render an engine error report from matched records")
    p.add_argument(
        "--records",
        required=True,
        help="JSON lines of engine outputs matched to ground truth",
    )
    p.add_argument("--out", default=None, help="write the fixed-width table here")
    p.add_argument("--json-out", default=None, help="write the raw statistics as JSON here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="triangulate a multi-view annotation file")
    p.add_argument(
        "--multiview", required=True, help="multi-view annotation file (JSON lines)"
    )
    p.add_argument("--out", default=None, help="write per-frame triangulated points here")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=8000, help="bind port")
    p.add_argument("--images", default=None, help="read-only image root")
    p.add_argument(
        "--log-level", default="info", help="uvicorn log level (debug, info, warning, ...)"
    )
    _add_store_option(p)
    p.set_defaults(func=cmd_serve)

    return parser


_OPERATION_ERRORS = (
    CommandError,
    StoreError,
    CalibrationError,
    LiftingError,
    GenerationError,
    EvaluationError,
    ValidationError,
    SceneValidationError,
    OSError,
    ValueError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _OPERATION_ERRORS as e:
        print(f"courtscene {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
