"""HTTP service backing the browser annotation panel.

The panel is a thin client: every geometric answer it draws (solved cameras,
court-box overlays, projection lines, lifted balls, realigned players,
fitted trajectories) comes from these endpoints, which in turn call the
geometry modules. Geometry endpoints are pure functions of their request
body; persistence happens only through the scene-document endpoints, which
go through the optimistic-concurrency store.

Endpoints
  GET  /api/health                                liveness probe
  GET  /api/scenes                                {"scenes": [id, ...]}
  GET  /api/scenes/{scene}                        annotation document
  PUT  /api/scenes/{scene}                        save document {document, base_version}
  GET  /api/scenes/{scene}/frames                 {"frames": [id, ...]}
  GET  /api/scenes/{scene}/frames/{frame}/image   frame image from the image root
  POST /api/geometry/calibrate                    clicks -> camera + overlay polylines
  POST /api/geometry/projection-line              ball pixel -> assistive segment
  POST /api/geometry/lift-ball                    ball + ground pixels -> 3D + residual
  POST /api/geometry/realign                      mesh + height label -> scale + summary
  POST /api/geometry/fit-trajectory               3 timed points -> segment + reprojections

Unknown scene/frame -> 404; malformed payload -> 422 with the field path;
stale document version -> 409; geometry that cannot be computed -> 400.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field, field_validator

from .calibration import (
    CalibrationError,
    Correspondence,
    PinholeCamera,
    PnPOptions,
    project_point,
    reproject,
    solve_pnp,
)
from .court import CourtSpec, court_spec
from .lifting import (
    LiftingError,
    PlayerMesh,
    facing_from_joints,
    fit_trajectory,
    lift_ball,
    mesh_to_world,
    projection_line,
    realign_mesh,
)
from .store import (
    SCHEMA_VERSION,
    AnnotationStore,
    SceneNotFoundError,
    StoreError,
    VersionConflictError,
    default_store_root,
)

Point2 = tuple[float, float]
Point3 = tuple[float, float, float]


# ── request payloads ─────────────────────────────────────────────────────────


class CameraModel(BaseModel):
    """Pinhole camera as stored in annotation documents."""

    fx: float
    fy: float
    cx: float
    cy: float
    R: list[list[float]]
    t: list[float]
    image_size: tuple[int, int]

    @field_validator("R")
    @classmethod
    def _r_is_3x3(cls, v):
        if len(v) != 3 or any(len(row) != 3 for row in v):
            raise ValueError("R must be a 3x3 row-major matrix")
        return v

    @field_validator("t")
    @classmethod
    def _t_is_3(cls, v):
        if len(v) != 3:
            raise ValueError("t must have 3 components")
        return v

    def to_camera(self) -> PinholeCamera:
        cam = PinholeCamera.from_dict(self.model_dump())
        cam.validate()
        return cam


class ClickModel(BaseModel):
    name: str
    u: float
    v: float


class CalibrateRequest(BaseModel):
    sport: str
    image_size: tuple[int, int]
    clicks: list[ClickModel]
    mode: Literal["full", "simplified"] = "full"
    net_weight: float = 2.0

    @field_validator("clicks")
    @classmethod
    def _at_least_four(cls, v):
        if len(v) < 4:
            raise ValueError(
                "calibration needs at least 4 court keypoint clicks "
                "(full-intrinsics mode additionally needs a net-top click)"
            )
        return v


class ProjectionLineRequest(BaseModel):
    camera: CameraModel
    ball_pixel: Point2
    sport: str | None = None
    surface_z: float | None = None
    depth_range: tuple[float, float] | None = None


class LiftBallRequest(BaseModel):
    camera: CameraModel
    ball_pixel: Point2
    ground_pixel: Point2
    sport: str | None = None
    surface_z: float | None = None
    click_tolerance_m: float = 0.05


def _surface_height(sport: str | None, surface_z: float | None) -> float:
    """Explicit height wins; else the sport's playing surface; else the floor."""
    if surface_z is not None:
        return surface_z
    if sport is not None:
        return court_spec(sport).surface_height_m
    return 0.0


class MeshModel(BaseModel):
    player_id: str = "p1"
    vertices: list[Point3] = Field(min_length=1)
    joints: dict[str, Point3]
    frame: Literal["camera", "world"] = "camera"
    facing: Point2 | None = None
    source: str = ""

    @field_validator("joints")
    @classmethod
    def _has_pelvis(cls, v):
        if "pelvis" not in v:
            raise ValueError("joints must include 'pelvis'")
        return v


class RealignRequest(BaseModel):
    camera: CameraModel
    mesh: MeshModel
    annotated_height: float


class TrajectorySample(BaseModel):
    t: float
    position: Point3


class FitTrajectoryRequest(BaseModel):
    samples: list[TrajectorySample]
    frame_rate: float = 30.0
    camera: CameraModel | None = None
    times: list[float] | None = None  # reprojection times; defaults to the sample times

    @field_validator("samples")
    @classmethod
    def _exactly_three(cls, v):
        if len(v) != 3:
            raise ValueError("trajectory fitting needs exactly 3 timed samples")
        return v


class SaveDocumentRequest(BaseModel):
    document: dict
    base_version: int


# ── overlay geometry ─────────────────────────────────────────────────────────


def court_overlay(camera: PinholeCamera, spec: CourtSpec) -> dict[str, list[Point2]]:
    """Project the court structure into the image as named polylines.

    Returns the closed boundary loop, each registry line, and the net band
    (posts up, across the tape). A polyline is omitted when any vertex falls
    behind the camera.
    """
    zs = spec.surface_height_m
    paths: dict[str, list] = {
        "boundary": [
            spec.keypoint("far_left_corner"),
            spec.keypoint("far_right_corner"),
            spec.keypoint("near_right_corner"),
            spec.keypoint("near_left_corner"),
            spec.keypoint("far_left_corner"),
        ],
        "net": [
            (spec.net_x, 0.0, zs),
            spec.keypoint("net_left_top"),
            spec.keypoint("net_center_top"),
            spec.keypoint("net_right_top"),
            (spec.net_x, spec.width_m, zs),
        ],
    }
    for name, (a, b) in spec.lines.items():
        paths[name] = [(a[0], a[1], zs), (b[0], b[1], zs)]

    overlay: dict[str, list[Point2]] = {}
    for name, pts in paths.items():
        pixels, behind = reproject(camera, pts)
        if behind.any():
            continue
        overlay[name] = [(float(u), float(v)) for u, v in pixels]
    return overlay


# ── app factory ──────────────────────────────────────────────────────────────


def create_app(
    store_root: str | Path | None = None,
    image_root: str | Path | None = None,
) -> FastAPI:
    """Build the service around an annotation store and a read-only image root."""
    store = AnnotationStore(store_root if store_root is not None else default_store_root())
    images = Path(image_root).resolve() if image_root is not None else None

    app = FastAPI(title="courtscene annotation service", version="1.0")
    # The browser panel is served from its own origin (file:// or a static
    # host), so the API must answer cross-origin requests.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(SceneNotFoundError)
    async def _scene_missing(request: Request, exc: SceneNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(VersionConflictError)
    async def _stale_write(request: Request, exc: VersionConflictError):
        return JSONResponse(
            status_code=409,
            content={
                "detail": str(exc),
                "expected": exc.expected,
                "actual": exc.actual,
            },
        )

    @app.exception_handler(StoreError)
    async def _store_error(request: Request, exc: StoreError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(CalibrationError)
    async def _calibration_error(request: Request, exc: CalibrationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(LiftingError)
    async def _lifting_error(request: Request, exc: LiftingError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _domain_value_error(request: Request, exc: ValueError):
        # Payload shape is already vetted by the models; a ValueError past
        # that point is a domain rejection (unknown sport, bad geometry).
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    # ── store ────────────────────────────────────────────────────────────

    @app.get("/api/health")
    def health():
        return {"status": "ok", "schema_version": SCHEMA_VERSION}

    @app.get("/api/scenes")
    def list_scenes():
        return {"scenes": store.list_scenes()}

    @app.get("/api/scenes/{scene_id}")
    def get_scene(scene_id: str):
        return store.load(scene_id)

    @app.put("/api/scenes/{scene_id}")
    def put_scene(scene_id: str, req: SaveDocumentRequest):
        return store.save(scene_id, req.document, base_version=req.base_version)

    @app.get("/api/scenes/{scene_id}/frames")
    def list_frames(scene_id: str):
        doc = store.load(scene_id)
        return {"frames": sorted(doc["frames"])}

    @app.get("/api/scenes/{scene_id}/frames/{frame_id}/image")
    def frame_image(scene_id: str, frame_id: str):
        doc = store.load(scene_id)
        frame = doc["frames"].get(frame_id)
        if frame is None:
            raise HTTPException(404, f"frame {frame_id!r} not in scene {scene_id!r}")
        if images is None:
            raise HTTPException(404, "service started without an image root")
        candidates = [frame["image"]] if frame.get("image") else [
            f"{scene_id}/{frame_id}{ext}" for ext in (".png", ".jpg", ".jpeg")
        ]
        for rel in candidates:
            path = (images / rel).resolve()
            if path.is_file() and path.is_relative_to(images):
                return FileResponse(path)
        raise HTTPException(404, f"no image for scene {scene_id!r} frame {frame_id!r}")

    # ── pure geometry ────────────────────────────────────────────────────

    @app.post("/api/geometry/calibrate")
    def calibrate(req: CalibrateRequest):
        spec = court_spec(req.sport)
        corr = []
        for i, click in enumerate(req.clicks):
            if click.name not in spec.keypoints:
                raise HTTPException(
                    400,
                    f"clicks[{i}].name {click.name!r} is not a {req.sport} court "
                    f"keypoint; known: {', '.join(sorted(spec.keypoints))}",
                )
            corr.append(Correspondence(click.name, (click.u, click.v), spec.keypoint(click.name)))
        options = PnPOptions(simplified=req.mode == "simplified", net_weight=req.net_weight)
        camera, report = solve_pnp(corr, req.image_size, options)
        return {
            "camera": camera.to_dict(),
            "rmse_px": report.rmse_px,
            "per_point_residuals_px": report.per_point_residuals_px,
            "converged": report.converged,
            "overlay": {"polylines": court_overlay(camera, spec)},
        }

    @app.post("/api/geometry/projection-line")
    def projection_line_endpoint(req: ProjectionLineRequest):
        line = projection_line(
            req.camera.to_camera(),
            req.ball_pixel,
            surface_z=_surface_height(req.sport, req.surface_z),
            depth_range=req.depth_range,
        )
        return {"kind": line.kind, "endpoints": [list(p) for p in line.endpoints]}

    @app.post("/api/geometry/lift-ball")
    def lift_ball_endpoint(req: LiftBallRequest):
        camera = req.camera.to_camera()
        result = lift_ball(
            camera,
            req.ball_pixel,
            req.ground_pixel,
            surface_z=_surface_height(req.sport, req.surface_z),
            click_tolerance_m=req.click_tolerance_m,
        )
        u, v = project_point(camera, result.point)
        return {
            "position": [float(x) for x in result.point],
            "residual_m": result.residual_m,
            "inconsistent_click": result.inconsistent_click,
            "overlay_pixel": [u, v],
        }

    @app.post("/api/geometry/realign")
    def realign(req: RealignRequest):
        camera = req.camera.to_camera()
        vertices = req.mesh.vertices
        joints = {k: v for k, v in req.mesh.joints.items()}
        if req.mesh.frame == "camera":
            vertices, joints = mesh_to_world(vertices, joints, camera)
        facing = req.mesh.facing
        if facing is None:
            facing = facing_from_joints(joints)  # needs both hips; 400 otherwise
        mesh = PlayerMesh(
            player_id=req.mesh.player_id,
            vertices=vertices,
            joints=joints,
            facing=facing,
            source=req.mesh.source,
        )
        realigned, scale = realign_mesh(camera, mesh, req.annotated_height)
        pelvis = realigned.pelvis
        response = {
            "scale": scale,
            "pelvis": [float(x) for x in pelvis],
            "lowest_point": [float(x) for x in realigned.lowest_point],
            "facing": [float(x) for x in realigned.facing],
        }
        try:
            response["pelvis_pixel"] = list(project_point(camera, pelvis))
        except CalibrationError:
            pass  # marker simply not drawable from this camera
        return response

    @app.post("/api/geometry/fit-trajectory")
    def fit_trajectory_endpoint(req: FitTrajectoryRequest):
        segment = fit_trajectory(
            [(s.t, s.position) for s in req.samples], frame_rate=req.frame_rate
        )
        reprojections = []
        if req.camera is not None:
            camera = req.camera.to_camera()
            times = req.times if req.times is not None else [s.t for s in req.samples]
            pixels, behind = reproject(camera, segment.sample(times))
            for t, (u, v), b in zip(times, pixels, behind):
                reprojections.append(
                    {
                        "t": t,
                        "pixel": None if b else [float(u), float(v)],
                    }
                )
        return {"segment": segment.to_dict(), "reprojections": reprojections}

    return app


__all__ = [
    "CalibrateRequest",
    "CameraModel",
    "ClickModel",
    "FitTrajectoryRequest",
    "LiftBallRequest",
    "MeshModel",
    "ProjectionLineRequest",
    "RealignRequest",
    "SaveDocumentRequest",
    "TrajectorySample",
    "court_overlay",
    "create_app",
]
