/**
 * Typed client for the annotation service HTTP API.
 *
 * The panel computes no geometry of its own; every camera, lifted point,
 * overlay polyline, and fitted arc comes back from these endpoints.
 */

export type Pixel = [number, number];
export type Point3 = [number, number, number];

export interface CameraDict {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  R: number[][];
  t: number[];
  image_size: [number, number];
}

export interface NamedClick {
  name: string;
  u: number;
  v: number;
}

export interface CalibrationResult {
  camera: CameraDict;
  rmse_px: number;
  per_point_residuals_px: Record<string, number>;
  converged: boolean;
  overlay: { polylines: Record<string, Pixel[]> };
}

export interface ProjectionLineResult {
  kind: "segment" | "point";
  endpoints: Pixel[];
}

export interface LiftBallResult {
  position: Point3;
  residual_m: number;
  inconsistent_click: boolean;
  overlay_pixel: Pixel;
}

export interface TrajectorySegment {
  p0: Point3;
  v0: Point3;
  a: Point3;
  t_start: number;
  t_end: number;
}

export interface TrajectoryResult {
  segment: TrajectorySegment;
  reprojections: { t: number; pixel: Pixel | null }[];
}

export interface MeshPayload {
  player_id: string;
  vertices: Point3[];
  joints: Record<string, Point3>;
  frame: "camera" | "world";
  facing?: [number, number] | null;
  source?: string;
}

export interface RealignResult {
  scale: number;
  pelvis: Point3;
  lowest_point: Point3;
  facing: [number, number];
  pelvis_pixel?: Pixel;
}

export interface CalibrationSummary {
  rmse_px: number;
  mode: string;
  converged: boolean;
  per_point_residuals_px: Record<string, number>;
}

export interface BallAnnotation {
  pixel?: Pixel;
  ground_pixel?: Pixel;
  position?: Point3;
  residual_m?: number;
  inconsistent_click?: boolean;
}

/** One frame of a stored annotation document. Unknown fields pass through. */
export interface FrameAnnotation {
  image?: string;
  image_size?: [number, number];
  time_s?: number;
  court_clicks?: NamedClick[];
  camera?: CameraDict;
  calibration?: CalibrationSummary;
  ball?: BallAnnotation;
  players?: Record<string, unknown>;
  [key: string]: unknown;
}

export interface SceneDocument {
  schema_version: number;
  version: number;
  scene_id: string;
  sport: string;
  meta: Record<string, unknown>;
  frames: Record<string, FrameAnnotation>;
  trajectories: unknown[];
  [key: string]: unknown;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
    readonly expected?: number,
    readonly actual?: number,
  ) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
  }

  get isVersionConflict(): boolean {
    return this.status === 409;
  }
}

export interface CalibrateRequest {
  sport: string;
  image_size: [number, number];
  clicks: NamedClick[];
  mode: "full" | "simplified";
  net_weight?: number;
}

export interface LiftBallRequest {
  camera: CameraDict;
  ball_pixel: Pixel;
  ground_pixel: Pixel;
  sport?: string;
  click_tolerance_m?: number;
}

export interface ProjectionLineRequest {
  camera: CameraDict;
  ball_pixel: Pixel;
  sport?: string;
}

export interface RealignRequest {
  camera: CameraDict;
  mesh: MeshPayload;
  annotated_height: number;
}

export interface FitTrajectoryRequest {
  samples: { t: number; position: Point3 }[];
  camera?: CameraDict;
}

/** The service surface the session depends on; tests substitute fakes. */
export interface AnnotationApi {
  health(): Promise<{ status: string; schema_version: number }>;
  listScenes(): Promise<string[]>;
  getScene(sceneId: string): Promise<SceneDocument>;
  putScene(sceneId: string, document: SceneDocument, baseVersion: number): Promise<SceneDocument>;
  listFrames(sceneId: string): Promise<string[]>;
  imageUrl(sceneId: string, frameId: string): string;
  calibrate(req: CalibrateRequest): Promise<CalibrationResult>;
  projectionLine(req: ProjectionLineRequest): Promise<ProjectionLineResult>;
  liftBall(req: LiftBallRequest): Promise<LiftBallResult>;
  realign(req: RealignRequest): Promise<RealignResult>;
  fitTrajectory(req: FitTrajectoryRequest): Promise<TrajectoryResult>;
}

export class HttpApi implements AnnotationApi {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await res.text();
    let data: unknown = null;
    if (text) {
      try {
        data = JSON.parse(text);
      } catch {
        data = text;
      }
    }
    if (!res.ok) {
      const payload = (data ?? {}) as Record<string, unknown>;
      throw new ApiError(
        res.status,
        payload.detail ?? data,
        payload.expected as number | undefined,
        payload.actual as number | undefined,
      );
    }
    return data as T;
  }

  health() {
    return this.request<{ status: string; schema_version: number }>("GET", "/api/health");
  }

  async listScenes(): Promise<string[]> {
    const body = await this.request<{ scenes: string[] }>("GET", "/api/scenes");
    return body.scenes;
  }

  getScene(sceneId: string) {
    return this.request<SceneDocument>("GET", `/api/scenes/${encodeURIComponent(sceneId)}`);
  }

  putScene(sceneId: string, document: SceneDocument, baseVersion: number) {
    return this.request<SceneDocument>("PUT", `/api/scenes/${encodeURIComponent(sceneId)}`, {
      document,
      base_version: baseVersion,
    });
  }

  async listFrames(sceneId: string): Promise<string[]> {
    const body = await this.request<{ frames: string[] }>(
      "GET",
      `/api/scenes/${encodeURIComponent(sceneId)}/frames`,
    );
    return body.frames;
  }

  imageUrl(sceneId: string, frameId: string): string {
    return (
      `${this.baseUrl}/api/scenes/${encodeURIComponent(sceneId)}` +
      `/frames/${encodeURIComponent(frameId)}/image`
    );
  }

  calibrate(req: CalibrateRequest) {
    return this.request<CalibrationResult>("POST", "/api/geometry/calibrate", req);
  }

  projectionLine(req: ProjectionLineRequest) {
    return this.request<ProjectionLineResult>("POST", "/api/geometry/projection-line", req);
  }

  liftBall(req: LiftBallRequest) {
    return this.request<LiftBallResult>("POST", "/api/geometry/lift-ball", req);
  }

  realign(req: RealignRequest) {
    return this.request<RealignResult>("POST", "/api/geometry/realign", req);
  }

  fitTrajectory(req: FitTrajectoryRequest) {
    return this.request<TrajectoryResult>("POST", "/api/geometry/fit-trajectory", req);
  }
}
