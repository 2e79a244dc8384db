/**
 * Panel state machine: one scene document open at a time, a frame cursor,
 * pending clicks, and per-frame overlay layers.
 *
 * Invariants: overlays hold only coordinates returned by the service, never
 * anything computed here; pending clicks clear on a successful submit; the
 * stored document mirrors what the batch CLI would write for the same
 * annotations, so either tool can replay the other's work.
 */

import type {
  AnnotationApi,
  CalibrationResult,
  FrameAnnotation,
  MeshPayload,
  NamedClick,
  Pixel,
  Point3,
  SceneDocument,
} from "./api.js";
import { ApiError } from "./api.js";
import { emptyOverlays, withinImage, type OverlayLayers } from "./overlay.js";

/** Fixed click order: corners anchor the world frame, net tops add height. */
export const KEYPOINT_CLICK_ORDER = [
  "far_left_corner",
  "far_right_corner",
  "near_right_corner",
  "near_left_corner",
  "net_left_top",
  "net_right_top",
] as const;

export const CORNER_COUNT = 4;
export const NET_WEIGHT = 2.0;

export type ClickLayer = "court" | "ball";

export interface ClickOutcome {
  accepted: boolean;
  cue: string;
  submitted?: "calibration" | "lift";
}

export interface Readouts {
  rmsePx: number | null;
  calibrationMode: string | null;
  ballPosition: Point3 | null;
  residualM: number | null;
  warning: string | null;
  conflict: { expected: number; actual: number } | null;
  status: string;
}

function freshReadouts(): Readouts {
  return {
    rmsePx: null,
    calibrationMode: null,
    ballPosition: null,
    residualM: null,
    warning: null,
    conflict: null,
    status: "no scene loaded",
  };
}

export class PanelSession {
  sceneId: string | null = null;
  frameIds: string[] = [];
  cursor = 0;
  doc: SceneDocument | null = null;
  pendingCourtClicks: NamedClick[] = [];
  pendingBallPixel: Pixel | null = null;
  readouts: Readouts = freshReadouts();
  defaultFrameRate = 30;

  private overlaysByFrame = new Map<string, OverlayLayers>();
  private manualFrames = new Set<string>();

  constructor(readonly api: AnnotationApi) {}

  get frameId(): string | null {
    return this.frameIds[this.cursor] ?? null;
  }

  get frame(): FrameAnnotation | null {
    if (!this.doc || this.frameId === null) return null;
    return this.doc.frames[this.frameId] ?? null;
  }

  get version(): number {
    return this.doc?.version ?? 0;
  }

  get overlays(): OverlayLayers {
    const id = this.frameId;
    if (id === null) return emptyOverlays();
    const layers = this.mutableOverlays(id);
    // Manual frames fall back to per-frame annotation: the fitted arc is hidden.
    if (this.manualFrames.has(id)) return { ...layers, trajectory: [] };
    return layers;
  }

  private mutableOverlays(frameId: string): OverlayLayers {
    let layers = this.overlaysByFrame.get(frameId);
    if (!layers) {
      layers = emptyOverlays();
      this.overlaysByFrame.set(frameId, layers);
    }
    return layers;
  }

  async loadScene(sceneId: string): Promise<void> {
    this.doc = await this.api.getScene(sceneId);
    this.frameIds = await this.api.listFrames(sceneId);
    this.sceneId = sceneId;
    this.cursor = 0;
    this.pendingCourtClicks = [];
    this.pendingBallPixel = null;
    this.overlaysByFrame.clear();
    this.manualFrames.clear();
    this.readouts = freshReadouts();
    this.readouts.status = `loaded ${sceneId} (version ${this.doc.version})`;
  }

  /** Step the frame cursor; in-progress clicks don't survive a frame change. */
  stepFrame(delta: number): string | null {
    const next = Math.min(Math.max(this.cursor + delta, 0), this.frameIds.length - 1);
    if (next !== this.cursor) {
      this.cursor = next;
      this.pendingCourtClicks = [];
      this.pendingBallPixel = null;
    }
    return this.frameId;
  }

  /** Name to prompt for next on the court layer, null once all six are in. */
  nextCourtKeypoint(): string | null {
    const i = this.courtProgress();
    return i < KEYPOINT_CLICK_ORDER.length ? KEYPOINT_CLICK_ORDER[i] : null;
  }

  private courtProgress(): number {
    const stored = this.frame?.court_clicks?.length ?? 0;
    // A complete frame restarts from scratch on the next court click.
    if (stored >= KEYPOINT_CLICK_ORDER.length) return this.pendingCourtClicks.length;
    return stored + this.pendingCourtClicks.length;
  }

  private collectCourtClicks(): NamedClick[] {
    const stored = this.frame?.court_clicks ?? [];
    if (stored.length >= KEYPOINT_CLICK_ORDER.length) return [...this.pendingCourtClicks];
    return [...stored, ...this.pendingCourtClicks];
  }

  undoPendingClick(): boolean {
    if (this.pendingBallPixel !== null) {
      this.pendingBallPixel = null;
      this.mutableOverlays(this.frameId!).projectionLine = null;
      return true;
    }
    return this.pendingCourtClicks.pop() !== undefined;
  }

  toggleManual(): boolean {
    const id = this.frameId;
    if (id === null) return false;
    if (this.manualFrames.has(id)) this.manualFrames.delete(id);
    else this.manualFrames.add(id);
    return this.manualFrames.has(id);
  }

  isManual(frameId: string): boolean {
    return this.manualFrames.has(frameId);
  }

  /**
   * Record a click in image pixel coordinates. The caller has already
   * mapped display coordinates through the active transform.
   */
  async captureClick(layer: ClickLayer, point: Pixel): Promise<ClickOutcome> {
    const frame = this.frame;
    if (!frame) return { accepted: false, cue: "no frame loaded" };
    const size = frame.image_size;
    if (!size) return { accepted: false, cue: "frame has no image size" };
    if (!withinImage(size[0], size[1], point)) {
      return { accepted: false, cue: "outside image" };
    }
    if (layer === "court") return this.captureCourtClick(point);
    return this.captureBallClick(point);
  }

  private async captureCourtClick(point: Pixel): Promise<ClickOutcome> {
    const name = this.nextCourtKeypoint();
    if (name === null) {
      // unreachable: progress resets once the set is complete
      return { accepted: false, cue: "court clicks complete" };
    }
    this.pendingCourtClicks.push({ name, u: point[0], v: point[1] });
    const progress = this.courtProgress();
    if (progress === CORNER_COUNT) {
      return this.submitCalibration("simplified");
    }
    if (progress === KEYPOINT_CLICK_ORDER.length) {
      return this.submitCalibration("full");
    }
    const next = this.nextCourtKeypoint();
    return { accepted: true, cue: `click ${next!.replaceAll("_", " ")}` };
  }

  private async submitCalibration(mode: "full" | "simplified"): Promise<ClickOutcome> {
    const frame = this.frame!;
    const clicks = this.collectCourtClicks();
    let result: CalibrationResult;
    try {
      result = await this.api.calibrate({
        sport: this.doc!.sport,
        image_size: frame.image_size!,
        clicks,
        mode,
        net_weight: NET_WEIGHT,
      });
    } catch (err) {
      if (err instanceof ApiError) {
        this.readouts.status = `calibration rejected: ${err.message}`;
        return { accepted: true, cue: this.readouts.status };
      }
      throw err;
    }
    frame.court_clicks = clicks;
    frame.camera = result.camera;
    frame.calibration = {
      rmse_px: result.rmse_px,
      mode,
      converged: result.converged,
      per_point_residuals_px: result.per_point_residuals_px,
    };
    this.pendingCourtClicks = [];
    this.mutableOverlays(this.frameId!).courtBox = result.overlay.polylines;
    this.readouts.rmsePx = result.rmse_px;
    this.readouts.calibrationMode = mode;
    this.readouts.status =
      mode === "simplified"
        ? "corners solved; click net left top, then net right top"
        : `calibrated, rmse ${result.rmse_px.toFixed(2)} px`;
    return { accepted: true, cue: this.readouts.status, submitted: "calibration" };
  }

  private async captureBallClick(point: Pixel): Promise<ClickOutcome> {
    const frame = this.frame!;
    if (!frame.camera) {
      return { accepted: false, cue: "calibrate the court before ball clicks" };
    }
    if (this.pendingBallPixel === null) {
      let line;
      try {
        line = await this.api.projectionLine({
          camera: frame.camera,
          ball_pixel: point,
          sport: this.doc!.sport,
        });
      } catch (err) {
        if (err instanceof ApiError) {
          return { accepted: false, cue: `no projection line: ${err.message}` };
        }
        throw err;
      }
      this.pendingBallPixel = point;
      this.mutableOverlays(this.frameId!).projectionLine = line.endpoints;
      return { accepted: true, cue: "click the ground contact on the guide line" };
    }

    const ballPixel = this.pendingBallPixel;
    let lifted;
    try {
      lifted = await this.api.liftBall({
        camera: frame.camera,
        ball_pixel: ballPixel,
        ground_pixel: point,
        sport: this.doc!.sport,
      });
    } catch (err) {
      if (err instanceof ApiError) {
        this.readouts.status = `lift rejected: ${err.message}`;
        return { accepted: true, cue: this.readouts.status };
      }
      throw err;
    }
    frame.ball = {
      ...(frame.ball ?? {}),
      pixel: ballPixel,
      ground_pixel: point,
      position: lifted.position,
      residual_m: lifted.residual_m,
      inconsistent_click: lifted.inconsistent_click,
    };
    this.pendingBallPixel = null;
    const layers = this.mutableOverlays(this.frameId!);
    layers.projectionLine = null;
    layers.liftedPoints = [lifted.overlay_pixel];
    this.readouts.ballPosition = lifted.position;
    this.readouts.residualM = lifted.residual_m;
    this.readouts.warning = lifted.inconsistent_click
      ? `ground click off the guide line (residual ${lifted.residual_m.toFixed(3)} m)`
      : null;
    this.readouts.status = `ball at (${lifted.position.map((x) => x.toFixed(2)).join(", ")}) m`;
    return { accepted: true, cue: this.readouts.status, submitted: "lift" };
  }

  /** Fit an arc through three annotated frames and store it like the CLI does. */
  async fitTrajectory(frameIds: [string, string, string]): Promise<void> {
    const doc = this.doc;
    if (!doc) throw new Error("no scene loaded");
    const samples: { t: number; position: Point3 }[] = [];
    for (const fid of frameIds) {
      const frame = doc.frames[fid];
      const position = frame?.ball?.position;
      if (!position) throw new Error(`frame ${fid} has no lifted ball`);
      samples.push({ t: this.frameTime(fid, frame), position });
    }
    const camera = doc.frames[this.frameId ?? frameIds[0]]?.camera;
    const result = await this.api.fitTrajectory({ samples, camera });

    const entry = {
      frames: [...frameIds],
      frame_rate: this.defaultFrameRate,
      segment: result.segment,
    };
    const trajectories = doc.trajectories as { frames?: string[] }[];
    const existing = trajectories.findIndex(
      (t) => JSON.stringify(t.frames) === JSON.stringify(entry.frames),
    );
    if (existing >= 0) trajectories[existing] = entry;
    else trajectories.push(entry);

    this.mutableOverlays(this.frameId ?? frameIds[0]).trajectory = result.reprojections
      .filter((r) => r.pixel !== null)
      .map((r) => r.pixel as Pixel);
    this.readouts.status = `trajectory fitted through ${frameIds.join(", ")}`;
  }

  private frameTime(frameId: string, frame: FrameAnnotation): number {
    if (typeof frame.time_s === "number") return frame.time_s;
    return Number.parseInt(frameId, 10) / this.defaultFrameRate;
  }

  /** Rescale a recovered mesh to an annotated contact height. */
  async realignPlayer(mesh: MeshPayload, annotatedHeight: number): Promise<void> {
    const frame = this.frame;
    if (!frame?.camera) throw new Error("calibrate the frame before realigning players");
    const result = await this.api.realign({
      camera: frame.camera,
      mesh,
      annotated_height: annotatedHeight,
    });
    frame.players = frame.players ?? {};
    frame.players[mesh.player_id] = {
      annotated_height: annotatedHeight,
      scale: result.scale,
      pelvis: result.pelvis,
      lowest_point: result.lowest_point,
      facing: result.facing,
      mesh_file: mesh.source ?? null,
    };
    if (result.pelvis_pixel) {
      const layers = this.mutableOverlays(this.frameId!);
      layers.playerMarkers = [...layers.playerMarkers, result.pelvis_pixel];
    }
    this.readouts.status = `player ${mesh.player_id} scaled by ${result.scale.toFixed(4)}`;
  }

  /**
   * Re-derive overlays for the current frame from its stored annotations by
   * replaying them through the service. Stored values are untouched when the
   * replay agrees (the geometry endpoints are deterministic).
   */
  async restoreOverlays(): Promise<void> {
    const frame = this.frame;
    if (!frame) return;
    const clicks = frame.court_clicks ?? [];
    if (clicks.length >= CORNER_COUNT && frame.image_size) {
      const mode = clicks.length >= KEYPOINT_CLICK_ORDER.length ? "full" : "simplified";
      const result = await this.api.calibrate({
        sport: this.doc!.sport,
        image_size: frame.image_size,
        clicks,
        mode,
        net_weight: NET_WEIGHT,
      });
      frame.camera = result.camera;
      this.mutableOverlays(this.frameId!).courtBox = result.overlay.polylines;
      this.readouts.rmsePx = result.rmse_px;
      this.readouts.calibrationMode = mode;
    }
    if (frame.camera && frame.ball?.pixel && frame.ball.ground_pixel) {
      const lifted = await this.api.liftBall({
        camera: frame.camera,
        ball_pixel: frame.ball.pixel,
        ground_pixel: frame.ball.ground_pixel,
        sport: this.doc!.sport,
      });
      this.mutableOverlays(this.frameId!).liftedPoints = [lifted.overlay_pixel];
      this.readouts.ballPosition = lifted.position;
      this.readouts.residualM = lifted.residual_m;
    }
  }

  /** Push the document; a stale version surfaces as a conflict readout. */
  async saveDocument(): Promise<boolean> {
    if (!this.doc || !this.sceneId) throw new Error("no scene loaded");
    try {
      this.doc = await this.api.putScene(this.sceneId, this.doc, this.doc.version);
    } catch (err) {
      if (err instanceof ApiError && err.isVersionConflict) {
        this.readouts.conflict = {
          expected: err.expected ?? -1,
          actual: err.actual ?? -1,
        };
        this.readouts.status = "save conflict: the scene changed elsewhere; reload to continue";
        return false;
      }
      throw err;
    }
    this.readouts.conflict = null;
    this.readouts.status = `saved version ${this.doc.version}`;
    return true;
  }
}
