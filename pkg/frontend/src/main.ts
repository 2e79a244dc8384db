/**
 * Browser wiring: canvas rendering, click capture, zoom lens, keyboard
 * frame stepping. All state lives in PanelSession; this file only draws
 * it and forwards events.
 */

import { HttpApi } from "./api.js";
import type { Pixel } from "./api.js";
import { fitTransform, mapPolyline, toDisplay, toImage, type DisplayTransform } from "./overlay.js";
import { PanelSession, type ClickLayer } from "./session.js";

const LENS_SIZE = 120;
const LENS_ZOOM = 4;

const apiBase =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8000";
const api = new HttpApi(apiBase);
const session = new PanelSession(api);

const canvas = document.getElementById("frame") as HTMLCanvasElement;
const lens = document.getElementById("lens") as HTMLCanvasElement;
const sceneSelect = document.getElementById("scene") as HTMLSelectElement;
const layerSelect = document.getElementById("layer") as HTMLSelectElement;
const promptEl = document.getElementById("prompt") as HTMLElement;
const statusEl = document.getElementById("status") as HTMLElement;
const readoutEl = document.getElementById("readout") as HTMLElement;
const warningEl = document.getElementById("warning") as HTMLElement;
const frameLabel = document.getElementById("frame-label") as HTMLElement;
const saveButton = document.getElementById("save") as HTMLButtonElement;
const fitButton = document.getElementById("fit") as HTMLButtonElement;
const restoreButton = document.getElementById("restore") as HTMLButtonElement;

const ctx = canvas.getContext("2d")!;
const lensCtx = lens.getContext("2d")!;
lens.width = LENS_SIZE;
lens.height = LENS_SIZE;

let image: HTMLImageElement | null = null;
let transform: DisplayTransform | null = null;
let cursorDisplay: Pixel | null = null;

function currentLayer(): ClickLayer {
  return layerSelect.value === "ball" ? "ball" : "court";
}

function sizeCanvas() {
  const rect = canvas.parentElement!.getBoundingClientRect();
  canvas.width = Math.max(1, Math.floor(rect.width));
  canvas.height = Math.max(1, Math.floor(rect.height));
  if (image) {
    transform = fitTransform(image.naturalWidth, image.naturalHeight, canvas.width, canvas.height);
  }
  draw();
}

function draw() {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!image || !transform) return;
  const t = transform;
  ctx.drawImage(
    image,
    t.offsetX,
    t.offsetY,
    image.naturalWidth * t.scale,
    image.naturalHeight * t.scale,
  );

  const overlays = session.overlays;

  ctx.lineWidth = 2;
  ctx.strokeStyle = "rgba(80, 220, 120, 0.9)";
  for (const pts of Object.values(overlays.courtBox)) {
    strokePolyline(mapPolyline(t, pts));
  }

  if (overlays.projectionLine) {
    ctx.strokeStyle = "rgba(255, 200, 60, 0.9)";
    ctx.setLineDash([6, 4]);
    strokePolyline(mapPolyline(t, overlays.projectionLine));
    ctx.setLineDash([]);
  }

  ctx.strokeStyle = "rgba(120, 170, 255, 0.9)";
  strokePolyline(mapPolyline(t, overlays.trajectory));

  ctx.fillStyle = "rgba(255, 90, 90, 0.95)";
  for (const p of overlays.liftedPoints) dot(toDisplay(t, p), 5);
  ctx.fillStyle = "rgba(200, 120, 255, 0.95)";
  for (const p of overlays.playerMarkers) dot(toDisplay(t, p), 4);

  ctx.fillStyle = "rgba(255, 255, 255, 0.95)";
  for (const c of session.pendingCourtClicks) dot(toDisplay(t, [c.u, c.v]), 3);
  if (session.pendingBallPixel) {
    ctx.fillStyle = "rgba(255, 200, 60, 0.95)";
    dot(toDisplay(t, session.pendingBallPixel), 4);
  }

  drawLens();
  updatePanel();
}

function strokePolyline(pts: Pixel[]) {
  if (pts.length < 2) return;
  ctx.beginPath();
  ctx.moveTo(pts[0][0], pts[0][1]);
  for (const p of pts.slice(1)) ctx.lineTo(p[0], p[1]);
  ctx.stroke();
}

function dot(p: Pixel, r: number) {
  ctx.beginPath();
  ctx.arc(p[0], p[1], r, 0, Math.PI * 2);
  ctx.fill();
}

/** Magnified patch around the cursor: cm-level clicks need sub-pixel aim. */
function drawLens() {
  lensCtx.clearRect(0, 0, LENS_SIZE, LENS_SIZE);
  if (!image || !transform || !cursorDisplay) {
    lens.style.display = "none";
    return;
  }
  lens.style.display = "block";
  const [ix, iy] = toImage(transform, cursorDisplay);
  const half = LENS_SIZE / (2 * LENS_ZOOM) / transform.scale;
  lensCtx.imageSmoothingEnabled = false;
  lensCtx.drawImage(
    image,
    ix - half,
    iy - half,
    half * 2,
    half * 2,
    0,
    0,
    LENS_SIZE,
    LENS_SIZE,
  );
  lensCtx.strokeStyle = "rgba(255,255,255,0.8)";
  lensCtx.beginPath();
  lensCtx.moveTo(LENS_SIZE / 2, 0);
  lensCtx.lineTo(LENS_SIZE / 2, LENS_SIZE);
  lensCtx.moveTo(0, LENS_SIZE / 2);
  lensCtx.lineTo(LENS_SIZE, LENS_SIZE / 2);
  lensCtx.stroke();
  lens.style.left = `${Math.min(cursorDisplay[0] + 24, canvas.width - LENS_SIZE - 4)}px`;
  lens.style.top = `${Math.max(cursorDisplay[1] - LENS_SIZE - 24, 4)}px`;
}

function updatePanel() {
  const r = session.readouts;
  const next = session.nextCourtKeypoint();
  promptEl.textContent =
    currentLayer() === "court"
      ? next
        ? `click ${next.replaceAll("_", " ")}`
        : "court clicks complete"
      : session.pendingBallPixel
        ? "click the ground contact on the guide line"
        : "click the ball";
  statusEl.textContent = r.status;
  frameLabel.textContent = session.frameId
    ? `frame ${session.frameId} (${session.cursor + 1}/${session.frameIds.length})` +
      (session.frameId && session.isManual(session.frameId) ? " [manual]" : "")
    : "no frame";
  const parts: string[] = [`document v${session.version}`];
  if (r.rmsePx !== null) parts.push(`rmse ${r.rmsePx.toFixed(3)} px (${r.calibrationMode})`);
  if (r.ballPosition) {
    parts.push(`ball (${r.ballPosition.map((x) => x.toFixed(2)).join(", ")}) m`);
  }
  if (r.residualM !== null) parts.push(`residual ${r.residualM.toFixed(3)} m`);
  readoutEl.textContent = parts.join("  |  ");
  warningEl.textContent = r.warning ?? (r.conflict ? "version conflict: reload the scene" : "");
  warningEl.style.display = warningEl.textContent ? "inline-block" : "none";
}

async function loadFrameImage() {
  if (!session.sceneId || session.frameId === null) return;
  const img = new Image();
  img.src = api.imageUrl(session.sceneId, session.frameId);
  await img.decode().catch(() => undefined);
  image = img;
  sizeCanvas();
}

async function selectScene(sceneId: string) {
  await session.loadScene(sceneId);
  await loadFrameImage();
  await session.restoreOverlays().catch(() => undefined);
  draw();
}

canvas.addEventListener("mousemove", (ev) => {
  const rect = canvas.getBoundingClientRect();
  cursorDisplay = [ev.clientX - rect.left, ev.clientY - rect.top];
  drawLens();
});

canvas.addEventListener("mouseleave", () => {
  cursorDisplay = null;
  drawLens();
});

canvas.addEventListener("click", async (ev) => {
  if (!transform) return;
  const rect = canvas.getBoundingClientRect();
  const imagePoint = toImage(transform, [ev.clientX - rect.left, ev.clientY - rect.top]);
  const outcome = await session.captureClick(currentLayer(), imagePoint);
  if (!outcome.accepted) {
    statusEl.textContent = outcome.cue;
    canvas.style.cursor = "not-allowed";
    setTimeout(() => (canvas.style.cursor = "crosshair"), 400);
  }
  draw();
});

window.addEventListener("keydown", async (ev) => {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement) return;
  if (ev.key === "ArrowRight" || ev.key === "ArrowLeft") {
    session.stepFrame(ev.key === "ArrowRight" ? 1 : -1);
    await loadFrameImage();
    await session.restoreOverlays().catch(() => undefined);
    draw();
  } else if (ev.key === "m") {
    session.toggleManual();
    draw();
  } else if (ev.key === "u") {
    session.undoPendingClick();
    draw();
  } else if (ev.key === "b") {
    layerSelect.value = layerSelect.value === "ball" ? "court" : "ball";
    draw();
  }
});

saveButton.addEventListener("click", async () => {
  await session.saveDocument();
  draw();
});

fitButton.addEventListener("click", async () => {
  const doc = session.doc;
  if (!doc) return;
  const annotated = session.frameIds.filter((f) => doc.frames[f]?.ball?.position);
  if (annotated.length < 3) {
    statusEl.textContent = "need three frames with lifted balls to fit";
    return;
  }
  await session
    .fitTrajectory([annotated[0], annotated[1], annotated[2]])
    .catch((err) => (statusEl.textContent = String(err)));
  draw();
});

restoreButton.addEventListener("click", async () => {
  await session.restoreOverlays().catch((err) => (statusEl.textContent = String(err)));
  draw();
});

sceneSelect.addEventListener("change", () => selectScene(sceneSelect.value));
window.addEventListener("resize", sizeCanvas);

async function init() {
  const scenes = await api.listScenes();
  sceneSelect.replaceChildren(
    ...scenes.map((s) => {
      const opt = document.createElement("option");
      opt.value = s;
      opt.textContent = s;
      return opt;
    }),
  );
  if (scenes.length) await selectScene(scenes[0]);
  canvas.style.cursor = "crosshair";
}

init().catch((err) => {
  statusEl.textContent = `cannot reach the service at ${apiBase}: ${err}`;
});
