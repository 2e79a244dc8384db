/**
 * End-to-end drive of the panel against the live annotation service:
 * seed a store, start the server, click the full annotation flow through
 * PanelSession with the real HTTP client, save, then prove the batch CLI
 * re-derives the same values from the saved document.
 */

import { spawn, execFile, type ChildProcess } from "node:child_process";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HttpApi, type NamedClick, type Pixel, type SceneDocument } from "../src/api.js";
import { fitTransform, toDisplay, toImage } from "../src/overlay.js";
import { PanelSession } from "../src/session.js";

const runFile = promisify(execFile);
const REPO = fileURLToPath(new URL("../..", import.meta.url));
const SCENE = "demo-tennis";
const FRAME = "000000";

let tmp: string;
let storeDir: string;
let imageDir: string;
let server: ChildProcess | null = null;
let serverLog = "";
let base = "";

// The seeded clicks double as the click script: they were projected from a
// known camera, so the panel should recover that camera and ball from them.
let script: NamedClick[] = [];
let ballPixel: Pixel = [0, 0];
let groundPixel: Pixel = [0, 0];

async function waitForHealth(url: string, child: ChildProcess): Promise<boolean> {
  for (let i = 0; i < 120; i++) {
    if (child.exitCode !== null) return false;
    try {
      const res = await fetch(`${url}/api/health`, { signal: AbortSignal.timeout(1000) });
      if (res.ok) return true;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  return false;
}

async function startServer(): Promise<void> {
  for (let attempt = 0; attempt < 4; attempt++) {
    const port = 8600 + Math.floor(Math.random() * 800);
    const child = spawn(
      "python3",
      [
        "-m",
        "courtscene.cli",
        "serve",
        "--store",
        storeDir,
        "--images",
        imageDir,
        "--host",
        "127.0.0.1",
        "--port",
        String(port),
      ],
      { cwd: REPO, stdio: ["ignore", "pipe", "pipe"] },
    );
    child.stdout?.on("data", (d) => (serverLog += d));
    child.stderr?.on("data", (d) => (serverLog += d));
    const url = `http://127.0.0.1:${port}`;
    if (await waitForHealth(url, child)) {
      server = child;
      base = url;
      return;
    }
    child.kill("SIGKILL");
  }
  throw new Error(`service never became healthy:\n${serverLog}`);
}

beforeAll(async () => {
  tmp = await mkdtemp(join(tmpdir(), "panel-e2e-"));
  storeDir = join(tmp, "store");
  imageDir = join(tmp, "images");
  await runFile(
    "python3",
    ["scripts/seed_demo_store.py", "--store", storeDir, "--images", imageDir],
    { cwd: REPO },
  );
  await startServer();

  // Capture the seeded clicks, then strip every annotation from the frame so
  // the panel has to produce them all from scratch.
  const api = new HttpApi(base);
  const seeded = await api.getScene(SCENE);
  const frame = seeded.frames[FRAME];
  script = frame.court_clicks!;
  ballPixel = frame.ball!.pixel!;
  groundPixel = frame.ball!.ground_pixel!;
  expect(script).toHaveLength(6);

  const stripped: SceneDocument = structuredClone(seeded);
  const bare = stripped.frames[FRAME];
  delete bare.court_clicks;
  delete bare.camera;
  delete bare.calibration;
  delete bare.ball;
  await api.putScene(SCENE, stripped, seeded.version);
});

afterAll(async () => {
  if (server && server.exitCode === null) {
    server.kill("SIGTERM");
    await new Promise((r) => {
      server!.once("exit", r);
      setTimeout(r, 5000);
    });
  }
  if (tmp) await rm(tmp, { recursive: true, force: true });
});

describe("live annotation flow", () => {
  it("four corner clicks then two net clicks solve the camera", async () => {
    const api = new HttpApi(base);
    const session = new PanelSession(api);
    await session.loadScene(SCENE);
    expect(session.frameId).toBe(FRAME);
    expect(session.frame!.camera).toBeUndefined();

    for (const [i, click] of script.entries()) {
      expect(session.nextCourtKeypoint()).toBe(click.name);
      const out = await session.captureClick("court", [click.u, click.v]);
      expect(out.accepted).toBe(true);
      if (i === 3) {
        // fourth corner already yields a camera and the court-box overlay
        expect(out.submitted).toBe("calibration");
        expect(session.frame!.calibration!.mode).toBe("simplified");
        expect(Object.keys(session.overlays.courtBox).length).toBeGreaterThan(0);
      }
    }

    expect(session.frame!.calibration!.mode).toBe("full");
    expect(session.frame!.camera!.fx).toBeGreaterThan(100);
    expect(session.readouts.rmsePx!).toBeLessThan(1.0);
    expect(session.pendingCourtClicks).toHaveLength(0);

    // ball click shows the guide segment, ground click lifts to 3D
    const first = await session.captureClick("ball", ballPixel);
    expect(first.accepted).toBe(true);
    expect(session.overlays.projectionLine).toHaveLength(2);
    const second = await session.captureClick("ball", groundPixel);
    expect(second.submitted).toBe("lift");

    // the seed placed this ball at (0.35 L, 0.6 W, 0.8) on a tennis court
    const pos = session.frame!.ball!.position!;
    expect(Math.abs(pos[0] - 0.35 * 23.77)).toBeLessThan(0.05);
    expect(Math.abs(pos[1] - 0.6 * 10.97)).toBeLessThan(0.05);
    expect(Math.abs(pos[2] - 0.8)).toBeLessThan(0.05);
    expect(session.frame!.ball!.inconsistent_click).toBe(false);
    expect(session.overlays.liftedPoints).toHaveLength(1);

    expect(await session.saveDocument()).toBe(true);
  });

  it("the batch CLI re-derives identical values from the saved document", async () => {
    const api = new HttpApi(base);
    const panelDoc = await api.getScene(SCENE);
    const panelFrame = panelDoc.frames[FRAME];
    expect(panelFrame.camera).toBeDefined();
    expect(panelFrame.calibration).toBeDefined();
    expect(panelFrame.ball?.position).toBeDefined();

    const cliArgs = ["--scene", SCENE, "--frame", FRAME, "--store", storeDir];
    await runFile(
      "python3",
      ["-m", "courtscene.cli", "calibrate", ...cliArgs, "--mode", "full"],
      { cwd: REPO },
    );
    await runFile("python3", ["-m", "courtscene.cli", "lift-ball", ...cliArgs], { cwd: REPO });

    const cliDoc = await api.getScene(SCENE);
    const cliFrame = cliDoc.frames[FRAME];
    expect(cliFrame.court_clicks).toEqual(panelFrame.court_clicks);
    expect(cliFrame.camera).toEqual(panelFrame.camera);
    expect(cliFrame.calibration).toEqual(panelFrame.calibration);
    expect(cliFrame.ball).toEqual(panelFrame.ball);
  });

  it("overlays are service payloads and survive display mapping within 0.5 px", async () => {
    const api = new HttpApi(base);
    const doc = await api.getScene(SCENE);
    const frame = doc.frames[FRAME];
    const direct = await api.calibrate({
      sport: doc.sport,
      image_size: frame.image_size!,
      clicks: frame.court_clicks!,
      mode: "full",
      net_weight: 2.0,
    });

    const session = new PanelSession(api);
    await session.loadScene(SCENE);
    await session.restoreOverlays();
    expect(session.overlays.courtBox).toEqual(direct.overlay.polylines);
    expect(session.overlays.liftedPoints).toHaveLength(1);

    const [w, h] = frame.image_size!;
    for (const [dw, dh] of [
      [1280, 720],
      [777, 505],
    ] as [number, number][]) {
      const t = fitTransform(w, h, dw, dh);
      for (const line of Object.values(session.overlays.courtBox)) {
        for (const p of line) {
          const back = toImage(t, toDisplay(t, p));
          expect(Math.hypot(back[0] - p[0], back[1] - p[1])).toBeLessThanOrEqual(0.5);
        }
      }
    }
  });

  it("a stale save surfaces the version conflict from the service", async () => {
    const api = new HttpApi(base);
    const session = new PanelSession(api);
    await session.loadScene(SCENE);
    session.doc!.meta.touched_by = "conflict-test";
    const staleBase = session.version;
    // someone else saves first
    const other = await api.getScene(SCENE);
    other.meta.touched_by = "other-tab";
    await api.putScene(SCENE, other, other.version);

    expect(await session.saveDocument()).toBe(false);
    expect(session.readouts.conflict).not.toBeNull();
    expect(session.readouts.conflict!.expected).toBe(staleBase);
    expect(session.readouts.conflict!.actual).toBe(staleBase + 1);
    // reloading then saving succeeds
    await session.loadScene(SCENE);
    session.doc!.meta.touched_by = "conflict-test";
    expect(await session.saveDocument()).toBe(true);
  });
});
