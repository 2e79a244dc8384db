/**
 * Mapping between image pixel coordinates and on-screen canvas coordinates.
 *
 * The service speaks image pixels; the canvas is whatever size the layout
 * gives it. Everything drawn goes through one affine transform so overlays
 * stay glued to the image at any window size.
 */

import type { Pixel } from "./api.js";

export interface DisplayTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** Letterbox-fit an image into a view, centered. Scale is uniform. */
export function fitTransform(
  imageW: number,
  imageH: number,
  viewW: number,
  viewH: number,
): DisplayTransform {
  if (imageW <= 0 || imageH <= 0 || viewW <= 0 || viewH <= 0) {
    throw new Error(`degenerate fit: image ${imageW}x${imageH} into view ${viewW}x${viewH}`);
  }
  const scale = Math.min(viewW / imageW, viewH / imageH);
  return {
    scale,
    offsetX: (viewW - imageW * scale) / 2,
    offsetY: (viewH - imageH * scale) / 2,
  };
}

export function toDisplay(t: DisplayTransform, p: Pixel): Pixel {
  return [p[0] * t.scale + t.offsetX, p[1] * t.scale + t.offsetY];
}

export function toImage(t: DisplayTransform, p: Pixel): Pixel {
  return [(p[0] - t.offsetX) / t.scale, (p[1] - t.offsetY) / t.scale];
}

export function mapPolyline(t: DisplayTransform, pts: Pixel[]): Pixel[] {
  return pts.map((p) => toDisplay(t, p));
}

export function withinImage(imageW: number, imageH: number, p: Pixel): boolean {
  return p[0] >= 0 && p[1] >= 0 && p[0] <= imageW && p[1] <= imageH;
}

/** Overlay state for one frame. Every coordinate is a service response value. */
export interface OverlayLayers {
  courtBox: Record<string, Pixel[]>;
  projectionLine: Pixel[] | null;
  liftedPoints: Pixel[];
  trajectory: Pixel[];
  playerMarkers: Pixel[];
}

export function emptyOverlays(): OverlayLayers {
  return {
    courtBox: {},
    projectionLine: null,
    liftedPoints: [],
    trajectory: [],
    playerMarkers: [],
  };
}
