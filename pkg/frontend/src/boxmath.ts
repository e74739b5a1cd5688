import type { Box } from "./types.js";

/** Axis-aligned rectangle in image pixels (natural dimensions, not display size). */
export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type Handle = "nw" | "n" | "ne" | "e" | "se" | "s" | "sw" | "w" | "move";

/**
 * Server boxes are normalized against the image's natural dimensions, which
 * the raster itself reports once loaded; display scaling never enters here.
 */
export function boxToRect(box: Box, imgW: number, imgH: number): Rect {
  return {
    x: (box.cx - box.w / 2) * imgW,
    y: (box.cy - box.h / 2) * imgH,
    w: box.w * imgW,
    h: box.h * imgH,
  };
}

export function rectToBox(rect: Rect, imgW: number, imgH: number, classId: number): Box {
  const r = clampRect(rect, imgW, imgH);
  return {
    class_id: classId,
    cx: (r.x + r.w / 2) / imgW,
    cy: (r.y + r.h / 2) / imgH,
    w: r.w / imgW,
    h: r.h / imgH,
  };
}

export function clampRect(rect: Rect, imgW: number, imgH: number, minSize = 1): Rect {
  const w = Math.min(Math.max(rect.w, minSize), imgW);
  const h = Math.min(Math.max(rect.h, minSize), imgH);
  const x = Math.min(Math.max(rect.x, 0), imgW - w);
  const y = Math.min(Math.max(rect.y, 0), imgH - h);
  return { x, y, w, h };
}

/** Which handle a point grabs, if any; tolerance is in image pixels. */
export function hitHandle(rect: Rect, px: number, py: number, tolerance: number): Handle | null {
  const nearX0 = Math.abs(px - rect.x) <= tolerance;
  const nearX1 = Math.abs(px - (rect.x + rect.w)) <= tolerance;
  const nearY0 = Math.abs(py - rect.y) <= tolerance;
  const nearY1 = Math.abs(py - (rect.y + rect.h)) <= tolerance;
  const insideX = px >= rect.x - tolerance && px <= rect.x + rect.w + tolerance;
  const insideY = py >= rect.y - tolerance && py <= rect.y + rect.h + tolerance;

  if (nearX0 && nearY0) return "nw";
  if (nearX1 && nearY0) return "ne";
  if (nearX0 && nearY1) return "sw";
  if (nearX1 && nearY1) return "se";
  if (nearY0 && insideX) return "n";
  if (nearY1 && insideX) return "s";
  if (nearX0 && insideY) return "w";
  if (nearX1 && insideY) return "e";
  if (px > rect.x && px < rect.x + rect.w && py > rect.y && py < rect.y + rect.h) return "move";
  return null;
}

/** Apply a drag delta to one handle; the result stays inside the frame. */
export function dragRect(
  rect: Rect,
  handle: Handle,
  dx: number,
  dy: number,
  imgW: number,
  imgH: number,
  minSize = 2,
): Rect {
  let { x, y, w, h } = rect;
  const x1 = x + w;
  const y1 = y + h;

  if (handle === "move") {
    return clampRect({ x: x + dx, y: y + dy, w, h }, imgW, imgH, minSize);
  }
  if (handle.includes("w")) {
    const nx = Math.min(Math.max(x + dx, 0), x1 - minSize);
    w = x1 - nx;
    x = nx;
  }
  if (handle.includes("e")) {
    const nx1 = Math.max(Math.min(x1 + dx, imgW), x + minSize);
    w = nx1 - x;
  }
  if (handle.includes("n")) {
    const ny = Math.min(Math.max(y + dy, 0), y1 - minSize);
    h = y1 - ny;
    y = ny;
  }
  if (handle.includes("s")) {
    const ny1 = Math.max(Math.min(y1 + dy, imgH), y + minSize);
    h = ny1 - y;
  }
  return { x, y, w, h };
}

export function sameBox(a: Box, b: Box, eps = 1e-9): boolean {
  return (
    a.class_id === b.class_id &&
    Math.abs(a.cx - b.cx) < eps &&
    Math.abs(a.cy - b.cy) < eps &&
    Math.abs(a.w - b.w) < eps &&
    Math.abs(a.h - b.h) < eps
  );
}
