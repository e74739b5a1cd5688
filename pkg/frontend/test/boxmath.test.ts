import { describe, expect, it } from "vitest";

import { boxToRect, clampRect, dragRect, hitHandle, rectToBox, sameBox } from "../src/boxmath.js";
import type { Rect } from "../src/boxmath.js";

describe("boxToRect / rectToBox", () => {
  it("converts the worked 512x512 example", () => {
    const rect = boxToRect({ class_id: 0, cx: 0.5, cy: 0.5, w: 0.25, h: 0.5 }, 512, 512);
    expect(rect).toEqual({ x: 192, y: 128, w: 128, h: 256 });
  });

  it("round-trips against natural dimensions", () => {
    const box = { class_id: 0, cx: 0.3, cy: 0.62, w: 0.18, h: 0.24 };
    const back = rectToBox(boxToRect(box, 1920, 1080), 1920, 1080, 0);
    expect(back.cx).toBeCloseTo(box.cx, 12);
    expect(back.cy).toBeCloseTo(box.cy, 12);
    expect(back.w).toBeCloseTo(box.w, 12);
    expect(back.h).toBeCloseTo(box.h, 12);
  });

  it("clamps a rect that leaves the frame", () => {
    const box = rectToBox({ x: -10, y: 5, w: 50, h: 50 }, 100, 100, 0);
    expect(box.cx - box.w / 2).toBeGreaterThanOrEqual(0);
    expect(box.cx + box.w / 2).toBeLessThanOrEqual(1);
  });
});

describe("hitHandle", () => {
  const rect: Rect = { x: 100, y: 100, w: 200, h: 100 };

  it("finds corners", () => {
    expect(hitHandle(rect, 100, 100, 8)).toBe("nw");
    expect(hitHandle(rect, 300, 100, 8)).toBe("ne");
    expect(hitHandle(rect, 100, 200, 8)).toBe("sw");
    expect(hitHandle(rect, 300, 200, 8)).toBe("se");
  });

  it("finds edges", () => {
    expect(hitHandle(rect, 200, 100, 8)).toBe("n");
    expect(hitHandle(rect, 200, 200, 8)).toBe("s");
    expect(hitHandle(rect, 100, 150, 8)).toBe("w");
    expect(hitHandle(rect, 300, 150, 8)).toBe("e");
  });

  it("inside means move, far outside means nothing", () => {
    expect(hitHandle(rect, 200, 150, 8)).toBe("move");
    expect(hitHandle(rect, 500, 500, 8)).toBeNull();
  });
});

describe("dragRect", () => {
  const rect: Rect = { x: 100, y: 100, w: 200, h: 100 };

  it("east drag widens by the delta", () => {
    // +10% of the width on the right edge
    const out = dragRect(rect, "e", 20, 0, 640, 480);
    expect(out).toEqual({ x: 100, y: 100, w: 220, h: 100 });
  });

  it("north-west drag moves origin and grows both sides", () => {
    const out = dragRect(rect, "nw", -10, -20, 640, 480);
    expect(out).toEqual({ x: 90, y: 80, w: 210, h: 120 });
  });

  it("move translates and clamps at the frame", () => {
    const out = dragRect(rect, "move", 10_000, 10_000, 640, 480);
    expect(out.x + out.w).toBeLessThanOrEqual(640);
    expect(out.y + out.h).toBeLessThanOrEqual(480);
  });

  it("never collapses below the minimum size", () => {
    const out = dragRect(rect, "e", -10_000, 0, 640, 480, 2);
    expect(out.w).toBeGreaterThanOrEqual(2);
  });

  it("drag then convert matches the server's normalized convention", () => {
    // widening the right edge by 10% of the image width adds 0.1 to w
    const grown = dragRect(rect, "e", 64, 0, 640, 480);
    const box = rectToBox(grown, 640, 480, 0);
    expect(box.w).toBeCloseTo((200 + 64) / 640, 12);
  });
});

describe("clampRect / sameBox", () => {
  it("clamp keeps a huge rect inside the image", () => {
    const out = clampRect({ x: -50, y: -50, w: 5000, h: 5000 }, 640, 480);
    expect(out).toEqual({ x: 0, y: 0, w: 640, h: 480 });
  });

  it("sameBox tolerates float noise only", () => {
    const a = { class_id: 0, cx: 0.5, cy: 0.5, w: 0.2, h: 0.2 };
    expect(sameBox(a, { ...a, cx: 0.5 + 1e-12 })).toBe(true);
    expect(sameBox(a, { ...a, cx: 0.51 })).toBe(false);
  });
});
