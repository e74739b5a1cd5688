import { describe, expect, it } from "vitest";

import { applyItem, itemById, nextPending, progress, select } from "../src/state.js";
import type { SessionState } from "../src/state.js";
import type { ReviewItem } from "../src/types.js";

function item(id: string, state: ReviewItem["state"] = "pending"): ReviewItem {
  return {
    item_id: id,
    image_id: `im/${id}`,
    proposed: { class_id: 0, cx: 0.5, cy: 0.5, w: 0.2, h: 0.2 },
    confidence: 0.9,
    state,
    final_box: state === "accepted" ? { class_id: 0, cx: 0.5, cy: 0.5, w: 0.2, h: 0.2 } : null,
  };
}

describe("progress", () => {
  it("counts decided items", () => {
    const items = [item("a"), item("b", "accepted"), item("c", "rejected")];
    expect(progress(items)).toEqual({ decided: 2, total: 3 });
  });

  it("empty queue is 0/0", () => {
    expect(progress([])).toEqual({ decided: 0, total: 0 });
  });
});

describe("applyItem", () => {
  it("replaces by id without reordering", () => {
    const state: SessionState = { items: [item("a"), item("b")], currentId: "a" };
    const updated = { ...item("b"), state: "accepted" as const };
    const next = applyItem(state, updated);
    expect(next.items.map((i) => i.item_id)).toEqual(["a", "b"]);
    expect(next.items[1].state).toBe("accepted");
    // progress moves without any reload of the list
    expect(progress(next.items).decided).toBe(1);
  });
});

describe("nextPending", () => {
  it("walks forward and wraps", () => {
    const items = [item("a", "accepted"), item("b"), item("c")];
    expect(nextPending(items, "b")?.item_id).toBe("c");
    expect(nextPending(items, "c")?.item_id).toBe("b");
  });

  it("starts from the beginning with no anchor", () => {
    const items = [item("a", "rejected"), item("b")];
    expect(nextPending(items, null)?.item_id).toBe("b");
  });

  it("returns null when everything is decided", () => {
    const items = [item("a", "accepted"), item("b", "rejected")];
    expect(nextPending(items, "a")).toBeNull();
    expect(nextPending([], null)).toBeNull();
  });
});

describe("select / itemById", () => {
  it("selection is pure", () => {
    const state: SessionState = { items: [item("a")], currentId: null };
    const selected = select(state, "a");
    expect(selected.currentId).toBe("a");
    expect(itemById(selected, "a")?.item_id).toBe("a");
    expect(itemById(selected, "missing")).toBeNull();
  });
});
