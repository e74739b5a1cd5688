import type { ReviewItem } from "./types.js";

/**
 * Client-side session state. The server is the source of truth: every
 * mutation here mirrors an item the server returned, so a page refresh
 * rebuilds exactly this state from /api/items.
 */
export interface SessionState {
  items: ReviewItem[];
  currentId: string | null;
}

export function progress(items: ReviewItem[]): { decided: number; total: number } {
  const decided = items.filter((i) => i.state !== "pending").length;
  return { decided, total: items.length };
}

/** Replace an item with the server's post-decision version. */
export function applyItem(state: SessionState, updated: ReviewItem): SessionState {
  return {
    items: state.items.map((i) => (i.item_id === updated.item_id ? updated : i)),
    currentId: state.currentId,
  };
}

export function itemById(state: SessionState, itemId: string | null): ReviewItem | null {
  if (itemId === null) return null;
  return state.items.find((i) => i.item_id === itemId) ?? null;
}

/** Next pending item after the given one, wrapping around; null when done. */
export function nextPending(items: ReviewItem[], afterId: string | null): ReviewItem | null {
  if (items.length === 0) return null;
  const start = afterId === null ? 0 : items.findIndex((i) => i.item_id === afterId) + 1;
  for (let k = 0; k < items.length; k++) {
    const item = items[(start + k) % items.length];
    if (item.state === "pending") return item;
  }
  return null;
}

export function select(state: SessionState, itemId: string | null): SessionState {
  return { items: state.items, currentId: itemId };
}
