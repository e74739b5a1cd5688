import type {
  Box,
  DecisionAction,
  ExportReport,
  ItemPage,
  ItemState,
  QueueSummary,
  ReviewItem,
} from "./types.js";

let apiBase = "";

/** Point the client at another origin (tests run against a spawned server). */
export function setApiBase(base: string): void {
  apiBase = base.replace(/\/$/, "");
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${apiBase}${path}`, init);
  if (!res.ok) {
    let message = `${res.status} ${res.statusText}`;
    try {
      const data = await res.json();
      if (data && data.detail) {
        message = typeof data.detail === "string" ? data.detail : JSON.stringify(data.detail);
      }
    } catch {
      // body was not JSON; keep the status text
    }
    throw new Error(message);
  }
  return res.json() as Promise<T>;
}

export function fetchQueue(): Promise<QueueSummary> {
  return request<QueueSummary>("/api/queue");
}

export function fetchItems(state?: ItemState): Promise<ItemPage> {
  const suffix = state ? `?state=${encodeURIComponent(state)}` : "";
  return request<ItemPage>(`/api/items${suffix}`);
}

/** Image ids may contain slashes; encode each path segment, keep the slashes. */
export function imageUrl(imageId: string): string {
  const encoded = imageId.split("/").map(encodeURIComponent).join("/");
  return `${apiBase}/api/images/${encoded}`;
}

export function postDecision(
  itemId: string,
  action: DecisionAction,
  box?: Box,
): Promise<ReviewItem> {
  const body = box ? { action, box } : { action };
  return request<ReviewItem>(`/api/items/${encodeURIComponent(itemId)}/decision`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

export function postExport(force: boolean): Promise<ExportReport> {
  return request<ExportReport>("/api/export", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ force }),
  });
}
