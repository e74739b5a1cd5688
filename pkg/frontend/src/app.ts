import { fetchItems, fetchQueue, imageUrl, postDecision, postExport } from "./api.js";
import { boxToRect, clampRect, dragRect, hitHandle, rectToBox, sameBox } from "./boxmath.js";
import type { Handle, Rect } from "./boxmath.js";
import { applyItem, itemById, nextPending, progress, select } from "./state.js";
import type { SessionState } from "./state.js";
import type { Box, DecisionAction, ReviewItem } from "./types.js";

const HANDLE_TOLERANCE = 8;

interface EditorState {
  image: HTMLImageElement | null;
  rect: Rect | null;
  drag: { handle: Handle; lastX: number; lastY: number } | null;
  dirty: boolean;
}

let session: SessionState = { items: [], currentId: null };
const editor: EditorState = { image: null, rect: null, drag: null, dirty: false };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(message: string): void {
  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = message;
  banner.classList.remove("hidden");
}

function clearError(): void {
  el<HTMLDivElement>("error-banner").classList.add("hidden");
}

function renderProgress(): void {
  const { decided, total } = progress(session.items);
  el<HTMLSpanElement>("progress").textContent = `${decided}/${total} decided`;
}

function renderList(): void {
  const list = el<HTMLUListElement>("item-list");
  list.textContent = "";
  if (session.items.length === 0) {
    el<HTMLDivElement>("empty-note").classList.remove("hidden");
    return;
  }
  el<HTMLDivElement>("empty-note").classList.add("hidden");
  for (const item of session.items) {
    const row = document.createElement("li");
    row.dataset.itemId = item.item_id;
    row.className = `item-row state-${item.state}${item.item_id === session.currentId ? " selected" : ""}`;

    const thumb = document.createElement("img");
    thumb.className = "thumb";
    thumb.loading = "lazy";
    thumb.src = imageUrl(item.image_id);
    row.appendChild(thumb);

    const label = document.createElement("span");
    label.textContent = `${item.image_id}  ·  ${(item.confidence * 100).toFixed(0)}%  ·  ${item.state}`;
    row.appendChild(label);

    row.addEventListener("click", () => openItem(item.item_id));
    list.appendChild(row);
  }
}

function currentItem(): ReviewItem | null {
  return itemById(session, session.currentId);
}

function displayScale(image: HTMLImageElement, canvas: HTMLCanvasElement): number {
  return canvas.width / image.naturalWidth;
}

function renderCanvas(): void {
  const canvas = el<HTMLCanvasElement>("editor-canvas");
  const ctx = canvas.getContext("2d");
  const item = currentItem();
  if (!ctx) return;
  if (!item || !editor.image) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  const img = editor.image;
  const maxSide = 640;
  const scale = Math.min(maxSide / img.naturalWidth, maxSide / img.naturalHeight, 1);
  canvas.width = Math.round(img.naturalWidth * scale);
  canvas.height = Math.round(img.naturalHeight * scale);
  ctx.drawImage(img, 0, 0, canvas.width, canvas.height);

  if (editor.rect) {
    const s = displayScale(img, canvas);
    ctx.lineWidth = 2;
    ctx.strokeStyle = item.state === "rejected" ? "#d9534f" : "#2ecc71";
    ctx.strokeRect(editor.rect.x * s, editor.rect.y * s, editor.rect.w * s, editor.rect.h * s);
    ctx.fillStyle = "#2ecc71";
    for (const [hx, hy] of corners(editor.rect)) {
      ctx.fillRect(hx * s - 3, hy * s - 3, 6, 6);
    }
  }
  el<HTMLSpanElement>("item-title").textContent =
    `${item.image_id} — ${item.state}${editor.dirty ? " (edited, press Enter to confirm)" : ""}`;
}

function corners(rect: Rect): Array<[number, number]> {
  return [
    [rect.x, rect.y],
    [rect.x + rect.w, rect.y],
    [rect.x, rect.y + rect.h],
    [rect.x + rect.w, rect.y + rect.h],
  ];
}

function activeBox(item: ReviewItem): Box {
  return item.final_box ?? item.proposed;
}

function openItem(itemId: string): void {
  session = select(session, itemId);
  const item = currentItem();
  if (!item) return;
  editor.rect = null;
  editor.dirty = false;
  editor.drag = null;
  const img = new Image();
  img.onload = () => {
    editor.image = img;
    editor.rect = boxToRect(activeBox(item), img.naturalWidth, img.naturalHeight);
    renderCanvas();
  };
  img.onerror = () => showError(`failed to load image ${item.image_id}`);
  img.src = imageUrl(item.image_id);
  renderList();
}

async function decideCurrent(action: DecisionAction, box?: Box): Promise<void> {
  const item = currentItem();
  if (!item) return;
  try {
    const updated = await postDecision(item.item_id, action, box);
    clearError();
    session = applyItem(session, updated);
    editor.dirty = false;
    editor.rect = editor.image
      ? boxToRect(activeBox(updated), editor.image.naturalWidth, editor.image.naturalHeight)
      : null;
    renderProgress();
    renderList();
    renderCanvas();
  } catch (err) {
    // server refused: revert the overlay to the item's authoritative box
    if (editor.image) {
      editor.rect = boxToRect(activeBox(item), editor.image.naturalWidth, editor.image.naturalHeight);
      editor.dirty = false;
      renderCanvas();
    }
    showError(err instanceof Error ? err.message : String(err));
  }
}

function confirmEdit(): void {
  const item = currentItem();
  if (!item || !editor.rect || !editor.image) return;
  const box = rectToBox(
    editor.rect,
    editor.image.naturalWidth,
    editor.image.naturalHeight,
    activeBox(item).class_id,
  );
  if (sameBox(box, item.proposed)) {
    void decideCurrent("accept");
  } else {
    void decideCurrent("edit", box);
  }
}

function advance(): void {
  const next = nextPending(session.items, session.currentId);
  if (next) {
    openItem(next.item_id);
  } else {
    renderList();
    renderCanvas();
  }
}

function wireCanvas(): void {
  const canvas = el<HTMLCanvasElement>("editor-canvas");

  const toImage = (ev: PointerEvent): [number, number] => {
    const bounds = canvas.getBoundingClientRect();
    const s = editor.image ? displayScale(editor.image, canvas) : 1;
    return [(ev.clientX - bounds.left) / s, (ev.clientY - bounds.top) / s];
  };

  canvas.addEventListener("pointerdown", (ev) => {
    if (!editor.rect || !editor.image) return;
    const [x, y] = toImage(ev);
    const handle = hitHandle(editor.rect, x, y, HANDLE_TOLERANCE);
    if (!handle) return;
    editor.drag = { handle, lastX: x, lastY: y };
    canvas.setPointerCapture(ev.pointerId);
  });

  canvas.addEventListener("pointermove", (ev) => {
    if (!editor.drag || !editor.rect || !editor.image) return;
    const [x, y] = toImage(ev);
    editor.rect = dragRect(
      editor.rect,
      editor.drag.handle,
      x - editor.drag.lastX,
      y - editor.drag.lastY,
      editor.image.naturalWidth,
      editor.image.naturalHeight,
    );
    editor.drag.lastX = x;
    editor.drag.lastY = y;
    editor.dirty = true;
    renderCanvas();
  });

  canvas.addEventListener("pointerup", (ev) => {
    if (editor.drag) {
      editor.rect = editor.rect && editor.image
        ? clampRect(editor.rect, editor.image.naturalWidth, editor.image.naturalHeight)
        : editor.rect;
      editor.drag = null;
      canvas.releasePointerCapture(ev.pointerId);
      renderCanvas();
    }
  });
}

function wireKeyboard(): void {
  document.addEventListener("keydown", (ev) => {
    if (ev.target instanceof HTMLInputElement) return;
    switch (ev.key) {
      case "a":
        void decideCurrent("accept").then(advance);
        break;
      case "r":
        void decideCurrent("reject").then(advance);
        break;
      case "u":
        void decideCurrent("reset");
        break;
      case "Enter":
        if (editor.dirty) confirmEdit();
        break;
      case "n":
        advance();
        break;
    }
  });
}

function wireButtons(): void {
  el<HTMLButtonElement>("btn-accept").addEventListener("click", () =>
    void decideCurrent("accept").then(advance),
  );
  el<HTMLButtonElement>("btn-reject").addEventListener("click", () =>
    void decideCurrent("reject").then(advance),
  );
  el<HTMLButtonElement>("btn-undo").addEventListener("click", () => void decideCurrent("reset"));
  el<HTMLButtonElement>("btn-confirm").addEventListener("click", confirmEdit);
  el<HTMLButtonElement>("btn-export").addEventListener("click", async () => {
    try {
      const report = await postExport(false);
      clearError();
      el<HTMLSpanElement>("export-note").textContent =
        `exported ${report.exported_images} images (${report.negative_images} negative)`;
    } catch (err) {
      showError(err instanceof Error ? err.message : String(err));
    }
  });
  el<HTMLButtonElement>("btn-retry").addEventListener("click", () => void boot());
}

async function boot(): Promise<void> {
  try {
    const [summary, page] = await Promise.all([fetchQueue(), fetchItems()]);
    clearError();
    el<HTMLDivElement>("retry-banner").classList.add("hidden");
    el<HTMLSpanElement>("queue-title").textContent =
      `${summary.queue_id}${summary.source_iteration ? ` (from ${summary.source_iteration})` : ""}`;
    session = { items: page.items, currentId: null };
    renderProgress();
    renderList();
    const first = nextPending(session.items, null);
    if (first) openItem(first.item_id);
  } catch {
    el<HTMLDivElement>("retry-banner").classList.remove("hidden");
  }
}

export function main(): void {
  wireCanvas();
  wireKeyboard();
  wireButtons();
  void boot();
}

if (typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", main);
  } else {
    main();
  }
}
