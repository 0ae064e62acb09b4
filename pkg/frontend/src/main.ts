/** Browser annotation app.
 *
 * Four stacked canvas layers (image / fused labels / uncertainty /
 * pending strokes) with per-layer opacity, a keyboard class palette
 * ordered by catalog id, brush painting over uncertain pixels, and
 * submit / finalize wired to the service with conflict handling.
 */

import { ApiClient } from "./api.js";
import { sentinelMask } from "./raster.js";
import { AnnotationState, StrokePoint } from "./state.js";
import type { CatalogEntry, TaskPayload } from "./types.js";

const params = new URLSearchParams(window.location.search);
const API_BASE = params.get("api") ?? "http://127.0.0.1:8000";
const ANNOTATOR = params.get("annotator") ?? "browser";

const api = new ApiClient(API_BASE, ANNOTATOR);

interface Layers {
  image: HTMLCanvasElement;
  labels: HTMLCanvasElement;
  uncertainty: HTMLCanvasElement;
  pending: HTMLCanvasElement;
}

let state: AnnotationState;
let payload: TaskPayload;
let layers: Layers;
let catalog: CatalogEntry[] = [];
let scale = 6;
let panX = 0;
let panY = 0;
let unlockMode = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function drawRasterToCanvas(url: string, canvas: HTMLCanvasElement): Promise<ImageData> {
  const img = new Image();
  img.crossOrigin = "anonymous";
  await new Promise<void>((resolve, reject) => {
    img.onload = () => resolve();
    img.onerror = () => reject(new Error(`failed to load ${url}`));
    img.src = url;
  });
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(img, 0, 0);
  return ctx.getImageData(0, 0, canvas.width, canvas.height);
}

function applyTransform(): void {
  const stack = el<HTMLDivElement>("layer-stack");
  stack.style.transform = `translate(${panX}px, ${panY}px) scale(${scale})`;
}

function refreshHud(): void {
  el("counter").textContent = String(state.counter);
  el("version").textContent = String(state.version);
  el("pending-count").textContent = String(state.pending.length);
  const finalize = el<HTMLButtonElement>("finalize");
  finalize.disabled = !state.canFinalize();
  finalize.title = state.canFinalize()
    ? "All pixels labeled"
    : `${state.counter} uncertain pixel(s) remain`;
  el("task-state").textContent = state.taskState;
}

function classColor(id: number): string {
  const entry = catalog.find((c) => c.id === id);
  return entry ? `rgb(${entry.color[0]}, ${entry.color[1]}, ${entry.color[2]})` : "#fff";
}

function drawSpans(spans: { row: number; col_start: number; col_end: number; label: number }[]) {
  const ctx = layers.pending.getContext("2d")!;
  for (const s of spans) {
    ctx.fillStyle = classColor(s.label);
    ctx.fillRect(s.col_start, s.row, s.col_end - s.col_start, 1);
  }
}

function buildPalette(): void {
  const host = el<HTMLDivElement>("palette");
  host.innerHTML = "";
  for (const entry of catalog) {
    const btn = document.createElement("button");
    btn.className = "class-btn";
    btn.dataset.classId = String(entry.id);
    btn.innerHTML = `<span class="swatch" style="background:${classColor(entry.id)}"></span>${entry.id} ${entry.name}`;
    btn.onclick = () => selectClass(entry.id);
    host.appendChild(btn);
  }
}

function selectClass(id: number): void {
  state.setActiveClass(id);
  el("prompt").hidden = true;
  document.querySelectorAll(".class-btn").forEach((b) => {
    b.classList.toggle("active", (b as HTMLElement).dataset.classId === String(id));
  });
}

function canvasPoint(ev: MouseEvent): StrokePoint | null {
  const rect = layers.pending.getBoundingClientRect();
  const col = Math.floor(((ev.clientX - rect.left) / rect.width) * layers.pending.width);
  const row = Math.floor(((ev.clientY - rect.top) / rect.height) * layers.pending.height);
  if (row < 0 || col < 0 || row >= layers.pending.height || col >= layers.pending.width) {
    return null;
  }
  return { row, col };
}

function wireStrokes(): void {
  const surface = el<HTMLDivElement>("layer-stack");
  let stroke: StrokePoint[] | null = null;
  let unlockStart: StrokePoint | null = null;

  surface.addEventListener("mousedown", (ev) => {
    const p = canvasPoint(ev);
    if (!p) return;
    if (unlockMode) {
      unlockStart = p;
      return;
    }
    stroke = [p];
    const spans = state.paint([p]);
    if (state.promptNeeded) el("prompt").hidden = false;
    drawSpans(spans);
    refreshHud();
  });
  surface.addEventListener("mousemove", (ev) => {
    if (!stroke) return;
    const p = canvasPoint(ev);
    if (!p) return;
    const prev = stroke[stroke.length - 1];
    if (p.row === prev.row && p.col === prev.col) return;
    stroke.push(p);
    drawSpans(state.paint([prev, p]));
    refreshHud();
  });
  window.addEventListener("mouseup", (ev) => {
    if (unlockMode && unlockStart) {
      const p = canvasPoint(ev);
      if (p) {
        state.unlockRect(
          Math.min(unlockStart.row, p.row),
          Math.min(unlockStart.col, p.col),
          Math.max(unlockStart.row, p.row),
          Math.max(unlockStart.col, p.col),
        );
      }
      unlockStart = null;
      refreshHud();
    }
    stroke = null;
  });

  window.addEventListener("keydown", (ev) => {
    const digit = parseInt(ev.key, 10);
    if (!Number.isNaN(digit) && digit < catalog.length) selectClass(digit);
    if (ev.key === "u") toggleUnlock();
    if (ev.key === "+") {
      scale = Math.min(scale * 1.25, 64);
      applyTransform();
    }
    if (ev.key === "-") {
      scale = Math.max(scale / 1.25, 1);
      applyTransform();
    }
  });
  surface.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    scale = Math.min(64, Math.max(1, scale * (ev.deltaY < 0 ? 1.1 : 0.9)));
    applyTransform();
  });
}

function toggleUnlock(): void {
  unlockMode = !unlockMode;
  el("unlock").classList.toggle("active", unlockMode);
}

async function submitPending(): Promise<boolean> {
  if (state.pending.length === 0) return true;
  const result = await api.submitEditsWithRetry(state.taskId, state.version, state.pending);
  if (result.kind === "ok") {
    state.applySubmitted(result.payload);
    payload = result.payload;
    refreshHud();
    return true;
  }
  if (result.kind === "conflict") {
    state.registerConflict(result.currentVersion);
    el("conflict-version").textContent = String(result.currentVersion);
    el("conflict").hidden = false;
    return false;
  }
  alert(`submit rejected: ${result.error.message}`);
  return false;
}

async function resolveConflict(): Promise<void> {
  const latest = await api.getTask(state.taskId);
  const { kept, overlapping } = state.reloadAfterConflict(latest);
  payload = latest;
  const ctx = layers.pending.getContext("2d")!;
  ctx.clearRect(0, 0, layers.pending.width, layers.pending.height);
  drawSpans(kept);
  el("conflict").hidden = true;
  if (overlapping.length > 0) {
    alert(`${overlapping.length} stroke(s) overlapped newer edits; repaint them if needed.`);
  }
  refreshHud();
}

async function finalizeTask(): Promise<void> {
  if (!(await submitPending())) return;
  const result = await api.finalize(state.taskId, state.version);
  if (result.kind === "ok") {
    state.applySubmitted(result.payload);
    payload = result.payload;
    refreshHud();
    alert("Task finalized.");
  } else if (result.kind === "incomplete") {
    alert(`${result.remaining} pixel(s) still unlabeled; first at ${result.first}`);
  } else if (result.kind === "conflict") {
    state.registerConflict(result.currentVersion);
    el("conflict").hidden = false;
  } else {
    alert(`finalize rejected: ${result.error.message}`);
  }
}

function wireOpacity(): void {
  for (const name of ["image", "labels", "uncertainty", "pending"] as const) {
    const slider = el<HTMLInputElement>(`opacity-${name}`);
    slider.oninput = () => {
      layers[name].style.opacity = slider.value;
    };
    layers[name].style.opacity = slider.value;
  }
}

async function loadTask(): Promise<void> {
  const taskId = params.get("task");
  if (taskId) {
    payload = await api.getTask(taskId);
  } else {
    const open = await api.listTasks("open");
    const inProgress = await api.listTasks("in_progress");
    const candidates = [...open, ...inProgress];
    if (candidates.length === 0) {
      const imageId = params.get("image");
      if (!imageId) throw new Error("no open tasks; pass ?image=<id> to create one");
      payload = await api.createTask(imageId);
    } else {
      payload = candidates[0];
    }
  }
  catalog = payload.catalog;

  layers = {
    image: el<HTMLCanvasElement>("layer-image"),
    labels: el<HTMLCanvasElement>("layer-labels"),
    uncertainty: el<HTMLCanvasElement>("layer-uncertainty"),
    pending: el<HTMLCanvasElement>("layer-pending"),
  };
  await drawRasterToCanvas(api.rasterUrl(payload.refs.image), layers.image);
  await drawRasterToCanvas(api.rasterUrl(payload.refs.labels), layers.labels);
  const uncData = await drawRasterToCanvas(
    api.rasterUrl(payload.refs.uncertainty),
    layers.uncertainty,
  );
  const { width, height } = layers.uncertainty;
  layers.pending.width = width;
  layers.pending.height = height;

  const mask = sentinelMask(uncData.data, width * height);
  state = new AnnotationState(payload, mask, width, height);

  el("task-id").textContent = payload.task_id;
  el("image-id").textContent = payload.image_id;
  buildPalette();
  wireOpacity();
  wireStrokes();
  applyTransform();
  refreshHud();

  el<HTMLButtonElement>("submit").onclick = () => void submitPending();
  el<HTMLButtonElement>("finalize").onclick = () => void finalizeTask();
  el<HTMLButtonElement>("unlock").onclick = toggleUnlock;
  el<HTMLButtonElement>("conflict-reload").onclick = () => void resolveConflict();
  el<HTMLInputElement>("brush").oninput = (ev) => {
    state.brushSize = parseInt((ev.target as HTMLInputElement).value, 10);
    el("brush-size").textContent = String(state.brushSize);
  };
}

loadTask().catch((err) => {
  document.body.innerHTML = `<pre class="fatal">${String(err)}</pre>`;
});
