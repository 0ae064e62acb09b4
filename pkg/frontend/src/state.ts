/** Client-side annotation state.
 *
 * Owns the invariants the UI lives by:
 *  - pending spans only ever cover pixels that are currently uncertain
 *    or explicitly unlocked for correction;
 *  - the uncertain-pixel counter always equals the number of sentinel
 *    pixels in (uncertainty map minus committed edits minus pending);
 *  - finalize is allowed iff that counter is zero.
 *
 * All mutations of server state go through the API client; this class
 * only tracks the local view and rasterizes strokes into spans.
 */

import type { Span, TaskPayload } from "./types.js";

export interface StrokePoint {
  row: number;
  col: number;
}

export interface ConflictInfo {
  currentVersion: number;
}

export interface ReplayResult {
  kept: Span[];
  overlapping: Span[];
}

export class AnnotationState {
  readonly width: number;
  readonly height: number;
  taskId: string;
  version: number;
  taskState: string;
  activeClass: number | null = null;
  brushSize = 1;
  pending: Span[] = [];
  /** Set when a stroke happened with no class selected (inline prompt). */
  promptNeeded = false;
  /** Set when the server rejected a submit as stale (conflict dialog). */
  conflict: ConflictInfo | null = null;

  private baseUncertain: Uint8Array; // sentinel pixels of the fused overlay
  private resolved: Uint8Array; // covered by committed (server-side) edits
  private pendingMask: Uint8Array; // covered by local uncommitted spans
  private unlocked: Uint8Array; // reliable pixels opened for correction
  private uncovered: number; // live counter: uncertain && !pending

  constructor(payload: TaskPayload, uncertainMask: Uint8Array, width: number, height: number) {
    if (uncertainMask.length !== width * height) {
      throw new Error(`mask length ${uncertainMask.length} != ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.taskId = payload.task_id;
    this.version = payload.version;
    this.taskState = payload.state;
    this.baseUncertain = uncertainMask;
    this.resolved = new Uint8Array(width * height);
    this.pendingMask = new Uint8Array(width * height);
    this.unlocked = new Uint8Array(width * height);
    this.markResolved(payload.edits);
    this.uncovered = this.countUncertain();
  }

  private markResolved(edits: Span[]): void {
    for (const e of edits) {
      const base = e.row * this.width;
      this.resolved.fill(1, base + e.col_start, base + e.col_end);
    }
  }

  private countUncertain(): number {
    let n = 0;
    for (let i = 0; i < this.baseUncertain.length; i++) {
      if (this.baseUncertain[i] && !this.resolved[i] && !this.pendingMask[i]) n++;
    }
    return n;
  }

  /** Pixels still needing a label, net of pending strokes. */
  get counter(): number {
    return this.uncovered;
  }

  isUncertain(row: number, col: number): boolean {
    const i = row * this.width + col;
    return this.baseUncertain[i] === 1 && this.resolved[i] === 0;
  }

  private paintable(i: number): boolean {
    return (this.baseUncertain[i] === 1 && this.resolved[i] === 0) || this.unlocked[i] === 1;
  }

  canFinalize(): boolean {
    return this.uncovered === 0 && this.taskState !== "finalized";
  }

  setActiveClass(id: number | null): void {
    this.activeClass = id;
    if (id !== null) this.promptNeeded = false;
  }

  /** Open a reliable region for correction (rows/cols inclusive). */
  unlockRect(row0: number, col0: number, row1: number, col1: number): void {
    for (let r = Math.max(0, row0); r <= Math.min(this.height - 1, row1); r++) {
      for (let c = Math.max(0, col0); c <= Math.min(this.width - 1, col1); c++) {
        this.unlocked[r * this.width + c] = 1;
      }
    }
  }

  /** Rasterize a stroke into run-length spans over paintable pixels.
   *
   * Consecutive path points are connected; each point stamps a square
   * brush. Returns the spans added to the pending list (possibly empty
   * when the stroke only touched locked pixels).
   */
  paint(path: StrokePoint[]): Span[] {
    if (this.taskState === "finalized") return [];
    if (this.activeClass === null) {
      this.promptNeeded = true;
      return [];
    }
    if (path.length === 0) return [];
    const byRow = new Map<number, Set<number>>();
    const stamp = (row: number, col: number) => {
      const half = Math.floor(this.brushSize / 2);
      for (let r = row - half; r <= row + half; r++) {
        for (let c = col - half; c <= col + half; c++) {
          if (r < 0 || r >= this.height || c < 0 || c >= this.width) continue;
          if (!this.paintable(r * this.width + c)) continue;
          let cols = byRow.get(r);
          if (!cols) byRow.set(r, (cols = new Set()));
          cols.add(c);
        }
      }
    };
    stamp(path[0].row, path[0].col);
    for (let i = 1; i < path.length; i++) {
      for (const [r, c] of line(path[i - 1], path[i])) stamp(r, c);
    }

    const added: Span[] = [];
    for (const [row, colSet] of [...byRow.entries()].sort((a, b) => a[0] - b[0])) {
      const cols = [...colSet].sort((a, b) => a - b);
      let start = cols[0];
      let prev = cols[0];
      for (let i = 1; i <= cols.length; i++) {
        if (i < cols.length && cols[i] === prev + 1) {
          prev = cols[i];
          continue;
        }
        added.push({ row, col_start: start, col_end: prev + 1, label: this.activeClass });
        if (i < cols.length) {
          start = prev = cols[i];
        }
      }
    }
    for (const span of added) {
      const base = span.row * this.width;
      for (let i = base + span.col_start; i < base + span.col_end; i++) {
        if (this.baseUncertain[i] && !this.resolved[i] && !this.pendingMask[i]) {
          this.uncovered--; // live counter update
        }
        this.pendingMask[i] = 1;
      }
    }
    this.pending.push(...added);
    return added;
  }

  clearPending(): void {
    this.pending = [];
    this.pendingMask.fill(0);
    this.uncovered = this.countUncertain();
  }

  /** The server accepted our pending spans: fold them into committed state. */
  applySubmitted(payload: TaskPayload): void {
    this.markResolved(this.pending);
    this.pending = [];
    this.pendingMask.fill(0);
    this.version = payload.version;
    this.taskState = payload.state;
    this.conflict = null;
    this.uncovered = this.countUncertain();
  }

  registerConflict(currentVersion: number): void {
    this.conflict = { currentVersion };
  }

  /** After a conflict: rebuild committed state from the latest payload and
   * replay pending spans that are still fully paintable; the rest are
   * surfaced for manual resolution. */
  reloadAfterConflict(latest: TaskPayload): ReplayResult {
    const stale = this.pending;
    this.pending = [];
    this.pendingMask.fill(0);
    this.resolved.fill(0);
    this.markResolved(latest.edits);
    this.version = latest.version;
    this.taskState = latest.state;
    this.conflict = null;

    const kept: Span[] = [];
    const overlapping: Span[] = [];
    for (const span of stale) {
      const base = span.row * this.width;
      let clean = true;
      for (let i = base + span.col_start; i < base + span.col_end; i++) {
        if (!this.paintable(i)) {
          clean = false;
          break;
        }
      }
      if (clean) {
        kept.push(span);
        for (let i = base + span.col_start; i < base + span.col_end; i++) {
          this.pendingMask[i] = 1;
        }
      } else {
        overlapping.push(span);
      }
    }
    this.pending = kept;
    this.uncovered = this.countUncertain();
    return { kept, overlapping };
  }
}

/** Integer line between two stroke points (Bresenham). */
export function line(a: StrokePoint, b: StrokePoint): Array<[number, number]> {
  const points: Array<[number, number]> = [];
  let r = a.row;
  let c = a.col;
  const dr = Math.abs(b.row - a.row);
  const dc = Math.abs(b.col - a.col);
  const sr = a.row < b.row ? 1 : -1;
  const sc = a.col < b.col ? 1 : -1;
  let err = dc - dr;
  for (;;) {
    points.push([r, c]);
    if (r === b.row && c === b.col) break;
    const e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c += sc;
    }
    if (e2 < dc) {
      err += dc;
      r += sr;
    }
  }
  return points;
}
