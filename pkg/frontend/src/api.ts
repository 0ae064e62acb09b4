/** Typed client for the annotation service.
 *
 * Submit results distinguish success, optimistic-concurrency conflicts,
 * and terminal/validation rejections so callers can branch without
 * parsing HTTP status codes themselves. Network-level failures retry
 * with exponential backoff; pending spans stay with the caller.
 */

import type { ApiError, Span, TaskPayload } from "./types.js";

export type SubmitResult =
  | { kind: "ok"; payload: TaskPayload }
  | { kind: "conflict"; currentVersion: number }
  | { kind: "rejected"; error: ApiError };

export type FinalizeResult =
  | { kind: "ok"; payload: TaskPayload }
  | { kind: "conflict"; currentVersion: number }
  | { kind: "incomplete"; remaining: number; first?: [number, number] }
  | { kind: "rejected"; error: ApiError };

export interface RetryOptions {
  retries?: number;
  baseDelayMs?: number;
}

type FetchFn = typeof fetch;

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    readonly annotatorId: string = "anonymous",
    private fetchFn: FetchFn = (...args) => fetch(...args),
  ) {}

  private headers(): Record<string, string> {
    return { "content-type": "application/json", "x-annotator-id": this.annotatorId };
  }

  rasterUrl(ref: string): string {
    return `${this.baseUrl}/rasters/${ref}`;
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/images/${imageId}`;
  }

  async listTasks(state?: string): Promise<TaskPayload[]> {
    const q = state ? `?state=${encodeURIComponent(state)}` : "";
    const resp = await this.fetchFn(`${this.baseUrl}/tasks${q}`);
    if (!resp.ok) throw new Error(`list tasks failed: ${resp.status}`);
    return (await resp.json()).tasks;
  }

  async createTask(imageId: string): Promise<TaskPayload> {
    const resp = await this.fetchFn(`${this.baseUrl}/tasks`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ image_id: imageId }),
    });
    if (!resp.ok) throw new Error(`create task failed: ${(await resp.text()).slice(0, 200)}`);
    return resp.json();
  }

  async getTask(taskId: string): Promise<TaskPayload> {
    const resp = await this.fetchFn(`${this.baseUrl}/tasks/${taskId}`);
    if (!resp.ok) throw new Error(`get task failed: ${resp.status}`);
    return resp.json();
  }

  async submitEdits(taskId: string, baseVersion: number, spans: Span[]): Promise<SubmitResult> {
    const resp = await this.fetchFn(`${this.baseUrl}/tasks/${taskId}/edits`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ base_version: baseVersion, edits: spans }),
    });
    if (resp.ok) return { kind: "ok", payload: await resp.json() };
    const error: ApiError = await resp.json();
    if (error.code === "conflict") {
      return { kind: "conflict", currentVersion: error.current_version ?? -1 };
    }
    return { kind: "rejected", error };
  }

  /** submitEdits with exponential backoff over transport failures only;
   * HTTP-level rejections (conflict etc.) return immediately. */
  async submitEditsWithRetry(
    taskId: string,
    baseVersion: number,
    spans: Span[],
    { retries = 3, baseDelayMs = 250 }: RetryOptions = {},
  ): Promise<SubmitResult> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= retries; attempt++) {
      if (attempt > 0) await sleep(baseDelayMs * 2 ** (attempt - 1));
      try {
        return await this.submitEdits(taskId, baseVersion, spans);
      } catch (err) {
        lastError = err;
      }
    }
    throw lastError;
  }

  async finalize(taskId: string, baseVersion: number): Promise<FinalizeResult> {
    const resp = await this.fetchFn(`${this.baseUrl}/tasks/${taskId}/finalize`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ base_version: baseVersion }),
    });
    if (resp.ok) return { kind: "ok", payload: await resp.json() };
    const error: ApiError = await resp.json();
    if (error.code === "conflict") {
      return { kind: "conflict", currentVersion: error.current_version ?? -1 };
    }
    if (error.code === "precondition_failed" && error.remaining !== undefined) {
      return { kind: "incomplete", remaining: error.remaining, first: error.first };
    }
    return { kind: "rejected", error };
  }

  async fetchRaster(ref: string): Promise<ArrayBuffer> {
    const resp = await this.fetchFn(this.rasterUrl(ref));
    if (!resp.ok) throw new Error(`raster ${ref} failed: ${resp.status}`);
    return resp.arrayBuffer();
  }
}
