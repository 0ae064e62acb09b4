import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("submitEdits", () => {
  it("maps 409 to a conflict result carrying the current version", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(409, { code: "conflict", message: "stale", current_version: 5 }),
    );
    const api = new ApiClient("http://x", "a", fetchFn as unknown as typeof fetch);
    const result = await api.submitEdits("t", 0, []);
    expect(result).toEqual({ kind: "conflict", currentVersion: 5 });
  });

  it("sends the annotator header and base version", async () => {
    const fetchFn = vi.fn(async () => jsonResponse(200, { version: 1 }));
    const api = new ApiClient("http://x", "alice", fetchFn as unknown as typeof fetch);
    await api.submitEdits("t", 3, [{ row: 0, col_start: 0, col_end: 1, label: 2 }]);
    const [url, init] = fetchFn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://x/tasks/t/edits");
    expect((init.headers as Record<string, string>)["x-annotator-id"]).toBe("alice");
    expect(JSON.parse(init.body as string).base_version).toBe(3);
  });
});

describe("submitEditsWithRetry", () => {
  it("retries transport failures with backoff and preserves the result", async () => {
    let calls = 0;
    const fetchFn = vi.fn(async () => {
      calls++;
      if (calls < 3) throw new TypeError("network down");
      return jsonResponse(200, { version: 1 });
    });
    const api = new ApiClient("http://x", "a", fetchFn as unknown as typeof fetch);
    const result = await api.submitEditsWithRetry("t", 0, [], { retries: 3, baseDelayMs: 1 });
    expect(result.kind).toBe("ok");
    expect(calls).toBe(3);
  });

  it("does not retry HTTP-level rejections", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(409, { code: "conflict", message: "stale", current_version: 2 }),
    );
    const api = new ApiClient("http://x", "a", fetchFn as unknown as typeof fetch);
    const result = await api.submitEditsWithRetry("t", 0, [], { retries: 3, baseDelayMs: 1 });
    expect(result.kind).toBe("conflict");
    expect(fetchFn).toHaveBeenCalledTimes(1);
  });

  it("throws after exhausting retries", async () => {
    const fetchFn = vi.fn(async () => {
      throw new TypeError("network down");
    });
    const api = new ApiClient("http://x", "a", fetchFn as unknown as typeof fetch);
    await expect(
      api.submitEditsWithRetry("t", 0, [], { retries: 2, baseDelayMs: 1 }),
    ).rejects.toThrow("network down");
    expect(fetchFn).toHaveBeenCalledTimes(3);
  });
});

describe("finalize", () => {
  it("maps precondition_failed to an incomplete result with the count", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(412, {
        code: "precondition_failed",
        message: "5 unlabeled pixel(s) remain",
        remaining: 5,
        first: [0, 3],
      }),
    );
    const api = new ApiClient("http://x", "a", fetchFn as unknown as typeof fetch);
    const result = await api.finalize("t", 1);
    expect(result).toEqual({ kind: "incomplete", remaining: 5, first: [0, 3] });
  });
});
