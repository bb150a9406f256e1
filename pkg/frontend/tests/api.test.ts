import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function mockFetch(handler: (url: string, init?: RequestInit) => Response): typeof fetch {
  return (async (url: RequestInfo | URL, init?: RequestInit) =>
    handler(String(url), init)) as typeof fetch;
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("lists tracks with pagination and filter params", async () => {
    let seen = "";
    const api = new ApiClient("", mockFetch((url) => {
      seen = url;
      return json({ tracks: [], page: 1, page_size: 10, total: 0 });
    }));
    const page = await api.listTracks({ page: 1, pageSize: 10, unreviewedOnly: true });
    expect(seen).toBe("/api/tracks?page=1&page_size=10&unreviewed_only=true");
    expect(page.total).toBe(0);
  });

  it("posts labels as JSON", async () => {
    let body = "";
    let method = "";
    const api = new ApiClient("", mockFetch((url, init) => {
      method = init?.method ?? "";
      body = String(init?.body);
      return json({ track_id: 5, verdict: "tp", reviewer: "r", labeled_at_ms: 1 });
    }));
    const ack = await api.labelTrack(5, "tp", "r");
    expect(method).toBe("POST");
    expect(JSON.parse(body)).toEqual({ verdict: "tp", reviewer: "r" });
    expect(ack.track_id).toBe(5);
  });

  it("raises ApiError with the server detail on non-2xx", async () => {
    const api = new ApiClient("", mockFetch(() => json({ detail: "unknown track 9" }, 404)));
    await expect(api.getTrack(9)).rejects.toMatchObject({
      status: 404,
      message: "unknown track 9",
    });
    await expect(api.getTrack(9)).rejects.toBeInstanceOf(ApiError);
  });

  it("builds crop urls", () => {
    const api = new ApiClient("http://x");
    expect(api.cropUrl(3, 2)).toBe("http://x/api/tracks/3/crops/2");
  });
});
