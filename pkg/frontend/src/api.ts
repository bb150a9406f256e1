// Thin typed client over the review service's REST endpoints.

import type { LabelAck, StatsResponse, TrackDetail, TracksPage, Verdict } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  listTracks(params: { page?: number; pageSize?: number; unreviewedOnly?: boolean } = {}): Promise<TracksPage> {
    const query = new URLSearchParams();
    if (params.page !== undefined) query.set("page", String(params.page));
    if (params.pageSize !== undefined) query.set("page_size", String(params.pageSize));
    if (params.unreviewedOnly) query.set("unreviewed_only", "true");
    const suffix = query.size > 0 ? `?${query.toString()}` : "";
    return this.fetchFn(`${this.baseUrl}/api/tracks${suffix}`).then((r) => asJson<TracksPage>(r));
  }

  getTrack(trackId: number): Promise<TrackDetail> {
    return this.fetchFn(`${this.baseUrl}/api/tracks/${trackId}`).then((r) => asJson<TrackDetail>(r));
  }

  labelTrack(trackId: number, verdict: Verdict, reviewer = ""): Promise<LabelAck> {
    return this.fetchFn(`${this.baseUrl}/api/tracks/${trackId}/label`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ verdict, reviewer }),
    }).then((r) => asJson<LabelAck>(r));
  }

  stats(): Promise<StatsResponse> {
    return this.fetchFn(`${this.baseUrl}/api/stats`).then((r) => asJson<StatsResponse>(r));
  }

  cropUrl(trackId: number, index: number): string {
    return `${this.baseUrl}/api/tracks/${trackId}/crops/${index}`;
  }
}
