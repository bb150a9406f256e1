import type { ServerEvent, TrackSummary } from "../src/types.js";

export function summary(trackId: number, overrides: Partial<TrackSummary> = {}): TrackSummary {
  return {
    track_id: trackId,
    state: "active",
    review_label: "unreviewed",
    point_count: 1,
    first_frame_id: 0,
    last_frame_id: 0,
    first_timestamp_ms: 0,
    best_confidence: 0.9,
    last_box: { x: 10, y: 10, w: 40, h: 40 },
    last_provenance: "detected",
    geo: { lat: -16.8, lon: 145.6 },
    updated_seq: trackId + 1,
    ...overrides,
  };
}

export function createdEvent(trackId: number, id: number, seq?: number): ServerEvent {
  return {
    id,
    type: "TrackCreated",
    data: { track: summary(trackId, { updated_seq: seq ?? id }) },
  };
}

export function updatedEvent(trackId: number, id: number, overrides: Partial<TrackSummary> = {}): ServerEvent {
  return {
    id,
    type: "TrackUpdated",
    data: { track: summary(trackId, { updated_seq: id, ...overrides }) },
  };
}

export function labeledEvent(trackId: number, id: number, verdict: "tp" | "fp"): ServerEvent {
  return { id, type: "TrackLabeled", data: { track_id: trackId, verdict, reviewer: "x" } };
}
