// Dashboard state as a pure reduction over (server events, optimistic ops).
//
// Replaying the same action log always rebuilds the same state: updates
// are keyed by the server's monotone updated_seq, so a REST snapshot and
// an event replay converge instead of double-applying.

import type { Metrics, ReviewLabel, ServerEvent, TrackSummary, Verdict } from "./types.js";

export interface DashboardState {
  tracks: Record<number, TrackSummary>;
  labels: Record<number, ReviewLabel>;
  pending: Record<number, Verdict>;
  metrics: Metrics | null;
  connection: "connecting" | "live" | "offline";
  missedEvents: number;
  lastEventId: number;
}

export type Action =
  | { kind: "server"; event: ServerEvent }
  | { kind: "snapshot"; tracks: TrackSummary[] }
  | { kind: "optimistic"; trackId: number; verdict: Verdict }
  | { kind: "ack"; trackId: number; verdict: Verdict }
  | { kind: "rollback"; trackId: number }
  | { kind: "connection"; status: DashboardState["connection"] };

export function initialState(): DashboardState {
  return {
    tracks: {},
    labels: {},
    pending: {},
    metrics: null,
    connection: "connecting",
    missedEvents: 0,
    lastEventId: 0,
  };
}

function upsertTrack(state: DashboardState, summary: TrackSummary): DashboardState {
  const existing = state.tracks[summary.track_id];
  if (existing && existing.updated_seq >= summary.updated_seq) return state;
  return {
    ...state,
    tracks: { ...state.tracks, [summary.track_id]: summary },
    labels: { ...state.labels, [summary.track_id]: summary.review_label },
  };
}

export function reduce(state: DashboardState, action: Action): DashboardState {
  switch (action.kind) {
    case "snapshot": {
      let next = state;
      for (const summary of action.tracks) next = upsertTrack(next, summary);
      return next;
    }
    case "server":
      return applyServerEvent(state, action.event);
    case "optimistic":
      return { ...state, pending: { ...state.pending, [action.trackId]: action.verdict } };
    case "ack": {
      const pending = { ...state.pending };
      delete pending[action.trackId];
      return {
        ...state,
        pending,
        labels: { ...state.labels, [action.trackId]: action.verdict },
      };
    }
    case "rollback": {
      const pending = { ...state.pending };
      delete pending[action.trackId];
      return { ...state, pending };
    }
    case "connection":
      return { ...state, connection: action.status };
  }
}

function applyServerEvent(state: DashboardState, event: ServerEvent): DashboardState {
  let next = event.id !== null && event.id > state.lastEventId
    ? { ...state, lastEventId: event.id }
    : state;
  switch (event.type) {
    case "TrackCreated":
    case "TrackUpdated":
    case "TrackLost": {
      const summary = event.data["track"] as TrackSummary | undefined;
      if (summary) next = upsertTrack(next, summary);
      return next;
    }
    case "TrackLabeled": {
      const trackId = event.data["track_id"] as number;
      const verdict = event.data["verdict"] as Verdict;
      const pending = { ...next.pending };
      delete pending[trackId];
      return {
        ...next,
        pending,
        labels: { ...next.labels, [trackId]: verdict },
      };
    }
    case "MetricsTick":
      return { ...next, metrics: event.data["metrics"] as Metrics };
    case "gap":
      return { ...next, missedEvents: next.missedEvents + ((event.data["missed"] as number) ?? 0) };
    default:
      return next;
  }
}

/** Verdict shown on a card: pending optimistic value, else server truth. */
export function effectiveLabel(state: DashboardState, trackId: number): ReviewLabel {
  return state.pending[trackId] ?? state.labels[trackId] ?? "unreviewed";
}

/** Track ids for the feed, newest server update first. */
export function feedOrder(state: DashboardState, unreviewedOnly = false): number[] {
  const ids = Object.keys(state.tracks).map(Number);
  if (unreviewedOnly) {
    return ids
      .filter((id) => effectiveLabel(state, id) === "unreviewed")
      .sort(byFreshness(state));
  }
  return ids.sort(byFreshness(state));
}

function byFreshness(state: DashboardState) {
  return (a: number, b: number) => {
    const diff = state.tracks[b]!.updated_seq - state.tracks[a]!.updated_seq;
    return diff !== 0 ? diff : b - a;
  };
}

export function reviewCounts(state: DashboardState): { reviewed: number; unreviewed: number } {
  let reviewed = 0;
  const ids = Object.keys(state.tracks);
  for (const id of ids) {
    if (effectiveLabel(state, Number(id)) !== "unreviewed") reviewed += 1;
  }
  return { reviewed, unreviewed: ids.length - reviewed };
}
