import { describe, expect, it } from "vitest";

import {
  Action,
  effectiveLabel,
  feedOrder,
  initialState,
  reduce,
  reviewCounts,
} from "../src/state.js";
import { createdEvent, labeledEvent, summary, updatedEvent } from "./helpers.js";

function replay(actions: Action[]) {
  return actions.reduce(reduce, initialState());
}

describe("state reduction", () => {
  it("is a pure function of the action log (replay determinism)", () => {
    const log: Action[] = [
      { kind: "server", event: createdEvent(0, 1) },
      { kind: "server", event: updatedEvent(0, 2) },
      { kind: "server", event: createdEvent(1, 3) },
      { kind: "optimistic", trackId: 0, verdict: "tp" },
      { kind: "server", event: labeledEvent(0, 4, "tp") },
    ];
    const a = replay(log);
    const b = replay(log);
    expect(a).toEqual(b);
    const base = initialState();
    replay(log);
    expect(base).toEqual(initialState()); // inputs never mutated
  });

  it("upserts by monotone updated_seq so snapshot + replay converge", () => {
    const snapshotFirst = replay([
      { kind: "snapshot", tracks: [summary(0, { updated_seq: 2, point_count: 5 })] },
      { kind: "server", event: createdEvent(0, 1) }, // stale (seq 1)
    ]);
    expect(snapshotFirst.tracks[0]!.point_count).toBe(5);

    const eventFirst = replay([
      { kind: "server", event: createdEvent(0, 1) },
      { kind: "snapshot", tracks: [summary(0, { updated_seq: 2, point_count: 5 })] },
    ]);
    expect(eventFirst.tracks[0]).toEqual(snapshotFirst.tracks[0]);
  });

  it("tracks the last event id for cursor resume", () => {
    const state = replay([
      { kind: "server", event: createdEvent(0, 7) },
      { kind: "server", event: { id: null, type: "MetricsTick", data: { metrics: null } } },
    ]);
    expect(state.lastEventId).toBe(7);
  });

  it("optimistic verdict shows immediately and clears on ack", () => {
    let state = replay([
      { kind: "server", event: createdEvent(3, 1) },
      { kind: "optimistic", trackId: 3, verdict: "tp" },
    ]);
    expect(effectiveLabel(state, 3)).toBe("tp");
    state = reduce(state, { kind: "ack", trackId: 3, verdict: "tp" });
    expect(state.pending[3]).toBeUndefined();
    expect(effectiveLabel(state, 3)).toBe("tp");
  });

  it("rollback restores the server label", () => {
    let state = replay([
      { kind: "server", event: createdEvent(3, 1) },
      { kind: "optimistic", trackId: 3, verdict: "fp" },
    ]);
    expect(effectiveLabel(state, 3)).toBe("fp");
    state = reduce(state, { kind: "rollback", trackId: 3 });
    expect(effectiveLabel(state, 3)).toBe("unreviewed");
  });

  it("latest server label wins, mirroring the store", () => {
    const state = replay([
      { kind: "server", event: createdEvent(0, 1) },
      { kind: "server", event: labeledEvent(0, 2, "tp") },
      { kind: "server", event: labeledEvent(0, 3, "fp") },
    ]);
    expect(effectiveLabel(state, 0)).toBe("fp");
  });

  it("gap events accumulate the missed counter", () => {
    const state = replay([
      { kind: "server", event: { id: null, type: "gap", data: { missed: 12 } } },
      { kind: "server", event: { id: null, type: "gap", data: { missed: 3 } } },
    ]);
    expect(state.missedEvents).toBe(15);
  });

  it("orders the feed newest update first", () => {
    const state = replay([
      { kind: "server", event: createdEvent(0, 1) },
      { kind: "server", event: createdEvent(1, 2) },
      { kind: "server", event: updatedEvent(0, 3) },
    ]);
    expect(feedOrder(state)).toEqual([0, 1]);
  });

  it("unreviewed filter hides labeled cards and counts them", () => {
    const state = replay([
      { kind: "server", event: createdEvent(0, 1) },
      { kind: "server", event: createdEvent(1, 2) },
      { kind: "server", event: createdEvent(2, 3) },
      { kind: "server", event: labeledEvent(1, 4, "tp") },
    ]);
    expect(feedOrder(state, true)).toEqual([2, 0]);
    expect(reviewCounts(state)).toEqual({ reviewed: 1, unreviewed: 2 });
  });

  it("metrics tick replaces the metrics block", () => {
    const metrics = { frames_in: 10, end_to_end_fps: 4.2 };
    const state = replay([
      { kind: "server", event: { id: 1, type: "MetricsTick", data: { metrics } } },
    ]);
    expect(state.metrics).toEqual(metrics);
  });
});
