// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { bindKeyboard } from "../src/keyboard.js";
import { initialState, reduce } from "../src/state.js";
import type { DashboardState } from "../src/state.js";
import type { TrackDetail } from "../src/types.js";
import { ConsoleView, attachPlaceholderFallback } from "../src/view.js";
import type { UiState, ViewHandlers } from "../src/view.js";
import { createdEvent, labeledEvent, summary } from "./helpers.js";

function ui(overrides: Partial<UiState> = {}): UiState {
  return { selected: null, unreviewedOnly: false, viewer: null, viewerIndex: 0, toasts: [], ...overrides };
}

function handlers(): ViewHandlers & { calls: string[] } {
  const calls: string[] = [];
  return {
    calls,
    submitVerdict: (id, v) => calls.push(`verdict:${id}:${v}`),
    openSequence: (id) => calls.push(`open:${id}`),
    closeSequence: () => calls.push("close"),
  };
}

function stateWithTracks(n: number): DashboardState {
  let state = initialState();
  for (let i = 0; i < n; i++) {
    state = reduce(state, { kind: "server", event: createdEvent(i, i + 1) });
  }
  return state;
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

describe("feed rendering", () => {
  it("renders one card per track, newest first", () => {
    const view = new ConsoleView(root, handlers());
    view.render(stateWithTracks(3), ui());
    const cards = [...root.querySelectorAll(".card")];
    expect(cards).toHaveLength(3);
    expect(cards.map((c) => (c as HTMLElement).dataset["track"])).toEqual(["2", "1", "0"]);
  });

  it("empty feed shows the waiting message and live metrics strip", () => {
    const view = new ConsoleView(root, handlers());
    let state = initialState();
    state = reduce(state, {
      kind: "server",
      event: {
        id: 1,
        type: "MetricsTick",
        data: {
          metrics: {
            frames_in: 7, frames_detected: 5, frames_propagated: 2, frames_dropped: 0,
            end_to_end_fps: 9.5, queue_depths: { frame_queue: 1, result_queue: 0 },
            status: "running",
          },
        },
      },
    });
    view.render(state, ui());
    expect(root.querySelector(".empty-feed")!.textContent).toContain("waiting");
    expect(root.querySelector(".metrics-strip")!.textContent).toContain("9.5");
  });

  it("verdict badge reflects optimistic then acknowledged state", () => {
    const view = new ConsoleView(root, handlers());
    let state = stateWithTracks(1);
    state = reduce(state, { kind: "optimistic", trackId: 0, verdict: "tp" });
    view.render(state, ui());
    let badge = root.querySelector(".verdict-badge")!;
    expect(badge.textContent).toBe("TP");
    expect(badge.classList.contains("pending")).toBe(true);

    state = reduce(state, { kind: "ack", trackId: 0, verdict: "tp" });
    view.render(state, ui());
    badge = root.querySelector(".verdict-badge")!;
    expect(badge.classList.contains("pending")).toBe(false);
  });

  it("rollback reverts the badge", () => {
    const view = new ConsoleView(root, handlers());
    let state = stateWithTracks(1);
    state = reduce(state, { kind: "optimistic", trackId: 0, verdict: "tp" });
    state = reduce(state, { kind: "rollback", trackId: 0 });
    view.render(state, ui());
    expect(root.querySelector(".verdict-badge")!.textContent).toBe("?");
  });

  it("labeled-latest-wins shows the final verdict", () => {
    const view = new ConsoleView(root, handlers());
    let state = stateWithTracks(1);
    state = reduce(state, { kind: "server", event: labeledEvent(0, 5, "tp") });
    state = reduce(state, { kind: "server", event: labeledEvent(0, 6, "fp") });
    view.render(state, ui());
    expect(root.querySelector(".verdict-badge")!.textContent).toBe("FP");
  });

  it("card buttons dispatch handlers", () => {
    const h = handlers();
    const view = new ConsoleView(root, h);
    view.render(stateWithTracks(1), ui());
    (root.querySelector('button[data-action="tp"]') as HTMLButtonElement).click();
    (root.querySelector('button[data-action="open"]') as HTMLButtonElement).click();
    expect(h.calls).toEqual(["verdict:0:tp", "open:0"]);
  });

  it("connection badge mirrors stream status", () => {
    const view = new ConsoleView(root, handlers());
    let state = stateWithTracks(0);
    state = reduce(state, { kind: "connection", status: "offline" });
    view.render(state, ui());
    expect(root.querySelector(".conn-badge")!.textContent).toBe("offline");
  });
});

function detail(): TrackDetail {
  return {
    summary: summary(0),
    points: [],
    crops: [
      { index: 0, frame_id: 0, provenance: "detected", confidence: 1.0, placeholder: false, url: "/api/tracks/0/crops/0" },
      { index: 1, frame_id: 3, provenance: "propagated", confidence: 1.0, placeholder: false, url: "/api/tracks/0/crops/1" },
      { index: 2, frame_id: 6, provenance: "detected", confidence: 0.8, placeholder: true, url: "/api/tracks/0/crops/2" },
    ],
  };
}

describe("sequence viewer", () => {
  it("renders tiles in frame order with provenance markers", () => {
    const view = new ConsoleView(root, handlers());
    view.render(stateWithTracks(1), ui({ viewer: detail() }));
    const tiles = [...root.querySelectorAll(".tile")];
    expect(tiles).toHaveLength(3);
    expect(tiles[0]!.classList.contains("provenance-detected")).toBe(true);
    expect(tiles[1]!.classList.contains("provenance-propagated")).toBe(true);
    expect(tiles[1]!.textContent).toContain("P");
    expect(tiles[0]!.textContent).toContain("D");
  });

  it("placeholder crops render as missing tiles, viewer stays usable", () => {
    const view = new ConsoleView(root, handlers());
    view.render(stateWithTracks(1), ui({ viewer: detail() }));
    const placeholderTile = root.querySelectorAll(".tile")[2]!;
    expect(placeholderTile.querySelector(".tile-missing")).not.toBeNull();
    expect(placeholderTile.querySelector("img")).toBeNull();
    expect(root.querySelectorAll(".tile img")).toHaveLength(2);
  });

  it("highlights the current tile from viewerIndex", () => {
    const view = new ConsoleView(root, handlers());
    view.render(stateWithTracks(1), ui({ viewer: detail(), viewerIndex: 1 }));
    const tiles = [...root.querySelectorAll(".tile")];
    expect(tiles[1]!.classList.contains("current")).toBe(true);
  });

  it("failed image loads degrade to placeholder tiles", () => {
    const img = document.createElement("img");
    document.body.append(img);
    attachPlaceholderFallback(img);
    img.dispatchEvent(new Event("error"));
    expect(document.body.querySelector(".tile-missing")).not.toBeNull();
    expect(document.body.querySelector("img")).toBeNull();
  });
});

describe("keyboard bindings", () => {
  function bound(viewerOpen = false) {
    const calls: string[] = [];
    const unbind = bindKeyboard({
      verdictSelected: (v) => calls.push(`verdict:${v}`),
      moveSelection: (d) => calls.push(`move:${d}`),
      openSelected: () => calls.push("open"),
      closeViewer: () => calls.push("close"),
      moveViewer: (d) => calls.push(`viewer:${d}`),
      toggleUnreviewed: () => calls.push("filter"),
      viewerOpen: () => viewerOpen,
    });
    return { calls, unbind };
  }

  function press(key: string, init: KeyboardEventInit = {}) {
    document.dispatchEvent(new KeyboardEvent("keydown", { key, ...init }));
  }

  it("single keys submit verdicts and navigate", () => {
    const { calls, unbind } = bound();
    press("t");
    press("f");
    press("ArrowDown");
    press("Enter");
    press("u");
    unbind();
    expect(calls).toEqual(["verdict:tp", "verdict:fp", "move:1", "open", "filter"]);
  });

  it("arrows steer the viewer when open, escape closes", () => {
    const { calls, unbind } = bound(true);
    press("ArrowRight");
    press("ArrowLeft");
    press("Escape");
    unbind();
    expect(calls).toEqual(["viewer:1", "viewer:-1", "close"]);
  });

  it("ignores modified keys and text entry", () => {
    const { calls, unbind } = bound();
    press("t", { ctrlKey: true });
    const input = document.createElement("input");
    document.body.append(input);
    input.dispatchEvent(new KeyboardEvent("keydown", { key: "t", bubbles: true }));
    unbind();
    expect(calls).toEqual([]);
  });

  it("unbind stops handling", () => {
    const { calls, unbind } = bound();
    unbind();
    press("t");
    expect(calls).toEqual([]);
  });
});

describe("console app wiring", () => {
  it("opens the sequence viewer through the API and labels optimistically", async () => {
    const { ConsoleApp } = await import("../src/main.js");
    const { ApiClient } = await import("../src/api.js");

    const det = detail();
    const fetchFn = (async (url: RequestInfo | URL, init?: RequestInit) => {
      const path = String(url);
      if (path.includes("/label")) {
        return new Response(JSON.stringify({ track_id: 0, verdict: "tp", reviewer: "", labeled_at_ms: 1 }), { status: 200 });
      }
      if (path.endsWith("/api/tracks/0")) {
        return new Response(JSON.stringify(det), { status: 200 });
      }
      throw new Error(`unexpected ${path} ${init?.method ?? "GET"}`);
    }) as typeof fetch;

    const app = new ConsoleApp(root, new ApiClient("", fetchFn));
    app.dispatch({ kind: "server", event: createdEvent(0, 1) });
    await app.openSequence(0);
    expect(root.querySelector(".viewer")).not.toBeNull();
    expect(root.querySelectorAll(".tile")).toHaveLength(3);

    app.closeSequence();
    await app.submitVerdict(0, "tp");
    expect(root.querySelector(".verdict-badge")!.textContent).toBe("TP");
  });

  it("rolls back and toasts when the server rejects a label", async () => {
    vi.useFakeTimers();
    const { ConsoleApp } = await import("../src/main.js");
    const { ApiClient } = await import("../src/api.js");
    const fetchFn = (async () =>
      new Response(JSON.stringify({ detail: "unknown track 0" }), { status: 404 })) as typeof fetch;
    const app = new ConsoleApp(root, new ApiClient("", fetchFn));
    app.dispatch({ kind: "server", event: createdEvent(0, 1) });
    await app.submitVerdict(0, "tp");
    expect(root.querySelector(".verdict-badge")!.textContent).toBe("?");
    expect(root.querySelector(".toast")!.textContent).toContain("unknown track 0");
    vi.runAllTimers();
    expect(root.querySelector(".toast")).toBeNull();
    vi.useRealTimers();
  });
});
