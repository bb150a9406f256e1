// Application controller: wires the API client, the event stream, the
// pure state reduction, and the DOM view together.

import { ApiClient, ApiError } from "./api.js";
import { bindKeyboard } from "./keyboard.js";
import { subscribeEvents } from "./sse.js";
import type { Action, DashboardState } from "./state.js";
import { effectiveLabel, feedOrder, initialState, reduce } from "./state.js";
import type { UiState } from "./view.js";
import { ConsoleView } from "./view.js";
import type { Verdict } from "./types.js";

const TOAST_MS = 4000;

export class ConsoleApp {
  state: DashboardState = initialState();
  ui: UiState = { selected: null, unreviewedOnly: false, viewer: null, viewerIndex: 0, toasts: [] };
  private view: ConsoleView;
  private unsubscribe: (() => void) | null = null;
  private unbindKeys: (() => void) | null = null;

  constructor(
    root: HTMLElement,
    private api: ApiClient = new ApiClient(),
    private eventsUrl = "/api/events",
  ) {
    this.view = new ConsoleView(root, {
      submitVerdict: (trackId, verdict) => void this.submitVerdict(trackId, verdict),
      openSequence: (trackId) => void this.openSequence(trackId),
      closeSequence: () => this.closeSequence(),
    });
  }

  async start(): Promise<void> {
    this.unbindKeys = bindKeyboard({
      verdictSelected: (verdict) => {
        const target = this.ui.viewer?.summary.track_id ?? this.ui.selected ?? feedOrder(this.state, this.ui.unreviewedOnly)[0];
        if (target !== undefined) void this.submitVerdict(target, verdict);
      },
      moveSelection: (delta) => this.moveSelection(delta),
      openSelected: () => {
        const target = this.ui.selected ?? feedOrder(this.state, this.ui.unreviewedOnly)[0];
        if (target !== undefined) void this.openSequence(target);
      },
      closeViewer: () => this.closeSequence(),
      moveViewer: (delta) => this.moveViewer(delta),
      toggleUnreviewed: () => {
        this.ui.unreviewedOnly = !this.ui.unreviewedOnly;
        this.render();
      },
      viewerOpen: () => this.ui.viewer !== null,
    });
    await this.refreshSnapshot();
    this.subscribe();
    this.render();
  }

  stop(): void {
    this.unsubscribe?.();
    this.unbindKeys?.();
  }

  dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    this.render();
  }

  private subscribe(): void {
    this.unsubscribe = subscribeEvents({
      url: this.eventsUrl,
      since: this.state.lastEventId,
      onEvent: (event) => {
        this.dispatch({ kind: "server", event });
        if (event.type === "gap") void this.refreshSnapshot();
      },
      onStatus: (status) => {
        const connection =
          status === "open" ? "live" : status === "connecting" ? "connecting" : "offline";
        this.dispatch({ kind: "connection", status: connection });
      },
    });
  }

  private async refreshSnapshot(): Promise<void> {
    try {
      const page = await this.api.listTracks({ pageSize: 500 });
      this.dispatch({ kind: "snapshot", tracks: page.tracks });
      const stats = await this.api.stats();
      this.dispatch({
        kind: "server",
        event: { id: null, type: "MetricsTick", data: { metrics: stats.metrics } },
      });
    } catch {
      this.dispatch({ kind: "connection", status: "offline" });
    }
  }

  async submitVerdict(trackId: number, verdict: Verdict): Promise<void> {
    this.dispatch({ kind: "optimistic", trackId, verdict });
    try {
      const ack = await this.api.labelTrack(trackId, verdict, "console");
      this.dispatch({ kind: "ack", trackId, verdict: ack.verdict });
    } catch (err) {
      this.dispatch({ kind: "rollback", trackId });
      const detail = err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
      this.toast(`label failed — ${detail}`);
    }
  }

  async openSequence(trackId: number): Promise<void> {
    try {
      this.ui.viewer = await this.api.getTrack(trackId);
      this.ui.viewerIndex = 0;
      this.render();
    } catch (err) {
      const detail = err instanceof ApiError ? err.message : String(err);
      this.toast(`cannot open track ${trackId} — ${detail}`);
    }
  }

  closeSequence(): void {
    this.ui.viewer = null;
    this.render();
  }

  private moveSelection(delta: number): void {
    const order = feedOrder(this.state, this.ui.unreviewedOnly);
    if (order.length === 0) return;
    const current = this.ui.selected !== null ? order.indexOf(this.ui.selected) : -1;
    const next = Math.min(Math.max(current + delta, 0), order.length - 1);
    this.ui.selected = order[next]!;
    this.render();
  }

  private moveViewer(delta: number): void {
    if (!this.ui.viewer) return;
    const count = this.ui.viewer.crops.length;
    if (count === 0) return;
    this.ui.viewerIndex = Math.min(Math.max(this.ui.viewerIndex + delta, 0), count - 1);
    this.render();
  }

  private toast(message: string): void {
    this.ui.toasts = [...this.ui.toasts, message];
    this.render();
    setTimeout(() => {
      this.ui.toasts = this.ui.toasts.filter((m) => m !== message);
      this.render();
    }, TOAST_MS);
  }

  render(): void {
    // drop selection if the filter hid the card
    if (this.ui.selected !== null && effectiveLabel(this.state, this.ui.selected) !== "unreviewed"
        && this.ui.unreviewedOnly) {
      this.ui.selected = null;
    }
    this.view.render(this.state, this.ui);
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (root) {
    const app = new ConsoleApp(root);
    void app.start();
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
