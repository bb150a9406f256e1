// DOM rendering for the review console. No framework: state is small and
// the whole feed re-renders on change; thumbnails keep their URLs so the
// browser cache does the heavy lifting.

import type { DashboardState } from "./state.js";
import { effectiveLabel, feedOrder, reviewCounts } from "./state.js";
import type { TrackDetail, Verdict } from "./types.js";

export interface UiState {
  selected: number | null;
  unreviewedOnly: boolean;
  viewer: TrackDetail | null;
  viewerIndex: number;
  toasts: string[];
}

export interface ViewHandlers {
  submitVerdict(trackId: number, verdict: Verdict): void;
  openSequence(trackId: number): void;
  closeSequence(): void;
}

export class ConsoleView {
  constructor(
    private root: HTMLElement,
    private handlers: ViewHandlers,
  ) {}

  render(state: DashboardState, ui: UiState): void {
    this.root.replaceChildren(
      this.header(state),
      ui.viewer ? this.sequenceViewer(ui) : this.feed(state, ui),
      this.toasts(ui),
    );
  }

  private header(state: DashboardState): HTMLElement {
    const header = el("header", "console-header");
    const title = el("h1");
    title.textContent = "reef survey console";
    header.append(title, this.connectionBadge(state), this.metricsStrip(state));
    return header;
  }

  private connectionBadge(state: DashboardState): HTMLElement {
    const badge = el("span", `conn-badge conn-${state.connection}`);
    badge.textContent = state.connection;
    return badge;
  }

  private metricsStrip(state: DashboardState): HTMLElement {
    const strip = el("div", "metrics-strip");
    const m = state.metrics;
    const counts = reviewCounts(state);
    const cells: Array<[string, string]> = m
      ? [
          ["fps", m.end_to_end_fps.toFixed(1)],
          ["frames", String(m.frames_in)],
          ["detected", String(m.frames_detected)],
          ["propagated", String(m.frames_propagated)],
          ["dropped", String(m.frames_dropped)],
          ["queues", `${m.queue_depths.frame_queue}/${m.queue_depths.result_queue}`],
        ]
      : [["fps", "—"]];
    cells.push(["reviewed", `${counts.reviewed}/${counts.reviewed + counts.unreviewed}`]);
    if (state.missedEvents > 0) cells.push(["missed", String(state.missedEvents)]);
    for (const [label, value] of cells) {
      const cell = el("span", "metric");
      const name = el("small");
      name.textContent = label;
      const val = el("strong");
      val.textContent = value;
      cell.append(name, val);
      strip.append(cell);
    }
    return strip;
  }

  private feed(state: DashboardState, ui: UiState): HTMLElement {
    const feed = el("section", "feed");
    const order = feedOrder(state, ui.unreviewedOnly);
    if (ui.unreviewedOnly) feed.classList.add("filtered");
    if (order.length === 0) {
      const empty = el("p", "empty-feed");
      empty.textContent = ui.unreviewedOnly
        ? "no unreviewed tracks"
        : "no tracks yet — waiting for detections";
      feed.append(empty);
      return feed;
    }
    for (const trackId of order) {
      feed.append(this.card(state, ui, trackId));
    }
    return feed;
  }

  private card(state: DashboardState, ui: UiState, trackId: number): HTMLElement {
    const summary = state.tracks[trackId]!;
    const label = effectiveLabel(state, trackId);
    const card = el("article", `card verdict-${label}`);
    card.dataset["track"] = String(trackId);
    if (ui.selected === trackId) card.classList.add("selected");

    const thumb = el("img", "thumb") as HTMLImageElement;
    thumb.src = `/api/tracks/${trackId}/crops/0`;
    thumb.alt = `track ${trackId}`;
    attachPlaceholderFallback(thumb);

    const body = el("div", "card-body");
    const titleRow = el("div", "card-title");
    const name = el("strong");
    name.textContent = `track ${trackId}`;
    const stateBadge = el("span", `state-badge state-${summary.state}`);
    stateBadge.textContent = summary.state;
    const verdictBadge = el("span", `verdict-badge verdict-${label}`);
    verdictBadge.textContent = label === "unreviewed" ? "?" : label.toUpperCase();
    if (trackId in state.pending) verdictBadge.classList.add("pending");
    titleRow.append(name, stateBadge, verdictBadge);

    const meta = el("div", "card-meta");
    const geo = summary.geo ? ` · ${summary.geo.lat.toFixed(4)}, ${summary.geo.lon.toFixed(4)}` : "";
    meta.textContent =
      `${summary.point_count} pts · frames ${summary.first_frame_id}–${summary.last_frame_id}` +
      ` · conf ${summary.best_confidence.toFixed(2)}${geo}`;

    const actions = el("div", "card-actions");
    actions.append(
      this.actionButton("TP", "tp", () => this.handlers.submitVerdict(trackId, "tp")),
      this.actionButton("FP", "fp", () => this.handlers.submitVerdict(trackId, "fp")),
      this.actionButton("sequence", "open", () => this.handlers.openSequence(trackId)),
    );

    body.append(titleRow, meta, actions);
    card.append(thumb, body);
    return card;
  }

  private actionButton(text: string, action: string, onClick: () => void): HTMLElement {
    const button = el("button", `action-${action}`) as HTMLButtonElement;
    button.textContent = text;
    button.dataset["action"] = action;
    button.addEventListener("click", (ev) => {
      ev.stopPropagation();
      onClick();
    });
    return button;
  }

  private sequenceViewer(ui: UiState): HTMLElement {
    const detail = ui.viewer!;
    const viewer = el("section", "viewer");
    const bar = el("div", "viewer-bar");
    const title = el("strong");
    title.textContent = `track ${detail.summary.track_id} — ${detail.crops.length} crops`;
    const hint = el("small", "viewer-hint");
    hint.textContent = "←/→ navigate · t/f verdict · esc close";
    const close = this.actionButton("close", "close", () => this.handlers.closeSequence());
    bar.append(title, hint, close);
    viewer.append(bar);

    const strip = el("div", "tiles");
    detail.crops.forEach((crop, i) => {
      const tile = el("figure", `tile provenance-${crop.provenance}`);
      if (i === ui.viewerIndex) tile.classList.add("current");
      if (crop.placeholder) {
        tile.classList.add("placeholder");
        const blank = el("div", "tile-missing");
        blank.textContent = "frame evicted";
        tile.append(blank);
      } else {
        const img = el("img") as HTMLImageElement;
        img.src = crop.url;
        img.alt = `frame ${crop.frame_id}`;
        attachPlaceholderFallback(img);
        tile.append(img);
      }
      const caption = el("figcaption");
      const marker = crop.provenance === "detected" ? "D" : "P";
      caption.textContent = `#${crop.frame_id} ${marker} ${crop.confidence.toFixed(2)}`;
      tile.append(caption);
      strip.append(tile);
    });
    viewer.append(strip);
    return viewer;
  }

  private toasts(ui: UiState): HTMLElement {
    const wrap = el("div", "toasts");
    for (const message of ui.toasts) {
      const toast = el("div", "toast");
      toast.textContent = message;
      wrap.append(toast);
    }
    return wrap;
  }
}

/** Swap a broken image for a gray placeholder tile without losing layout. */
export function attachPlaceholderFallback(img: HTMLImageElement): void {
  img.addEventListener("error", () => {
    const placeholder = el("div", "tile-missing");
    placeholder.textContent = "unavailable";
    img.replaceWith(placeholder);
  });
}

function el(tag: string, className = ""): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}
