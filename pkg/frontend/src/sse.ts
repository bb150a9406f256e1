// Server-sent events over fetch streaming, with cursor resume.
//
// EventSource cannot send a query cursor on reconnect, so the stream is
// read manually: each reconnect passes ?since=<last event id> and the
// server replays exactly the missed window (or a gap marker if it has
// been evicted). Works in both the browser and Node 18+.

import type { ServerEvent } from "./types.js";

export type StreamStatus = "connecting" | "open" | "retrying" | "closed";

export interface SubscribeOptions {
  url: string;
  since?: number;
  onEvent: (ev: ServerEvent) => void;
  onStatus?: (status: StreamStatus) => void;
  retryDelayMs?: number;
  fetchFn?: typeof fetch;
}

/** Incremental parser for the text/event-stream wire format. */
export class SseParser {
  private buffer = "";
  private id: number | null = null;
  private type = "message";
  private data = "";

  push(chunk: string): ServerEvent[] {
    this.buffer += chunk;
    const events: ServerEvent[] = [];
    let newline;
    while ((newline = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, newline).replace(/\r$/, "");
      this.buffer = this.buffer.slice(newline + 1);
      if (line === "") {
        const event = this.flush();
        if (event) events.push(event);
        continue;
      }
      if (line.startsWith(":")) continue; // keepalive comment
      const sep = line.indexOf(":");
      const field = sep < 0 ? line : line.slice(0, sep);
      let value = sep < 0 ? "" : line.slice(sep + 1);
      if (value.startsWith(" ")) value = value.slice(1);
      if (field === "id") {
        const parsed = Number.parseInt(value, 10);
        this.id = Number.isNaN(parsed) ? null : parsed;
      } else if (field === "event") {
        this.type = value;
      } else if (field === "data") {
        this.data += (this.data ? "\n" : "") + value;
      }
    }
    return events;
  }

  private flush(): ServerEvent | null {
    if (!this.data && this.type === "message") {
      this.id = null;
      return null;
    }
    let parsed: Record<string, unknown> = {};
    try {
      parsed = this.data ? (JSON.parse(this.data) as Record<string, unknown>) : {};
    } catch {
      parsed = { raw: this.data };
    }
    const event: ServerEvent = { id: this.id, type: this.type, data: parsed };
    this.id = null;
    this.type = "message";
    this.data = "";
    return event;
  }
}

/**
 * Subscribe to the event stream; returns an unsubscribe function.
 * Reconnects automatically from the last seen event id, so a network blip
 * never duplicates or silently skips events the server still holds.
 */
export function subscribeEvents(options: SubscribeOptions): () => void {
  const fetchFn = options.fetchFn ?? fetch;
  const retryDelayMs = options.retryDelayMs ?? 1500;
  const controller = new AbortController();
  let cursor = options.since ?? 0;
  let closed = false;

  const report = (status: StreamStatus) => {
    if (!closed) options.onStatus?.(status);
  };

  const loop = async () => {
    while (!closed) {
      report("connecting");
      try {
        const resp = await fetchFn(`${options.url}?since=${cursor}`, {
          signal: controller.signal,
          headers: { accept: "text/event-stream" },
        });
        if (!resp.ok || !resp.body) throw new Error(`stream http ${resp.status}`);
        report("open");
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          for (const event of parser.push(decoder.decode(value, { stream: true }))) {
            if (event.id !== null) cursor = event.id;
            options.onEvent(event);
          }
        }
      } catch {
        // fall through to retry below
      }
      if (closed) break;
      report("retrying");
      await new Promise((resolve) => setTimeout(resolve, retryDelayMs));
    }
  };
  void loop();

  return () => {
    closed = true;
    controller.abort();
    options.onStatus?.("closed");
  };
}
