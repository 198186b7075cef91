// SSE consumer: EventSource handles reconnect and Last-Event-ID replay itself
// (the gateway emits id: lines); a watchdog flags a silent connection.

import type { MonitorEvent } from "./types.js";

export type ConnectionStatus = "connecting" | "live" | "stale" | "closed";

export interface StreamOptions {
  onEvent: (event: MonitorEvent) => void;
  onStatus: (status: ConnectionStatus) => void;
  staleAfterMs?: number;
}

export interface StreamHandle {
  close(): void;
}

const KINDS = ["shadow_update", "job_transition", "notification"];

export function consumeStream(baseUrl: string, options: StreamOptions): StreamHandle {
  const source = new EventSource(`${baseUrl}/v1/stream`);
  const staleAfter = options.staleAfterMs ?? 30_000;
  let watchdog: ReturnType<typeof setTimeout> | undefined;

  const armWatchdog = () => {
    if (watchdog !== undefined) clearTimeout(watchdog);
    watchdog = setTimeout(() => options.onStatus("stale"), staleAfter);
  };

  options.onStatus("connecting");
  source.onopen = () => {
    options.onStatus("live");
    armWatchdog();
  };
  source.onerror = () => {
    // EventSource retries on its own; surface a banner, never crash
    options.onStatus(source.readyState === EventSource.CLOSED ? "closed" : "connecting");
  };
  const handler = (raw: MessageEvent) => {
    armWatchdog();
    options.onStatus("live");
    try {
      options.onEvent(JSON.parse(raw.data) as MonitorEvent);
    } catch {
      // malformed frame: skip
    }
  };
  for (const kind of KINDS) source.addEventListener(kind, handler);

  return {
    close() {
      if (watchdog !== undefined) clearTimeout(watchdog);
      source.close();
      options.onStatus("closed");
    },
  };
}
