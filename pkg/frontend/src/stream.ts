// NDJSON event stream handling: a pure line splitter and parser that the
// tests can drive directly, plus a consumer that reads the gateway's
// /api/stream response and reconnects with capped exponential backoff.

export interface StreamEvent {
  topic: string;
  seq: number;
  time: number;
  body: Record<string, unknown>;
}

export interface LineSplit {
  lines: string[];
  rest: string;
}

/** Reassemble complete lines across arbitrary chunk boundaries. */
export function splitLines(pending: string, chunk: string): LineSplit {
  const buffer = pending + chunk;
  const parts = buffer.split("\n");
  const rest = parts.pop() ?? "";
  return { lines: parts, rest };
}

/**
 * Parse one stream line. Heartbeat comments (leading "#") and blank lines
 * carry no event and return null; so does any line that fails to parse.
 */
export function parseStreamLine(line: string): StreamEvent | null {
  const trimmed = line.trim();
  if (trimmed === "" || trimmed.startsWith("#")) {
    return null;
  }
  let doc: unknown;
  try {
    doc = JSON.parse(trimmed);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) {
    return null;
  }
  const d = doc as Record<string, unknown>;
  if (typeof d["topic"] !== "string" || typeof d["body"] !== "object" || d["body"] === null) {
    return null;
  }
  return {
    topic: d["topic"],
    seq: typeof d["seq"] === "number" ? d["seq"] : 0,
    time: typeof d["time"] === "number" ? d["time"] : 0,
    body: d["body"] as Record<string, unknown>,
  };
}

/** Reconnect delay for the given retry attempt: 1, 2, 4, then 8s capped. */
export function backoffSeconds(attempt: number): number {
  return Math.min(8, 2 ** Math.max(0, attempt));
}

export interface StreamHandlers {
  /** A decoded event arrived. */
  onEvent(ev: StreamEvent): void;
  /** Any traffic arrived (events or heartbeats); feeds the staleness clock. */
  onAlive(): void;
  /** Connection state changed. */
  onStatus(connected: boolean): void;
}

type FetchLike = (url: string, init?: { signal?: AbortSignal }) => Promise<Response>;

export class StreamConsumer {
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(
    private readonly url: string,
    private readonly handlers: StreamHandlers,
    private readonly fetchFn: FetchLike = (u, init) => fetch(u, init),
    private readonly sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  start(): void {
    this.stopped = false;
    void this.run();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async run(): Promise<void> {
    let attempt = 0;
    while (!this.stopped) {
      try {
        this.controller = new AbortController();
        const response = await this.fetchFn(this.url, { signal: this.controller.signal });
        if (!response.ok || response.body === null) {
          throw new Error(`stream unavailable (${response.status})`);
        }
        attempt = 0;
        this.handlers.onStatus(true);
        await this.consume(response.body);
      } catch {
        // fall through to reconnect
      }
      this.handlers.onStatus(false);
      if (this.stopped) {
        return;
      }
      await this.sleep(backoffSeconds(attempt) * 1000);
      attempt += 1;
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let rest = "";
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) {
          return;
        }
        const split = splitLines(rest, decoder.decode(value, { stream: true }));
        rest = split.rest;
        for (const line of split.lines) {
          if (line.trim() !== "") {
            this.handlers.onAlive();
          }
          const ev = parseStreamLine(line);
          if (ev !== null) {
            this.handlers.onEvent(ev);
          }
        }
      }
    } finally {
      reader.releaseLock();
    }
  }
}
