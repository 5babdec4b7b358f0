import { describe, expect, test } from "vitest";

import {
  StreamConsumer,
  backoffSeconds,
  parseStreamLine,
  splitLines,
  type StreamEvent,
} from "../src/stream.js";

describe("ndjson line handling", () => {
  test("reassembles lines across arbitrary chunk boundaries", () => {
    const payload = '{"topic":"asv/asv1/pose","seq":1,"time":2,"body":{"lat":1}}\n# heartbeat 3.0\n';
    for (let cut = 0; cut <= payload.length; cut += 1) {
      let rest = "";
      const lines: string[] = [];
      for (const chunk of [payload.slice(0, cut), payload.slice(cut)]) {
        const split = splitLines(rest, chunk);
        rest = split.rest;
        lines.push(...split.lines);
      }
      expect(lines).toHaveLength(2);
      expect(rest).toBe("");
      expect(parseStreamLine(lines[0]!)?.topic).toBe("asv/asv1/pose");
    }
  });

  test("heartbeat comments and blanks carry no event", () => {
    expect(parseStreamLine("# heartbeat 12.5")).toBeNull();
    expect(parseStreamLine("")).toBeNull();
    expect(parseStreamLine("   ")).toBeNull();
  });

  test("damaged lines are dropped instead of thrown", () => {
    expect(parseStreamLine("{not json")).toBeNull();
    expect(parseStreamLine("42")).toBeNull();
    expect(parseStreamLine('{"topic":"x","body":3}')).toBeNull();
  });

  test("well-formed envelopes decode with defaults for missing numbers", () => {
    const ev = parseStreamLine('{"topic":"asv/asv1/battery","body":{"pct":88}}');
    expect(ev).not.toBeNull();
    expect(ev!.topic).toBe("asv/asv1/battery");
    expect(ev!.seq).toBe(0);
    expect(ev!.body["pct"]).toBe(88);
  });

  test("backoff doubles from one second and caps at eight", () => {
    expect([0, 1, 2, 3, 4, 10].map(backoffSeconds)).toEqual([1, 2, 4, 8, 8, 8]);
  });
});

function streamResponse(chunks: string[]): Response {
  const encoder = new TextEncoder();
  const body = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const chunk of chunks) {
        controller.enqueue(encoder.encode(chunk));
      }
      controller.close();
    },
  });
  return { ok: true, status: 200, body } as unknown as Response;
}

describe("stream consumer", () => {
  test("delivers events in order and counts heartbeats as liveness", async () => {
    const lines =
      '# heartbeat 0.0\n{"topic":"asv/asv1/pose","seq":1,"time":1,"body":{}}\n' +
      '{"topic":"asv/asv1/pose","seq":2,"time":2,"body":{}}\n';
    const events: StreamEvent[] = [];
    let alive = 0;
    const statuses: boolean[] = [];
    let connects = 0;
    const done = new Promise<void>((resolve) => {
      const consumer = new StreamConsumer(
        "ignored",
        {
          onEvent: (ev) => events.push(ev),
          onAlive: () => {
            alive += 1;
          },
          onStatus: (c) => {
            statuses.push(c);
            if (!c) {
              consumer.stop();
              resolve();
            }
          },
        },
        async () => {
          connects += 1;
          return streamResponse([lines.slice(0, 25), lines.slice(25)]);
        },
        async () => {},
      );
      consumer.start();
    });
    await done;
    expect(events.map((e) => e.seq)).toEqual([1, 2]);
    expect(alive).toBe(3); // two events plus one heartbeat comment
    expect(statuses).toEqual([true, false]);
    expect(connects).toBe(1);
  });

  test("reconnects with capped exponential backoff", async () => {
    const delays: number[] = [];
    const done = new Promise<void>((resolve) => {
      const consumer = new StreamConsumer(
        "ignored",
        {
          onEvent: () => {},
          onAlive: () => {},
          onStatus: () => {},
        },
        async () => {
          throw new Error("connection refused");
        },
        async (ms) => {
          delays.push(ms);
          if (delays.length === 5) {
            consumer.stop();
            resolve();
          }
        },
      );
      consumer.start();
    });
    await done;
    expect(delays).toEqual([1000, 2000, 4000, 8000, 8000]);
  });

  test("a successful connection resets the backoff clock", async () => {
    const delays: number[] = [];
    let call = 0;
    const done = new Promise<void>((resolve) => {
      const consumer = new StreamConsumer(
        "ignored",
        {
          onEvent: () => {},
          onAlive: () => {},
          onStatus: () => {},
        },
        async () => {
          call += 1;
          if (call <= 2) {
            throw new Error("refused");
          }
          return streamResponse(["# heartbeat 1.0\n"]); // connects, then ends
        },
        async (ms) => {
          delays.push(ms);
          if (delays.length === 4) {
            consumer.stop();
            resolve();
          }
        },
      );
      consumer.start();
    });
    await done;
    // two failures back off 1s then 2s; after the good connection ends the
    // schedule starts over at 1s
    expect(delays.slice(0, 3)).toEqual([1000, 2000, 1000]);
  });
});
