import { describe, expect, it } from "vitest";

import type { TraceRecord } from "../src/protocol.js";
import { StreamClient } from "../src/stream.js";
import { applyRecord, emptyView } from "../src/view.js";
import { ndjsonResponse } from "./helpers.js";

function utteranceLine(seq: number, text: string): string {
  return JSON.stringify({
    seq,
    t: seq,
    kind: "utterance",
    payload: { speaker: "robot", text, session: "s1" },
  });
}

describe("stream client", () => {
  it("delivers records in order and advances its cursor", async () => {
    const seen: TraceRecord[] = [];
    const client = new StreamClient({
      baseUrl: "http://fake",
      onRecord: (r) => seen.push(r),
      fetchImpl: async () => ndjsonResponse([utteranceLine(0, "a"), utteranceLine(1, "b")]),
      maxRetries: 0,
    });
    await client.run();
    expect(seen.map((r) => r.payload.text)).toEqual(["a", "b"]);
    expect(client.nextSeq).toBe(2);
  });

  it("reconnects from its cursor and overlapping redelivery stays idempotent", async () => {
    // first connection dies mid-stream; the retry re-serves an overlap
    const statuses: string[] = [];
    const view = emptyView();
    let connection = 0;
    const all = [utteranceLine(0, "a"), utteranceLine(1, "b"), utteranceLine(2, "c")];
    const client = new StreamClient({
      baseUrl: "http://fake",
      onRecord: (r) => applyRecord(view, r),
      onStatus: (s) => statuses.push(s),
      retryDelayMs: 1,
      maxRetries: 3,
      fetchImpl: async (input) => {
        connection += 1;
        const since = Number(new URL(String(input)).searchParams.get("since"));
        if (connection === 1) {
          // deliver two records then drop the connection
          return ndjsonResponse(all, 2);
        }
        // at-least-once: resend from one BEFORE the requested cursor
        const overlapFrom = Math.max(0, since - 1);
        return ndjsonResponse(all.slice(overlapFrom));
      },
    });
    await client.run();
    expect(statuses).toContain("disconnected");
    expect(statuses[statuses.length - 1]).toBe("closed");
    // despite redelivery of seq 1, each chat line rendered exactly once
    expect(view.chat.map((l) => l.text)).toEqual(["a", "b", "c"]);
  });

  it("gives up after max retries", async () => {
    const statuses: string[] = [];
    const client = new StreamClient({
      baseUrl: "http://fake",
      onRecord: () => undefined,
      onStatus: (s) => statuses.push(s),
      retryDelayMs: 1,
      maxRetries: 2,
      fetchImpl: async () => {
        throw new Error("backend down");
      },
    });
    await client.run();
    expect(statuses.filter((s) => s === "disconnected")).toHaveLength(3);
  });
});
