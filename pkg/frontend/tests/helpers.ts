// Shared test fakes: an in-memory backend speaking the documented protocol.

import type { TraceRecord } from "../src/protocol.js";

export function ndjsonResponse(lines: string[], failAfter = -1): Response {
  const body = new ReadableStream<Uint8Array>({
    start(controller) {
      const encoder = new TextEncoder();
      lines.forEach((line, index) => {
        if (failAfter >= 0 && index >= failAfter) {
          return;
        }
        controller.enqueue(encoder.encode(line + "\n"));
      });
      if (failAfter >= 0) {
        controller.error(new Error("connection reset"));
      } else {
        controller.close();
      }
    },
  });
  return new Response(body, {
    status: 200,
    headers: { "Content-Type": "application/x-ndjson" },
  });
}

export interface FakeBackend {
  records: TraceRecord[];
  fetchImpl: typeof fetch;
  pushRecord(kind: TraceRecord["kind"], t: number, payload: Record<string, unknown>): TraceRecord;
  skillCalls: Array<Record<string, unknown>>;
}

/**
 * Minimal protocol-faithful backend: /skill acknowledges a delivery
 * request and logs the exchange as stream records; /stream serves the
 * record log filtered by `since`.
 */
export function createFakeBackend(): FakeBackend {
  const records: TraceRecord[] = [];
  const skillCalls: Array<Record<string, unknown>> = [];
  let seq = 0;
  let clock = 0;

  const pushRecord = (
    kind: TraceRecord["kind"],
    t: number,
    payload: Record<string, unknown>,
  ): TraceRecord => {
    clock = Math.max(clock, t);
    const record: TraceRecord = { seq: seq++, t, kind, payload };
    records.push(record);
    return record;
  };

  const fetchImpl: typeof fetch = async (input, init) => {
    const url = new URL(String(input), "http://fake");
    if (url.pathname === "/skill") {
      const body = JSON.parse(String(init?.body)) as Record<string, unknown>;
      skillCalls.push(body);
      const text = String(body.text ?? "");
      const session = String(body.session ?? "");
      clock += 1;
      pushRecord("utterance", clock, { speaker: "user", text, session });
      const speech = text.startsWith("bring me the")
        ? `Bringing the ${text.replace("bring me the ", "")} now.`
        : "I am idle and ready to help.";
      pushRecord("utterance", clock, { speaker: "robot", text: speech, session });
      return Response.json({
        version: 1,
        session,
        speech,
        follow_up: null,
        end: true,
        state_digest: "f4ceb00c0de1",
      });
    }
    if (url.pathname === "/state") {
      return Response.json({
        t: clock,
        mode: "conversational",
        steps: { s01: "active" },
        items: { sun_gear: "storage" },
        robot: { mode: "idle", action: null, gripper: null },
      });
    }
    if (url.pathname === "/metrics") {
      return Response.json({
        execution_time: clock,
        robot_busy: 0,
        robot_downtime: 0,
        non_accountable_idle: clock,
        user_turns: skillCalls.length,
        robot_turns: skillCalls.length,
        slot_prompts: 0,
        failures: 0,
        dropped_events: 0,
      });
    }
    if (url.pathname === "/stream") {
      const since = Number(url.searchParams.get("since") ?? "0");
      const lines = records.filter((r) => r.seq >= since).map((r) => JSON.stringify(r));
      return ndjsonResponse(lines);
    }
    return Response.json({ error: "not_found", detail: url.pathname }, { status: 404 });
  };

  return { records, fetchImpl, pushRecord, skillCalls };
}
