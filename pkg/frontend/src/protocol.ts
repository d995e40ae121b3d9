// Wire types for the coassembly backend, mirroring protocol.md (version 1).
// Parsing is strict: records and envelopes that do not match the documented
// shape are rejected with a descriptive error.

export const ENVELOPE_VERSION = 1;

export type RequestKind = "utterance" | "slot-answer" | "control";

export interface RequestEnvelope {
  version: number;
  session: string;
  kind: RequestKind;
  text: string;
  context: Record<string, unknown>;
}

export interface ResponseEnvelope {
  version: number;
  session: string;
  speech: string;
  follow_up: string | null;
  end: boolean;
  state_digest: string;
}

export type RecordKind =
  | "utterance"
  | "robot_event"
  | "step_status_change"
  | "dialogue_outcome"
  | "sim_end";

export interface TraceRecord {
  seq: number;
  t: number; // sim-seconds
  kind: RecordKind;
  payload: Record<string, unknown>;
}

export type RobotMode = "idle" | "executing" | "blocked" | "faulted";

export type StepStatus = "pending" | "ready" | "active" | "done" | "failed";

export interface StateSnapshot {
  t: number;
  mode: string;
  steps: Record<string, StepStatus>;
  items: Record<string, string>;
  robot: {
    mode: RobotMode;
    action: { kind: string; item: string | null; step: string | null } | null;
    gripper: string | null;
  };
  sessions?: Record<string, string>;
  ended?: boolean;
  digest?: string;
}

export interface MetricsSnapshot {
  execution_time: number;
  robot_busy: number;
  robot_downtime: number;
  non_accountable_idle: number;
  user_turns: number;
  robot_turns: number;
  slot_prompts: number;
  failures: number;
  dropped_events: number;
}

const RECORD_KINDS: ReadonlySet<string> = new Set([
  "utterance",
  "robot_event",
  "step_status_change",
  "dialogue_outcome",
  "sim_end",
]);

export class ProtocolError extends Error {}

export function makeRequest(
  session: string,
  kind: RequestKind,
  text: string,
  context: Record<string, unknown> = {},
): RequestEnvelope {
  return { version: ENVELOPE_VERSION, session, kind, text, context };
}

export function parseResponse(raw: unknown): ResponseEnvelope {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ProtocolError("response body must be a JSON object");
  }
  const body = raw as Record<string, unknown>;
  if (body.version !== ENVELOPE_VERSION) {
    throw new ProtocolError(`unsupported envelope version ${String(body.version)}`);
  }
  if (typeof body.session !== "string" || body.session === "") {
    throw new ProtocolError("session must be a non-empty string");
  }
  if (typeof body.speech !== "string" || body.speech === "") {
    throw new ProtocolError("speech must be a non-empty string");
  }
  if (body.follow_up !== null && typeof body.follow_up !== "string") {
    throw new ProtocolError("follow_up must be a string or null");
  }
  if (typeof body.end !== "boolean") {
    throw new ProtocolError("end must be a boolean");
  }
  if (typeof body.state_digest !== "string") {
    throw new ProtocolError("state_digest must be a string");
  }
  return {
    version: ENVELOPE_VERSION,
    session: body.session,
    speech: body.speech,
    follow_up: body.follow_up,
    end: body.end,
    state_digest: body.state_digest,
  };
}

export function parseRecord(raw: unknown): TraceRecord {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ProtocolError("trace record must be a JSON object");
  }
  const body = raw as Record<string, unknown>;
  if (typeof body.seq !== "number" || !Number.isInteger(body.seq) || body.seq < 0) {
    throw new ProtocolError("record seq must be a non-negative integer");
  }
  if (typeof body.t !== "number" || !Number.isFinite(body.t)) {
    throw new ProtocolError("record t must be a finite number");
  }
  if (typeof body.kind !== "string" || !RECORD_KINDS.has(body.kind)) {
    throw new ProtocolError(`unknown record kind ${String(body.kind)}`);
  }
  if (typeof body.payload !== "object" || body.payload === null || Array.isArray(body.payload)) {
    throw new ProtocolError("record payload must be an object");
  }
  return {
    seq: body.seq,
    t: body.t,
    kind: body.kind as RecordKind,
    payload: body.payload as Record<string, unknown>,
  };
}

export function parseRecordLine(line: string): TraceRecord {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`record line is not valid JSON: ${String(err)}`);
  }
  return parseRecord(raw);
}
