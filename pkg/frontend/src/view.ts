// View model: a pure fold of trace records (plus optional /state snapshots).
// No business logic lives here -- the view only restates what the server
// already said, which is what makes refresh-and-replay reconstruction exact.

import type { StateSnapshot, StepStatus, TraceRecord } from "./protocol.js";

export interface ChatLine {
  seq: number;
  t: number;
  speaker: "user" | "robot";
  text: string;
  session: string;
}

export interface RobotBadge {
  mode: string;
  gripper: string | null;
}

export interface ReplayCounters {
  t: number;
  userTurns: number;
  robotTurns: number;
  failures: number;
  ended: boolean;
  endReason: string | null;
}

export interface ViewModel {
  chat: ChatLine[];
  board: Record<string, StepStatus>;
  robot: RobotBadge;
  counters: ReplayCounters;
  seenSeqs: Set<number>;
}

export function emptyView(): ViewModel {
  return {
    chat: [],
    board: {},
    robot: { mode: "idle", gripper: null },
    counters: { t: 0, userTurns: 0, robotTurns: 0, failures: 0, ended: false, endReason: null },
    seenSeqs: new Set(),
  };
}

/** Seed the board and badge from a /state snapshot (live mode bootstrap). */
export function applySnapshot(view: ViewModel, snapshot: StateSnapshot): ViewModel {
  view.board = { ...snapshot.steps };
  view.robot = { mode: snapshot.robot.mode, gripper: snapshot.robot.gripper };
  view.counters.t = snapshot.t;
  return view;
}

/**
 * Apply one stream record. Duplicate sequence numbers (at-least-once
 * delivery, reconnects) are ignored, so every chat line corresponds to
 * exactly one utterance record. When `ownSession` is given, utterances
 * belonging to other console sessions are skipped (the backend copies
 * robot-initiated turns to every open session).
 */
export function applyRecord(
  view: ViewModel,
  record: TraceRecord,
  ownSession?: string,
): ViewModel {
  if (view.seenSeqs.has(record.seq)) {
    return view;
  }
  view.seenSeqs.add(record.seq);
  view.counters.t = Math.max(view.counters.t, record.t);
  switch (record.kind) {
    case "utterance": {
      if (ownSession !== undefined && record.payload.session !== ownSession) {
        break;
      }
      const speaker = record.payload.speaker === "user" ? "user" : "robot";
      view.chat.push({
        seq: record.seq,
        t: record.t,
        speaker,
        text: String(record.payload.text ?? ""),
        session: String(record.payload.session ?? ""),
      });
      if (speaker === "user") {
        view.counters.userTurns += 1;
      } else {
        view.counters.robotTurns += 1;
      }
      break;
    }
    case "robot_event": {
      const event = record.payload.event;
      if (event === "mode_change") {
        view.robot = {
          mode: String(record.payload.mode ?? "idle"),
          gripper: (record.payload.gripper as string | null) ?? null,
        };
      } else if (event === "action_failed") {
        view.counters.failures += 1;
      }
      break;
    }
    case "step_status_change": {
      const step = String(record.payload.step ?? "");
      if (step) {
        view.board[step] = String(record.payload.status ?? "pending") as StepStatus;
      }
      break;
    }
    case "sim_end": {
      view.counters.ended = true;
      view.counters.endReason = String(record.payload.reason ?? "");
      break;
    }
    case "dialogue_outcome":
      break;
  }
  return view;
}

export function applyRecords(view: ViewModel, records: Iterable<TraceRecord>): ViewModel {
  for (const record of records) {
    applyRecord(view, record);
  }
  return view;
}

/** The view at time t: a prefix-fold of records with timestamp <= t. */
export function viewAt(records: readonly TraceRecord[], t: number): ViewModel {
  const view = emptyView();
  for (const record of records) {
    if (record.t <= t) {
      applyRecord(view, record);
    }
  }
  return view;
}
