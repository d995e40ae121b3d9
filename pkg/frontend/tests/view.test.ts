import { describe, expect, it } from "vitest";

import type { TraceRecord } from "../src/protocol.js";
import { applyRecord, applyRecords, emptyView, viewAt } from "../src/view.js";

function utterance(seq: number, t: number, speaker: "user" | "robot", text: string): TraceRecord {
  return { seq, t, kind: "utterance", payload: { speaker, text, session: "s1" } };
}

function stepChange(seq: number, t: number, step: string, status: string): TraceRecord {
  return { seq, t, kind: "step_status_change", payload: { step, status, actor: "human" } };
}

describe("view fold", () => {
  it("renders one chat line per utterance record", () => {
    const view = emptyView();
    applyRecords(view, [
      utterance(0, 1, "user", "hello"),
      utterance(1, 1, "robot", "hi there"),
    ]);
    expect(view.chat.map((l) => l.text)).toEqual(["hello", "hi there"]);
    expect(view.counters.userTurns).toBe(1);
    expect(view.counters.robotTurns).toBe(1);
  });

  it("ignores duplicate sequence numbers (at-least-once delivery)", () => {
    const view = emptyView();
    const line = utterance(7, 2, "robot", "The sun gear is on the bench.");
    applyRecord(view, line);
    applyRecord(view, line);
    applyRecord(view, { ...line });
    expect(view.chat).toHaveLength(1);
  });

  it("tracks the plan board from step records", () => {
    const view = emptyView();
    applyRecords(view, [
      stepChange(0, 0, "s01", "pending"),
      stepChange(1, 0, "s01", "ready"),
      stepChange(2, 5, "s01", "active"),
      stepChange(3, 9, "s01", "done"),
    ]);
    expect(view.board).toEqual({ s01: "done" });
  });

  it("tracks the robot badge from mode changes", () => {
    const view = emptyView();
    applyRecord(view, {
      seq: 0,
      t: 0,
      kind: "robot_event",
      payload: { event: "mode_change", mode: "executing", gripper: "sun gear" },
    });
    expect(view.robot).toEqual({ mode: "executing", gripper: "sun gear" });
  });

  it("counts failures and notes the end", () => {
    const view = emptyView();
    applyRecords(view, [
      { seq: 0, t: 3, kind: "robot_event", payload: { event: "action_failed", reason: "dropped" } },
      { seq: 1, t: 9, kind: "sim_end", payload: { reason: "completed", dropped_events: 2 } },
    ]);
    expect(view.counters.failures).toBe(1);
    expect(view.counters.ended).toBe(true);
    expect(view.counters.endReason).toBe("completed");
  });
});

describe("prefix-fold scrubbing", () => {
  const records: TraceRecord[] = [
    stepChange(0, 0, "s01", "ready"),
    utterance(1, 2, "user", "go"),
    stepChange(2, 5, "s01", "active"),
    utterance(3, 6, "robot", "working"),
    stepChange(4, 9, "s01", "done"),
    { seq: 5, t: 10, kind: "sim_end", payload: { reason: "completed" } },
  ];

  it("view at t equals fold of records with timestamp <= t", () => {
    for (const t of [0, 1, 2, 4.9, 5, 6, 8, 10]) {
      const scrubbed = viewAt(records, t);
      const manual = emptyView();
      applyRecords(
        manual,
        records.filter((r) => r.t <= t),
      );
      expect(scrubbed.chat).toEqual(manual.chat);
      expect(scrubbed.board).toEqual(manual.board);
      expect(scrubbed.counters).toEqual(manual.counters);
    }
  });

  it("is stateless: re-folding the same records reconstructs the same view", () => {
    const once = viewAt(records, 10);
    const twice = viewAt(records, 10);
    expect(twice.chat).toEqual(once.chat);
    expect(twice.board).toEqual(once.board);
    expect(twice.robot).toEqual(once.robot);
    expect(twice.counters).toEqual(once.counters);
  });
});
