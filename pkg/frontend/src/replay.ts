// Trace replay: parse a saved trace file and scrub/play it on a timeline.

import { ProtocolError, parseRecordLine, type TraceRecord } from "./protocol.js";
import { emptyView, viewAt, type ViewModel } from "./view.js";

export class ReplayParseError extends Error {
  constructor(
    public readonly recordIndex: number,
    detail: string,
  ) {
    super(`record ${recordIndex}: ${detail}`);
  }
}

/** Parse a whole NDJSON trace; halts with the failing record index. */
export function parseTrace(text: string): TraceRecord[] {
  const records: TraceRecord[] = [];
  const lines = text.split("\n");
  let index = 0;
  for (const rawLine of lines) {
    const line = rawLine.trim();
    if (!line) {
      continue;
    }
    try {
      records.push(parseRecordLine(line));
    } catch (err) {
      if (err instanceof ProtocolError) {
        throw new ReplayParseError(index, err.message);
      }
      throw err;
    }
    index += 1;
  }
  if (records.length === 0) {
    throw new ReplayParseError(0, "trace file is empty");
  }
  return records;
}

export interface ReplayEngine {
  readonly records: readonly TraceRecord[];
  readonly duration: number;
  at(t: number): ViewModel;
  /** Step playback forward by wall dt at `speed`; returns the new view. */
  advance(wallDtMs: number, speed: number): ViewModel;
  seek(t: number): ViewModel;
  readonly position: number;
  readonly finished: boolean;
}

export function createReplay(records: readonly TraceRecord[]): ReplayEngine {
  const duration = records.length ? records[records.length - 1].t : 0;
  let position = 0;
  return {
    records,
    duration,
    at(t: number): ViewModel {
      return viewAt(records, t);
    },
    advance(wallDtMs: number, speed: number): ViewModel {
      position = Math.min(duration, position + (wallDtMs / 1000) * speed);
      return viewAt(records, position);
    },
    seek(t: number): ViewModel {
      position = Math.max(0, Math.min(duration, t));
      return viewAt(records, position);
    },
    get position(): number {
      return position;
    },
    get finished(): boolean {
      return position >= duration;
    },
  };
}

/** Convenience: fully replayed view (equals seeking to the end). */
export function replayToEnd(records: readonly TraceRecord[]): ViewModel {
  if (records.length === 0) {
    return emptyView();
  }
  return viewAt(records, records[records.length - 1].t);
}
