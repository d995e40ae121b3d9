import { describe, expect, it } from "vitest";

import {
  makeRequest,
  parseRecordLine,
  parseResponse,
  ProtocolError,
} from "../src/protocol.js";

describe("request envelopes", () => {
  it("carries version 1 and the session", () => {
    const env = makeRequest("s1", "utterance", "hello", { mode: "conversational" });
    expect(env.version).toBe(1);
    expect(env.session).toBe("s1");
    expect(env.context.mode).toBe("conversational");
  });
});

describe("response parsing", () => {
  const valid = {
    version: 1,
    session: "s1",
    speech: "Bringing the screwdriver now.",
    follow_up: null,
    end: true,
    state_digest: "abc123",
  };

  it("accepts a documented response", () => {
    expect(parseResponse(valid).speech).toBe("Bringing the screwdriver now.");
  });

  it.each([
    [{ ...valid, version: 2 }, /version/],
    [{ ...valid, session: "" }, /session/],
    [{ ...valid, speech: "" }, /speech/],
    [{ ...valid, end: "yes" }, /end/],
    [{ ...valid, follow_up: 4 }, /follow_up/],
    [[1, 2, 3], /object/],
  ])("rejects malformed response %#", (raw, pattern) => {
    expect(() => parseResponse(raw)).toThrowError(pattern);
  });
});

describe("record parsing", () => {
  it("accepts a stream line", () => {
    const record = parseRecordLine(
      '{"seq": 3, "t": 1.5, "kind": "utterance", "payload": {"speaker": "robot", "text": "hi"}}',
    );
    expect(record.seq).toBe(3);
    expect(record.kind).toBe("utterance");
  });

  it.each([
    ["not json", /JSON/],
    ['{"seq": -1, "t": 0, "kind": "utterance", "payload": {}}', /seq/],
    ['{"seq": 0, "t": "x", "kind": "utterance", "payload": {}}', /t must/],
    ['{"seq": 0, "t": 0, "kind": "martian", "payload": {}}', /kind/],
    ['{"seq": 0, "t": 0, "kind": "utterance", "payload": 3}', /payload/],
  ])("rejects malformed record %#", (line, pattern) => {
    expect(() => parseRecordLine(line)).toThrowError(ProtocolError);
    expect(() => parseRecordLine(line)).toThrowError(pattern);
  });
});
