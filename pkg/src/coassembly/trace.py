"""Timestamped simulation traces and their newline-delimited JSON form.

Timestamps are integer sim-milliseconds internally and serialize as
seconds.  Records carry a sequence number so stream consumers can
de-duplicate after reconnects.  Serialization uses sorted keys and
compact separators, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import MalformedTrace

UTTERANCE = "utterance"
ROBOT_EVENT = "robot_event"
STEP_STATUS = "step_status_change"
DIALOGUE_OUTCOME = "dialogue_outcome"
SIM_END = "sim_end"

RECORD_KINDS = (UTTERANCE, ROBOT_EVENT, STEP_STATUS, DIALOGUE_OUTCOME, SIM_END)


def s_to_ms(seconds: float) -> int:
    return round(seconds * 1000)


def ms_to_s(ms: int) -> float:
    return ms / 1000.0


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    t_ms: int
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "t": ms_to_s(self.t_ms),
            "kind": self.kind,
            "payload": self.payload,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, raw: dict) -> "TraceRecord":
        try:
            seq = raw["seq"]
            t = raw["t"]
            kind = raw["kind"]
            payload = raw["payload"]
        except (KeyError, TypeError) as exc:
            raise MalformedTrace(f"record missing field: {exc}") from exc
        if kind not in RECORD_KINDS:
            raise MalformedTrace(f"unknown record kind {kind!r}")
        if not isinstance(payload, dict):
            raise MalformedTrace("record payload must be an object")
        return cls(seq=int(seq), t_ms=s_to_ms(float(t)), kind=kind, payload=payload)


@dataclass
class Trace:
    """Ordered record list; exactly one SimEnd record, last."""

    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def validate(self) -> None:
        if not self.records:
            raise MalformedTrace("trace has no records")
        last_t = None
        for rec in self.records:
            if last_t is not None and rec.t_ms < last_t:
                raise MalformedTrace(
                    f"timestamps decrease at seq {rec.seq}: {rec.t_ms} < {last_t}"
                )
            last_t = rec.t_ms
        ends = [r for r in self.records if r.kind == SIM_END]
        if len(ends) != 1 or self.records[-1].kind != SIM_END:
            raise MalformedTrace("trace must contain exactly one final sim_end record")

    def to_ndjson(self) -> str:
        return "".join(rec.to_json() + "\n" for rec in self.records)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Trace":
        records = []
        for i, line in enumerate(lines):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedTrace(f"line {i + 1} is not valid JSON: {exc}") from exc
            records.append(TraceRecord.from_dict(raw))
        return cls(records=records)

    @classmethod
    def load(cls, path) -> "Trace":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_lines(fh)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_ndjson())


class TraceBuilder:
    """Collects records during a run, assigning sequence numbers."""

    def __init__(self):
        self._records: list[TraceRecord] = []
        self._seq = 0
        self._listeners: list = []

    def subscribe(self, listener) -> None:
        """Register a callable invoked with each appended record."""
        self._listeners.append(listener)

    def emit(self, t_ms: int, kind: str, payload: dict) -> TraceRecord:
        rec = TraceRecord(seq=self._seq, t_ms=t_ms, kind=kind, payload=payload)
        self._seq += 1
        self._records.append(rec)
        for listener in self._listeners:
            listener(rec)
        return rec

    @property
    def records(self) -> list[TraceRecord]:
        return self._records

    def build(self) -> Trace:
        return Trace(records=list(self._records))
