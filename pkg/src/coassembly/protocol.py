"""Version-1 JSON wire envelopes between front-ends, dialogue engine and skill.

Field names are frozen; see protocol.md at the repository root.  Parsing
is strict: unknown fields, wrong types and version mismatches are all
rejected with `BadEnvelope` / `ProtocolViolation`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import BadEnvelope, ProtocolViolation

ENVELOPE_VERSION = 1

REQUEST_KINDS = ("utterance", "slot-answer", "control")

_REQUEST_FIELDS = {"version", "session", "kind", "text", "context"}
_RESPONSE_FIELDS = {"version", "session", "speech", "follow_up", "end", "state_digest"}


@dataclass(frozen=True)
class RequestEnvelope:
    """A front-end or dispatch request addressed to the skill back-end."""

    session: str
    kind: str
    text: str
    context: dict = field(default_factory=dict)
    version: int = ENVELOPE_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "session": self.session,
            "kind": self.kind,
            "text": self.text,
            "context": dict(self.context),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, raw: object) -> "RequestEnvelope":
        if not isinstance(raw, dict):
            raise BadEnvelope("request body must be a JSON object")
        unknown = set(raw) - _REQUEST_FIELDS
        if unknown:
            raise BadEnvelope(f"unknown request fields: {sorted(unknown)}")
        missing = _REQUEST_FIELDS - set(raw)
        if missing:
            raise BadEnvelope(f"missing request fields: {sorted(missing)}")
        if raw["version"] != ENVELOPE_VERSION:
            raise BadEnvelope(f"unsupported envelope version {raw['version']!r}")
        if not isinstance(raw["session"], str) or not raw["session"]:
            raise BadEnvelope("session must be a non-empty string")
        if raw["kind"] not in REQUEST_KINDS:
            raise BadEnvelope(f"kind must be one of {REQUEST_KINDS}")
        if not isinstance(raw["text"], str):
            raise BadEnvelope("text must be a string")
        if not isinstance(raw["context"], dict):
            raise BadEnvelope("context must be an object")
        return cls(
            session=raw["session"],
            kind=raw["kind"],
            text=raw["text"],
            context=dict(raw["context"]),
        )

    @classmethod
    def from_json(cls, data: str) -> "RequestEnvelope":
        try:
            raw = json.loads(data)
        except json.JSONDecodeError as exc:
            raise BadEnvelope(f"request is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)


@dataclass(frozen=True)
class ResponseEnvelope:
    """The skill back-end's reply: speech plus conversation control flags."""

    session: str
    speech: str
    end: bool = False
    follow_up: str | None = None
    state_digest: str = ""
    version: int = ENVELOPE_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "session": self.session,
            "speech": self.speech,
            "follow_up": self.follow_up,
            "end": self.end,
            "state_digest": self.state_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, raw: object) -> "ResponseEnvelope":
        if not isinstance(raw, dict):
            raise ProtocolViolation("response body must be a JSON object")
        unknown = set(raw) - _RESPONSE_FIELDS
        if unknown:
            raise ProtocolViolation(f"unknown response fields: {sorted(unknown)}")
        missing = _RESPONSE_FIELDS - set(raw)
        if missing:
            raise ProtocolViolation(f"missing response fields: {sorted(missing)}")
        if raw["version"] != ENVELOPE_VERSION:
            raise ProtocolViolation(f"unsupported envelope version {raw['version']!r}")
        if not isinstance(raw["session"], str) or not raw["session"]:
            raise ProtocolViolation("session must be a non-empty string")
        if not isinstance(raw["speech"], str) or not raw["speech"]:
            raise ProtocolViolation("speech must be a non-empty string")
        if raw["follow_up"] is not None and not isinstance(raw["follow_up"], str):
            raise ProtocolViolation("follow_up must be a string or null")
        if not isinstance(raw["end"], bool):
            raise ProtocolViolation("end must be a boolean")
        if not isinstance(raw["state_digest"], str):
            raise ProtocolViolation("state_digest must be a string")
        return cls(
            session=raw["session"],
            speech=raw["speech"],
            end=raw["end"],
            follow_up=raw["follow_up"],
            state_digest=raw["state_digest"],
        )

    @classmethod
    def from_json(cls, data: str) -> "ResponseEnvelope":
        try:
            raw = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"response is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)
