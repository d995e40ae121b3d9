"""Event rules: turning robot/simulation events into dialogue invocations."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class WorldEvent:
    kind: str
    payload: dict

    ACTION_DONE = "action_done"
    ACTION_FAILED = "action_failed"
    STEP_READY = "step_ready"
    STEP_DONE = "step_done"


@dataclass(frozen=True)
class EventRule:
    """Maps matching events onto an API-triggered dialogue.

    `where` is an equality predicate over payload fields; `payload_map`
    copies event payload fields into the dialogue payload under new
    names; `payload_const` merges in fixed values.
    """

    event: str
    dialogue: str
    where: dict[str, object] = field(default_factory=dict)
    payload_map: dict[str, str] = field(default_factory=dict)
    payload_const: dict[str, object] = field(default_factory=dict)

    def matches(self, event: WorldEvent) -> bool:
        if event.kind != self.event:
            return False
        return all(event.payload.get(k) == v for k, v in self.where.items())

    def build_payload(self, event: WorldEvent) -> dict[str, object]:
        payload = dict(self.payload_const)
        for target, source in self.payload_map.items():
            if source in event.payload:
                payload[target] = event.payload[source]
        return payload


@dataclass(frozen=True)
class Invocation:
    dialogue: str
    payload: dict


class EventRouter:
    """Applies rules in declaration order; counts events nothing matched."""

    def __init__(self, rules: tuple[EventRule, ...] = ()):
        self.rules = tuple(rules)
        self.dropped_events = 0

    def route(self, event: WorldEvent) -> list[Invocation]:
        invocations = [
            Invocation(dialogue=rule.dialogue, payload=rule.build_payload(event))
            for rule in self.rules
            if rule.matches(event)
        ]
        if not invocations:
            self.dropped_events += 1
        return invocations
