"""Deterministic scripted operators standing in for the human participant.

Policies never act instantly: every utterance is scheduled after a
latency drawn once from a seeded stream (constant or uniform), so runs
are reproducible while still showing human-like variability.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import robot as rb
from .assembly import TOOL
from .world import World

CONSTANT = "constant"
UNIFORM = "uniform"


@dataclass(frozen=True)
class Latency:
    """Latency distribution in milliseconds."""

    kind: str = CONSTANT
    a: int = 1500
    b: int = 0

    def sample(self, rng: random.Random) -> int:
        if self.kind == CONSTANT:
            return self.a
        return rng.randint(self.a, self.b)

    def validate(self) -> list[str]:
        problems = []
        if self.kind not in (CONSTANT, UNIFORM):
            problems.append(f"unknown latency kind {self.kind!r}")
        if self.a < 0 or (self.kind == UNIFORM and self.b < self.a):
            problems.append(f"bad latency bounds ({self.a}, {self.b})")
        return problems


@dataclass
class OperatorProfile:
    say_latency: Latency = field(default_factory=Latency)
    notice_latency: Latency = field(default_factory=lambda: Latency(a=4000))
    assist_ms: int = 6000
    human_fetch_ms: int = 10000
    work_speed: float = 1.0
    lookahead: int = 3

    def validate(self) -> list[str]:
        problems = self.say_latency.validate() + self.notice_latency.validate()
        if self.assist_ms <= 0:
            problems.append("assist duration must be positive")
        if self.human_fetch_ms <= 0:
            problems.append("human fetch duration must be positive")
        if self.work_speed <= 0:
            problems.append("work speed factor must be positive")
        if self.lookahead < 1:
            problems.append("lookahead must be at least 1")
        return problems


class ConversationalOperator:
    """Requests deliveries ahead of need, assists after failures."""

    def __init__(self, profile: OperatorProfile, seed: int, world: World):
        self.profile = profile
        self.world = world
        self.rng = random.Random(seed * 69_069 + 17)
        self._requested: set[str] = set()
        self._last_say_ms = 0
        self._assist_queued = False
        self._done_said = False
        self._last_wanted_label: str | None = None

    def observe_robot_line(self, text: str, t_ms: int) -> None:
        pass

    def observe_prompt(self, slot: str, text: str, t_ms: int) -> list[tuple[int, str]]:
        """Answer a slot prompt with the most recently wanted item."""
        if self._last_wanted_label is None:
            return []
        at = t_ms + self.profile.say_latency.sample(self.rng)
        return [(at, self._last_wanted_label)]

    def poll(self, t_ms: int) -> list[tuple[int, str]]:
        out: list[tuple[int, str]] = []
        world = self.world
        if world.pending_assist is not None:
            if not self._assist_queued:
                world.queue_human_assist(self.profile.assist_ms)
                self._assist_queued = True
            if world.assist_placed and not self._done_said:
                at = t_ms + self.profile.say_latency.sample(self.rng)
                out.append((at, "done"))
                self._done_said = True
        else:
            self._assist_queued = False
            self._done_said = False
        for step_id in world.pending_human_steps()[: self.profile.lookahead]:
            for item_id in world.items_missing(step_id):
                if item_id in self._requested or world.item_incoming(item_id):
                    continue
                at = max(self._last_say_ms, t_ms) + self.profile.say_latency.sample(self.rng)
                out.append((at, self._request_text(item_id)))
                self._requested.add(item_id)
                self._last_say_ms = at
        return out

    def _request_text(self, item_id: str) -> str:
        item = self.world.plan.item(item_id)
        label = self.world.label_of(item_id)
        self._last_wanted_label = label
        if item.kind == TOOL:
            return f"give me the {label}"
        return f"bring me the {label}"


class BaselineOperator:
    """Minimal request-response operator: 'next' and 'reset' only.

    The operator monitors the robot visually, so reactions use the
    (longer) notice latency; materials are self-fetched by the world.
    """

    def __init__(self, profile: OperatorProfile, seed: int, world: World):
        self.profile = profile
        self.world = world
        self.rng = random.Random(seed * 69_069 + 29)
        self._reset_pending = False
        self._next_pending = False

    def observe_robot_line(self, text: str, t_ms: int) -> None:
        pass

    def observe_prompt(self, slot: str, text: str, t_ms: int) -> list[tuple[int, str]]:
        return []

    def poll(self, t_ms: int) -> list[tuple[int, str]]:
        out: list[tuple[int, str]] = []
        world = self.world
        if world.human_busy():
            # heads-down assembling: the robot gets checked at boundaries
            return out
        if world.robot.mode == rb.FAULTED:
            if not self._reset_pending:
                at = t_ms + self.profile.notice_latency.sample(self.rng)
                out.append((at, "reset"))
                self._reset_pending = True
        else:
            self._reset_pending = False
        if world.armed_steps > 0 or world.robot.mode == rb.EXECUTING:
            self._next_pending = False
        if (
            world.robot.mode == rb.IDLE
            and world.armed_steps == 0
            and not self._next_pending
            and self._step_awaits_release()
        ):
            at = t_ms + self.profile.notice_latency.sample(self.rng)
            out.append((at, "next"))
            self._next_pending = True
        return out

    def _step_awaits_release(self) -> bool:
        from .assembly import JOINT, ROBOT, StepStatus

        world = self.world
        for step_id in world.step_order:
            step = world.plan.step(step_id)
            if step.actor not in (ROBOT, JOINT):
                continue
            if world.progress.status[step_id] is StepStatus.READY:
                return True
        return False


def build_operator(mode: str, profile: OperatorProfile, seed: int, world: World):
    if mode == "baseline":
        return BaselineOperator(profile, seed, world)
    return ConversationalOperator(profile, seed, world)
