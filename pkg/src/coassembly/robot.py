"""Simulated single-arm collaborative manipulator.

All durations and timestamps are integer sim-milliseconds so interval
arithmetic closes exactly.  Probabilistic failure draws happen once at
action start from a stream derived from (seed, action ordinal), so
outcomes do not depend on tick granularity.  Deterministic failure
schedules are expressed in cumulative executing time: entry N fires when
the arm's total busy time crosses the entry's mark, which makes a given
schedule hit the same amount of attempted work regardless of how the
surrounding scenario paces that work.  Reset motions never fail.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

FETCH_TOOL = "fetch_tool"
DELIVER_COMPONENT = "deliver_component"
HOLD = "hold"
ASSIST_STEP = "assist_step"
RESET = "reset"
ACTION_KINDS = (FETCH_TOOL, DELIVER_COMPONENT, HOLD, ASSIST_STEP, RESET)

IDLE = "idle"
EXECUTING = "executing"
BLOCKED = "blocked"
FAULTED = "faulted"

DROPPED = "dropped"
GRASP_MISS = "grasp-miss"
UNREACHABLE = "unreachable"
STALLED = "stalled"

_FAILURE_TEXT = {
    DROPPED: "I dropped the {what}",
    GRASP_MISS: "I missed my grasp on the {what}",
    UNREACHABLE: "I could not reach the {what}",
    STALLED: "I stalled while {doing}",
}


@dataclass(frozen=True)
class RobotAction:
    kind: str
    duration_ms: int
    item: str | None = None  # catalog label of the carried item
    step: str | None = None  # assembly step id for assists

    def doing(self) -> str:
        if self.kind == FETCH_TOOL:
            return f"fetching the {self.item}"
        if self.kind == DELIVER_COMPONENT:
            return f"delivering the {self.item}"
        if self.kind == HOLD:
            return f"holding the {self.item}"
        if self.kind == ASSIST_STEP:
            return f"working on {self.step}"
        return "recovering and resetting"


@dataclass(frozen=True)
class ActionDone:
    action: RobotAction
    at_ms: int


@dataclass(frozen=True)
class ActionFailed:
    action: RobotAction
    reason: str
    description: str
    at_ms: int


RobotEvent = ActionDone | ActionFailed


@dataclass(frozen=True)
class ScheduledFailure:
    busy_ms: int  # fires when cumulative executing time crosses this mark
    reason: str = DROPPED


@dataclass
class FailureModel:
    """Per-action-kind failure probabilities plus an explicit schedule."""

    probabilities: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    schedule: tuple[ScheduledFailure, ...] = ()

    def validate(self) -> list[str]:
        problems = []
        for kind, p in self.probabilities.items():
            if kind not in ACTION_KINDS:
                problems.append(f"failure probability for unknown action kind {kind!r}")
            if not 0.0 <= p <= 1.0:
                problems.append(f"failure probability for {kind!r} out of [0,1]: {p}")
        marks = [s.busy_ms for s in self.schedule]
        if any(b <= a for a, b in zip(marks, marks[1:])):
            problems.append("failure schedule marks must be strictly increasing")
        if any(m < 0 for m in marks):
            problems.append("failure schedule marks must be non-negative")
        return problems

    def draw(self, ordinal: int, kind: str) -> bool:
        p = self.probabilities.get(kind, 0.0)
        if p <= 0.0:
            return False
        stream = random.Random(self.seed * 1_000_003 + ordinal)
        return stream.random() < p

    def fresh(self) -> "FailureModel":
        """Independent copy so concurrent runs share nothing mutable."""
        return FailureModel(
            probabilities=dict(self.probabilities),
            seed=self.seed,
            schedule=self.schedule,
        )


class RobotSim:
    """One arm, one action at a time; mutated only by the owning event loop."""

    def __init__(self, failures: FailureModel | None = None):
        self.failures = failures or FailureModel()
        self.mode = IDLE
        self.action: RobotAction | None = None
        self.remaining_ms = 0
        self.gripper: str | None = None
        self.blocked_reason = ""
        self.fault_description = ""
        self.now_ms = 0
        self.busy_ms = 0
        self._ordinal = 0
        self._fail_at_ms: int | None = None
        self._schedule_idx = 0

    # -- commands --------------------------------------------------------

    def enqueue(self, action: RobotAction) -> bool:
        """Start an action if the arm can take one; False means busy."""
        if action.duration_ms <= 0:
            raise ValueError("action duration must be positive")
        if self.mode == IDLE or (self.mode == FAULTED and action.kind == RESET):
            self.mode = EXECUTING
            self.action = action
            self.remaining_ms = action.duration_ms
            self.fault_description = ""
            if action.kind in (FETCH_TOOL, DELIVER_COMPONENT, HOLD):
                self.gripper = action.item
            self._fail_at_ms = None
            if action.kind != RESET and self.failures.draw(self._ordinal, action.kind):
                # A drawn failure manifests partway through the motion.
                self._fail_at_ms = self.now_ms + max(1, action.duration_ms // 2)
            self._ordinal += 1
            return True
        return False

    def stop(self, reason: str = "stopped by operator") -> None:
        """Abort the current action (operator 'stop'); the arm blocks."""
        if self.mode == EXECUTING:
            self.mode = BLOCKED
            self.blocked_reason = reason
            self.action = None
            self.remaining_ms = 0
            self.gripper = None
            self._fail_at_ms = None

    def resume(self) -> None:
        """Release an operator stop; the arm idles awaiting work."""
        if self.mode == BLOCKED:
            self.mode = IDLE
            self.blocked_reason = ""

    # -- time ------------------------------------------------------------

    def _pending_failure(self) -> tuple[int, str, str] | None:
        """(absolute time, reason, source) of the failure due in this action."""
        if self.mode != EXECUTING:
            return None
        end = self.now_ms + self.remaining_ms
        best: tuple[int, str, str] | None = None
        if self._fail_at_ms is not None and self._fail_at_ms <= end:
            reason = DROPPED if self.action.item else STALLED
            best = (max(self._fail_at_ms, self.now_ms + 1), reason, "draw")
        if self.action.kind != RESET and self._schedule_idx < len(self.failures.schedule):
            entry = self.failures.schedule[self._schedule_idx]
            at = self.now_ms + max(1, entry.busy_ms - self.busy_ms)
            if at <= end and (best is None or at < best[0]):
                best = (at, entry.reason, "schedule")
        return best

    def next_event_ms(self) -> int | None:
        """Absolute time of the next completion or failure, if any."""
        if self.mode != EXECUTING:
            return None
        end = self.now_ms + self.remaining_ms
        pending = self._pending_failure()
        return end if pending is None else min(end, pending[0])

    def tick(self, dt_ms: int) -> list[RobotEvent]:
        """Advance the arm clock by dt; emit at most one completion/failure."""
        if dt_ms <= 0:
            raise ValueError("dt must be positive")
        horizon = self.now_ms + dt_ms
        events: list[RobotEvent] = []
        if self.mode == EXECUTING:
            end = self.now_ms + self.remaining_ms
            pending = self._pending_failure()
            if pending is not None and pending[0] <= horizon:
                fail_at, reason, source = pending
                self.busy_ms += fail_at - self.now_ms
                self._fail(fail_at, reason, events, consumed_schedule=source == "schedule")
            elif end <= horizon:
                self.busy_ms += end - self.now_ms
                self._complete(end, events)
            else:
                self.busy_ms += horizon - self.now_ms
                self.remaining_ms -= horizon - self.now_ms
                self.now_ms = horizon
                return events
        if self.now_ms < horizon:
            self.now_ms = horizon
        return events

    def _complete(self, at_ms: int, events: list[RobotEvent]) -> None:
        action = self.action
        self.now_ms = at_ms
        self.remaining_ms = 0
        self.mode = IDLE
        self.action = None
        self._fail_at_ms = None
        if action.kind in (FETCH_TOOL, DELIVER_COMPONENT, RESET):
            self.gripper = None
        events.append(ActionDone(action=action, at_ms=at_ms))

    def _fail(
        self, at_ms: int, reason: str, events: list[RobotEvent], consumed_schedule: bool
    ) -> None:
        action = self.action
        self.now_ms = at_ms
        self.remaining_ms = 0
        self.mode = FAULTED
        self.action = None
        self._fail_at_ms = None
        if consumed_schedule:
            self._schedule_idx += 1
        what = action.item or "workpiece"
        description = _FAILURE_TEXT[reason].format(what=what, doing=action.doing())
        self.fault_description = description
        self.gripper = None
        events.append(
            ActionFailed(action=action, reason=reason, description=description, at_ms=at_ms)
        )

    # -- reporting ---------------------------------------------------------

    def status_text(self) -> str:
        """Stable one-line status per (mode, gripper contents)."""
        if self.mode == IDLE:
            if self.gripper:
                return f"I am idle, holding the {self.gripper}."
            return "I am idle and ready to help."
        if self.mode == EXECUTING:
            return f"I am {self.action.doing()}."
        if self.mode == BLOCKED:
            return f"I am blocked: {self.blocked_reason}."
        return f"I had a problem: {self.fault_description}."
