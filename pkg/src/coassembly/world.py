"""Shared physical state of the collaboration cell.

One world instance holds the plan progress, item locations, the robot
arm and the human's current occupation.  It is advanced exclusively by
the owning event loop (virtual clock in headless runs, wall-mapped clock
in live serve mode) and reports everything it does as trace records and
world events.

Mode differences live here and in the operator policies:

* conversational - the robot starts its own ready steps, serves a FIFO
  delivery queue fed by dialogue requests, and failures raise events the
  event rules turn into robot-initiated dialogues.
* baseline - robot steps (and the robot's half of joint steps) only run
  after an operator "next"; there is no delivery queue for the human's
  materials (the human self-fetches) and failures stay silent until an
  operator "reset", after which the failed motion is redone in full.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import robot as rb
from . import trace as tr
from .assembly import (
    HUMAN,
    JOINT,
    ROBOT,
    SHARED_BENCH,
    STORAGE,
    AssemblyPlan,
    ProgressState,
    StepStatus,
    topological_order,
)
from .events import WorldEvent

CONVERSATIONAL = "conversational"
BASELINE = "baseline"
MODES = (CONVERSATIONAL, BASELINE)

RESET_MS = 5000


@dataclass
class HumanTask:
    kind: str  # "step" | "fetch" | "assist"
    duration_ms: int
    step: str | None = None
    item: str | None = None
    until_ms: int | None = None  # set when the task starts


@dataclass(frozen=True)
class PendingAssist:
    """An open robot plea for help after a failure."""

    item: str | None
    step: str | None
    failed_action: rb.RobotAction


class World:
    def __init__(
        self,
        plan: AssemblyPlan,
        robot_sim: rb.RobotSim,
        trace: tr.TraceBuilder,
        mode: str = CONVERSATIONAL,
        human_speed: float = 1.0,
        robot_fetch_ms: int = 8000,
        human_fetch_ms: int = 10000,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.plan = plan
        self.robot = robot_sim
        self.trace = trace
        self.mode = mode
        self.human_speed = human_speed
        self.robot_fetch_ms = robot_fetch_ms
        self.human_fetch_ms = human_fetch_ms
        self.progress = ProgressState.initial(plan)
        self.step_order = topological_order(plan)
        self.now_ms = 0
        self.human_task: HumanTask | None = None
        self.human_queue: deque[HumanTask] = deque()  # fetch/assist, pre-empts steps
        self.fetch_queue: deque[str] = deque()  # item ids the robot will deliver
        self.armed_steps = 0  # baseline: steps released by "next"
        self.pending_assist: PendingAssist | None = None
        self.assist_placed = False
        self.redo_action: rb.RobotAction | None = None
        self._paused_step: HumanTask | None = None
        self._last_mode = None
        self._label_to_item = {it.label or it.id: it.id for it in plan.items}
        self._events_out: list[WorldEvent] = []
        self._emit_initial_records()

    # -- bootstrap ---------------------------------------------------------

    def _emit_initial_records(self) -> None:
        self._record_robot_mode()
        for step in self.plan.steps:
            self.trace.emit(
                self.now_ms,
                tr.STEP_STATUS,
                {"step": step.id, "status": "pending", "actor": step.actor},
            )
        self._refresh_ready()

    # -- views -------------------------------------------------------------

    def item_by_label(self, label: str) -> str | None:
        return self._label_to_item.get(label)

    def label_of(self, item_id: str) -> str:
        item = self.plan.item(item_id)
        return item.label or item.id

    def items_missing(self, step_id: str) -> list[str]:
        step = self.plan.step(step_id)
        return [
            need
            for need in sorted(step.needs)
            if self.progress.locations.get(need) != SHARED_BENCH
        ]

    def item_incoming(self, item_id: str) -> bool:
        if item_id in self.fetch_queue:
            return True
        act = self.robot.action
        if act is not None and act.item == self.label_of(item_id):
            return True
        if any(t.kind == "fetch" and t.item == item_id for t in self.human_queue):
            return True
        task = self.human_task
        return task is not None and task.kind == "fetch" and task.item == item_id

    def pending_human_steps(self) -> list[str]:
        """Not-yet-done human and joint steps in plan order."""
        return [
            s
            for s in self.step_order
            if self.plan.step(s).actor in (HUMAN, JOINT)
            and self.progress.status[s] in (StepStatus.PENDING, StepStatus.READY)
        ]

    def pending_robot_steps(self) -> list[str]:
        return [
            s
            for s in self.step_order
            if self.plan.step(s).actor == ROBOT
            and self.progress.status[s] in (StepStatus.PENDING, StepStatus.READY)
        ]

    def robot_work_remains(self) -> bool:
        return any(
            self.plan.step(s).actor in (ROBOT, JOINT)
            and self.progress.status[s] in (StepStatus.PENDING, StepStatus.READY)
            for s in self.step_order
        )

    def all_done(self) -> bool:
        return self.progress.all_done()

    def human_busy(self) -> bool:
        return self.human_task is not None

    def snapshot(self) -> dict:
        """JSON view for the state endpoint and digests."""
        act = self.robot.action
        return {
            "t": tr.ms_to_s(self.now_ms),
            "mode": self.mode,
            "steps": {s: st.value for s, st in sorted(self.progress.status.items())},
            "items": dict(sorted(self.progress.locations.items())),
            "robot": {
                "mode": self.robot.mode,
                "action": None
                if act is None
                else {"kind": act.kind, "item": act.item, "step": act.step},
                "gripper": self.robot.gripper,
            },
            "human": None
            if self.human_task is None
            else {
                "kind": self.human_task.kind,
                "step": self.human_task.step,
                "item": self.human_task.item,
            },
        }

    # -- commands (skill layer) ---------------------------------------------

    def request_delivery(self, item_id: str) -> str:
        """Queue a robot delivery; returns the spoken acknowledgement."""
        label = self.label_of(item_id)
        if self.progress.locations.get(item_id) == SHARED_BENCH:
            return f"The {label} is already on the bench."
        if self.item_incoming(item_id):
            return f"The {label} is already on its way."
        self.fetch_queue.append(item_id)
        if self.robot.mode == rb.IDLE:
            return f"Bringing the {label} now."
        return f"I am busy right now; I will bring the {label} next."

    def arm_next_step(self) -> str:
        """Baseline 'next': release one robot-assignable step."""
        if self.robot.mode == rb.BLOCKED:
            self.robot.resume()
            self._record_robot_mode()
            return "Resuming."
        if not self.robot_work_remains():
            return "I have no tasks left."
        self.armed_steps += 1
        return "OK."

    def command_stop(self) -> str:
        if self.robot.mode == rb.EXECUTING:
            action = self.robot.action
            if action.item is not None:
                item_id = self.item_by_label(action.item)
                if item_id is not None:
                    self._move_item(item_id, STORAGE)
            if action.kind == rb.ASSIST_STEP and action.step is not None:
                self._cancel_human_step(action.step)
                self._set_step_status(action.step, StepStatus.READY)
            self.robot.stop()
            self._record_robot_mode()
            return "OK, stopping."
        return "I am not moving."

    def _cancel_human_step(self, step_id: str) -> None:
        """A joint step lost its robot half; the human stops working it."""
        if self.human_task is not None and self.human_task.step == step_id:
            self.human_task = None
        if self._paused_step is not None and self._paused_step.step == step_id:
            self._paused_step = None

    def command_reset(self) -> str:
        """Baseline recovery: reset, then redo the failed motion in full."""
        if self.robot.mode != rb.FAULTED:
            return "There is nothing to reset."
        self.pending_assist = None
        self.assist_placed = False
        accepted = self.robot.enqueue(rb.RobotAction(kind=rb.RESET, duration_ms=RESET_MS))
        assert accepted
        self._record_robot_mode()
        return "OK, resetting."

    def queue_human_assist(self, duration_ms: int) -> None:
        """Human pauses their own work and fixes the dropped work.

        A running plan step is interrupted and resumed afterwards; speech
        made the need known, so the human reacts immediately.
        """
        assist = self.pending_assist
        if (
            self.human_task is not None
            and self.human_task.kind == "step"
            and self._paused_step is None
        ):
            remaining = max(1, self.human_task.until_ms - self.now_ms)
            self.human_task.duration_ms = remaining
            self.human_task.until_ms = None
            self._paused_step = self.human_task
            self.human_task = None
        self.human_queue.append(
            HumanTask(
                kind="assist",
                duration_ms=max(1, duration_ms),
                step=assist.step if assist else None,
                item=assist.item if assist else None,
            )
        )

    def queue_human_fetch(self, item_id: str, duration_ms: int) -> None:
        self.human_queue.append(
            HumanTask(kind="fetch", duration_ms=max(1, duration_ms), item=item_id)
        )

    def force_assist_placement(self) -> None:
        """A live human fixed the dropped work; take their word for it."""
        assist = self.pending_assist
        if assist is None:
            return
        if assist.item is not None:
            item_id = self.item_by_label(assist.item)
            if item_id is not None:
                self._move_item(item_id, SHARED_BENCH)
        self.assist_placed = True

    def confirm_assist_done(self) -> str:
        """Operator says the part is placed; robot resets and carries on.

        A hand-placed item already reached the bench, so dropped fetches
        are not redone; a disturbed step still needs the robot to redo
        its motion after the reset.
        """
        if self.pending_assist is None:
            return "I did not ask for help, but thank you."
        if not self.assist_placed:
            return "I do not see it in place yet."
        assist = self.pending_assist
        self.pending_assist = None
        self.assist_placed = False
        if assist.item is not None:
            self.redo_action = None
        accepted = self.robot.enqueue(rb.RobotAction(kind=rb.RESET, duration_ms=RESET_MS))
        assert accepted
        self._record_robot_mode()
        return "Thank you. I will reset and carry on."

    # -- internal state changes ----------------------------------------------

    def _move_item(self, item_id: str, location: str) -> None:
        if self.progress.locations.get(item_id) == location:
            return
        self.progress.locations[item_id] = location
        self.trace.emit(
            self.now_ms,
            tr.ROBOT_EVENT,
            {"event": "item_moved", "item": item_id, "location": location},
        )

    def _set_step_status(self, step_id: str, status: StepStatus) -> None:
        if self.progress.status[step_id] is status:
            return
        self.progress.status[step_id] = status
        step = self.plan.step(step_id)
        self.trace.emit(
            self.now_ms,
            tr.STEP_STATUS,
            {"step": step_id, "status": status.value, "actor": step.actor},
        )
        if status is StepStatus.READY:
            self._events_out.append(
                WorldEvent(WorldEvent.STEP_READY, {"step": step_id, "actor": step.actor})
            )
        elif status is StepStatus.DONE:
            self._events_out.append(
                WorldEvent(WorldEvent.STEP_DONE, {"step": step_id, "actor": step.actor})
            )

    def _record_robot_mode(self) -> None:
        state = (self.robot.mode, self.robot.gripper)
        if state == self._last_mode:
            return
        self._last_mode = state
        self.trace.emit(
            self.now_ms,
            tr.ROBOT_EVENT,
            {
                "event": "mode_change",
                "mode": self.robot.mode,
                "gripper": self.robot.gripper,
            },
        )

    def _refresh_ready(self) -> None:
        done = self.progress.done()
        for step in self.plan.steps:
            if self.progress.status[step.id] is StepStatus.PENDING and self.plan.predecessors(
                step.id
            ) <= done:
                self._set_step_status(step.id, StepStatus.READY)

    # -- scheduling ------------------------------------------------------------

    def try_start_work(self) -> None:
        """Start whatever the human and the robot can begin right now."""
        if self.robot.mode != rb.EXECUTING:
            self.robot.now_ms = self.now_ms
        self._refresh_ready()
        self._start_human_work()
        self._start_robot_work()
        # a joint step may have been waiting on the robot becoming free
        self._start_human_work()

    def _start_human_work(self) -> None:
        if self.human_task is not None:
            return
        if self.human_queue:
            task = self.human_queue.popleft()
            task.until_ms = self.now_ms + task.duration_ms
            self.human_task = task
            return
        if self._paused_step is not None:
            task, self._paused_step = self._paused_step, None
            task.until_ms = self.now_ms + task.duration_ms
            self.human_task = task
            return
        for step_id in self.pending_human_steps():
            if self.progress.status[step_id] is not StepStatus.READY:
                # the human follows the worksheet: no skipping ahead
                return
            step = self.plan.step(step_id)
            missing = self.items_missing(step_id)
            if missing:
                if self.mode == BASELINE:
                    # nobody to ask: walk to storage and self-fetch
                    for item_id in missing:
                        if not self.item_incoming(item_id):
                            self.queue_human_fetch(item_id, self.human_fetch_ms)
                    self._start_human_work()
                return
            if step.actor == JOINT:
                if self.robot.mode != rb.IDLE:
                    return
                if self.mode == BASELINE:
                    if self.armed_steps <= 0:
                        return
                    self.armed_steps -= 1
                accepted = self.robot.enqueue(
                    rb.RobotAction(
                        kind=rb.ASSIST_STEP,
                        duration_ms=self._human_scaled(step.duration),
                        step=step_id,
                    )
                )
                assert accepted
                self._record_robot_mode()
            self._set_step_status(step_id, StepStatus.ACTIVE)
            self.human_task = HumanTask(
                kind="step",
                duration_ms=self._human_scaled(step.duration),
                step=step_id,
                until_ms=self.now_ms + self._human_scaled(step.duration),
            )
            return

    def _start_robot_work(self) -> None:
        if self.robot.mode != rb.IDLE:
            return
        if self.fetch_queue:
            item_id = self.fetch_queue.popleft()
            item = self.plan.item(item_id)
            kind = rb.FETCH_TOOL if item.kind == "tool" else rb.DELIVER_COMPONENT
            accepted = self.robot.enqueue(
                rb.RobotAction(
                    kind=kind, duration_ms=self.robot_fetch_ms, item=self.label_of(item_id)
                )
            )
            assert accepted
            self._record_robot_mode()
            return
        for step_id in self.pending_robot_steps():
            if self.progress.status[step_id] is not StepStatus.READY:
                if self.mode == BASELINE:
                    return  # predetermined sequence: wait for the next step
                continue
            if self.mode == BASELINE and self.armed_steps <= 0:
                return
            missing = self.items_missing(step_id)
            if missing:
                # the robot stages its own material before starting
                self.fetch_queue.extendleft(reversed(missing))
                self._start_robot_work()
                return
            if self.mode == BASELINE:
                self.armed_steps -= 1
            step = self.plan.step(step_id)
            accepted = self.robot.enqueue(
                rb.RobotAction(
                    kind=rb.ASSIST_STEP,
                    duration_ms=tr.s_to_ms(step.duration),
                    step=step_id,
                )
            )
            assert accepted
            self._set_step_status(step_id, StepStatus.ACTIVE)
            self._record_robot_mode()
            return

    def _human_scaled(self, duration_s: float) -> int:
        return max(1, round(tr.s_to_ms(duration_s) / self.human_speed))

    # -- time ---------------------------------------------------------------

    def next_event_ms(self) -> int | None:
        candidates = []
        robot_next = self.robot.next_event_ms()
        if robot_next is not None:
            candidates.append(robot_next)
        if self.human_task is not None:
            candidates.append(self.human_task.until_ms)
        return min(candidates) if candidates else None

    def drain_events(self) -> list[WorldEvent]:
        events, self._events_out = self._events_out, []
        return events

    def advance_to(self, to_ms: int) -> list[WorldEvent]:
        """Advance the world clock, settling every completion on the way."""
        if to_ms < self.now_ms:
            raise ValueError("world clock cannot run backwards")
        events: list[WorldEvent] = self.drain_events()
        while True:
            boundary = self.next_event_ms()
            target = to_ms if boundary is None else min(boundary, to_ms)
            if target > self.now_ms:
                if self.robot.mode == rb.EXECUTING:
                    robot_events = self.robot.tick(target - self.now_ms)
                else:
                    self.robot.now_ms = target
                    robot_events = []
                self.now_ms = target
                for ev in robot_events:
                    self._handle_robot_event(ev)
            if self.human_task is not None and self.human_task.until_ms <= self.now_ms:
                self._finish_human_task()
            self.try_start_work()
            events.extend(self.drain_events())
            if self.now_ms >= to_ms:
                return events

    def _handle_robot_event(self, ev) -> None:
        if isinstance(ev, rb.ActionDone):
            action = ev.action
            self.trace.emit(
                ev.at_ms,
                tr.ROBOT_EVENT,
                {
                    "event": "action_done",
                    "action": action.kind,
                    "item": action.item,
                    "step": action.step,
                },
            )
            if action.kind in (rb.FETCH_TOOL, rb.DELIVER_COMPONENT):
                item_id = self.item_by_label(action.item)
                if item_id is not None:
                    self._move_item(item_id, SHARED_BENCH)
            elif action.kind == rb.ASSIST_STEP and action.step is not None:
                self._set_step_status(action.step, StepStatus.DONE)
            elif action.kind == rb.RESET and self.redo_action is not None:
                redo, self.redo_action = self.redo_action, None
                accepted = self.robot.enqueue(redo)
                assert accepted
            self._record_robot_mode()
            self._events_out.append(
                WorldEvent(
                    WorldEvent.ACTION_DONE,
                    {"action": action.kind, "item": action.item, "step": action.step},
                )
            )
        elif isinstance(ev, rb.ActionFailed):
            action = ev.action
            self.trace.emit(
                ev.at_ms,
                tr.ROBOT_EVENT,
                {
                    "event": "action_failed",
                    "action": action.kind,
                    "item": action.item,
                    "step": action.step,
                    "reason": ev.reason,
                    "description": ev.description,
                },
            )
            if action.item is not None:
                item_id = self.item_by_label(action.item)
                if item_id is not None:
                    self._move_item(item_id, STORAGE)
            if action.kind == rb.ASSIST_STEP and action.step is not None:
                self._cancel_human_step(action.step)
                self._set_step_status(action.step, StepStatus.READY)
            self.pending_assist = PendingAssist(
                item=action.item, step=action.step, failed_action=action
            )
            self.assist_placed = False
            self.redo_action = action
            self._record_robot_mode()
            self._events_out.append(
                WorldEvent(
                    WorldEvent.ACTION_FAILED,
                    {
                        "action": action.kind,
                        "item": action.item,
                        "step": action.step,
                        "reason": ev.reason,
                        "description": ev.description,
                    },
                )
            )

    def _finish_human_task(self) -> None:
        task = self.human_task
        self.human_task = None
        if task.kind == "step":
            self._set_step_status(task.step, StepStatus.DONE)
        elif task.kind == "fetch":
            self._move_item(task.item, SHARED_BENCH)
            self.trace.emit(
                self.now_ms,
                tr.ROBOT_EVENT,
                {"event": "human_fetched", "item": task.item},
            )
        elif task.kind == "assist":
            if self.pending_assist is not None:
                assist = self.pending_assist
                if assist.item is not None:
                    item_id = self.item_by_label(assist.item)
                    if item_id is not None:
                        self._move_item(item_id, SHARED_BENCH)
                self.assist_placed = True
