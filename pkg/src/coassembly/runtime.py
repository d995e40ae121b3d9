"""Orchestration of one collaboration session: world, dialogue, events.

The runtime glues the pieces together: operator utterances (scripted or
live) flow through the dialogue engine; dispatches run against the world
via the skill layer; world events run through the event rules and become
robot-initiated dialogues.  The same runtime serves headless virtual-time
runs, the REPL, and the live HTTP service.
"""

from __future__ import annotations

import heapq
import logging

from . import dialogue as dlg
from . import trace as tr
from .assembly import AssemblyPlan
from .errors import OutOfTurn
from .events import EventRouter, EventRule, WorldEvent
from .operator import OperatorProfile, build_operator
from .robot import FailureModel, RobotSim
from .skill import handle_dispatch
from .world import CONVERSATIONAL, World

logger = logging.getLogger(__name__)

COMPLETED = "completed"
TIMEOUT = "timeout"
STALLED = "stalled"


class Runtime:
    def __init__(
        self,
        plan: AssemblyPlan,
        script: dlg.ConversationScript,
        rules: tuple[EventRule, ...] = (),
        mode: str = CONVERSATIONAL,
        seed: int = 0,
        profile: OperatorProfile | None = None,
        failures: FailureModel | None = None,
        max_time_ms: int = 3_600_000,
        robot_fetch_ms: int = 8000,
        scripted: bool = True,
        session_id: str = "operator",
        create_primary: bool = True,
    ):
        self.trace = tr.TraceBuilder()
        self.profile = profile or OperatorProfile()
        failures = failures or FailureModel()
        if failures.seed == 0:
            failures.seed = seed
        self.world = World(
            plan,
            RobotSim(failures),
            self.trace,
            mode=mode,
            human_speed=self.profile.work_speed,
            robot_fetch_ms=robot_fetch_ms,
            human_fetch_ms=self.profile.human_fetch_ms,
        )
        self.engine = dlg.DialogueEngine(script, mode=mode)
        self.sessions: dict[str, dlg.SessionState] = {}
        # live services create sessions on first contact instead
        self.session = self.get_session(session_id) if create_primary else None
        self.router = EventRouter(rules if mode == CONVERSATIONAL else ())
        self.mode = mode
        self.max_time_ms = max_time_ms
        self.operator = (
            build_operator(mode, self.profile, seed, self.world) if scripted else None
        )
        self.last_robot_line = ""
        self._agenda: list[tuple[int, int, str]] = []
        self._agenda_seq = 0
        self._ended = False
        self.end_reason: str | None = None

    # -- sessions ------------------------------------------------------------

    def get_session(self, session_id: str) -> dlg.SessionState:
        if session_id not in self.sessions:
            self.sessions[session_id] = dlg.SessionState(id=session_id)
        return self.sessions[session_id]

    # -- scheduling ---------------------------------------------------------

    def schedule_say(self, at_ms: int, text: str) -> None:
        heapq.heappush(self._agenda, (at_ms, self._agenda_seq, text))
        self._agenda_seq += 1

    def next_event_ms(self) -> int | None:
        candidates = []
        world_next = self.world.next_event_ms()
        if world_next is not None:
            candidates.append(world_next)
        if self._agenda:
            candidates.append(self._agenda[0][0])
        return min(candidates) if candidates else None

    # -- turn processing ------------------------------------------------------

    def user_text(
        self, text: str, t_ms: int, session: dlg.SessionState | None = None
    ) -> list[dlg.TurnOutcome]:
        """One operator utterance; returns the dialogue outcomes raised."""
        session = session or self.session
        if session is None:
            raise ValueError("runtime has no primary session; pass one explicitly")
        self.trace.emit(
            t_ms, tr.UTTERANCE, {"speaker": "user", "text": text, "session": session.id}
        )
        outcomes = self.engine.user_turn(session, text, tr.ms_to_s(t_ms))
        self._process_outcomes(outcomes, t_ms, session)
        return outcomes

    def _process_outcomes(self, outcomes, t_ms: int, session: dlg.SessionState) -> None:
        for outcome in outcomes:
            if isinstance(outcome, dlg.RobotSay):
                self._robot_line(outcome.text, t_ms, session)
            elif isinstance(outcome, dlg.PromptSlot):
                self._robot_line(outcome.text, t_ms, session)
                self.trace.emit(
                    t_ms,
                    tr.DIALOGUE_OUTCOME,
                    {"outcome": "prompt_slot", "slot": outcome.slot},
                )
                if self.operator is not None:
                    for at, answer in self.operator.observe_prompt(
                        outcome.slot, outcome.text, t_ms
                    ):
                        self.schedule_say(at, answer)
            elif isinstance(outcome, dlg.Dispatch):
                env = outcome.envelope
                self.trace.emit(
                    t_ms,
                    tr.DIALOGUE_OUTCOME,
                    {
                        "outcome": "dispatch",
                        "intent": env.context.get("intent"),
                        "slots": env.context.get("slots", {}),
                    },
                )
                response = handle_dispatch(
                    self.world,
                    env,
                    last_robot_line=self.last_robot_line,
                    live_operator=self.operator is None,
                )
                followups = self.engine.backend_result(
                    session, response, tr.ms_to_s(t_ms)
                )
                self.world.try_start_work()
                self._process_outcomes(followups, t_ms, session)
            elif isinstance(outcome, dlg.ConversationEnded):
                self.trace.emit(
                    t_ms, tr.DIALOGUE_OUTCOME, {"outcome": "conversation_ended"}
                )

    def _robot_line(self, text: str, t_ms: int, session: dlg.SessionState) -> None:
        self.trace.emit(
            t_ms, tr.UTTERANCE, {"speaker": "robot", "text": text, "session": session.id}
        )
        self.last_robot_line = text
        if self.operator is not None:
            self.operator.observe_robot_line(text, t_ms)

    # -- event routing -----------------------------------------------------------

    def _route_events(self, events: list[WorldEvent], t_ms: int) -> None:
        for event in events:
            for invocation in self.router.route(event):
                self.trace.emit(
                    t_ms,
                    tr.DIALOGUE_OUTCOME,
                    {
                        "outcome": "initiated",
                        "dialogue": invocation.dialogue,
                        "event": event.kind,
                    },
                )
                for session in list(self.sessions.values()):
                    outcomes = self.engine.initiate_dialogue(
                        session, invocation.dialogue, invocation.payload, tr.ms_to_s(t_ms)
                    )
                    if not outcomes:
                        self.trace.emit(
                            t_ms,
                            tr.DIALOGUE_OUTCOME,
                            {
                                "outcome": "queued_initiation",
                                "dialogue": invocation.dialogue,
                                "session": session.id,
                            },
                        )
                    self._process_outcomes(outcomes, t_ms, session)

    def settle(self, t_ms: int) -> None:
        """Process everything due now: events, policy reactions, due speech."""
        for _ in range(10_000):
            progressed = False
            events = self.world.drain_events()
            if events:
                self._route_events(events, t_ms)
                progressed = True
            if self.operator is not None:
                for at, text in self.operator.poll(t_ms):
                    self.schedule_say(max(at, t_ms), text)
                    progressed = True
            while self._agenda and self._agenda[0][0] <= t_ms:
                _, _, text = heapq.heappop(self._agenda)
                try:
                    self.user_text(text, t_ms)
                except OutOfTurn:
                    logger.debug("dropped out-of-turn scripted line %r", text)
                progressed = True
            self.world.try_start_work()
            if not progressed and not self.world.drain_events():
                return
        raise RuntimeError("settle loop failed to converge")

    # -- drives ---------------------------------------------------------------

    def advance_to(self, t_ms: int) -> None:
        """Advance virtual time to t, settling every intermediate event."""
        while not self._ended:
            self.settle(self.world.now_ms)
            nxt = self.next_event_ms()
            if nxt is None or nxt > t_ms:
                if t_ms > self.world.now_ms:
                    events = self.world.advance_to(t_ms)
                    self._route_events(events, t_ms)
                    self.settle(t_ms)
                return
            events = self.world.advance_to(nxt)
            self._route_events(events, self.world.now_ms)
            self.settle(self.world.now_ms)
            if self.world.all_done():
                return

    def run(self) -> tr.Trace:
        """Run to completion or timeout on the virtual clock."""
        self.world.try_start_work()
        self.settle(0)
        while not self._ended:
            if self.world.all_done():
                self._finish(COMPLETED)
                break
            nxt = self.next_event_ms()
            if nxt is None:
                self._finish(STALLED)
                break
            if nxt > self.max_time_ms:
                self.world.advance_to(self.max_time_ms)
                self._finish(TIMEOUT)
                break
            self.advance_to(nxt)
        return self.trace.build()

    def advance_until_quiescent(self) -> None:
        """REPL drive: advance until operator input is needed (or the end)."""
        while not self._ended:
            self.settle(self.world.now_ms)
            if self.world.all_done():
                self._finish(COMPLETED)
                return
            nxt = self.next_event_ms()
            if nxt is None:
                return
            if nxt > self.max_time_ms:
                self.world.advance_to(self.max_time_ms)
                self._finish(TIMEOUT)
                return
            self.advance_to(nxt)

    def finish_if_needed(self, reason: str = STALLED) -> None:
        if self._ended:
            return
        self._finish(COMPLETED if self.world.all_done() else reason)

    def _finish(self, reason: str) -> None:
        if self._ended:
            return
        self._ended = True
        self.end_reason = reason
        self.trace.emit(
            self.world.now_ms,
            tr.SIM_END,
            {
                "reason": reason,
                "dropped_events": self.router.dropped_events,
            },
        )

    @property
    def ended(self) -> bool:
        return self._ended
