"""Live skill back-end: session registry, event intake and state views.

The service wraps one runtime (one shared cell) and any number of
front-end sessions.  Requests for one session are serialized by a
per-session lock; the shared world is guarded by a service lock.  Wall
time maps 1:1 onto the simulation clock in realtime mode; manual mode
(tests, deterministic demos) advances only on explicit calls.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time

from . import dialogue as dlg
from . import trace as tr
from .errors import BadEnvelope, SessionBusy, UnknownMode
from .events import Invocation, WorldEvent
from .loaders import ScenarioConfig
from .metrics import MetricsReport, compute_metrics
from .protocol import RequestEnvelope, ResponseEnvelope
from .sim import build_runtime

GREETING_FALLBACK = "Hello. I am ready to work with you."
CLOSE_LINE = "Goodbye. The session is closed."

CONTROL_VERBS = ("open", "close")


class SkillService:
    def __init__(
        self, config: ScenarioConfig, mode: str | None = None, realtime: bool = True
    ):
        self.runtime = build_runtime(config, mode=mode, scripted=False, create_primary=False)
        self.config = config
        self.realtime = realtime
        self._manual_ms = 0
        self._t0 = time.monotonic()
        self._lock = threading.RLock()
        self._session_locks: dict[str, threading.Lock] = {}
        self._new_records = threading.Condition()
        self.runtime.trace.subscribe(self._on_record)
        with self._lock:
            self.runtime.world.try_start_work()
            self.runtime.settle(0)

    # -- clock ----------------------------------------------------------------

    def now_ms(self) -> int:
        if self.realtime:
            return int((time.monotonic() - self._t0) * 1000)
        return self._manual_ms

    def advance_manual(self, to_ms: int) -> None:
        """Manual-clock drive for tests and deterministic demos."""
        with self._lock:
            self._manual_ms = max(self._manual_ms, to_ms)
            if not self.runtime.ended:
                self.runtime.advance_to(self._manual_ms)

    def tick(self) -> None:
        """Advance the simulation to the current wall-mapped time."""
        with self._lock:
            if not self.runtime.ended:
                self.runtime.advance_to(self.now_ms())
                if self.runtime.world.all_done():
                    self.runtime.finish_if_needed()

    # -- the skill endpoint ------------------------------------------------------

    def handle_request(self, envelope: RequestEnvelope) -> ResponseEnvelope:
        mode = envelope.context.get("mode")
        if mode is not None and mode != self.runtime.mode:
            raise UnknownMode(f"service runs {self.runtime.mode!r}, not {mode!r}")
        session_lock = self._session_lock(envelope.session)
        if not session_lock.acquire(blocking=False):
            raise SessionBusy(f"session {envelope.session!r} is mid-turn")
        try:
            with self._lock:
                self.tick()
                t_ms = self.runtime.world.now_ms
                session = self.runtime.get_session(envelope.session)
                speech = self._dispatch_envelope(envelope, session, t_ms)
                return ResponseEnvelope(
                    session=envelope.session,
                    speech=speech or "OK.",
                    end=session.status in (dlg.Status.IDLE, dlg.Status.TERMINAL),
                    follow_up=None,
                    state_digest=self.state_digest(),
                )
        finally:
            session_lock.release()

    def _dispatch_envelope(
        self, envelope: RequestEnvelope, session: dlg.SessionState, t_ms: int
    ) -> str:
        if envelope.kind == "control":
            return self._control(envelope, session, t_ms)
        # utterance and slot-answer both feed the session's next user turn
        session.reopen()
        before = len(self.runtime.trace.records)
        self.runtime.user_text(envelope.text, t_ms, session=session)
        self.runtime.settle(t_ms)
        return self._robot_speech_since(before, session.id)

    def _control(
        self, envelope: RequestEnvelope, session: dlg.SessionState, t_ms: int
    ) -> str:
        verb = envelope.text.strip().lower()
        if verb not in CONTROL_VERBS:
            raise BadEnvelope(f"unknown control verb {envelope.text!r}")
        if verb == "open":
            session.reopen()
            greeting = self.runtime.engine.script.dialogues.get("greeting")
            line = (
                dlg.render(greeting.reply_template, {})
                if greeting is not None
                else GREETING_FALLBACK
            )
            self.runtime.trace.emit(
                t_ms,
                tr.UTTERANCE,
                {"speaker": "robot", "text": line, "session": session.id},
            )
            return line
        session.status = dlg.Status.TERMINAL
        self.runtime.trace.emit(
            t_ms,
            tr.UTTERANCE,
            {"speaker": "robot", "text": CLOSE_LINE, "session": session.id},
        )
        return CLOSE_LINE

    def _robot_speech_since(self, index: int, session_id: str) -> str:
        lines = [
            rec.payload["text"]
            for rec in self.runtime.trace.records[index:]
            if rec.kind == tr.UTTERANCE
            and rec.payload.get("speaker") == "robot"
            and rec.payload.get("session") == session_id
        ]
        return "\n".join(lines)

    # -- event intake ---------------------------------------------------------

    def publish_event(self, kind: str, payload: dict) -> list[Invocation]:
        """Apply event rules to an externally published event."""
        with self._lock:
            self.tick()
            event = WorldEvent(kind, dict(payload))
            invocations = self.runtime.router.route(event)
            t_ms = self.runtime.world.now_ms
            for invocation in invocations:
                self.runtime.trace.emit(
                    t_ms,
                    tr.DIALOGUE_OUTCOME,
                    {
                        "outcome": "initiated",
                        "dialogue": invocation.dialogue,
                        "event": event.kind,
                    },
                )
                for session in list(self.runtime.sessions.values()):
                    outcomes = self.runtime.engine.initiate_dialogue(
                        session, invocation.dialogue, invocation.payload, tr.ms_to_s(t_ms)
                    )
                    self.runtime._process_outcomes(outcomes, t_ms, session)
            return invocations

    # -- views -------------------------------------------------------------------

    def state(self) -> dict:
        with self._lock:
            self.tick()
            snapshot = self.runtime.world.snapshot()
            snapshot["sessions"] = {
                sid: s.status.value for sid, s in sorted(self.runtime.sessions.items())
            }
            snapshot["ended"] = self.runtime.ended
            snapshot["digest"] = self.state_digest()
            return snapshot

    def state_digest(self) -> str:
        raw = json.dumps(self.runtime.world.snapshot(), sort_keys=True).encode()
        return hashlib.sha256(raw).hexdigest()[:12]

    def metrics(self) -> MetricsReport:
        with self._lock:
            self.tick()
            trace = self.runtime.trace.build()
            if not trace.records or trace.records[-1].kind != tr.SIM_END:
                trace.append(
                    tr.TraceRecord(
                        seq=len(trace.records),
                        t_ms=self.runtime.world.now_ms,
                        kind=tr.SIM_END,
                        payload={
                            "reason": "in-progress",
                            "dropped_events": self.runtime.router.dropped_events,
                        },
                    )
                )
            return compute_metrics(trace)

    # -- streaming -----------------------------------------------------------------

    def _on_record(self, record: tr.TraceRecord) -> None:
        with self._new_records:
            self._new_records.notify_all()

    def records_since(self, since: int) -> list[tr.TraceRecord]:
        with self._lock:
            return [r for r in self.runtime.trace.records if r.seq >= since]

    def stream(self, since: int = 0, follow: bool = False, poll_s: float = 0.25):
        """Yield NDJSON lines; `follow` keeps the stream open for new records."""
        cursor = since
        while True:
            batch = self.records_since(cursor)
            for record in batch:
                cursor = record.seq + 1
                yield record.to_json() + "\n"
            if not follow:
                return
            if self.runtime.ended:
                return
            with self._new_records:
                self._new_records.wait(timeout=poll_s)

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._lock:
            if session_id not in self._session_locks:
                self._session_locks[session_id] = threading.Lock()
            return self._session_locks[session_id]
