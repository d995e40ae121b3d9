"""Turn-taking conversation engine.

Conversations are opened either by a matched user intent or by an API
call (robot initiative).  A conversation stays open while a slot prompt
or a follow-up dialogue awaits the user, and closes on a direct reply
without follow-up, on the skill's response, or when retry/clarification
budgets run out.  Robot-initiated dialogues arriving mid-conversation are
queued FIFO and delivered as soon as the active conversation ends.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field

from .errors import DialogueError, OutOfTurn, ProtocolViolation, UnknownDialogue
from .intent import (
    Catalog,
    CompiledMatcher,
    IntentDef,
    Matched,
    NoMatch,
    Unique,
    normalize,
    resolve_answer,
    validate_intents,
)
from .protocol import RequestEnvelope, ResponseEnvelope

CLARIFY_LINE = "Sorry, I did not catch that. Could you say it again?"
GIVE_UP_LINE = "I am sorry, I am not following. Let us start over when you are ready."
SLOT_GIVE_UP_LINE = "I am sorry, I could not work out what you need. Never mind for now."

MAX_CONSECUTIVE_NOMATCH = 3

_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")


def render(template: str, values: dict[str, object]) -> str:
    """Interpolate ``{name}`` placeholders; unknown names stay verbatim."""
    return _PLACEHOLDER_RE.sub(
        lambda m: str(values.get(m.group(1).strip(), m.group(0))), template
    )


@dataclass(frozen=True)
class UserIntent:
    intent: str


@dataclass(frozen=True)
class ApiCall:
    api: str


Trigger = UserIntent | ApiCall


@dataclass(frozen=True)
class DialogueDef:
    id: str
    trigger: Trigger
    reply_template: str
    dispatch: bool = False
    follow_up: str | None = None
    slot_prompts: dict[str, str] = field(default_factory=dict)
    max_slot_retries: int = 2


@dataclass
class ConversationScript:
    """Validated bundle of catalogs, intents and dialogues."""

    catalogs: dict[str, Catalog]
    intents: dict[str, IntentDef]
    dialogues: dict[str, DialogueDef]
    matcher: CompiledMatcher = field(init=False)

    def __post_init__(self):
        self.matcher = CompiledMatcher(self.intents, self.catalogs)

    def validate(self) -> list[str]:
        problems = validate_intents(self.intents, self.catalogs)
        by_intent: dict[str, list[str]] = {}
        for dlg in self.dialogues.values():
            if isinstance(dlg.trigger, UserIntent):
                if dlg.trigger.intent not in self.intents:
                    problems.append(
                        f"dialogue {dlg.id!r}: unknown trigger intent {dlg.trigger.intent!r}"
                    )
                else:
                    by_intent.setdefault(dlg.trigger.intent, []).append(dlg.id)
            if dlg.follow_up is not None and dlg.follow_up not in self.dialogues:
                problems.append(
                    f"dialogue {dlg.id!r}: unknown follow_up {dlg.follow_up!r}"
                )
            if dlg.max_slot_retries < 1:
                problems.append(
                    f"dialogue {dlg.id!r}: max_slot_retries must be positive"
                )
            if isinstance(dlg.trigger, UserIntent) and dlg.trigger.intent in self.intents:
                intent = self.intents[dlg.trigger.intent]
                for slot in intent.slots:
                    if slot.required and slot.name not in dlg.slot_prompts:
                        problems.append(
                            f"dialogue {dlg.id!r}: no slot prompt for required slot {slot.name!r}"
                        )
        for intent_id, owners in by_intent.items():
            if len(owners) > 1:
                problems.append(
                    f"intent {intent_id!r} is claimed by several dialogues: {sorted(owners)}"
                )
        for intent_id in self.intents:
            if intent_id not in by_intent:
                problems.append(f"intent {intent_id!r} has no dialogue")
        problems.extend(self._follow_up_cycles())
        return problems

    def _follow_up_cycles(self) -> list[str]:
        problems = []
        for start in self.dialogues:
            seen = {start}
            cur = self.dialogues[start].follow_up
            while cur is not None and cur in self.dialogues:
                if cur in seen:
                    problems.append(f"follow_up cycle through dialogue {cur!r}")
                    break
                seen.add(cur)
                cur = self.dialogues[cur].follow_up
        return problems

    def dialogue_for_intent(self, intent_id: str) -> DialogueDef:
        for dlg in self.dialogues.values():
            if isinstance(dlg.trigger, UserIntent) and dlg.trigger.intent == intent_id:
                return dlg
        raise UnknownDialogue(f"no dialogue triggered by intent {intent_id!r}")


class Status(enum.Enum):
    IDLE = "idle"
    AWAITING_USER = "awaiting_user"
    AWAITING_BACKEND = "awaiting_backend"
    TERMINAL = "terminal"


@dataclass(frozen=True)
class TurnEntry:
    speaker: str  # "user" | "robot"
    text: str
    t: float


@dataclass
class SessionState:
    """Live state of one conversation session; single logical owner."""

    id: str
    status: Status = Status.IDLE
    active_dialogue: str | None = None
    active_intent: str | None = None
    pending_slot: str | None = None
    pending_retries: int = 0
    filled: dict[str, str] = field(default_factory=dict)
    last_user_text: str = ""
    consecutive_nomatch: int = 0
    queued_initiations: deque = field(default_factory=deque)
    turn_log: list[TurnEntry] = field(default_factory=list)

    def log(self, speaker: str, text: str, t: float) -> None:
        self.turn_log.append(TurnEntry(speaker, text, t))

    def reopen(self) -> None:
        """Bring a terminal session back to idle (new conversation scope)."""
        if self.status is Status.TERMINAL:
            self.status = Status.IDLE


# --- turn outcomes ------------------------------------------------------------


@dataclass(frozen=True)
class RobotSay:
    text: str


@dataclass(frozen=True)
class PromptSlot:
    slot: str
    text: str


@dataclass(frozen=True)
class Dispatch:
    envelope: RequestEnvelope


@dataclass(frozen=True)
class ConversationEnded:
    pass


TurnOutcome = RobotSay | PromptSlot | Dispatch | ConversationEnded


class DialogueEngine:
    """Executes conversations against one script.

    The engine itself is stateless between calls; all mutable state lives
    in the `SessionState` passed in, so sessions can be hosted
    concurrently as long as each one has a single caller at a time.
    """

    def __init__(self, script: ConversationScript, mode: str = "conversational"):
        self.script = script
        self.mode = mode

    # -- user turns ------------------------------------------------------

    def user_turn(self, session: SessionState, text: str, at: float = 0.0) -> list[TurnOutcome]:
        if session.status in (Status.AWAITING_BACKEND, Status.TERMINAL):
            raise OutOfTurn(f"session {session.id!r} is {session.status.value}")
        session.log("user", text, at)
        session.last_user_text = text
        if session.pending_slot is not None:
            return self._slot_answer(session, text, at)
        return self._match_turn(session, text, at)

    def _match_turn(self, session: SessionState, text: str, at: float) -> list[TurnOutcome]:
        result = self.script.matcher.match(text)
        if isinstance(result, NoMatch):
            session.consecutive_nomatch += 1
            if session.consecutive_nomatch >= MAX_CONSECUTIVE_NOMATCH:
                session.consecutive_nomatch = 0
                return self._end_conversation(session, at, lead=GIVE_UP_LINE)
            session.log("robot", CLARIFY_LINE, at)
            return [RobotSay(CLARIFY_LINE)]
        session.consecutive_nomatch = 0
        assert isinstance(result, Matched)
        dialogue = self.script.dialogue_for_intent(result.intent)
        session.active_dialogue = dialogue.id
        session.active_intent = result.intent
        session.filled = dict(result.filled)
        session.pending_slot = None
        session.pending_retries = 0
        return self._advance_dialogue(session, at)

    def _slot_answer(self, session: SessionState, text: str, at: float) -> list[TurnOutcome]:
        intent = self.script.intents[session.active_intent]
        spec = intent.slot(session.pending_slot)
        tokens = normalize(text)
        value: str | None = None
        if spec.is_catalog:
            res = resolve_answer(self.script.catalogs[spec.kind], tokens)
            if isinstance(res, Unique):
                value = res.canonical
        elif tokens:
            value = " ".join(tokens)
        if value is None:
            session.pending_retries += 1
            dialogue = self.script.dialogues[session.active_dialogue]
            if session.pending_retries > dialogue.max_slot_retries:
                return self._end_conversation(session, at, lead=SLOT_GIVE_UP_LINE)
            prompt = dialogue.slot_prompts.get(spec.name, CLARIFY_LINE)
            session.log("robot", prompt, at)
            return [PromptSlot(spec.name, prompt)]
        session.filled[spec.name] = value
        session.pending_slot = None
        session.pending_retries = 0
        return self._advance_dialogue(session, at)

    def _advance_dialogue(self, session: SessionState, at: float) -> list[TurnOutcome]:
        """Prompt for the next missing required slot or finish the dialogue."""
        intent = self.script.intents[session.active_intent]
        dialogue = self.script.dialogues[session.active_dialogue]
        for slot in intent.slots:
            if slot.required and slot.name not in session.filled:
                session.pending_slot = slot.name
                session.status = Status.AWAITING_USER
                prompt = dialogue.slot_prompts[slot.name]
                session.log("robot", prompt, at)
                return [PromptSlot(slot.name, prompt)]
        if dialogue.dispatch:
            envelope = RequestEnvelope(
                session=session.id,
                kind="utterance",
                text=session.last_user_text,
                context={
                    "mode": self.mode,
                    "sim_time": at,
                    "intent": intent.id,
                    "slots": dict(session.filled),
                },
            )
            session.status = Status.AWAITING_BACKEND
            return [Dispatch(envelope)]
        reply = render(dialogue.reply_template, session.filled)
        session.log("robot", reply, at)
        outcomes: list[TurnOutcome] = [RobotSay(reply)]
        if dialogue.follow_up is not None:
            outcomes.extend(self._open_follow_up(session, dialogue.follow_up, at))
            return outcomes
        outcomes.extend(self._end_conversation(session, at))
        return outcomes

    # -- backend results ---------------------------------------------------

    def backend_result(
        self, session: SessionState, response: ResponseEnvelope, at: float = 0.0
    ) -> list[TurnOutcome]:
        if session.status is not Status.AWAITING_BACKEND:
            raise ProtocolViolation(
                f"session {session.id!r} is not awaiting a backend result"
            )
        if response.session != session.id:
            raise ProtocolViolation(
                f"response session {response.session!r} does not match {session.id!r}"
            )
        if not response.speech:
            raise ProtocolViolation("response speech must be non-empty")
        session.log("robot", response.speech, at)
        outcomes: list[TurnOutcome] = [RobotSay(response.speech)]
        if response.follow_up is not None:
            if response.follow_up not in self.script.dialogues:
                raise ProtocolViolation(
                    f"response names unknown follow_up {response.follow_up!r}"
                )
            outcomes.extend(self._open_follow_up(session, response.follow_up, at))
            return outcomes
        outcomes.extend(self._end_conversation(session, at, terminal=response.end))
        return outcomes

    def _open_follow_up(
        self, session: SessionState, dialogue_id: str, at: float
    ) -> list[TurnOutcome]:
        dialogue = self.script.dialogues[dialogue_id]
        session.active_dialogue = dialogue.id
        session.pending_slot = None
        session.pending_retries = 0
        session.status = Status.AWAITING_USER
        line = render(dialogue.reply_template, session.filled)
        session.log("robot", line, at)
        return [RobotSay(line)]

    # -- robot-initiated dialogues ------------------------------------------

    def initiate_dialogue(
        self,
        session: SessionState,
        dialogue_id: str,
        payload: dict[str, object] | None = None,
        at: float = 0.0,
    ) -> list[TurnOutcome]:
        if dialogue_id not in self.script.dialogues:
            raise UnknownDialogue(f"no dialogue {dialogue_id!r} in script")
        dialogue = self.script.dialogues[dialogue_id]
        if not isinstance(dialogue.trigger, ApiCall):
            raise DialogueError(
                f"dialogue {dialogue_id!r} is not API-triggered and cannot be initiated"
            )
        if session.status in (Status.IDLE, Status.TERMINAL):
            return self._open_api_dialogue(session, dialogue, payload or {}, at)
        session.queued_initiations.append((dialogue_id, dict(payload or {})))
        return []

    def _open_api_dialogue(
        self,
        session: SessionState,
        dialogue: DialogueDef,
        payload: dict[str, object],
        at: float,
    ) -> list[TurnOutcome]:
        session.reopen()
        line = render(dialogue.reply_template, payload)
        session.log("robot", line, at)
        outcomes: list[TurnOutcome] = [RobotSay(line)]
        if dialogue.follow_up is not None:
            session.active_dialogue = dialogue.id
            session.filled = {k: str(v) for k, v in payload.items()}
            outcomes.extend(self._open_follow_up(session, dialogue.follow_up, at))
            return outcomes
        # An announcement without follow-up does not hold the floor.
        outcomes.extend(self._drain_queue(session, at))
        return outcomes

    # -- conversation lifecycle ----------------------------------------------

    def _end_conversation(
        self, session: SessionState, at: float, lead: str | None = None, terminal: bool = False
    ) -> list[TurnOutcome]:
        outcomes: list[TurnOutcome] = []
        if lead is not None:
            session.log("robot", lead, at)
            outcomes.append(RobotSay(lead))
        session.active_dialogue = None
        session.active_intent = None
        session.pending_slot = None
        session.pending_retries = 0
        session.filled = {}
        session.status = Status.TERMINAL if terminal else Status.IDLE
        outcomes.append(ConversationEnded())
        outcomes.extend(self._drain_queue(session, at))
        return outcomes

    def _drain_queue(self, session: SessionState, at: float) -> list[TurnOutcome]:
        outcomes: list[TurnOutcome] = []
        while session.queued_initiations and session.status in (
            Status.IDLE,
            Status.TERMINAL,
        ):
            dialogue_id, payload = session.queued_initiations.popleft()
            dialogue = self.script.dialogues[dialogue_id]
            outcomes.extend(self._open_api_dialogue(session, dialogue, payload, at))
        return outcomes
