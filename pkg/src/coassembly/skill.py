"""Skill logic: what each dispatched intent does to the world.

This is the back-end brain behind the dialogue engine's dispatches: it
executes the requested robot commands and phrases the spoken reply.
"""

from __future__ import annotations

from .protocol import RequestEnvelope, ResponseEnvelope
from .world import World

GOODBYE_LINE = "Goodbye. It was a pleasure working with you."
UNKNOWN_REQUEST_LINE = "I cannot help with that yet."


def handle_dispatch(
    world: World,
    envelope: RequestEnvelope,
    last_robot_line: str = "",
    live_operator: bool = False,
) -> ResponseEnvelope:
    """Execute a dispatched intent against the world and phrase the reply.

    `live_operator` marks sessions driven by a real human, whose physical
    actions (placing a dropped part) are taken at their word instead of
    being simulated.
    """
    intent = envelope.context.get("intent", "")
    slots = envelope.context.get("slots", {})
    speech = UNKNOWN_REQUEST_LINE
    end = False
    if intent in ("request_tool", "request_component"):
        label = slots.get("tool") or slots.get("component") or ""
        item_id = world.item_by_label(label)
        if item_id is None:
            speech = f"I do not know the {label}." if label else UNKNOWN_REQUEST_LINE
        else:
            speech = world.request_delivery(item_id)
    elif intent == "ask_status":
        speech = world.robot.status_text()
    elif intent == "ask_progress":
        total = len(world.plan.steps)
        done = len(world.progress.done())
        speech = f"We have finished {done} of {total} steps; {total - done} remain."
    elif intent == "assist_done":
        if live_operator and world.pending_assist is not None and not world.assist_placed:
            world.force_assist_placement()
        speech = world.confirm_assist_done()
    elif intent == "goodbye":
        speech = GOODBYE_LINE
        end = True
    elif intent == "cmd_next":
        speech = world.arm_next_step()
    elif intent == "cmd_stop":
        speech = world.command_stop()
    elif intent == "cmd_reset":
        speech = world.command_reset()
    elif intent == "cmd_repeat":
        speech = last_robot_line or "I have not said anything yet."
    return ResponseEnvelope(session=envelope.session, speech=speech, end=end)
