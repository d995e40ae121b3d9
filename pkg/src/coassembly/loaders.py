"""Loading and validation of script, plan and scenario JSON documents.

Every document carries a top-level ``"version": 1``.  Structure is
checked against the JSON schemas shipped in ``coassembly/schemas``;
semantic rules (cross-references, acyclicity, baseline restrictions) are
enforced here afterwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from . import trace as tr
from .assembly import AssemblyPlan, Item, Step, validate_plan
from .dialogue import ApiCall, ConversationScript, DialogueDef, UserIntent
from .errors import PlanError, ScenarioError, ScriptError
from .events import EventRule
from .intent import Catalog, CatalogEntry, IntentDef, SlotSpec, UtteranceTemplate
from .operator import Latency, OperatorProfile
from .robot import FailureModel, ScheduledFailure
from .world import BASELINE, CONVERSATIONAL, MODES

_SCHEMAS = {}


def _schema(name: str) -> dict:
    if name not in _SCHEMAS:
        text = resources.files("coassembly.schemas").joinpath(name).read_text("utf-8")
        _SCHEMAS[name] = json.loads(text)
    return _SCHEMAS[name]


def _load_json(path, error_cls):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise error_cls(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise error_cls(f"{path} is not valid JSON: {exc}") from exc


def _check_schema(raw: dict, schema_name: str, error_cls, label: str) -> None:
    try:
        jsonschema.validate(raw, _schema(schema_name))
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise error_cls(f"{label}: {exc.message} (at {path})") from exc


# --- conversation scripts -----------------------------------------------------


@dataclass(frozen=True)
class ScriptBundle:
    script: ConversationScript
    rules: tuple[EventRule, ...] = ()


def parse_script(raw: dict, label: str = "script") -> ScriptBundle:
    _check_schema(raw, "script.schema.json", ScriptError, label)
    catalogs = {}
    for c in raw.get("catalogs", []):
        catalogs[c["name"]] = Catalog(
            name=c["name"],
            entries=tuple(
                CatalogEntry(
                    canonical=e["canonical"], synonyms=tuple(e.get("synonyms", []))
                )
                for e in c["entries"]
            ),
        )
    intents = {}
    for i in raw.get("intents", []):
        intents[i["id"]] = IntentDef(
            id=i["id"],
            utterances=tuple(UtteranceTemplate.parse(u) for u in i["utterances"]),
            slots=tuple(
                SlotSpec(
                    name=s["name"],
                    kind=s.get("kind", "free-text"),
                    required=s.get("required", True),
                )
                for s in i.get("slots", [])
            ),
        )
    dialogues = {}
    for d in raw.get("dialogues", []):
        trig = d["trigger"]
        trigger = (
            UserIntent(trig["intent"]) if "intent" in trig else ApiCall(trig["api"])
        )
        dialogues[d["id"]] = DialogueDef(
            id=d["id"],
            trigger=trigger,
            reply_template=d.get("reply", ""),
            dispatch=d.get("dispatch", False),
            follow_up=d.get("follow_up"),
            slot_prompts=dict(d.get("slot_prompts", {})),
            max_slot_retries=d.get("max_slot_retries", 2),
        )
    script = ConversationScript(catalogs=catalogs, intents=intents, dialogues=dialogues)
    problems = script.validate()
    rules = []
    for r in raw.get("event_rules", []):
        payload_map = {}
        payload_const = {}
        for key, value in r.get("payload", {}).items():
            if isinstance(value, str) and value.startswith("$"):
                payload_map[key] = value[1:]
            else:
                payload_const[key] = value
        rules.append(
            EventRule(
                event=r["event"],
                dialogue=r["dialogue"],
                where=dict(r.get("where", {})),
                payload_map=payload_map,
                payload_const=payload_const,
            )
        )
    for rule in rules:
        dlg = script.dialogues.get(rule.dialogue)
        if dlg is None:
            problems.append(f"event rule targets unknown dialogue {rule.dialogue!r}")
        elif not isinstance(dlg.trigger, ApiCall):
            problems.append(
                f"event rule targets dialogue {rule.dialogue!r} without an API trigger"
            )
    if problems:
        raise ScriptError(f"{label}: " + "; ".join(problems))
    return ScriptBundle(script=script, rules=tuple(rules))


def load_script(path) -> ScriptBundle:
    raw = _load_json(path, ScriptError)
    return parse_script(raw, label=str(path))


def check_baseline_restrictions(bundle: ScriptBundle) -> list[str]:
    """Baseline mode forbids robot initiative and multi-turn slot filling."""
    problems = []
    for dlg in bundle.script.dialogues.values():
        if isinstance(dlg.trigger, ApiCall):
            problems.append(f"baseline script has API-triggered dialogue {dlg.id!r}")
    for intent in bundle.script.intents.values():
        if any(s.required for s in intent.slots):
            problems.append(
                f"baseline script intent {intent.id!r} requires slot filling"
            )
    if bundle.rules:
        problems.append("baseline script declares event rules")
    return problems


def baseline_script() -> ScriptBundle:
    """The built-in four-command request-response script."""
    commands = {
        "cmd_next": ("next", "continue", "go on"),
        "cmd_repeat": ("repeat", "say again"),
        "cmd_reset": ("reset", "restart"),
        "cmd_stop": ("stop", "halt"),
    }
    intents = {
        intent_id: IntentDef(
            id=intent_id,
            utterances=tuple(UtteranceTemplate.parse(u) for u in utterances),
        )
        for intent_id, utterances in commands.items()
    }
    dialogues = {
        intent_id: DialogueDef(
            id=intent_id,
            trigger=UserIntent(intent_id),
            reply_template="",
            dispatch=True,
        )
        for intent_id in commands
    }
    script = ConversationScript(catalogs={}, intents=intents, dialogues=dialogues)
    problems = script.validate()
    assert not problems, problems
    return ScriptBundle(script=script)


# --- assembly plans ------------------------------------------------------------


def parse_plan(raw: dict, label: str = "plan") -> AssemblyPlan:
    _check_schema(raw, "plan.schema.json", PlanError, label)
    items = tuple(
        Item(id=i["id"], kind=i["kind"], label=i.get("label", i["id"]))
        for i in raw.get("items", [])
    )
    initial = {
        i["id"]: i.get("location", "storage") for i in raw.get("items", [])
    }
    steps = tuple(
        Step(
            id=s["id"],
            actor=s["actor"],
            duration=float(s["duration"]),
            needs=frozenset(s.get("needs", [])),
            description=s.get("description", ""),
        )
        for s in raw["steps"]
    )
    plan = AssemblyPlan(
        id=raw.get("id", "plan"),
        steps=steps,
        precedence=tuple((a, b) for a, b in raw.get("precedence", [])),
        items=items,
        initial_locations=initial,
    )
    problems = validate_plan(plan)
    if problems:
        raise PlanError(f"{label}: " + "; ".join(problems))
    return plan


def load_plan(path) -> AssemblyPlan:
    raw = _load_json(path, PlanError)
    return parse_plan(raw, label=str(path))


# --- scenarios ------------------------------------------------------------------


@dataclass
class ScenarioConfig:
    """Fully materialized scenario: referenced assets already loaded."""

    mode: str
    seed: int
    plan: AssemblyPlan
    script: ScriptBundle
    baseline: ScriptBundle
    profile: OperatorProfile
    failures: FailureModel
    max_time_ms: int
    robot_fetch_ms: int = 8000
    name: str = "scenario"

    def bundle_for(self, mode: str) -> ScriptBundle:
        return self.baseline if mode == BASELINE else self.script


def _parse_latency(raw, default: Latency) -> Latency:
    if raw is None:
        return default
    if "constant" in raw:
        return Latency(kind="constant", a=tr.s_to_ms(raw["constant"]))
    lo, hi = raw["uniform"]
    return Latency(kind="uniform", a=tr.s_to_ms(lo), b=tr.s_to_ms(hi))


def parse_scenario(raw: dict, base_dir: Path, label: str = "scenario") -> ScenarioConfig:
    _check_schema(raw, "scenario.schema.json", ScenarioError, label)
    mode = raw.get("mode", CONVERSATIONAL)
    if mode not in MODES:
        raise ScenarioError(f"{label}: unknown mode {mode!r}")
    plan = load_plan(base_dir / raw["plan"])
    script = load_script(base_dir / raw["script"])
    if raw.get("baseline_script"):
        baseline = load_script(base_dir / raw["baseline_script"])
    else:
        baseline = baseline_script()
    baseline_problems = check_baseline_restrictions(baseline)
    if mode == BASELINE:
        baseline_problems.extend(check_baseline_restrictions(script))
    if baseline_problems:
        raise ScenarioError(f"{label}: " + "; ".join(baseline_problems))
    op = raw.get("operator", {})
    profile = OperatorProfile(
        say_latency=_parse_latency(op.get("say_latency"), Latency(a=1500)),
        notice_latency=_parse_latency(op.get("notice_latency"), Latency(a=4000)),
        assist_ms=tr.s_to_ms(op.get("assist_duration", 6.0)),
        human_fetch_ms=tr.s_to_ms(op.get("human_fetch", 10.0)),
        work_speed=float(op.get("work_speed", 1.0)),
        lookahead=int(op.get("lookahead", 3)),
    )
    problems = profile.validate()
    f = raw.get("failures", {})
    failures = FailureModel(
        probabilities=dict(f.get("probabilities", {})),
        seed=int(raw.get("seed", 0)),
        schedule=tuple(
            ScheduledFailure(
                busy_ms=tr.s_to_ms(entry["busy"]), reason=entry.get("reason", "dropped")
            )
            for entry in f.get("schedule", [])
        ),
    )
    problems.extend(failures.validate())
    max_time = raw.get("max_time", 3600.0)
    if max_time <= 0:
        problems.append("max_time must be positive")
    if problems:
        raise ScenarioError(f"{label}: " + "; ".join(problems))
    return ScenarioConfig(
        mode=mode,
        seed=int(raw.get("seed", 0)),
        plan=plan,
        script=script,
        baseline=baseline,
        profile=profile,
        failures=failures,
        max_time_ms=tr.s_to_ms(max_time),
        robot_fetch_ms=tr.s_to_ms(raw.get("robot_fetch", 8.0)),
        name=raw.get("name", "scenario"),
    )


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    raw = _load_json(path, ScenarioError)
    return parse_scenario(raw, base_dir=path.parent, label=str(path))


def asset_path(name: str) -> Path:
    """Filesystem path of a packaged reference asset."""
    return Path(str(resources.files("coassembly.assets").joinpath(name)))
