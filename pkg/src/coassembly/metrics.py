"""Quantitative measures over traces: execution time, robot downtime,
turn statistics, mode comparison and questionnaire aggregation.

Robot downtime is defined as simulated time the robot spends not
executing (idle, blocked or faulted) while at least one robot-assignable
step (robot or joint actor) is still pending or ready.  Faulted time
counts as downtime.  Idle time after the last robot-assignable step is
done is "non-accountable" and closes the accounting identity::

    robot_busy + robot_downtime + non_accountable_idle == execution_time
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from . import trace as tr
from .errors import EmptySample, MalformedTrace, ZeroBaseline

_EXECUTING = "executing"

ASPECTS = ("clarity", "naturalness", "ease", "stress", "overall")


@dataclass(frozen=True)
class MetricsReport:
    execution_time: float
    robot_busy: float
    robot_downtime: float
    non_accountable_idle: float
    user_turns: int
    robot_turns: int
    slot_prompts: int
    failures: int
    dropped_events: int

    def to_dict(self) -> dict:
        return {
            "execution_time": self.execution_time,
            "robot_busy": self.robot_busy,
            "robot_downtime": self.robot_downtime,
            "non_accountable_idle": self.non_accountable_idle,
            "user_turns": self.user_turns,
            "robot_turns": self.robot_turns,
            "slot_prompts": self.slot_prompts,
            "failures": self.failures,
            "dropped_events": self.dropped_events,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def compute_metrics(trace: tr.Trace) -> MetricsReport:
    """Pure function of the trace; integer-millisecond interval math."""
    trace.validate()
    records = trace.records
    t0 = records[0].t_ms
    t_end = records[-1].t_ms
    robot_executing = False
    robot_work_pending: set[str] = set()
    busy_ms = 0
    downtime_ms = 0
    last_ms = t0
    user_turns = robot_turns = slot_prompts = failures = 0
    dropped_events = 0
    for rec in records:
        span = rec.t_ms - last_ms
        if span > 0:
            if robot_executing:
                busy_ms += span
            elif robot_work_pending:
                downtime_ms += span
            last_ms = rec.t_ms
        if rec.kind == tr.ROBOT_EVENT:
            event = rec.payload.get("event")
            if event == "mode_change":
                robot_executing = rec.payload.get("mode") == _EXECUTING
            elif event == "action_failed":
                failures += 1
        elif rec.kind == tr.STEP_STATUS:
            robot_work_pending = _update_pending(robot_work_pending, rec.payload)
        elif rec.kind == tr.UTTERANCE:
            if rec.payload.get("speaker") == "user":
                user_turns += 1
            else:
                robot_turns += 1
        elif rec.kind == tr.DIALOGUE_OUTCOME:
            if rec.payload.get("outcome") == "prompt_slot":
                slot_prompts += 1
        elif rec.kind == tr.SIM_END:
            dropped_events = int(rec.payload.get("dropped_events", 0))
    execution_ms = t_end - t0
    non_accountable_ms = execution_ms - busy_ms - downtime_ms
    if non_accountable_ms < 0:
        raise MalformedTrace("robot intervals exceed the trace span")
    return MetricsReport(
        execution_time=tr.ms_to_s(execution_ms),
        robot_busy=tr.ms_to_s(busy_ms),
        robot_downtime=tr.ms_to_s(downtime_ms),
        non_accountable_idle=tr.ms_to_s(non_accountable_ms),
        user_turns=user_turns,
        robot_turns=robot_turns,
        slot_prompts=slot_prompts,
        failures=failures,
        dropped_events=dropped_events,
    )


def _update_pending(pending: set[str], payload: dict) -> set[str]:
    if payload.get("actor") not in ("robot", "joint"):
        return pending
    step = payload.get("step")
    updated = set(pending)
    if payload.get("status") in ("pending", "ready"):
        updated.add(step)
    else:
        updated.discard(step)
    return updated


def _round1(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ComparisonReport:
    execution_time_reduction_pct: float
    downtime_reduction_pct: float
    baseline: MetricsReport
    proposed: MetricsReport

    def to_dict(self) -> dict:
        return {
            "execution_time_reduction_pct": self.execution_time_reduction_pct,
            "downtime_reduction_pct": self.downtime_reduction_pct,
            "baseline": self.baseline.to_dict(),
            "proposed": self.proposed.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def compare(base: MetricsReport, prop: MetricsReport) -> ComparisonReport:
    """Percentage reductions baseline -> proposed, half-up to 0.1."""
    if base.execution_time <= 0 or base.robot_downtime <= 0:
        raise ZeroBaseline("baseline execution time and downtime must be positive")
    exec_red = 100.0 * (base.execution_time - prop.execution_time) / base.execution_time
    down_red = 100.0 * (base.robot_downtime - prop.robot_downtime) / base.robot_downtime
    return ComparisonReport(
        execution_time_reduction_pct=_round1(exec_red),
        downtime_reduction_pct=_round1(down_red),
        baseline=base,
        proposed=prop,
    )


@dataclass(frozen=True)
class QuestionnaireRecord:
    """Five 0-10 ratings, mirroring the study's questionnaire aspects."""

    clarity: float
    naturalness: float
    ease: float
    stress: float
    overall: float

    def __post_init__(self):
        for aspect in ASPECTS:
            value = getattr(self, aspect)
            if not 0.0 <= value <= 10.0:
                raise ValueError(f"{aspect} rating {value} outside [0, 10]")


def aggregate_questionnaire(records: list[QuestionnaireRecord]) -> dict[str, float]:
    """Per-aspect arithmetic means plus the grand mean, one decimal."""
    if not records:
        raise EmptySample("no questionnaire records")
    means = {
        aspect: _round1(sum(getattr(r, aspect) for r in records) / len(records))
        for aspect in ASPECTS
    }
    total = sum(getattr(r, aspect) for r in records for aspect in ASPECTS)
    means["mean"] = _round1(total / (len(records) * len(ASPECTS)))
    return means


def render_table(report: MetricsReport) -> str:
    """Aligned-column text rendering of one report."""
    rows = [
        ("execution time", f"{report.execution_time:.3f} s"),
        ("robot busy", f"{report.robot_busy:.3f} s"),
        ("robot downtime", f"{report.robot_downtime:.3f} s"),
        ("non-accountable idle", f"{report.non_accountable_idle:.3f} s"),
        ("user turns", str(report.user_turns)),
        ("robot turns", str(report.robot_turns)),
        ("slot prompts", str(report.slot_prompts)),
        ("failures", str(report.failures)),
        ("dropped events", str(report.dropped_events)),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name.ljust(width)}  {value}" for name, value in rows)


CSV_HEADER = (
    "scenario,mode,execution_time,robot_busy,robot_downtime,non_accountable_idle,"
    "user_turns,robot_turns,slot_prompts,failures,dropped_events"
)


def csv_row(report: MetricsReport, scenario: str, mode: str) -> str:
    return ",".join(
        [
            scenario,
            mode,
            f"{report.execution_time:.3f}",
            f"{report.robot_busy:.3f}",
            f"{report.robot_downtime:.3f}",
            f"{report.non_accountable_idle:.3f}",
            str(report.user_turns),
            str(report.robot_turns),
            str(report.slot_prompts),
            str(report.failures),
            str(report.dropped_events),
        ]
    )
