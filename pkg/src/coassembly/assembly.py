"""Assembly plans: steps, precedence DAG, items and workspace locations."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import PlanError

HUMAN = "human"
ROBOT = "robot"
JOINT = "joint"
ACTORS = (HUMAN, ROBOT, JOINT)

TOOL = "tool"
COMPONENT = "component"

STORAGE = "storage"
SHARED_BENCH = "shared-bench"
HUMAN_HAND = "human-hand"
ROBOT_GRIPPER = "robot-gripper"
LOCATIONS = (STORAGE, SHARED_BENCH, HUMAN_HAND, ROBOT_GRIPPER)


class StepStatus(enum.Enum):
    PENDING = "pending"
    READY = "ready"
    ACTIVE = "active"
    DONE = "done"
    FAILED = "failed"


@dataclass(frozen=True)
class Item:
    id: str
    kind: str  # TOOL | COMPONENT
    label: str = ""  # catalog label used in conversation


@dataclass(frozen=True)
class Step:
    id: str
    actor: str  # HUMAN | ROBOT | JOINT
    duration: float  # nominal, sim-seconds
    needs: frozenset[str] = frozenset()
    description: str = ""


@dataclass(frozen=True)
class AssemblyPlan:
    id: str
    steps: tuple[Step, ...]
    precedence: tuple[tuple[str, str], ...]  # (before, after)
    items: tuple[Item, ...] = ()
    initial_locations: dict[str, str] = field(default_factory=dict)

    def step(self, step_id: str) -> Step:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise KeyError(step_id)

    def predecessors(self, step_id: str) -> set[str]:
        return {b for (b, a) in self.precedence if a == step_id}

    def item(self, item_id: str) -> Item:
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(item_id)


def validate_plan(plan: AssemblyPlan) -> list[str]:
    """Collect every structural problem; empty list means the plan is usable."""
    problems = []
    ids = [s.id for s in plan.steps]
    id_set = set(ids)
    if len(ids) != len(id_set):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        problems.append(f"duplicate step ids: {dupes}")
    item_ids = {it.id for it in plan.items}
    for step in plan.steps:
        if step.actor not in ACTORS:
            problems.append(f"step {step.id!r}: unknown actor {step.actor!r}")
        if step.duration <= 0:
            problems.append(
                f"step {step.id!r}: non-positive duration {step.duration}"
            )
        for need in sorted(step.needs):
            if need not in item_ids:
                problems.append(f"step {step.id!r}: unknown item {need!r}")
    for before, after in plan.precedence:
        for end in (before, after):
            if end not in id_set:
                problems.append(f"precedence references unknown step {end!r}")
    for item_id, loc in plan.initial_locations.items():
        if item_id not in item_ids:
            problems.append(f"initial location for unknown item {item_id!r}")
        if loc not in LOCATIONS:
            problems.append(f"item {item_id!r}: unknown location {loc!r}")
    cycle = _find_cycle(id_set, plan.precedence)
    if cycle:
        problems.append(f"cyclic precedence through steps: {sorted(cycle)}")
    return problems


def _find_cycle(nodes: set[str], edges) -> set[str]:
    """Return the set of nodes stuck in cycles (Kahn's algorithm residue)."""
    indeg = {n: 0 for n in nodes}
    out: dict[str, list[str]] = {n: [] for n in nodes}
    for b, a in edges:
        if b in nodes and a in nodes:
            indeg[a] += 1
            out[b].append(a)
    queue = [n for n in sorted(nodes) if indeg[n] == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    if seen == len(nodes):
        return set()
    return {n for n in nodes if indeg[n] > 0}


def topological_order(plan: AssemblyPlan) -> list[str]:
    """Deterministic topological order (declaration order among ready steps)."""
    declared = {s.id: i for i, s in enumerate(plan.steps)}
    remaining = set(declared)
    done: set[str] = set()
    order = []
    while remaining:
        ready = sorted(
            (declared[s], s)
            for s in remaining
            if plan.predecessors(s) <= done
        )
        if not ready:
            raise PlanError("plan has cyclic precedence")
        _, nxt = ready[0]
        order.append(nxt)
        remaining.remove(nxt)
        done.add(nxt)
    return order


def critical_path_length(plan: AssemblyPlan) -> float:
    """Longest path through the precedence DAG by nominal durations."""
    finish: dict[str, float] = {}
    for step_id in topological_order(plan):
        step = plan.step(step_id)
        start = max((finish[p] for p in plan.predecessors(step_id)), default=0.0)
        finish[step_id] = start + step.duration
    return max(finish.values(), default=0.0)


@dataclass
class ProgressState:
    """Mutable per-run view of step statuses and item locations."""

    status: dict[str, StepStatus]
    locations: dict[str, str]

    @classmethod
    def initial(cls, plan: AssemblyPlan) -> "ProgressState":
        locations = {it.id: STORAGE for it in plan.items}
        locations.update(plan.initial_locations)
        return cls(
            status={s.id: StepStatus.PENDING for s in plan.steps},
            locations=locations,
        )

    def done(self) -> set[str]:
        return {s for s, st in self.status.items() if st is StepStatus.DONE}

    def all_done(self) -> bool:
        return all(st is StepStatus.DONE for st in self.status.values())


def ready_steps(plan: AssemblyPlan, progress: ProgressState) -> set[str]:
    """Not-yet-started steps whose predecessors are all done.

    Steps already flagged READY stay in the result until they go active,
    which keeps the set monotone under done-marking.
    """
    done = progress.done()
    return {
        s.id
        for s in plan.steps
        if progress.status[s.id] in (StepStatus.PENDING, StepStatus.READY)
        and plan.predecessors(s.id) <= done
    }
