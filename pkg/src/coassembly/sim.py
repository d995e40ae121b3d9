"""Headless scenario execution on the virtual clock."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .loaders import ScenarioConfig
from .runtime import Runtime
from .trace import Trace


def build_runtime(
    config: ScenarioConfig,
    mode: str | None = None,
    scripted: bool = True,
    create_primary: bool = True,
) -> Runtime:
    """Assemble a runtime for one scenario run (fresh everything)."""
    run_mode = mode or config.mode
    bundle = config.bundle_for(run_mode)
    return Runtime(
        plan=config.plan,
        script=bundle.script,
        rules=bundle.rules,
        mode=run_mode,
        seed=config.seed,
        profile=config.profile,
        failures=config.failures.fresh(),
        max_time_ms=config.max_time_ms,
        robot_fetch_ms=config.robot_fetch_ms,
        scripted=scripted,
        create_primary=create_primary,
    )


def run_scenario(config: ScenarioConfig, mode: str | None = None) -> Trace:
    """Run one scenario to completion; fully deterministic given config."""
    runtime = build_runtime(config, mode=mode)
    trace = runtime.run()
    trace.validate()
    return trace


@dataclass(frozen=True)
class BatchRun:
    index: int  # position in the caller's config list
    position: int  # position in the shuffled execution order
    trace: Trace


def run_batch(configs: list[ScenarioConfig], order_seed: int = 0) -> list[BatchRun]:
    """Run scenarios in a seeded shuffled order; results in caller order.

    Each run is isolated (nothing shared), so traces depend only on their
    own config, never on batch order.
    """
    if not configs:
        raise ValueError("run_batch needs at least one scenario")
    order = list(range(len(configs)))
    random.Random(order_seed).shuffle(order)
    results: dict[int, BatchRun] = {}
    for position, index in enumerate(order):
        results[index] = BatchRun(
            index=index, position=position, trace=run_scenario(configs[index])
        )
    return [results[i] for i in range(len(configs))]
