"""Adaptive hyperparameter exchange on a live simulation.

The loop alternates three phases per round: score the current operating
point (mean fault deviation over a fixed probe set, each probe evaluated
in a fresh paired run), pick the best strictly-improving single-key move
on a finite grid, and exchange it into the live runtime at the next window
boundary. It stops when no neighbor improves or after max_rounds. With the
probe set and seed fixed the whole trajectory is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .astro import AstroParams
from .core import NetworkConfig
from .events import SpikeRaster
from .faults import FaultSpec, compute_ft
from .runtime import SWAPPABLE_KEYS, SimulationRuntime, run_simulation

OBJECTIVES = ("minimize_mean_ft",)


@dataclass(frozen=True)
class AdaptiveSchedule:
    """Search space and cadence for the adaptive loop."""

    grid: dict[str, tuple]
    boundary_ms: float = 100.0
    objective: str = "minimize_mean_ft"
    max_rounds: int = 8
    probe_faults: int = 4

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError("grid must not be empty")
        for key, values in self.grid.items():
            if key not in SWAPPABLE_KEYS:
                raise ValueError(f"grid key {key!r} is not swappable")
            if not values:
                raise ValueError(f"grid for {key!r} must list at least one value")
        object.__setattr__(
            self, "grid", {key: tuple(values) for key, values in self.grid.items()}
        )
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.boundary_ms <= 0:
            raise ValueError("boundary_ms must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.probe_faults < 1:
            raise ValueError("probe_faults must be >= 1")


@dataclass
class RoundRecord:
    round: int
    overlay: dict[str, Any]
    objective: float


@dataclass
class AdaptiveReport:
    rounds: list[RoundRecord]
    best_overlay: dict[str, Any]
    best_objective: float
    evaluations: dict[tuple, float]
    applied_swaps: list[tuple[int, int]]
    window_hashes: list[str] = field(default_factory=list)
    events_consumed: int = 0


def probe_fault_set(config: NetworkConfig, count: int) -> list[FaultSpec]:
    """Evenly spaced hidden-neuron silencing probes."""
    count = min(count, config.n_hidden)
    indices = sorted({int(i * config.n_hidden / count) for i in range(count)})
    return [FaultSpec("silence_neuron", i, 0.0) for i in indices]


def _point_key(point: dict[str, Any]) -> tuple:
    return tuple(sorted(point.items()))


def _with_overlay(
    config: NetworkConfig, astro: AstroParams, overlay: dict[str, Any]
) -> tuple[NetworkConfig, AstroParams]:
    astro_fields = {
        key.split(".", 1)[1]: value for key, value in overlay.items() if key.startswith("astro.")
    }
    if astro_fields:
        astro = replace(astro, **astro_fields)
    for layer in ("hidden", "output"):
        prefix = f"network.{layer}."
        updates = {k[len(prefix):]: v for k, v in overlay.items() if k.startswith(prefix)}
        if updates:
            config = replace(config, **{layer: replace(getattr(config, layer), **updates)})
    return config, astro


def adaptive_loop(
    config: NetworkConfig,
    astro: AstroParams,
    workload: SpikeRaster,
    schedule: AdaptiveSchedule,
    probes: Sequence[FaultSpec] | None = None,
) -> AdaptiveReport:
    """Greedy coordinate descent over the grid, woven into a live runtime."""
    if schedule.boundary_ms < astro.window_ms:
        raise ValueError(
            f"boundary_ms {schedule.boundary_ms} must be >= astro window {astro.window_ms}"
        )
    probe_specs = list(probes) if probes is not None else probe_fault_set(config, schedule.probe_faults)
    if not probe_specs:
        raise ValueError("probe fault set must not be empty")

    cache: dict[tuple, float] = {}

    def evaluate(point: dict[str, Any]) -> float:
        key = _point_key(point)
        if key in cache:
            return cache[key]
        cfg, params = _with_overlay(config, astro, point)
        baseline = run_simulation(cfg, params, workload).output_counts
        if float(np.sum(np.abs(baseline))) == 0.0:
            raise ValueError(
                f"objective undefined at {point}: fault-free output is all zero"
            )
        fts = [
            compute_ft(
                baseline,
                run_simulation(cfg, params, workload, fault_plan=[spec]).output_counts,
            )
            for spec in probe_specs
        ]
        cache[key] = float(np.mean(fts))
        return cache[key]

    keys = list(schedule.grid)
    current = {key: schedule.grid[key][0] for key in keys}
    start_config, start_astro = _with_overlay(config, astro, current)
    live = SimulationRuntime(start_config, start_astro, workload)
    boundary_windows = max(1, int(round(schedule.boundary_ms / astro.window_ms)))

    rounds: list[RoundRecord] = []
    for round_idx in range(1, schedule.max_rounds + 1):
        if not live.terminated:
            live.run(max_windows=boundary_windows)
        current_obj = evaluate(current)
        rounds.append(RoundRecord(round_idx, dict(current), current_obj))
        best_move: dict[str, Any] | None = None
        best_obj = current_obj
        for key in keys:
            for value in schedule.grid[key]:
                if value == current[key]:
                    continue
                candidate = dict(current)
                candidate[key] = value
                obj = evaluate(candidate)
                if obj < best_obj:
                    best_obj = obj
                    best_move = candidate
        if best_move is None:
            break
        overlay = {k: v for k, v in best_move.items() if v != current[k]}
        if not live.terminated:
            live.request_swap(overlay)
            live.apply_pending()
        current = best_move

    result = live.result()
    # Ties favor the earliest-evaluated point, so a flat objective keeps the
    # start point.
    best_key, best_val = None, float("inf")
    for key, value in cache.items():
        if value < best_val:
            best_key, best_val = key, value
    return AdaptiveReport(
        rounds=rounds,
        best_overlay=dict(best_key),
        best_objective=best_val,
        evaluations=cache,
        applied_swaps=result.applied_swaps,
        window_hashes=result.window_hashes,
        events_consumed=result.events_consumed,
    )
