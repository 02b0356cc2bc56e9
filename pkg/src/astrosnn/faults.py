"""Fault injection and output-deviation metrics.

FT here is the fault deviation of the network output: the L1 deviation of
the faulted output spike-count vector from the fault-free one, as a
percentage of the fault-free L1 norm. Lower means more resilient. delta_ft
is the reduction attributable to enabling the homeostatic units.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .astro import AstroParams
from .core import NetworkConfig, NetworkState
from .events import SpikeRaster
from .runtime import run_simulation

FAULT_KINDS = ("silence_neuron", "stuck_at_fire", "synapse_drop")
SYNAPSE_MATRICES = ("input_hidden", "hidden_output")


@dataclass(frozen=True)
class FaultSpec:
    """One fault: neuron faults target a hidden-layer index, synapse_drop a
    (matrix, pre, post) coordinate with matrix in {input_hidden, hidden_output}."""

    kind: str
    target: int | tuple[str, int, int]
    onset_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}; expected one of {FAULT_KINDS}")
        if self.onset_ms < 0:
            raise ValueError("onset_ms must be non-negative")
        if self.kind == "synapse_drop":
            if not (isinstance(self.target, tuple) and len(self.target) == 3):
                raise ValueError("synapse_drop target must be (matrix, pre, post)")
            if self.target[0] not in SYNAPSE_MATRICES:
                raise ValueError(f"synapse matrix must be one of {SYNAPSE_MATRICES}")
        elif not isinstance(self.target, int):
            raise ValueError(f"{self.kind} target must be a hidden-neuron index")

    def apply_to(self, state: NetworkState) -> None:
        inject(state, self)


def inject(state: NetworkState, spec: FaultSpec) -> NetworkState:
    """Apply a fault to the state in place (and return it).

    silence_neuron freezes the neuron (never spikes again); stuck_at_fire
    forces a spike on every non-refractory step; synapse_drop zeroes one
    weight permanently.
    """
    n_hidden = state.config.n_hidden
    if spec.kind == "synapse_drop":
        name, pre, post = spec.target
        matrix = state.w1 if name == "input_hidden" else state.w2
        n_pre, n_post = matrix.weights.shape
        if not (0 <= pre < n_pre and 0 <= post < n_post):
            raise ValueError(
                f"synapse ({pre}, {post}) outside {name} matrix of shape {n_pre}x{n_post}"
            )
        matrix.weights[pre, post] = 0.0
        return state
    index = spec.target
    if not 0 <= index < n_hidden:
        raise ValueError(f"hidden-neuron index {index} out of range [0, {n_hidden})")
    if spec.kind == "silence_neuron":
        state.silenced_hidden[index] = True
    else:
        state.stuck_hidden[index] = True
    return state


def compute_ft(o_original: Sequence[float] | np.ndarray, o_fault: Sequence[float] | np.ndarray) -> float:
    """Fault deviation in percent: 100 * ||o_fault - o_original||_1 / ||o_original||_1."""
    orig = np.asarray(o_original, dtype=np.float64)
    fault = np.asarray(o_fault, dtype=np.float64)
    if orig.shape != fault.shape:
        raise ValueError(f"output shapes differ: {orig.shape} vs {fault.shape}")
    denom = float(np.sum(np.abs(orig)))
    if denom == 0.0:
        raise ValueError("FT undefined: fault-free output is all zero")
    return 100.0 * float(np.sum(np.abs(fault - orig))) / denom


def delta_ft(ft_initial: float, ft_astro: float) -> float:
    """Deviation reduction attributable to the homeostatic units (percent points)."""
    if not (math.isfinite(ft_initial) and math.isfinite(ft_astro)):
        raise ValueError("FT values must be finite")
    return ft_initial - ft_astro


@dataclass
class FaultReport:
    o_original: np.ndarray
    o_fault: np.ndarray
    ft_percent: float

    @classmethod
    def from_outputs(cls, o_original, o_fault) -> "FaultReport":
        orig = np.asarray(o_original, dtype=np.float64)
        fault = np.asarray(o_fault, dtype=np.float64)
        return cls(orig, fault, compute_ft(orig, fault))


@dataclass
class TrialResult:
    fault_id: int
    spec: FaultSpec
    ft_off: float
    ft_on: float


@dataclass
class CampaignReport:
    """Aggregates of a paired astro-off/astro-on fault campaign."""

    ft_initial_percent: float
    ft_astro_percent: float
    delta_ft_percent: float
    trials: list[TrialResult]
    exclusions: int
    astro_window_wall_s: float
    astro_total_wall_s: float

    @property
    def n_trials(self) -> int:
        return len(self.trials)


def default_campaign_faults(config: NetworkConfig) -> list[FaultSpec]:
    """Silence each hidden neuron once, onset t=0."""
    return [FaultSpec("silence_neuron", i, 0.0) for i in range(config.n_hidden)]


def run_campaign(
    config: NetworkConfig,
    workload: SpikeRaster,
    faults: Sequence[FaultSpec],
    astro: AstroParams = AstroParams(),
    workers: int = 1,
) -> CampaignReport:
    """Run the paired fault campaign: astro off/on x fault off/on per fault.

    All four runs of a trial share the config seed, the input raster, and
    the fault plan. The two fault-free baselines are identical across
    trials (deterministic), so they run once. Trials run in a thread pool
    and are reduced in fault order; any trial whose deviation is undefined
    or non-finite is excluded and counted.
    """
    if not faults:
        raise ValueError("fault list must not be empty")
    faults = list(faults)
    dt_ms = config.dt_ms
    eval_bins = {spec: max(0, int(round(spec.onset_ms / dt_ms))) for spec in faults}

    arms = {
        False: replace(astro, enabled=False),
        True: replace(astro, enabled=True),
    }
    baselines = {}
    astro_wall: list[float] = []
    for enabled, params in arms.items():
        result = run_simulation(config, params, workload)
        baselines[enabled] = result
        astro_wall.extend(result.astro_wall_s)
    for enabled in (False, True):
        if float(np.sum(np.abs(baselines[enabled].output_counts))) == 0.0:
            raise ValueError(
                "workload yields zero fault-free output"
                f" (astro {'on' if enabled else 'off'} arm); FT is undefined"
            )

    # Fault-free reference counts per distinct evaluation horizon, shared by
    # every trial (the baselines are deterministic, so one run each suffices).
    baseline_counts: dict[tuple[bool, int], np.ndarray] = {}
    for enabled, params in arms.items():
        for eval_bin in sorted(set(eval_bins.values())):
            if eval_bin == 0:
                baseline_counts[(enabled, 0)] = baselines[enabled].output_counts
            else:
                baseline_counts[(enabled, eval_bin)] = run_simulation(
                    config, params, workload, eval_from_bin=eval_bin
                ).output_counts

    def run_trial(item: tuple[int, FaultSpec]) -> TrialResult:
        fault_id, spec = item
        fts = {}
        for enabled, params in arms.items():
            faulted = run_simulation(
                config, params, workload, fault_plan=[spec], eval_from_bin=eval_bins[spec]
            )
            if enabled:
                astro_wall.extend(faulted.astro_wall_s)
            fts[enabled] = compute_ft(
                baseline_counts[(enabled, eval_bins[spec])], faulted.output_counts
            )
        return TrialResult(fault_id, spec, fts[False], fts[True])

    items = list(enumerate(faults))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(run_trial, items))
    else:
        trials = [run_trial(item) for item in items]
    trials.sort(key=lambda t: t.fault_id)

    included = [t for t in trials if math.isfinite(t.ft_off) and math.isfinite(t.ft_on)]
    exclusions = len(trials) - len(included)
    if not included:
        raise ValueError("every trial had undefined FT; campaign aborted")
    ft_initial = float(np.mean([t.ft_off for t in included]))
    ft_astro = float(np.mean([t.ft_on for t in included]))
    mean_wall = float(np.mean(astro_wall)) if astro_wall else 0.0
    return CampaignReport(
        ft_initial_percent=ft_initial,
        ft_astro_percent=ft_astro,
        delta_ft_percent=delta_ft(ft_initial, ft_astro),
        trials=trials,
        exclusions=exclusions,
        astro_window_wall_s=mean_wall,
        astro_total_wall_s=float(sum(astro_wall)),
    )
