"""Deterministic three-layer LIF network stepped over spike rasters.

Layers: input channels feed a monitored hidden layer through a dense
matrix, the hidden layer feeds the output layer the same step (no axonal
delay). Discrete-time leaky integrate-and-fire with exponential decay:

    v' = v * exp(-dt / tau) + input_current, spike when v' >= v_th

A spike resets v to v_reset and starts the refractory countdown, during
which v is held at v_reset. Silenced neurons are frozen: no decay, no
integration, never a spike. Stuck neurons force a spike on every
non-refractory step.

A NetworkState is stepped by exactly one thread at a time; states built
from the same (config, seed) are bit-identical, so parallel trials just
instantiate their own copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .events import SpikeRaster


@dataclass(frozen=True)
class NeuronParams:
    tau_mem_ms: float = 20.0
    v_th: float = 1.0
    v_reset: float = 0.0
    refractory_steps: int = 2

    def __post_init__(self) -> None:
        if self.tau_mem_ms <= 0:
            raise ValueError(f"tau_mem_ms must be positive, got {self.tau_mem_ms}")
        if self.v_reset >= self.v_th:
            raise ValueError(f"v_reset {self.v_reset} must be below v_th {self.v_th}")
        if self.refractory_steps < 0:
            raise ValueError("refractory_steps must be non-negative")


@dataclass
class NeuronState:
    """Scalar neuron state, used by step_neuron and in tests against the
    vectorized layer update."""

    v: float = 0.0
    refractory_remaining: int = 0
    silenced: bool = False


def step_neuron(
    state: NeuronState, params: NeuronParams, input_current: float, dt_ms: float
) -> tuple[NeuronState, bool]:
    """Advance one neuron one step; returns (new state, spiked)."""
    if state.silenced:
        return NeuronState(state.v, state.refractory_remaining, True), False
    if state.refractory_remaining > 0:
        return NeuronState(params.v_reset, state.refractory_remaining - 1, False), False
    v = state.v * math.exp(-dt_ms / params.tau_mem_ms) + input_current
    if v >= params.v_th:
        return NeuronState(params.v_reset, params.refractory_steps, False), True
    return NeuronState(v, 0, False), False


@dataclass
class SynapseMatrix:
    """Dense pre x post weight matrix with clip bounds."""

    weights: np.ndarray
    w_min: float = 0.0
    w_max: float = 1.0

    def __post_init__(self) -> None:
        if self.w_min > self.w_max:
            raise ValueError("w_min must not exceed w_max")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("weights must be 2-D")
        if np.any(w < self.w_min) or np.any(w > self.w_max):
            raise ValueError("weights outside [w_min, w_max]")
        self.weights = w

    def copy(self) -> "SynapseMatrix":
        return SynapseMatrix(self.weights.copy(), self.w_min, self.w_max)


@dataclass(frozen=True)
class NetworkConfig:
    """Static network description; (config, seed) fully determines a state.

    init_scale_* are fractions of w_max: weights are drawn uniformly from
    [0, w_max * init_scale] per matrix.
    """

    layer_sizes: tuple[int, int, int]
    hidden: NeuronParams = NeuronParams()
    output: NeuronParams = NeuronParams()
    w_min: float = 0.0
    w_max: float = 1.0
    init_scale_hidden: float = 0.5
    init_scale_output: float = 0.5
    astro_enabled: bool = True
    dt_ms: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.layer_sizes) != 3:
            raise ValueError("layer_sizes must be (n_input, n_hidden, n_output)")
        if any(int(n) < 1 for n in self.layer_sizes):
            raise ValueError(f"invalid layer size in {self.layer_sizes}: all must be >= 1")
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if self.dt_ms <= 0:
            raise ValueError("dt_ms must be positive")
        for scale in (self.init_scale_hidden, self.init_scale_output):
            if not 0 <= scale <= 1:
                raise ValueError(f"init scale {scale} must lie in [0, 1]")

    @property
    def n_input(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_hidden(self) -> int:
        return self.layer_sizes[1]

    @property
    def n_output(self) -> int:
        return self.layer_sizes[2]

    @property
    def neuron_count(self) -> int:
        return sum(self.layer_sizes)

    @property
    def synapse_count(self) -> int:
        return self.n_input * self.n_hidden + self.n_hidden * self.n_output

    @property
    def macs_per_step(self) -> int:
        return self.synapse_count


@dataclass
class NetworkState:
    """Mutable simulation state: one steward thread steps it at a time."""

    config: NetworkConfig
    w1: SynapseMatrix
    w2: SynapseMatrix
    v_hidden: np.ndarray
    refrac_hidden: np.ndarray
    silenced_hidden: np.ndarray
    stuck_hidden: np.ndarray
    v_output: np.ndarray
    refrac_output: np.ndarray
    step_count: int = 0
    mac_count: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)


def instantiate(config: NetworkConfig) -> NetworkState:
    """Build a fresh state; identical (config, seed) gives bit-identical weights."""
    rng = np.random.default_rng(config.seed)
    n_in, n_hid, n_out = config.layer_sizes
    w1 = rng.uniform(0.0, config.w_max * config.init_scale_hidden, size=(n_in, n_hid))
    w2 = rng.uniform(0.0, config.w_max * config.init_scale_output, size=(n_hid, n_out))
    return NetworkState(
        config=config,
        w1=SynapseMatrix(w1, config.w_min, config.w_max),
        w2=SynapseMatrix(w2, config.w_min, config.w_max),
        v_hidden=np.zeros(n_hid),
        refrac_hidden=np.zeros(n_hid, dtype=np.int64),
        silenced_hidden=np.zeros(n_hid, dtype=bool),
        stuck_hidden=np.zeros(n_hid, dtype=bool),
        v_output=np.zeros(n_out),
        refrac_output=np.zeros(n_out, dtype=np.int64),
        rng=rng,
    )


def _step_layer(
    v: np.ndarray,
    refrac: np.ndarray,
    currents: np.ndarray,
    params: NeuronParams,
    dt_ms: float,
    silenced: np.ndarray | None = None,
    stuck: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized step_neuron over a layer; mutates v and refrac in place."""
    in_refrac = refrac > 0
    frozen = silenced if silenced is not None else np.zeros(v.shape, dtype=bool)
    active = ~in_refrac & ~frozen
    decay = math.exp(-dt_ms / params.tau_mem_ms)
    v_next = np.where(active, v * decay + currents, v)
    spiked = active & (v_next >= params.v_th)
    if stuck is not None:
        spiked |= stuck & active
    hold = in_refrac & ~frozen
    v_next[hold] = params.v_reset
    refrac[hold] -= 1
    v_next[spiked] = params.v_reset
    refrac[spiked] = params.refractory_steps
    v[:] = v_next
    return spiked


def step_network(
    state: NetworkState, input_spikes: Sequence[float] | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One feedforward step; mutates state, returns (hidden, output) spike masks.

    Hidden currents are W1^T @ input, output currents W2^T @ hidden spikes of
    the same step. The MAC counter advances by the dense synapse count.
    """
    cfg = state.config
    x = np.asarray(input_spikes, dtype=np.float64)
    if x.shape != (cfg.n_input,):
        raise ValueError(f"input vector has shape {x.shape}, expected ({cfg.n_input},)")
    hidden_currents = x @ state.w1.weights
    hidden_spikes = _step_layer(
        state.v_hidden,
        state.refrac_hidden,
        hidden_currents,
        cfg.hidden,
        cfg.dt_ms,
        silenced=state.silenced_hidden,
        stuck=state.stuck_hidden,
    )
    output_currents = hidden_spikes.astype(np.float64) @ state.w2.weights
    output_spikes = _step_layer(
        state.v_output, state.refrac_output, output_currents, cfg.output, cfg.dt_ms
    )
    state.step_count += 1
    state.mac_count += cfg.macs_per_step
    return hidden_spikes, output_spikes


@dataclass
class WindowResult:
    """Spike counts accumulated over a contiguous bin range."""

    start_bin: int
    stop_bin: int
    duration_s: float
    input_counts: np.ndarray
    hidden_counts: np.ndarray
    output_counts: np.ndarray
    hidden_rates_hz: np.ndarray
    hidden_train: np.ndarray | None = None
    output_train: np.ndarray | None = None


def run_window(
    state: NetworkState,
    raster: SpikeRaster,
    window: tuple[int, int] | range,
    record_trains: bool = False,
) -> WindowResult:
    """Step every bin in [start, stop) and accumulate per-layer spike counts.

    Hidden rates are counts / window duration in seconds, the granularity at
    which homeostatic updates observe the layer.
    """
    if isinstance(window, range):
        if window.step != 1:
            raise ValueError("window range must have step 1")
        start, stop = window.start, window.stop
    else:
        start, stop = window
    if stop <= start:
        raise ValueError(f"empty window [{start}, {stop})")
    if not (0 <= start and stop <= raster.n_bins):
        raise ValueError(f"window [{start}, {stop}) outside raster of {raster.n_bins} bins")
    cfg = state.config
    if raster.n_channels != cfg.n_input:
        raise ValueError(
            f"raster has {raster.n_channels} channels but the network expects {cfg.n_input}"
        )
    n_bins = stop - start
    hidden_counts = np.zeros(cfg.n_hidden, dtype=np.int64)
    output_counts = np.zeros(cfg.n_output, dtype=np.int64)
    input_counts = np.zeros(cfg.n_input, dtype=np.int64)
    hidden_train = np.zeros((n_bins, cfg.n_hidden), dtype=bool) if record_trains else None
    output_train = np.zeros((n_bins, cfg.n_output), dtype=bool) if record_trains else None
    for i, b in enumerate(range(start, stop)):
        bin_counts = raster.counts[b]
        hidden_spikes, output_spikes = step_network(state, bin_counts)
        input_counts += bin_counts
        hidden_counts += hidden_spikes
        output_counts += output_spikes
        if record_trains:
            hidden_train[i] = hidden_spikes
            output_train[i] = output_spikes
    duration_s = n_bins * raster.bin_width_us / 1e6
    return WindowResult(
        start_bin=start,
        stop_bin=stop,
        duration_s=duration_s,
        input_counts=input_counts,
        hidden_counts=hidden_counts,
        output_counts=output_counts,
        hidden_rates_hz=hidden_counts / duration_s,
        hidden_train=hidden_train,
        output_train=output_train,
    )
