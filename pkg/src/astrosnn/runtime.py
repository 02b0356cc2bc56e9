"""Steward simulation loop: windows, homeostatic updates, faults, hot swaps.

One SimulationRuntime is stepped by exactly one thread. Other threads may
enqueue SwapRequests at any time; the steward merges at most one request
per window boundary, so every window runs under a single hyperparameter
snapshot (recorded as a per-window config hash). Input bins are consumed
exactly once regardless of windowing or swaps.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import deque
from dataclasses import dataclass, replace
from typing import Any, Protocol, Sequence

import numpy as np

from .astro import AstroParams, attach_astrocytes, astro_update, observe_rates, scale_factors
from .core import (
    NetworkConfig,
    NetworkState,
    NeuronParams,
    WindowResult,
    instantiate,
    step_network,
)
from .events import SpikeRaster

# Hyperparameters that may be exchanged while a simulation is running.
# Topology (layer sizes) and the seed are fixed for the lifetime of a run.
SWAPPABLE_KEYS = frozenset(
    ["astro.enabled", "astro.eta", "astro.target_rate_hz", "astro.window_ms"]
    + [
        f"network.{layer}.{p}"
        for layer in ("hidden", "output")
        for p in ("tau_mem_ms", "v_th", "v_reset", "refractory_steps")
    ]
)


class FaultLike(Protocol):
    onset_ms: float

    def apply_to(self, state: NetworkState) -> None: ...


@dataclass(frozen=True)
class SwapRequest:
    overlay: dict[str, Any]
    request_id: int


@dataclass
class WindowSummary:
    index: int
    start_bin: int
    stop_bin: int
    input_spikes: int
    hidden_spikes: int
    output_spikes: int
    mean_hidden_rate_hz: float
    config_hash: str


@dataclass
class AstroTelemetryRow:
    window: int
    unit: int
    mean_rate_hz: float
    activation: float
    mean_scale: float


@dataclass
class RunResult:
    """Cumulative outcome of a runtime; grows across resumed run() calls."""

    output_counts: np.ndarray
    hidden_counts: np.ndarray
    windows: list[WindowSummary]
    window_hashes: list[str]
    applied_swaps: list[tuple[int, int]]
    events_consumed: int
    astro_wall_s: list[float]
    telemetry: list[AstroTelemetryRow]
    window_rates: list[np.ndarray]
    window_hidden_counts: list[np.ndarray]
    output_train: np.ndarray | None = None

    @property
    def total_astro_wall_s(self) -> float:
        return float(sum(self.astro_wall_s))


def hyperparam_hash(snapshot: dict[str, Any]) -> str:
    payload = json.dumps(snapshot, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


class SimulationRuntime:
    """Steps a network over a raster window by window.

    Astro updates fire at the end of each window; a pending swap (FIFO, one
    per boundary) is merged immediately after. Faults apply at their onset
    bin. `eval_from_bin` restricts the output-count accumulation used for
    deviation metrics to bins at or after the fault onset horizon.
    """

    def __init__(
        self,
        config: NetworkConfig,
        astro: AstroParams,
        raster: SpikeRaster,
        fault_plan: Sequence[FaultLike] = (),
        eval_from_bin: int = 0,
        record_trains: bool = False,
    ):
        if raster.n_channels != config.n_input:
            raise ValueError(
                f"raster has {raster.n_channels} channels but the network expects {config.n_input}"
            )
        self.config = config
        self.astro = astro
        self.raster = raster
        self.state: NetworkState = instantiate(config)
        self.population = attach_astrocytes(
            config, astro.group_size, astro.target_rate_hz, astro.eta, astro.window_ms
        )
        self.eval_from_bin = eval_from_bin
        self.record_trains = record_trains

        dt_ms = config.dt_ms
        self._faults = sorted(
            ((max(0, int(round(f.onset_ms / dt_ms))), f) for f in fault_plan),
            key=lambda pair: pair[0],
        )
        self._fault_ptr = 0
        self.next_bin = 0
        self.window_index = 0
        self.terminated = False

        self._queue: deque[SwapRequest] = deque()
        self._queue_lock = threading.Lock()
        self._next_request_id = 1

        self._eval_output = np.zeros(config.n_output, dtype=np.int64)
        self._hidden_total = np.zeros(config.n_hidden, dtype=np.int64)
        self._windows: list[WindowSummary] = []
        self._hashes: list[str] = []
        self._applied: list[tuple[int, int]] = []
        self._events_consumed = 0
        self._astro_wall: list[float] = []
        self._telemetry: list[AstroTelemetryRow] = []
        self._window_rates: list[np.ndarray] = []
        self._window_hidden_counts: list[np.ndarray] = []
        self._trains: list[np.ndarray] = []

    # -- hyperparameter exchange ------------------------------------------

    def hyperparams(self) -> dict[str, Any]:
        """Live snapshot of every swappable key."""
        snap: dict[str, Any] = {
            "astro.enabled": self.astro.enabled,
            "astro.eta": self.astro.eta,
            "astro.target_rate_hz": self.astro.target_rate_hz,
            "astro.window_ms": self.astro.window_ms,
        }
        for layer in ("hidden", "output"):
            params: NeuronParams = getattr(self.config, layer)
            for p in ("tau_mem_ms", "v_th", "v_reset", "refractory_steps"):
                snap[f"network.{layer}.{p}"] = getattr(params, p)
        return snap

    @property
    def queue_depth(self) -> int:
        with self._queue_lock:
            return len(self._queue)

    def request_swap(self, overlay: dict[str, Any]) -> SwapRequest:
        """Enqueue a hyperparameter overlay; any thread may call this."""
        if self.terminated:
            raise RuntimeError("runtime terminated; no further swaps accepted")
        if not overlay:
            raise ValueError("overlay must not be empty")
        bad = sorted(set(overlay) - SWAPPABLE_KEYS)
        if bad:
            raise ValueError(f"non-swappable key(s): {', '.join(bad)}")
        with self._queue_lock:
            request = SwapRequest(dict(overlay), self._next_request_id)
            self._next_request_id += 1
            self._queue.append(request)
        return request

    def apply_pending(self) -> dict[str, Any]:
        """Merge the head request, if any, into the live configuration.

        Must be invoked at a window boundary; the steward loop does so after
        every window, and external callers hold the boundary by construction
        whenever run() is not executing. Returns the live snapshot.
        """
        with self._queue_lock:
            request = self._queue.popleft() if self._queue else None
        if request is not None:
            self._merge_overlay(request.overlay)
            self._applied.append((self.window_index, request.request_id))
        return self.hyperparams()

    def _merge_overlay(self, overlay: dict[str, Any]) -> None:
        astro_updates = {
            key.split(".", 1)[1]: value
            for key, value in overlay.items()
            if key.startswith("astro.")
        }
        if astro_updates:
            self.astro = replace(self.astro, **astro_updates)
            for unit in self.population.units:
                unit.target_rate_hz = self.astro.target_rate_hz
                unit.gain = self.astro.eta
                unit.window_ms = self.astro.window_ms
        for layer in ("hidden", "output"):
            prefix = f"network.{layer}."
            updates = {
                key[len(prefix) :]: value for key, value in overlay.items() if key.startswith(prefix)
            }
            if updates:
                new_params = replace(getattr(self.config, layer), **updates)
                self.config = replace(self.config, **{layer: new_params})
                self.state.config = self.config

    # -- stepping ----------------------------------------------------------

    def _window_bins(self) -> int:
        dt_ms = self.config.dt_ms
        return max(1, int(round(self.astro.window_ms / dt_ms)))

    def run(self, max_windows: int | None = None) -> RunResult:
        """Process up to max_windows windows (all remaining when None)."""
        if self.terminated:
            raise RuntimeError("runtime terminated")
        raster = self.raster
        processed = 0
        while self.next_bin < raster.n_bins and (max_windows is None or processed < max_windows):
            start = self.next_bin
            stop = min(start + self._window_bins(), raster.n_bins)
            config_hash = hyperparam_hash(self.hyperparams())
            self._hashes.append(config_hash)

            n_hidden = self.config.n_hidden
            n_output = self.config.n_output
            hidden_counts = np.zeros(n_hidden, dtype=np.int64)
            output_counts = np.zeros(n_output, dtype=np.int64)
            input_spikes = 0
            train = np.zeros((stop - start, n_output), dtype=bool) if self.record_trains else None
            for b in range(start, stop):
                while self._fault_ptr < len(self._faults) and self._faults[self._fault_ptr][0] <= b:
                    self._faults[self._fault_ptr][1].apply_to(self.state)
                    self._fault_ptr += 1
                bin_counts = raster.counts[b]
                hidden_spikes, output_spikes = step_network(self.state, bin_counts)
                input_spikes += int(np.abs(bin_counts).sum())
                hidden_counts += hidden_spikes
                output_counts += output_spikes
                if b >= self.eval_from_bin:
                    self._eval_output += output_spikes
                if train is not None:
                    train[b - start] = output_spikes
            self.next_bin = stop
            self._events_consumed += input_spikes
            self._hidden_total += hidden_counts

            duration_s = (stop - start) * raster.bin_width_us / 1e6
            result = WindowResult(
                start_bin=start,
                stop_bin=stop,
                duration_s=duration_s,
                input_counts=np.zeros(0, dtype=np.int64),
                hidden_counts=hidden_counts,
                output_counts=output_counts,
                hidden_rates_hz=hidden_counts / duration_s,
            )
            if self.astro.enabled:
                t0 = time.perf_counter()
                rates = observe_rates(self.population, result)
                for uid, unit in enumerate(self.population.units):
                    mean_scale = float(np.mean(scale_factors(unit, rates)))
                    astro_update(unit, rates, self.state.w1)
                    self._telemetry.append(
                        AstroTelemetryRow(
                            window=self.window_index,
                            unit=uid,
                            mean_rate_hz=float(np.mean(rates[unit.monitored])),
                            activation=unit.activation,
                            mean_scale=mean_scale,
                        )
                    )
                self._astro_wall.append(time.perf_counter() - t0)
            self._window_rates.append(result.hidden_rates_hz)
            self._window_hidden_counts.append(hidden_counts)
            self._windows.append(
                WindowSummary(
                    index=self.window_index,
                    start_bin=start,
                    stop_bin=stop,
                    input_spikes=input_spikes,
                    hidden_spikes=int(hidden_counts.sum()),
                    output_spikes=int(output_counts.sum()),
                    mean_hidden_rate_hz=float(np.mean(result.hidden_rates_hz)),
                    config_hash=config_hash,
                )
            )
            if train is not None:
                self._trains.append(train)
            self.window_index += 1
            processed += 1
            self.apply_pending()
        if self.next_bin >= raster.n_bins:
            self.terminated = True
        return self.result()

    def result(self) -> RunResult:
        output_train = np.concatenate(self._trains, axis=0) if self._trains else None
        return RunResult(
            output_counts=self._eval_output.copy(),
            hidden_counts=self._hidden_total.copy(),
            windows=list(self._windows),
            window_hashes=list(self._hashes),
            applied_swaps=list(self._applied),
            events_consumed=self._events_consumed,
            astro_wall_s=list(self._astro_wall),
            telemetry=list(self._telemetry),
            window_rates=list(self._window_rates),
            window_hidden_counts=list(self._window_hidden_counts),
            output_train=output_train,
        )


def run_simulation(
    config: NetworkConfig,
    astro: AstroParams,
    raster: SpikeRaster,
    fault_plan: Sequence[FaultLike] = (),
    eval_from_bin: int = 0,
    record_trains: bool = False,
) -> RunResult:
    """Run a raster to completion under one fixed hyperparameter snapshot."""
    runtime = SimulationRuntime(
        config,
        astro,
        raster,
        fault_plan=fault_plan,
        eval_from_bin=eval_from_bin,
        record_trains=record_trains,
    )
    return runtime.run()
