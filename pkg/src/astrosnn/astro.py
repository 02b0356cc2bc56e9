"""Homeostatic astrocyte units over hidden-neuron groups.

Each unit watches the firing rates of a contiguous group of hidden neurons
and, once per observation window, multiplicatively rescales the group's
afferent (input->hidden) weights toward a target rate:

    w[:, i] <- clip(w[:, i] * (1 + gain * (target - rate_i) / target))

A dead neuron (rate 0) gets the maximal upregulation factor (1 + gain); an
overfiring neuron is scaled down. The hidden->output matrix is left to the
trained readout. Units cover disjoint column blocks, so updates of distinct
units may run concurrently within a window boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import NetworkConfig, SynapseMatrix, WindowResult

TRACE_LAMBDA = 0.1  # low-pass factor for the unit activation trace


@dataclass(frozen=True)
class AstroParams:
    """Config-facing knob set for the astrocyte population."""

    enabled: bool = True
    eta: float = 0.25
    target_rate_hz: float = 20.0
    window_ms: float = 100.0
    group_size: int = 16

    def __post_init__(self) -> None:
        if self.eta < 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if self.target_rate_hz <= 0:
            raise ValueError(f"target_rate_hz must be positive, got {self.target_rate_hz}")
        if self.window_ms <= 0:
            raise ValueError(f"window_ms must be positive, got {self.window_ms}")
        if self.group_size < 1:
            raise ValueError(f"group_size must be >= 1, got {self.group_size}")


@dataclass
class AstrocyteUnit:
    monitored: np.ndarray
    target_rate_hz: float
    gain: float
    window_ms: float
    activation: float = 0.0


@dataclass
class AstroPopulation:
    units: list[AstrocyteUnit]
    coverage: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def attach_astrocytes(
    config: NetworkConfig,
    group_size: int,
    target_rate_hz: float = 20.0,
    gain: float = 0.25,
    window_ms: float = 100.0,
) -> AstroPopulation:
    """Partition the hidden layer into contiguous groups of group_size.

    The last group is smaller when group_size does not divide n_hidden.
    Coverage is total and disjoint: unit count = ceil(n_hidden / group_size).
    """
    if group_size < 1:
        raise ValueError(f"group_size must be >= 1, got {group_size}")
    n_hidden = config.n_hidden
    units = []
    coverage = np.zeros(n_hidden, dtype=np.int64)
    for uid, start in enumerate(range(0, n_hidden, group_size)):
        idx = np.arange(start, min(start + group_size, n_hidden))
        units.append(
            AstrocyteUnit(
                monitored=idx,
                target_rate_hz=target_rate_hz,
                gain=gain,
                window_ms=window_ms,
            )
        )
        coverage[idx] = uid
    return AstroPopulation(units=units, coverage=coverage)


def observe_rates(population: AstroPopulation, window: WindowResult) -> np.ndarray:
    """Per-neuron rates (Hz) for a window; updates each unit's activation trace.

    activation <- (1 - lambda) * activation + lambda * mean(group rates)
    """
    if window.duration_s <= 0:
        raise ValueError("window duration must be positive")
    rates = window.hidden_counts / window.duration_s
    for unit in population.units:
        unit.activation = (1 - TRACE_LAMBDA) * unit.activation + TRACE_LAMBDA * float(
            np.mean(rates[unit.monitored])
        )
    return rates


def scale_factors(unit: AstrocyteUnit, rates: np.ndarray) -> np.ndarray:
    """Nominal (pre-clip) multiplicative factors for the unit's neurons."""
    if unit.target_rate_hz <= 0:
        raise ValueError("target rate must be positive")
    r = np.asarray(rates, dtype=np.float64)[unit.monitored]
    return 1.0 + unit.gain * (unit.target_rate_hz - r) / unit.target_rate_hz


def astro_update(unit: AstrocyteUnit, rates: np.ndarray, w: SynapseMatrix) -> SynapseMatrix:
    """Rescale the afferent weight columns of the unit's neurons in place.

    At the setpoint (rate == target) the factor is exactly 1.0 and weights
    are bit-identical; results are always clipped to [w_min, w_max].
    """
    factors = scale_factors(unit, rates)
    cols = w.weights[:, unit.monitored]
    w.weights[:, unit.monitored] = np.clip(cols * factors[None, :], w.w_min, w.w_max)
    return w
