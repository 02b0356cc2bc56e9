"""Synthetic quadrant event workloads.

Generates a seeded DVS event stream whose activity concentrates in one
screen quadrant at a time, rotating every label period, on top of uniform
background noise. The per-period quadrant ids double as classification
labels for the readout task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import SENSOR_HEIGHT, SENSOR_WIDTH, Event, SpikeRaster, encode_raster

_HALF_W = SENSOR_WIDTH // 2
_HALF_H = SENSOR_HEIGHT // 2


@dataclass
class QuadrantWorkload:
    events: list[Event]
    labels: np.ndarray
    duration_us: int
    period_us: int

    @property
    def n_events(self) -> int:
        return len(self.events)


def quadrant_of(x: int, y: int) -> int:
    """Quadrant id: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right."""
    return (1 if x >= _HALF_W else 0) + (2 if y >= _HALF_H else 0)


def generate_quadrant_events(
    seed: int,
    duration_ms: float,
    period_ms: float = 100.0,
    events_per_ms: float = 40.0,
    background_per_ms: float = 5.0,
    bin_width_us: int = 1000,
) -> QuadrantWorkload:
    """Build a sorted event stream with rotating-quadrant activity.

    Per bin, Poisson(events_per_ms) events land uniformly in the active
    quadrant and Poisson(background_per_ms) anywhere on the sensor.
    The active quadrant advances every period_ms (0, 1, 2, 3, 0, ...).
    """
    if duration_ms <= 0 or period_ms <= 0:
        raise ValueError("duration_ms and period_ms must be positive")
    if bin_width_us <= 0:
        raise ValueError("bin_width_us must be positive")
    rng = np.random.default_rng(seed)
    duration_us = int(round(duration_ms * 1000))
    period_us = int(round(period_ms * 1000))
    n_bins = -(-duration_us // bin_width_us)
    events: list[Event] = []
    for b in range(n_bins):
        bin_start = b * bin_width_us
        bin_width = min(bin_width_us, duration_us - bin_start)
        quadrant = (bin_start // period_us) % 4
        x0 = _HALF_W if quadrant % 2 else 0
        y0 = _HALF_H if quadrant >= 2 else 0
        n_active = int(rng.poisson(events_per_ms * bin_width_us / 1000.0))
        n_background = int(rng.poisson(background_per_ms * bin_width_us / 1000.0))
        n = n_active + n_background
        if n == 0:
            continue
        xs = np.empty(n, dtype=np.int64)
        ys = np.empty(n, dtype=np.int64)
        xs[:n_active] = rng.integers(x0, x0 + _HALF_W, size=n_active)
        ys[:n_active] = rng.integers(y0, y0 + _HALF_H, size=n_active)
        xs[n_active:] = rng.integers(0, SENSOR_WIDTH, size=n_background)
        ys[n_active:] = rng.integers(0, SENSOR_HEIGHT, size=n_background)
        polarity = rng.integers(0, 2, size=n)
        offsets = np.sort(rng.integers(0, bin_width, size=n))
        events.extend(
            Event(t_us=bin_start + int(t), x=int(x), y=int(y), polarity=int(p))
            for t, x, y, p in zip(offsets, xs, ys, polarity)
        )
    n_periods = -(-duration_us // period_us)
    labels = np.array([p % 4 for p in range(n_periods)], dtype=np.int64)
    return QuadrantWorkload(
        events=events, labels=labels, duration_us=duration_us, period_us=period_us
    )


def workload_raster(
    workload: QuadrantWorkload, downsample: int, bin_width_us: int, signed: bool = False
) -> SpikeRaster:
    """Encode a workload into a raster spanning its full duration."""
    return encode_raster(
        workload.events,
        downsample=downsample,
        bin_width_us=bin_width_us,
        window_us=workload.duration_us,
        signed=signed,
    )
