"""MAC-based performance accounting.

throughput = mac_count / operational_latency, and operational latency is
the inference wall time divided by the number of dataset-loader passes it
covered. MACs are counted as dense feedforward products per step, which
makes the closed form here agree exactly with the live counter kept by the
stepping core. Timing capture is the caller's job (monotonic clock around
the stepping loop only); this module is pure arithmetic and formatting.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

from .core import NetworkConfig

# Reference single-inference measurements used as comparison rows:
# (MACs, latency seconds). The RTX 3060 row is omitted on purpose: its
# quoted throughput of 24.5 GOP/s does not equal MACs/latency
# (0.269 G / 11.6 ms = 23.19 GOP/s), so it cannot serve as a cross-check.
BASELINE_MEASUREMENTS: dict[str, tuple[float, float]] = {
    "cpu-i9-12900h": (0.269e9, 0.084),
    "fpga-vck190": (0.269e9, 0.0046),
}


@dataclass(frozen=True)
class PerfReport:
    """One measured (or quoted) inference workload.

    mac_count is the MAC count of a single pass; inference_time_s covers
    loader_iterations passes. throughput * operational_latency == mac_count
    holds by construction (checked to 1e-9 relative).
    """

    mac_count: int
    inference_time_s: float
    loader_iterations: int
    operational_latency_s: float
    throughput_ops_per_s: float

    def __post_init__(self) -> None:
        if self.mac_count < 0:
            raise ValueError("mac_count must be non-negative")
        if self.inference_time_s <= 0:
            raise ValueError("inference_time_s must be positive")
        if self.loader_iterations < 1:
            raise ValueError("loader_iterations must be >= 1")
        product = self.throughput_ops_per_s * self.operational_latency_s
        if self.mac_count and abs(product - self.mac_count) > 1e-9 * self.mac_count:
            raise ValueError("throughput * latency does not reproduce mac_count")

    @classmethod
    def from_measurement(
        cls, mac_count: int, inference_time_s: float, loader_iterations: int
    ) -> "PerfReport":
        latency = operational_latency(inference_time_s, loader_iterations)
        return cls(
            mac_count=mac_count,
            inference_time_s=inference_time_s,
            loader_iterations=loader_iterations,
            operational_latency_s=latency,
            throughput_ops_per_s=throughput(mac_count, latency),
        )


def count_macs(config: NetworkConfig | Sequence[int], num_steps: int) -> int:
    """MACs of num_steps dense feedforward steps over the given layer sizes."""
    if num_steps <= 0:
        raise ValueError(f"num_steps must be positive, got {num_steps}")
    if isinstance(config, NetworkConfig):
        n_in, n_hid, n_out = config.layer_sizes
    else:
        n_in, n_hid, n_out = (int(n) for n in config)
    return num_steps * (n_in * n_hid + n_hid * n_out)


def operational_latency(inference_time_s: float, loader_iterations: int) -> float:
    """Per-pass latency: inference time divided by loader iterations."""
    if loader_iterations < 1:
        raise ValueError(f"loader_iterations must be >= 1, got {loader_iterations}")
    if inference_time_s <= 0:
        raise ValueError(f"inference_time_s must be positive, got {inference_time_s}")
    return inference_time_s / loader_iterations


def throughput(mac_count: int, operational_latency_s: float) -> float:
    """Operations per second: mac_count / operational_latency."""
    if operational_latency_s <= 0:
        raise ValueError(f"latency must be positive, got {operational_latency_s}")
    if mac_count < 0:
        raise ValueError("mac_count must be non-negative")
    return mac_count / operational_latency_s


def baseline_reports() -> list[tuple[str, PerfReport]]:
    """The published comparison rows as PerfReports (single-pass quotes)."""
    return [
        (name, PerfReport.from_measurement(int(macs), latency, 1))
        for name, (macs, latency) in BASELINE_MEASUREMENTS.items()
    ]


def emit_comparison(reports: Sequence[tuple[str, PerfReport]]) -> tuple[str, list[dict]]:
    """Render named reports as an aligned text table plus CSV-ready rows.

    Columns: name, MACs (G), latency (ms), throughput (GOP/s). Names must
    be unique; row order follows the input; formatting is deterministic.
    """
    if not reports:
        raise ValueError("at least one report is required")
    names = [name for name, _ in reports]
    if len(set(names)) != len(names):
        raise ValueError("report names must be unique")
    rows = [
        {
            "name": name,
            "macs_g": f"{report.mac_count / 1e9:.4f}",
            "latency_ms": f"{report.operational_latency_s * 1e3:.4f}",
            "throughput_gops": f"{report.throughput_ops_per_s / 1e9:.4f}",
        }
        for name, report in reports
    ]
    headers = ("name", "macs_g", "latency_ms", "throughput_gops")
    widths = {h: max(len(h), *(len(r[h]) for r in rows)) for h in headers}
    out = io.StringIO()
    out.write("  ".join(h.ljust(widths[h]) for h in headers).rstrip() + "\n")
    for r in rows:
        out.write("  ".join(r[h].ljust(widths[h]) for h in headers).rstrip() + "\n")
    return out.getvalue(), rows
