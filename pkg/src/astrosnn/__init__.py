"""Deterministic astrocyte-augmented spiking-network laboratory."""

__version__ = "0.1.0"

from .astro import AstroParams, AstroPopulation, AstrocyteUnit, astro_update, attach_astrocytes, observe_rates
from .core import (
    NetworkConfig,
    NetworkState,
    NeuronParams,
    NeuronState,
    SynapseMatrix,
    WindowResult,
    instantiate,
    run_window,
    step_network,
    step_neuron,
)
from .dfx import AdaptiveReport, AdaptiveSchedule, adaptive_loop
from .events import (
    Event,
    EventFormatError,
    SpikeRaster,
    encode_raster,
    pack_event,
    parse_event_line,
    read_ev42,
    read_event_stream,
    unpack_event,
    write_ev42,
)
from .faults import CampaignReport, FaultReport, FaultSpec, compute_ft, delta_ft, inject, run_campaign
from .perf import PerfReport, count_macs, emit_comparison, operational_latency, throughput
from .runtime import SWAPPABLE_KEYS, SimulationRuntime, SwapRequest, run_simulation
from .train import AdamParams, EarlyStopSpec, ReadoutModel, evaluate, train_readout
from .workload import QuadrantWorkload, generate_quadrant_events, workload_raster

__all__ = [name for name in dir() if not name.startswith("_")]
