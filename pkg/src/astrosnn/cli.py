"""Experiment runner CLI.

Subcommands: ingest | encode | simulate | faults | perf | adapt | train |
report. Every run validates its config, writes artifacts atomically
(temp file + rename in the target directory), and emits a manifest.json
recording the config hash, seed, tool version, artifact paths, and wall
times. CSV and JSON artifacts are byte-identical across reruns of the
same config; timestamps and wall-clock measurements live only in the
manifest.

Exit codes: 0 success, 2 usage, 3 configuration error, 4 runtime error.
Set ASTROSNN_LOG=DEBUG|INFO|WARNING|ERROR to control log verbosity.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, default_config, load_config
from .core import instantiate, run_window
from .dfx import adaptive_loop
from .events import SpikeRaster, encode_raster, read_ev42, read_event_stream, write_ev42
from .faults import run_campaign
from .perf import PerfReport, baseline_reports, count_macs, emit_comparison
from .runtime import SimulationRuntime
from .train import evaluate, train_readout
from .workload import QuadrantWorkload, generate_quadrant_events, workload_raster

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

log = logging.getLogger("astrosnn")


def _configure_logging() -> None:
    level = os.environ.get("ASTROSNN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fp:
            fp.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


@dataclass
class RunManifest:
    subcommand: str
    config_hash: str
    seed: int
    artifacts: list[str] = field(default_factory=list)
    started_utc: str = ""
    finished_utc: str = ""
    timing: dict[str, float] = field(default_factory=dict)
    tool: str = "astrosnn"
    version: str = __version__

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        write_json(
            path,
            {
                "tool": self.tool,
                "version": self.version,
                "subcommand": self.subcommand,
                "config_hash": self.config_hash,
                "seed": self.seed,
                "artifacts": sorted(self.artifacts),
                "started_utc": self.started_utc,
                "finished_utc": self.finished_utc,
                "timing": self.timing,
            },
        )
        return path


class _Run:
    """Per-invocation context: out dir, manifest, artifact registry."""

    def __init__(self, subcommand: str, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.manifest = RunManifest(
            subcommand=subcommand,
            config_hash=cfg.config_hash,
            seed=cfg.data["sim"]["seed"],
            started_utc=datetime.now(timezone.utc).isoformat(),
        )
        self._t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        self.manifest.artifacts.append(name)
        return self.out_dir / name

    def finish(self, **timing: float) -> None:
        self.manifest.timing = {"wall_s": time.perf_counter() - self._t0, **timing}
        self.manifest.finished_utc = datetime.now(timezone.utc).isoformat()
        self.manifest.write(self.out_dir)


def _load(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return default_config()


def _out_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    out = getattr(args, "out_dir", None) or cfg.data["paths"]["out_dir"]
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _read_events_file(path: Path) -> list:
    if not path.is_file():
        raise FileNotFoundError(f"event file not found: {path}")
    if path.suffix == ".ev42":
        with open(path, "rb") as fp:
            return read_ev42(fp)
    with open(path, "rb") as fp:
        return read_event_stream(fp)


def _build_raster(cfg: ExperimentConfig) -> tuple[SpikeRaster, QuadrantWorkload | None]:
    ev = cfg.data["events"]
    sim = cfg.data["sim"]
    window_us = int(round(sim["duration_ms"] * 1000))
    signed = ev["polarity"] == "signed"
    events_path = cfg.data["paths"]["events"]
    if events_path:
        events = _read_events_file(Path(events_path))
        raster = encode_raster(events, ev["downsample"], ev["bin_width_us"], window_us, signed)
        return raster, None
    wl = cfg.data["workload"]
    workload = generate_quadrant_events(
        seed=sim["seed"],
        duration_ms=sim["duration_ms"],
        period_ms=wl["period_ms"],
        events_per_ms=wl["events_per_ms"],
        background_per_ms=wl["background_per_ms"],
        bin_width_us=ev["bin_width_us"],
    )
    return workload_raster(workload, ev["downsample"], ev["bin_width_us"], signed), workload


# -- subcommands ------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out_dir = _out_dir(args, cfg)
    run = _Run("ingest", cfg, out_dir)
    events = _read_events_file(Path(args.input))
    ev42_path = run.path("events.ev42")
    buf = io.BytesIO()
    count = write_ev42(events, buf)
    atomic_write_bytes(ev42_path, buf.getvalue())
    duration_us = events[-1].t_us - events[0].t_us if events else 0
    write_json(
        run.path("ingest_summary.json"),
        {"events": count, "duration_us": duration_us, "source": str(args.input)},
    )
    run.finish()
    print(f"ingested {count} events -> {ev42_path}")
    return EXIT_OK


def cmd_encode(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out_dir = _out_dir(args, cfg)
    run = _Run("encode", cfg, out_dir)
    if args.input:
        ev = cfg.data["events"]
        window_us = int(round(cfg.data["sim"]["duration_ms"] * 1000))
        events = _read_events_file(Path(args.input))
        raster = encode_raster(
            events, ev["downsample"], ev["bin_width_us"], window_us, ev["polarity"] == "signed"
        )
    else:
        raster, _ = _build_raster(cfg)
    rows = []
    nonzero = np.argwhere(raster.counts != 0)
    for b, c in nonzero:
        rows.append((int(b), int(c), int(raster.counts[b, c])))
    write_csv(run.path("raster.csv"), ("bin", "channel", "count"), rows)
    write_json(
        run.path("encode_summary.json"),
        {
            "bins": raster.n_bins,
            "channels": raster.n_channels,
            "grid_cols": raster.n_cols,
            "grid_rows": raster.n_rows,
            "bin_width_us": raster.bin_width_us,
            "downsample": raster.downsample,
            "signed": raster.signed,
            "total_count": int(raster.counts.sum()),
        },
    )
    run.finish()
    print(f"encoded raster: {raster.n_bins} bins x {raster.n_channels} channels")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out_dir = _out_dir(args, cfg)
    run = _Run("simulate", cfg, out_dir)
    raster, _ = _build_raster(cfg)
    runtime = SimulationRuntime(cfg.network_config(), cfg.astro_params(), raster)
    result = runtime.run()
    dt_ms = cfg.data["sim"]["dt_ms"]
    write_csv(
        run.path("windows.csv"),
        (
            "window",
            "start_ms",
            "stop_ms",
            "input_spikes",
            "hidden_spikes",
            "output_spikes",
            "mean_hidden_rate_hz",
            "config_hash",
        ),
        [
            (
                w.index,
                w.start_bin * dt_ms,
                w.stop_bin * dt_ms,
                w.input_spikes,
                w.hidden_spikes,
                w.output_spikes,
                w.mean_hidden_rate_hz,
                w.config_hash,
            )
            for w in result.windows
        ],
    )
    write_csv(
        run.path("astro_telemetry.csv"),
        ("window", "unit", "mean_rate_hz", "activation", "mean_scale"),
        [(t.window, t.unit, t.mean_rate_hz, t.activation, t.mean_scale) for t in result.telemetry],
    )
    write_json(
        run.path("simulate_summary.json"),
        {
            "windows": len(result.windows),
            "events_consumed": result.events_consumed,
            "output_spikes": int(result.output_counts.sum()),
            "hidden_spikes": int(result.hidden_counts.sum()),
            "mac_count": runtime.state.mac_count,
        },
    )
    run.finish(astro_total_wall_s=result.total_astro_wall_s)
    print(
        f"simulated {len(result.windows)} windows, "
        f"{int(result.output_counts.sum())} output spikes"
    )
    return EXIT_OK


def cmd_faults(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out_dir = _out_dir(args, cfg)
    run = _Run("faults", cfg, out_dir)
    raster, _ = _build_raster(cfg)
    workers = args.workers or cfg.data["fault"]["workers"]
    report = run_campaign(
        cfg.network_config(),
        raster,
        cfg.fault_specs(),
        astro=cfg.astro_params(),
        workers=workers,
    )
    write_csv(
        run.path("fault_trials.csv"),
        ("fault_id", "kind", "target", "ft_off", "ft_on"),
        [(t.fault_id, t.spec.kind, t.spec.target, t.ft_off, t.ft_on) for t in report.trials],
    )
    write_json(
        run.path("fault_summary.json"),
        {
            "ft_initial": report.ft_initial_percent,
            "ft_astro": report.ft_astro_percent,
            "delta_ft": report.delta_ft_percent,
            "exclusions": report.exclusions,
            "n_trials": report.n_trials,
            "config_hash": cfg.config_hash,
        },
    )
    run.finish(
        astro_window_wall_s=report.astro_window_wall_s,
        astro_total_wall_s=report.astro_total_wall_s,
    )
    print(
        f"campaign: ft_initial={report.ft_initial_percent:.4f}% "
        f"ft_astro={report.ft_astro_percent:.4f}% delta_ft={report.delta_ft_percent:.4f}%"
    )
    return EXIT_OK


def cmd_perf(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out_dir = _out_dir(args, cfg)
    run = _Run("perf", cfg, out_dir)
    raster, _ = _build_raster(cfg)
    net = cfg.network_config()
    iterations = cfg.data["perf"]["loader_iterations"]
    # Monotonic clock around the stepping loop only; raster building above
    # is excluded from the measurement.
    t0 = time.perf_counter()
    for _ in range(iterations):
        state = instantiate(net)
        run_window(state, raster, (0, raster.n_bins))
    inference_time_s = time.perf_counter() - t0
    macs = count_macs(net, raster.n_bins)
    report = PerfReport.from_measurement(macs, inference_time_s, iterations)
    rows: list[tuple[str, PerfReport]] = [("this-run", report)]
    if cfg.data["perf"]["include_baselines"]:
        rows.extend(baseline_reports())
    table, csv_rows = emit_comparison(rows)
    write_csv(
        run.path("perf.csv"),
        ("name", "macs_g", "latency_ms", "throughput_gops"),
        [(r["name"], r["macs_g"], r["latency_ms"], r["throughput_gops"]) for r in csv_rows],
    )
    atomic_write_text(run.path("perf.txt"), table)
    run.finish(inference_time_s=inference_time_s)
    print(table, end="")
    return EXIT_OK


def cmd_adapt(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out_dir = _out_dir(args, cfg)
    run = _Run("adapt", cfg, out_dir)
    raster, _ = _build_raster(cfg)
    report = adaptive_loop(cfg.network_config(), cfg.astro_params(), raster, cfg.schedule())
    write_csv(
        run.path("adapt_rounds.csv"),
        ("round", "overlay", "objective"),
        [
            (r.round, json.dumps(r.overlay, sort_keys=True).replace(",", ";"), r.objective)
            for r in report.rounds
        ],
    )
    write_json(
        run.path("adapt_summary.json"),
        {
            "best_overlay": report.best_overlay,
            "best_objective": report.best_objective,
            "rounds": len(report.rounds),
            "applied_swaps": len(report.applied_swaps),
            "events_consumed": report.events_consumed,
        },
    )
    run.finish()
    print(f"best overlay: {report.best_overlay} (objective {report.best_objective:.4f})")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out_dir = _out_dir(args, cfg)
    run = _Run("train", cfg, out_dir)
    raster, workload = _build_raster(cfg)
    if workload is None:
        raise ValueError("train needs the synthetic workload; labels for external event files are not available")
    if abs(cfg.data["workload"]["period_ms"] - cfg.data["astro"]["window_ms"]) > 1e-9:
        raise ValueError("train requires workload.period_ms == astro.window_ms (one label per window)")
    runtime = SimulationRuntime(cfg.network_config(), cfg.astro_params(), raster)
    result = runtime.run()
    features = np.stack(result.window_hidden_counts).astype(float)
    labels = workload.labels[: len(features)]
    model = train_readout(
        features,
        labels,
        adam=cfg.adam_params(),
        stop=cfg.early_stop_spec(),
        max_epochs=cfg.data["train"]["max_epochs"],
        seed=cfg.data["sim"]["seed"],
        val_split=cfg.data["train"]["val_split"],
    )
    metrics = evaluate(model, features[model.val_indices], labels[model.val_indices])
    history = model.history
    write_csv(
        run.path("train_history.csv"),
        ("epoch", "train_loss", "val_loss", "train_accuracy", "val_accuracy"),
        [
            (i + 1, history.train_loss[i], history.val_loss[i], history.train_accuracy[i], history.val_accuracy[i])
            for i in range(len(history.train_loss))
        ],
    )
    write_json(
        run.path("train_metrics.json"),
        {
            **metrics,
            "stopped_epoch": history.stopped_epoch,
            "best_epoch": history.best_epoch,
            "trials": len(features),
            "classes": [int(c) for c in model.classes],
        },
    )
    run.finish()
    print(
        f"trained on {len(features)} windows: accuracy={metrics['accuracy']:.3f} "
        f"precision={metrics['precision']:.3f} recall={metrics['recall']:.3f}"
    )
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest.json under {run_dir}")
    lines = []
    manifest = json.loads(manifest_path.read_text())
    lines.append(f"run: {manifest.get('subcommand')} (tool {manifest.get('tool')} {manifest.get('version')})")
    lines.append(f"config hash: {manifest.get('config_hash')}")
    lines.append(f"seed: {manifest.get('seed')}")
    lines.append(f"artifacts: {', '.join(manifest.get('artifacts', []))}")
    for summary in sorted(run_dir.glob("*_summary.json")):
        lines.append(f"-- {summary.name}")
        payload = json.loads(summary.read_text())
        for key in sorted(payload):
            lines.append(f"   {key}: {payload[key]}")
    perf_txt = run_dir / "perf.txt"
    if perf_txt.is_file():
        lines.append("-- perf.txt")
        lines.extend("   " + l for l in perf_txt.read_text().splitlines())
    text = "\n".join(lines) + "\n"
    atomic_write_text(run_dir / "report.txt", text)
    print(text, end="")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="astrosnn",
        description="Deterministic astrocyte-augmented spiking-network experiments",
    )
    parser.add_argument("--version", action="version", version=f"astrosnn {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, func, help_text: str, config=True, out=True):
        p = sub.add_parser(name, help=help_text)
        if config:
            p.add_argument("--config", help="experiment config file (YAML)")
        if out:
            p.add_argument("--out-dir", help="artifact directory (overrides paths.out_dir)")
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "validate a text event stream and write .ev42")
    p.add_argument("--input", required=True, help="text event file ('t x y p' lines)")
    p = add("encode", cmd_encode, "encode events into a spike raster CSV")
    p.add_argument("--input", help="event file (.ev42 or text); default: synthetic workload")
    add("simulate", cmd_simulate, "run the network over the workload")
    p = add("faults", cmd_faults, "run the paired fault campaign")
    p.add_argument("--workers", type=int, help="trial pool size (overrides fault.workers)")
    add("perf", cmd_perf, "measure the stepping loop and emit the comparison table")
    add("adapt", cmd_adapt, "run the adaptive hyperparameter-exchange loop")
    add("train", cmd_train, "train and score the readout on the workload")
    p = add("report", cmd_report, "collate artifacts of a finished run", config=False, out=False)
    p.add_argument("--run-dir", required=True, help="directory holding manifest.json")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # surfaced with class name; traceback at DEBUG
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
