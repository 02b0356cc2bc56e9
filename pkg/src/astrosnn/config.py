"""Experiment configuration: YAML surface, schema validation, canonical hash.

Every key is validated against the schema below (types, ranges, defaults);
unknown keys are rejected by their full dotted path. The config hash is a
sha256 over the canonical JSON rendering of the fully defaulted tree, so
it is stable across platforms and key orderings.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .astro import AstroParams
from .core import NetworkConfig, NeuronParams
from .dfx import AdaptiveSchedule
from .faults import FaultSpec
from .runtime import SWAPPABLE_KEYS
from .train import AdamParams, EarlyStopSpec


class ConfigError(Exception):
    """Base class for configuration failures (CLI exit code 3)."""


class ConfigFileError(ConfigError):
    """Config file missing or unreadable."""


class ConfigParseError(ConfigError):
    """Config file is not valid YAML; message carries the location."""


class ConfigKeyError(ConfigError):
    """Unknown key; message names the full dotted path."""


class ConfigValueError(ConfigError):
    """Type or range violation for a known key."""


@dataclass(frozen=True)
class _Field:
    default: Any
    kind: type
    lo: float | None = None
    hi: float | None = None
    lo_open: bool = False
    hi_open: bool = False
    choices: tuple | None = None
    nullable: bool = False


def _positive(default, kind=float):
    return _Field(default, kind, lo=0, lo_open=True)


def _non_negative(default, kind=float):
    return _Field(default, kind, lo=0)


_SCHEMA: dict[str, dict[str, Any]] = {
    "sim": {
        "seed": _Field(0, int, lo=0, hi=2**64 - 1),
        "dt_ms": _positive(1.0),
        "duration_ms": _positive(4000.0),
    },
    "events": {
        "downsample": _Field(10, int, lo=1),
        "bin_width_us": _Field(1000, int, lo=1),
        "polarity": _Field("folded", str, choices=("folded", "signed")),
    },
    "network": {
        "layer_sizes": _Field((432, 128, 120), tuple),
        "w_min": _Field(0.0, float),
        "w_max": _Field(1.0, float),
        "init_scale_hidden": _Field(0.5, float, lo=0, hi=1),
        "init_scale_output": _Field(0.5, float, lo=0, hi=1),
        "hidden": {
            "tau_mem_ms": _positive(20.0),
            "v_th": _Field(1.0, float),
            "v_reset": _Field(0.0, float),
            "refractory_steps": _non_negative(2, int),
        },
        "output": {
            "tau_mem_ms": _positive(20.0),
            "v_th": _Field(1.0, float),
            "v_reset": _Field(0.0, float),
            "refractory_steps": _non_negative(2, int),
        },
    },
    "astro": {
        "enabled": _Field(True, bool),
        "eta": _non_negative(0.25),
        "target_rate_hz": _positive(20.0),
        "window_ms": _positive(100.0),
        "group_size": _Field(16, int, lo=1),
    },
    "fault": {
        "kind": _Field("silence_neuron", str, choices=("silence_neuron", "stuck_at_fire")),
        "targets": _Field("all_hidden", object),
        "onset_ms": _non_negative(0.0),
        "workers": _Field(1, int, lo=1),
    },
    "perf": {
        "loader_iterations": _Field(10, int, lo=1),
        "include_baselines": _Field(True, bool),
    },
    "dfx": {
        "boundary_ms": _positive(100.0),
        "max_rounds": _Field(8, int, lo=1),
        "probe_faults": _Field(4, int, lo=1),
        "grid": _Field({"astro.eta": (0.0, 0.25)}, dict),
    },
    "train": {
        "lr": _positive(1e-3),
        "beta1": _Field(0.9, float, lo=0, hi=1, lo_open=True, hi_open=True),
        "beta2": _Field(0.999, float, lo=0, hi=1, lo_open=True, hi_open=True),
        "epsilon": _positive(1e-8),
        "patience": _non_negative(10, int),
        "min_delta": _non_negative(0.0),
        "max_epochs": _Field(200, int, lo=1),
        "val_split": _Field(0.2, float, lo=0, hi=1, lo_open=True, hi_open=True),
    },
    "workload": {
        "kind": _Field("quadrant", str, choices=("quadrant",)),
        "events_per_ms": _non_negative(10.0),
        "background_per_ms": _non_negative(2.0),
        "period_ms": _positive(100.0),
    },
    "paths": {
        "out_dir": _Field("runs/out", str),
        "events": _Field(None, str, nullable=True),
    },
}


def _check_leaf(path: str, field: _Field, value: Any) -> Any:
    if value is None:
        if field.nullable:
            return None
        raise ConfigValueError(f"{path}: null is not allowed")
    if field.kind is bool:
        if not isinstance(value, bool):
            raise ConfigValueError(f"{path}: expected boolean, got {value!r}")
        return value
    if field.kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigValueError(f"{path}: expected integer, got {value!r}")
    elif field.kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigValueError(f"{path}: expected number, got {value!r}")
        value = float(value)
    elif field.kind is str:
        if not isinstance(value, str):
            raise ConfigValueError(f"{path}: expected string, got {value!r}")
    if field.choices is not None and value not in field.choices:
        raise ConfigValueError(f"{path}: {value!r} not in {field.choices}")
    if field.lo is not None:
        if value < field.lo or (field.lo_open and value == field.lo):
            bound = ">" if field.lo_open else ">="
            raise ConfigValueError(f"{path}: {value!r} violates {bound} {field.lo}")
    if field.hi is not None:
        if value > field.hi or (field.hi_open and value == field.hi):
            bound = "<" if field.hi_open else "<="
            raise ConfigValueError(f"{path}: {value!r} violates {bound} {field.hi}")
    return value


def _check_layer_sizes(path: str, value: Any) -> tuple[int, int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigValueError(f"{path}: expected three layer sizes, got {value!r}")
    sizes = []
    for n in value:
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ConfigValueError(f"{path}: layer sizes must be integers >= 1, got {value!r}")
        sizes.append(n)
    return tuple(sizes)


def _check_grid(path: str, value: Any) -> dict[str, tuple]:
    if not isinstance(value, dict) or not value:
        raise ConfigValueError(f"{path}: expected a non-empty mapping of swappable keys")
    grid = {}
    for key, values in value.items():
        if key not in SWAPPABLE_KEYS:
            raise ConfigKeyError(f"{path}.{key}: not a swappable key")
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigValueError(f"{path}.{key}: expected a non-empty list of values")
        grid[key] = tuple(values)
    return grid


def _check_targets(path: str, value: Any) -> Any:
    if value == "all_hidden":
        return value
    if isinstance(value, (list, tuple)) and value and all(
        isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in value
    ):
        return tuple(value)
    raise ConfigValueError(f"{path}: expected 'all_hidden' or a list of neuron indices")


def _validate(tree: Any, schema: dict, prefix: str = "") -> dict:
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigValueError(f"{prefix or 'config'}: expected a mapping, got {tree!r}")
    for key in tree:
        if key not in schema:
            raise ConfigKeyError(f"unknown key {prefix + str(key)!r}")
    out: dict[str, Any] = {}
    for key, spec in schema.items():
        path = prefix + key
        if isinstance(spec, dict):
            out[key] = _validate(tree.get(key), spec, path + ".")
        else:
            value = tree.get(key, spec.default)
            if path == "network.layer_sizes":
                out[key] = _check_layer_sizes(path, value)
            elif path == "dfx.grid":
                out[key] = _check_grid(path, value)
            elif path == "fault.targets":
                out[key] = _check_targets(path, value)
            else:
                out[key] = _check_leaf(path, spec, value)
    return out


def _cross_checks(data: dict) -> None:
    if data["network"]["w_min"] > data["network"]["w_max"]:
        raise ConfigValueError("network.w_min: must not exceed network.w_max")
    for layer in ("hidden", "output"):
        if data["network"][layer]["v_reset"] >= data["network"][layer]["v_th"]:
            raise ConfigValueError(f"network.{layer}.v_reset: must be below v_th")
    if abs(data["sim"]["dt_ms"] * 1000 - data["events"]["bin_width_us"]) > 1e-9:
        raise ConfigValueError(
            "sim.dt_ms and events.bin_width_us disagree: one network step consumes one"
            " raster bin, so dt_ms * 1000 must equal bin_width_us"
        )
    if data["dfx"]["boundary_ms"] < data["astro"]["window_ms"]:
        raise ConfigValueError("dfx.boundary_ms: must be >= astro.window_ms")


def _canonical(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully defaulted configuration tree."""

    data: dict

    def get(self, dotted: str) -> Any:
        node: Any = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    @property
    def config_hash(self) -> str:
        payload = json.dumps(_canonical(self.data), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    # -- domain object builders -------------------------------------------

    def network_config(self) -> NetworkConfig:
        net = self.data["network"]
        return NetworkConfig(
            layer_sizes=tuple(net["layer_sizes"]),
            hidden=NeuronParams(**net["hidden"]),
            output=NeuronParams(**net["output"]),
            w_min=net["w_min"],
            w_max=net["w_max"],
            init_scale_hidden=net["init_scale_hidden"],
            init_scale_output=net["init_scale_output"],
            astro_enabled=self.data["astro"]["enabled"],
            dt_ms=self.data["sim"]["dt_ms"],
            seed=self.data["sim"]["seed"],
        )

    def astro_params(self) -> AstroParams:
        return AstroParams(**self.data["astro"])

    def adam_params(self) -> AdamParams:
        t = self.data["train"]
        return AdamParams(
            learning_rate=t["lr"], beta1=t["beta1"], beta2=t["beta2"], epsilon=t["epsilon"]
        )

    def early_stop_spec(self) -> EarlyStopSpec:
        t = self.data["train"]
        return EarlyStopSpec(patience=t["patience"], min_delta=t["min_delta"])

    def schedule(self) -> AdaptiveSchedule:
        d = self.data["dfx"]
        return AdaptiveSchedule(
            grid=dict(d["grid"]),
            boundary_ms=d["boundary_ms"],
            max_rounds=d["max_rounds"],
            probe_faults=d["probe_faults"],
        )

    def fault_specs(self) -> list[FaultSpec]:
        f = self.data["fault"]
        n_hidden = self.data["network"]["layer_sizes"][1]
        if f["targets"] == "all_hidden":
            targets = range(n_hidden)
        else:
            targets = f["targets"]
        return [FaultSpec(f["kind"], int(i), f["onset_ms"]) for i in targets]


def parse_config(tree: Any) -> ExperimentConfig:
    """Validate a raw mapping (already parsed) into an ExperimentConfig."""
    data = _validate(tree, _SCHEMA)
    _cross_checks(data)
    return ExperimentConfig(data)


def load_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a YAML config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigFileError(f"config file not found: {path}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read {path}: {exc}") from None
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        location = ""
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            location = f" at line {mark.line + 1}, column {mark.column + 1}"
        raise ConfigParseError(f"invalid YAML in {path}{location}: {exc}") from None
    return parse_config(tree)


def default_config() -> ExperimentConfig:
    return parse_config({})
