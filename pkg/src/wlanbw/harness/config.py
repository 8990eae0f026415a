"""Experiment configuration files and scenario presets.

Configs are YAML mappings whose keys carry their unit (``rate_bps``,
``start_us``, ``size_bytes``). Presets are the YAML files shipped in
``wlanbw/harness/presets``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..dcf import Arrival, DcfConfig, MacPhyParams, StationConfig
from ..probe_queue import (
    BoundedEmpirical,
    Deterministic,
    Exponential,
    ProbeTrainSpec,
    ServiceModel,
)

KINDS = (
    "dcf-transitory",
    "dcf-histogram",
    "dcf-fluid-curve",
    "iid-trains",
    "delta-z",
    "wlan-trains",
    "packet-pair",
    "trimming",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    description: str = ""
    seed: int = 0
    reps: int = 2000
    trim: int = 0
    output_dir: str | None = None
    dcf: dict = field(default_factory=dict)
    service: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "description": self.description,
            "seed": self.seed,
            "reps": self.reps,
            "trim": self.trim,
            "dcf": copy.deepcopy(self.dcf),
            "service": copy.deepcopy(self.service),
            "sweep": copy.deepcopy(self.sweep),
            "analysis": copy.deepcopy(self.analysis),
        }

    # -- typed views -------------------------------------------------------

    def dcf_config(self, n: int | None = None, rate_bps: float | None = None,
                   contenders: list | None = None) -> DcfConfig:
        return build_dcf_config(self.dcf, self.seed, n=n, rate_bps=rate_bps, contenders=contenders)

    def service_model(self) -> ServiceModel:
        return build_service_model(self.service)

    def rates(self) -> list[float]:
        return rate_grid(self.sweep)


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing field '{where}.{key}'")
    return mapping[key]


def _positive(value, where: str, integer: bool = False):
    try:
        v = int(value) if integer else float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{where}' must be a number, got {value!r}") from None
    if integer and v != float(value):
        raise ConfigError(f"field '{where}' must be an integer, got {value!r}")
    if not v > 0:
        raise ConfigError(f"field '{where}' must be positive, got {value!r}")
    return v


def build_station(raw: dict, where: str) -> StationConfig:
    try:
        return StationConfig(
            packet_size_bytes=int(raw.get("size_bytes", 1500)),
            offered_rate_bps=float(raw.get("rate_bps", 0.0)),
            arrival=Arrival(raw.get("arrival", "poisson")),
            start_offset_us=float(raw.get("start_us", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"field '{where}': {exc}") from None


def build_dcf_config(raw: dict, seed: int, n=None, rate_bps=None, contenders=None) -> DcfConfig:
    probe = _require(raw, "probe", "dcf")
    n = n if n is not None else _positive(_require(probe, "n", "dcf.probe"), "dcf.probe.n", integer=True)
    rate = rate_bps if rate_bps is not None else _positive(
        _require(probe, "rate_bps", "dcf.probe"), "dcf.probe.rate_bps")
    size = _positive(probe.get("size_bytes", 1500), "dcf.probe.size_bytes", integer=True)
    try:
        train = ProbeTrainSpec.from_rate(n, rate, size)
    except ValueError as exc:
        raise ConfigError(f"field 'dcf.probe': {exc}") from None
    if contenders is None:
        contenders = [build_station(c, f"dcf.contenders[{i}]")
                      for i, c in enumerate(raw.get("contenders") or [])]
    try:
        mp = MacPhyParams(**(raw.get("mac_phy") or {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'dcf.mac_phy': {exc}") from None
    return DcfConfig(
        probe=train,
        contenders=tuple(contenders),
        mac_phy=mp,
        seed=seed,
        probe_start_us=float(probe.get("start_us", 0.0)),
    )


def build_service_model(raw: dict) -> ServiceModel:
    kind = _require(raw, "kind", "service")
    if kind == "deterministic":
        return Deterministic(_positive(_require(raw, "mu_us", "service"), "service.mu_us"))
    if kind == "exponential":
        return Exponential(
            _positive(_require(raw, "mean_us", "service"), "service.mean_us"),
            lower_us=raw.get("lower_us"),
            upper_us=raw.get("upper_us"),
        )
    if kind == "empirical":
        try:
            return BoundedEmpirical(np.asarray(_require(raw, "samples_us", "service"), dtype=float))
        except ValueError as exc:
            raise ConfigError(f"field 'service.samples_us': {exc}") from None
    raise ConfigError(f"field 'service.kind': unknown service model {kind!r}")


def rate_grid(sweep: dict) -> list[float]:
    if "rates_bps" in sweep:
        rates = [float(r) for r in sweep["rates_bps"]]
    elif "start_bps" in sweep:
        start = _positive(sweep["start_bps"], "sweep.start_bps")
        stop = _positive(_require(sweep, "stop_bps", "sweep"), "sweep.stop_bps")
        step = _positive(_require(sweep, "step_bps", "sweep"), "sweep.step_bps")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        rates = [start + k * step for k in range(count)]
        rates += [float(r) for r in sweep.get("extra_bps", [])]
        rates = sorted(set(round(r, 6) for r in rates))
    else:
        raise ConfigError("missing field 'sweep.rates_bps' (or 'sweep.start_bps/stop_bps/step_bps')")
    if not rates or any(r <= 0 for r in rates):
        raise ConfigError("field 'sweep.rates_bps' must hold positive rates")
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise ConfigError("field 'sweep.rates_bps' must be strictly increasing")
    return rates


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    name = _require(raw, "name", "config")
    kind = _require(raw, "kind", "config")
    if kind not in KINDS:
        raise ConfigError(f"field 'kind': unknown experiment kind {kind!r}")
    known = {"name", "kind", "description", "seed", "reps", "trim", "output_dir",
             "dcf", "service", "sweep", "analysis"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"field '{key}': unknown configuration key")
    cfg = ExperimentConfig(
        name=str(name),
        kind=kind,
        description=str(raw.get("description", "")).strip(),
        seed=int(raw.get("seed", 0)),
        reps=_positive(raw.get("reps", 2000), "reps", integer=True),
        trim=int(raw.get("trim", 0)),
        output_dir=raw.get("output_dir"),
        dcf=dict(raw.get("dcf") or {}),
        service=dict(raw.get("service") or {}),
        sweep=dict(raw.get("sweep") or {}),
        analysis=dict(raw.get("analysis") or {}),
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Build every typed object the experiment kind needs, so errors surface early."""
    if cfg.kind.startswith("dcf-") or cfg.kind in ("wlan-trains", "packet-pair", "trimming"):
        cfg.dcf_config()
    if cfg.kind in ("iid-trains", "delta-z"):
        cfg.service_model()
    if cfg.kind in ("dcf-fluid-curve", "iid-trains", "delta-z", "wlan-trains", "trimming"):
        cfg.rates()
    if cfg.trim < 0:
        raise ConfigError("field 'trim' must be non-negative")
    if cfg.trim and cfg.kind in ("iid-trains", "wlan-trains"):
        shortest = min(int(n) for n in cfg.sweep.get("train_lengths", [2]))
        if cfg.trim >= shortest - 1:
            raise ConfigError(f"field 'trim' must be below n-1 for every train length (shortest n={shortest})")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    return parse_config(raw)


def _preset_dir():
    return resources.files("wlanbw.harness") / "presets"


def list_presets() -> list[tuple[str, str]]:
    out = []
    for entry in sorted(_preset_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".yaml"):
            raw = yaml.safe_load(entry.read_text())
            out.append((raw["name"], " ".join(str(raw.get("description", "")).split())))
    return out


def load_preset(name: str) -> ExperimentConfig:
    entry = _preset_dir() / f"{name}.yaml"
    if not entry.is_file():
        known = ", ".join(n for n, _ in list_presets())
        raise ConfigError(f"field 'preset': unknown preset {name!r} (known: {known})")
    return parse_config(yaml.safe_load(entry.read_text()))
