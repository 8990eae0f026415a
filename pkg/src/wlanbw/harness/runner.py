"""Experiment runners: one function per experiment kind.

Each ``compute_*`` function returns in-memory results; :func:`run_experiment`
writes them as schema CSVs next to a ``manifest.json``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..dcf import StationConfig, run_replications, service_matrix
from ..estimation import (
    PairEstimate,
    RateResponseCurve,
    Z95,
    fluid_wlan,
    packet_pair_estimate,
    rate_response_sweep,
)
from ..probe_queue import PerIndexEmpirical, ProbeTrainSpec, monte_carlo_gap
from ..stats import TransitoryReport, transitory_report
from ..units import gap_us, rate_bps
from .config import ConfigError, ExperimentConfig
from .csvio import write_csv

log = logging.getLogger(__name__)


class RunError(RuntimeError):
    pass


def _analysis(cfg: ExperimentConfig, key: str, default):
    return cfg.analysis.get(key, default)


# -- DCF ensembles ------------------------------------------------------------


def dcf_ensemble(cfg: ExperimentConfig, contenders=None):
    return run_replications(cfg.dcf_config(contenders=contenders), cfg.reps)


def compute_transitory(cfg: ExperimentConfig, contenders=None) -> TransitoryReport:
    ens = dcf_ensemble(cfg, contenders)
    return transitory_report(
        ens,
        tail=int(_analysis(cfg, "tail", 500)),
        alpha=float(_analysis(cfg, "alpha", 0.05)),
        window=int(_analysis(cfg, "window", 10)),
        tolerance=int(_analysis(cfg, "tolerance", 1)),
    )


def compute_histograms(cfg: ExperimentConfig) -> list[tuple[int, np.ndarray, np.ndarray]]:
    mat = service_matrix(dcf_ensemble(cfg))
    indices = [int(i) for i in _analysis(cfg, "indices", [1, mat.shape[1]])]
    width = float(_analysis(cfg, "bin_us", 100.0))
    lo = math.floor(mat.min() / width) * width
    hi = math.ceil(mat.max() / width) * width + width
    edges = np.arange(lo, hi + width / 2, width)
    out = []
    for i in indices:
        if not 1 <= i <= mat.shape[1]:
            raise ConfigError(f"field 'analysis.indices': index {i} outside 1..{mat.shape[1]}")
        dens, _ = np.histogram(mat[:, i - 1], bins=edges, density=True)
        out.append((i, edges, dens))
    return out


@dataclass
class FluidCurve:
    r_i: np.ndarray
    r_o: np.ndarray
    ci: np.ndarray
    contender_bps: np.ndarray
    achievable_bps: float

    def as_curve(self, size_bytes: int) -> RateResponseCurve:
        return RateResponseCurve.from_samples(self.r_i, self.r_o, size_bytes, self.achievable_bps, ci=self.ci)


def compute_fluid_curve(cfg: ExperimentConfig) -> FluidCurve:
    """Long-train DCF rate response plus the contenders' delivered throughput."""
    rates = cfg.rates()
    r_o, ci, cross = [], [], []
    for r in rates:
        base = cfg.dcf_config(rate_bps=r)
        traces = run_replications(base, cfg.reps)
        gaps = np.array([t.output_gap_us for t in traces])
        size = base.probe.size_bytes
        mean = gaps.mean()
        ro = rate_bps(size, mean)
        se = gaps.std(ddof=1) / math.sqrt(gaps.size) if gaps.size > 1 else 0.0
        r_o.append(ro)
        ci.append(Z95 * ro * se / mean)
        cross.append(float(np.mean([t.contender_throughput_bps.sum() for t in traces])))
        log.info("rate %.3g bps: r_o %.4g bps", r, ro)
    r_o = np.array(r_o)
    # plateau level: output rate at the highest probing rate
    return FluidCurve(np.array(rates), r_o, np.array(ci), np.array(cross), float(r_o[-1]))


# -- queue replay ---------------------------------------------------------------


def compute_iid_curves(cfg: ExperimentConfig) -> dict[int, RateResponseCurve]:
    model = cfg.service_model()
    size = int(cfg.sweep.get("size_bytes", 1500))
    return {
        int(n): rate_response_sweep(model, size, cfg.rates(), int(n), cfg.reps, cfg.trim, cfg.seed)
        for n in cfg.sweep.get("train_lengths", [2, 10, 20])
    }


def compute_delta_z(cfg: ExperimentConfig) -> dict[float, np.ndarray]:
    model = cfg.service_model()
    size = int(cfg.sweep.get("size_bytes", 1500))
    n = int(cfg.sweep.get("n", 100))
    return {
        r: monte_carlo_gap(model, ProbeTrainSpec.from_rate(n, r, size), cfg.reps, seed=cfg.seed).mean_delta_z_us
        for r in cfg.rates()
    }


def wlan_model(cfg: ExperimentConfig) -> PerIndexEmpirical:
    """Per-index empirical service model built from the configured DCF ensemble."""
    return PerIndexEmpirical(service_matrix(dcf_ensemble(cfg)))


def compute_wlan_curves(cfg: ExperimentConfig, model: PerIndexEmpirical | None = None
                        ) -> dict[int, RateResponseCurve]:
    model = model or wlan_model(cfg)
    size = cfg.dcf_config().probe.size_bytes
    mc_reps = int(_analysis(cfg, "mc_reps", model.traces_us.shape[0]))
    return {
        int(n): rate_response_sweep(model, size, cfg.rates(), int(n), mc_reps, cfg.trim, cfg.seed)
        for n in cfg.sweep.get("train_lengths", [2, 10, 20, model.length])
    }


def compute_trimming(cfg: ExperimentConfig, model: PerIndexEmpirical | None = None
                     ) -> tuple[RateResponseCurve, dict[tuple[int, int], RateResponseCurve]]:
    """Reference long-train curve and one curve per ``(n, trim)`` strategy."""
    model = model or wlan_model(cfg)
    size = cfg.dcf_config().probe.size_bytes
    mc_reps = int(_analysis(cfg, "mc_reps", model.traces_us.shape[0]))
    ref_n = int(_analysis(cfg, "reference_n", model.length))
    rates = cfg.rates()
    ref = rate_response_sweep(model, size, rates, ref_n, mc_reps, 0, cfg.seed)
    curves = {}
    for n, k in cfg.sweep.get("strategies", [[50, 30], [100, 0]]):
        curves[(int(n), int(k))] = rate_response_sweep(model, size, rates, int(n), mc_reps, int(k), cfg.seed)
    return ref, curves


@dataclass
class PairPoint:
    cross_bps: float
    pair: PairEstimate
    achievable_bps: float
    achievable_ci_bps: float


def long_train_throughput(cfg: ExperimentConfig, contenders) -> tuple[float, float]:
    """Output rate of saturating long trains, with its 95% half-width."""
    n = int(_analysis(cfg, "long_n", 1000))
    r = float(_analysis(cfg, "long_rate_bps", 8e6))
    reps = int(_analysis(cfg, "long_reps", 20))
    base = cfg.dcf_config(n=n, rate_bps=r, contenders=contenders)
    gaps = np.array([t.output_gap_us for t in run_replications(base, reps)])
    size = base.probe.size_bytes
    ro = rate_bps(size, gaps.mean())
    se = gaps.std(ddof=1) / math.sqrt(reps) if reps > 1 else math.inf
    return ro, Z95 * ro * se / gaps.mean()


def compute_packet_pairs(cfg: ExperimentConfig) -> list[PairPoint]:
    base = cfg.dcf_config()
    size = base.probe.size_bytes
    cross_size = int(cfg.sweep.get("cross_size_bytes", 1500))
    out = []
    for level in cfg.sweep.get("cross_rates_bps", [0.0, 4e6]):
        level = float(level)
        contenders = [StationConfig(cross_size, level, "poisson")] if level > 0 else []
        src = cfg.dcf_config(n=2, contenders=contenders)
        pair = packet_pair_estimate(src, size, cfg.reps, seed=cfg.seed)
        ach, ach_ci = long_train_throughput(cfg, contenders)
        out.append(PairPoint(level, pair, ach, ach_ci))
    return out


# -- output -------------------------------------------------------------------


def _curve_rows(curve: RateResponseCurve):
    return [(p.r_i_bps, p.r_o_bps, p.ci_bps, p.fluid_bps, p.bound_lo_bps, p.bound_hi_bps)
            for p in curve.points]


def _gap_rows(curve: RateResponseCurve):
    return [(gap_us(curve.size_bytes, p.r_i_bps), p.mean_g_o_us, p.stderr_us,
             p.region.value if p.region else "") for p in curve.points]


def _write(cfg: ExperimentConfig, out: Path) -> list[str]:
    files = []

    def emit(name, schema, rows):
        write_csv(out / name, schema, rows)
        files.append(name)

    kind = cfg.kind
    if kind == "dcf-transitory":
        rep = compute_transitory(cfg)
        emit("transitory.csv", "transitory", [
            (i + 1, rep.per_index_d[i], rep.threshold, rep.mean_queue[i], rep.mean_mu_us[i])
            for i in range(rep.per_index_d.size)
        ])
    elif kind == "dcf-histogram":
        rows = []
        for i, edges, dens in compute_histograms(cfg):
            rows += [(i, lo, hi, d) for lo, hi, d in zip(edges[:-1], edges[1:], dens)]
        emit("histogram.csv", "histogram", rows)
    elif kind == "dcf-fluid-curve":
        fc = compute_fluid_curve(cfg)
        emit("curve.csv", "curve", [
            (a, b, c, fluid_wlan(a, fc.achievable_bps), None, None)
            for a, b, c in zip(fc.r_i, fc.r_o, fc.ci)
        ])
        emit("throughput.csv", "throughput", list(zip(fc.r_i, fc.r_o, fc.contender_bps)))
    elif kind == "iid-trains":
        for n, curve in compute_iid_curves(cfg).items():
            emit(f"curve_n{n}.csv", "curve", _curve_rows(curve))
            emit(f"gap_n{n}.csv", "gap", _gap_rows(curve))
    elif kind == "delta-z":
        rows = []
        for r, dz in compute_delta_z(cfg).items():
            rows += [(r, i + 2, v) for i, v in enumerate(dz)]
        emit("delta_z.csv", "delta_z", rows)
    elif kind == "wlan-trains":
        for n, curve in compute_wlan_curves(cfg).items():
            emit(f"curve_n{n}.csv", "curve", _curve_rows(curve))
    elif kind == "trimming":
        ref, curves = compute_trimming(cfg)
        emit(f"curve_ref_n{ref.n}.csv", "curve", _curve_rows(ref))
        for (n, k), curve in curves.items():
            emit(f"curve_n{n}_k{k}.csv", "curve", _curve_rows(curve))
    elif kind == "packet-pair":
        emit("pair.csv", "pair", [
            (p.cross_bps, p.pair.rate_bps, p.pair.ci_bps, p.achievable_bps, p.achievable_ci_bps)
            for p in compute_packet_pairs(cfg)
        ])
    else:  # pragma: no cover - parse_config rejects unknown kinds
        raise ConfigError(f"field 'kind': unknown experiment kind {kind!r}")
    return files


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> Path:
    """Run ``cfg`` and write its CSVs plus ``manifest.json`` into ``output_dir``."""
    out = Path(output_dir or cfg.output_dir or Path("runs") / cfg.name)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise RunError(f"output directory {out} is not writable: {exc}") from None
    files = _write(cfg, out)
    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "seed": cfg.seed,
        "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
