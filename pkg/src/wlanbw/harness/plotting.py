"""Static SVG plots of schema CSVs. Presentation only."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .csvio import SchemaError, read_csv  # noqa: E402

# fixed hash salt and no date metadata keep SVG output reproducible
matplotlib.rcParams["svg.hashsalt"] = "wlanbw"


def _col(rows, key):
    return np.array([r[key] for r in rows], dtype=float)


def _plot_curve(rows):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    r_i = _col(rows, "r_i_bps") / 1e6
    ax.errorbar(r_i, _col(rows, "r_o_bps") / 1e6, yerr=_col(rows, "ci_bps") / 1e6,
                marker="o", ms=3, capsize=2, label="measured")
    fluid = _col(rows, "fluid_bps")
    if np.isfinite(fluid).any():
        ax.plot(r_i, fluid / 1e6, "k--", lw=1, label="fluid")
    lo = _col(rows, "bound_lo_bps")
    if np.isfinite(lo).any():
        ax.plot(r_i, lo / 1e6, ":", color="tab:red", lw=1, label="bound")
    ax.set_xlabel("input rate r_i (Mbps)")
    ax.set_ylabel("output rate r_o (Mbps)")
    ax.legend()
    return fig


def _plot_transitory(rows):
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    idx = _col(rows, "index")
    top.plot(idx, _col(rows, "ks_D"), lw=1, label="KS distance")
    top.plot(idx, _col(rows, "threshold"), "r-", lw=1, label="95% critical value")
    top.set_ylabel("KS statistic D")
    top.legend()
    bottom.plot(idx, _col(rows, "mean_queue"), lw=1)
    bottom.set_xlabel("probe packet index")
    bottom.set_ylabel("mean contender queue (packets)")
    return fig


def _plot_gap(rows):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    g = _col(rows, "g_I_us") / 1e3
    ax.errorbar(g, _col(rows, "mean_gO_us") / 1e3, yerr=_col(rows, "stderr_us") / 1e3, marker="o", ms=3)
    ax.plot(g, g, "k--", lw=1)
    ax.set_xlabel("input gap g_I (ms)")
    ax.set_ylabel("mean output gap g_O (ms)")
    return fig


def _plot_throughput(rows):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    r_i = _col(rows, "r_i_bps") / 1e6
    ax.plot(r_i, _col(rows, "probe_bps") / 1e6, "o-", ms=3, label="probe output")
    ax.plot(r_i, _col(rows, "contender_bps") / 1e6, "s-", ms=3, label="cross-traffic")
    ax.set_xlabel("input rate r_i (Mbps)")
    ax.set_ylabel("throughput (Mbps)")
    ax.legend()
    return fig


def _plot_histogram(rows):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    idx = _col(rows, "index")
    for i in np.unique(idx):
        sel = [r for r, k in zip(rows, idx) if k == i]
        lo = _col(sel, "bin_lo_us") / 1e3
        ax.step(lo, _col(sel, "density") * 1e3, where="post", label=f"packet {int(i)}")
    ax.set_xlabel("service delay (ms)")
    ax.set_ylabel("density (1/ms)")
    ax.legend()
    return fig


def _plot_delta_z(rows):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    rates = _col(rows, "r_i_bps")
    for r in np.unique(rates):
        sel = [row for row, x in zip(rows, rates) if x == r]
        ax.plot(_col(sel, "index"), _col(sel, "mean_delta_z_us") / 1e3, lw=1, label=f"{r / 1e6:g} Mbps")
    ax.set_xlabel("probe packet index i")
    ax.set_ylabel("E[Z_i - Z_(i-1)] (ms)")
    ax.legend()
    return fig


def _plot_pair(rows):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    x = _col(rows, "cross_bps") / 1e6
    ax.errorbar(x, _col(rows, "pair_bps") / 1e6, yerr=_col(rows, "pair_ci_bps") / 1e6,
                marker="o", ms=3, capsize=2, label="packet pair")
    ax.errorbar(x, _col(rows, "achievable_bps") / 1e6, yerr=_col(rows, "achievable_ci_bps") / 1e6,
                marker="s", ms=3, capsize=2, label="achievable throughput")
    ax.set_xlabel("cross-traffic rate (Mbps)")
    ax.set_ylabel("estimate (Mbps)")
    ax.legend()
    return fig


PLOTTERS = {
    "curve": _plot_curve,
    "transitory": _plot_transitory,
    "gap": _plot_gap,
    "throughput": _plot_throughput,
    "histogram": _plot_histogram,
    "delta_z": _plot_delta_z,
    "pair": _plot_pair,
}


def emit_plot(csv_path, kind: str | None = None, out=None) -> Path:
    """Render ``csv_path`` to an SVG next to it (or at ``out``)."""
    csv_path = Path(csv_path)
    schema, rows = read_csv(csv_path, expect=kind)
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    fig = PLOTTERS[schema](rows)
    fig.tight_layout()
    out = Path(out) if out else csv_path.with_suffix(".svg")
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
