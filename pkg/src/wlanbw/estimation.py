"""Bandwidth metrics, rate-response curves and dispersion estimators.

Rates are in bps, gaps and delays in µs, packet sizes in bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .probe_queue import (
    GapStats,
    PerIndexEmpirical,
    ProbeTrainSpec,
    ServiceModel,
    monte_carlo_gap,
)
from .units import gap_us, rate_bps

Z95 = 1.959963984540054


@dataclass(frozen=True)
class FluidParams:
    capacity_bps: float
    available_bps: float
    achievable_bps: float

    def __post_init__(self):
        if not 0 < self.available_bps <= self.achievable_bps <= self.capacity_bps:
            raise ValueError("need 0 < available <= achievable <= capacity")


def fluid_fifo(r_i: float, params: FluidParams) -> float:
    """Output rate of a fluid FIFO hop with capacity C and available bandwidth A."""
    if not r_i > 0:
        raise ValueError("input rate must be positive")
    c, a = params.capacity_bps, params.available_bps
    return min(r_i, c * r_i / (r_i + c - a))


def fluid_wlan(r_i: float, achievable_bps: float) -> float:
    """Output rate of a fluid WLAN hop: identity up to the achievable throughput."""
    if not r_i > 0:
        raise ValueError("input rate must be positive")
    return min(r_i, achievable_bps)


def achievable_throughput_iid(size_bytes: float, mean_mu_us: float) -> float:
    if not mean_mu_us > 0:
        raise ValueError("mean service delay must be positive")
    return rate_bps(size_bytes, mean_mu_us)


def achievable_throughput_transitory(size_bytes: float, per_index_means_us) -> float:
    """Achievable throughput from the average of the per-index mean delays."""
    means = np.asarray(per_index_means_us, dtype=float)
    if means.size == 0:
        raise ValueError("per-index means must be non-empty")
    return rate_bps(size_bytes, float(means.mean()))


# ---------------------------------------------------------------------------
# expected output-gap bounds


class Region(str, Enum):
    BELOW_MIN = "below_min"
    MIN_TO_MEAN = "min_to_mean"
    MEAN_TO_MAX = "mean_to_max"
    ABOVE_MAX = "above_max"


@dataclass(frozen=True)
class DeviationBounds:
    """Region of ``g_I`` and the interval that must contain ``E[g_O]`` (µs)."""

    region: Region
    lower_us: float
    upper_us: float
    n0: int | None = None

    def __post_init__(self):
        if self.lower_us > self.upper_us + 1e-9:
            raise ValueError("lower bound exceeds upper bound")

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower_us - slack <= value <= self.upper_us + slack


def _check_support(mean, lo, hi):
    if not lo <= mean <= hi or lo < 0:
        raise ValueError(f"inconsistent bounds: need 0 <= mu_min ({lo}) <= mean ({mean}) <= mu_max ({hi})")


def expected_gap_bounds_iid(
    mean_us: float, mu_min_us: float, mu_max_us: float, g_i_us: float, n: int
) -> DeviationBounds:
    """Bounds on ``E[g_O]`` for i.i.d. service with the given mean and support."""
    _check_support(mean_us, mu_min_us, mu_max_us)
    if n < 2:
        raise ValueError("n must be >= 2")
    g, m = g_i_us, mean_us
    if g <= mu_min_us:
        return DeviationBounds(Region.BELOW_MIN, m, m)
    if g >= mu_max_us:
        return DeviationBounds(Region.ABOVE_MAX, g, g)
    if g <= m:
        return DeviationBounds(Region.MIN_TO_MEAN, max(g, m), g + m)
    return DeviationBounds(Region.MEAN_TO_MAX, g, g + m)


def expected_gap_bounds_transitory(
    per_index_means_us, mu_min_us: float, mu_max_us: float, g_i_us: float, n: int,
    n0: int | None = None,
) -> DeviationBounds:
    """Bounds on ``E[g_O]`` when the mean delay varies with the packet index.

    Region cut-offs use the average of the first ``n`` per-index means. Below
    ``mu_min`` the gap is exactly the average of means 2..n; above ``mu_max``
    it is ``g_I`` plus the first-to-last drift divided by ``n-1``.
    """
    means = np.asarray(per_index_means_us, dtype=float)
    if n < 2:
        raise ValueError("n must be >= 2")
    if means.size < n:
        raise ValueError(f"need {n} per-index means, got {means.size}")
    means = means[:n]
    avg = float(means.mean())
    _check_support(avg, mu_min_us, mu_max_us)
    g = g_i_us
    tail_avg = float(means[1:].mean())
    if g <= mu_min_us:
        return DeviationBounds(Region.BELOW_MIN, tail_avg, tail_avg, n0)
    if g >= mu_max_us:
        drift = g + (means[-1] - means[0]) / (n - 1)
        return DeviationBounds(Region.ABOVE_MAX, drift, drift, n0)
    if g <= avg:
        lower = g + float((means[1:] - g).sum()) / (n - 1)
        return DeviationBounds(Region.MIN_TO_MEAN, lower, g + tail_avg, n0)
    return DeviationBounds(Region.MEAN_TO_MAX, g, g + tail_avg, n0)


def model_gap_bounds(model: ServiceModel, g_i_us: float, n: int) -> DeviationBounds:
    """Pick the i.i.d. or per-index bounds that match ``model``."""
    if isinstance(model, PerIndexEmpirical):
        return expected_gap_bounds_transitory(
            model.per_index_means_us(n), model.mu_min_us, model.mu_max_us, g_i_us, n
        )
    return expected_gap_bounds_iid(model.mean_us, model.mu_min_us, model.mu_max_us, g_i_us, n)


# ---------------------------------------------------------------------------
# rate-response curves


@dataclass(frozen=True)
class CurvePoint:
    r_i_bps: float
    r_o_bps: float
    ci_bps: float
    mean_g_o_us: float
    stderr_us: float
    fluid_bps: float
    bound_lo_bps: float | None = None
    bound_hi_bps: float | None = None
    region: Region | None = None


@dataclass(frozen=True, eq=False)
class RateResponseCurve:
    points: list[CurvePoint]
    n: int
    trim: int
    size_bytes: int
    achievable_bps: float
    stats: list[GapStats] = field(default_factory=list, repr=False)

    def __post_init__(self):
        r = [p.r_i_bps for p in self.points]
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("curve input rates must be strictly increasing")

    @property
    def r_i(self) -> np.ndarray:
        return np.array([p.r_i_bps for p in self.points])

    @property
    def r_o(self) -> np.ndarray:
        return np.array([p.r_o_bps for p in self.points])

    @property
    def ci(self) -> np.ndarray:
        return np.array([p.ci_bps for p in self.points])

    @classmethod
    def from_samples(cls, r_i, r_o, size_bytes=1500, achievable_bps=math.nan, n=0, trim=0, ci=None):
        """Wrap measured (r_i, r_o) pairs, e.g. long DCF trains, as a curve."""
        ci = np.zeros(len(r_i)) if ci is None else ci
        pts = [
            CurvePoint(float(a), float(b), float(c), gap_us(size_bytes, b), math.nan,
                       fluid_wlan(a, achievable_bps) if achievable_bps == achievable_bps else math.nan)
            for a, b, c in zip(r_i, r_o, ci)
        ]
        return cls(pts, n, trim, size_bytes, achievable_bps)


def rate_from_gap_stats(size_bytes: float, st: GapStats) -> tuple[float, float]:
    """Inferred output rate ``8L / E[g_O]`` and its 95% half-width (delta method)."""
    r_o = rate_bps(size_bytes, st.mean_g_o_us)
    return r_o, Z95 * r_o * st.stderr_us / st.mean_g_o_us


def rate_response_sweep(
    model: ServiceModel,
    size_bytes: int,
    rates_bps,
    n: int,
    reps: int,
    trim: int = 0,
    seed: int = 0,
) -> RateResponseCurve:
    """Dispersion-inferred rate response of ``model`` over ``rates_bps``.

    Every rate reuses ``seed`` (common random numbers), so differences between
    neighbouring points are not swamped by sampling noise.
    """
    rates = [float(r) for r in rates_bps]
    if not rates:
        raise ValueError("rates must be non-empty")
    if not 0 <= trim < n - 1:
        raise ValueError(f"trim must satisfy 0 <= trim < n-1, got trim={trim}, n={n}")
    if isinstance(model, PerIndexEmpirical):
        achievable = achievable_throughput_transitory(size_bytes, model.per_index_means_us(n))
    else:
        achievable = achievable_throughput_iid(size_bytes, model.mean_us)
    points, stats = [], []
    for r in sorted(rates):
        train = ProbeTrainSpec.from_rate(n, r, size_bytes)
        st = monte_carlo_gap(model, train, reps, seed=seed, trim=trim)
        r_o, ci = rate_from_gap_stats(size_bytes, st)
        lo = hi = None
        region = None
        if trim == 0:
            b = model_gap_bounds(model, train.g_i_us, n)
            region = b.region
            # a larger gap bound means a smaller rate
            lo = rate_bps(size_bytes, b.upper_us)
            hi = rate_bps(size_bytes, b.lower_us)
        points.append(CurvePoint(r, r_o, ci, st.mean_g_o_us, st.stderr_us,
                                 fluid_wlan(r, achievable), lo, hi, region))
        stats.append(st)
    return RateResponseCurve(points, n, trim, size_bytes, achievable, stats)


# ---------------------------------------------------------------------------
# packet pairs


@dataclass(frozen=True)
class PairEstimate:
    rate_bps: float
    ci_bps: float
    mean_g_o_us: float
    stderr_us: float
    g_i_us: float
    reps: int


def packet_pair_estimate(source, size_bytes: int = 1500, reps: int = 2000, seed: int = 0,
                         gap_fraction: float = 0.1) -> PairEstimate:
    """Average-dispersion estimate from back-to-back packet pairs.

    ``source`` is either a :class:`ServiceModel` (queue replay) or a
    :class:`wlanbw.dcf.DcfConfig` whose contenders are simulated with the MAC.
    The pair spacing is ``gap_fraction`` times the minimum service delay.
    """
    from .dcf import DcfConfig, frame_service_components, run_replications

    if isinstance(source, DcfConfig):
        mp = source.mac_phy
        mu_min = frame_service_components(size_bytes, mp) + mp.difs_us
        g = max(gap_fraction * mu_min, 1e-3)
        cfg = DcfConfig(
            probe=ProbeTrainSpec(2, g, size_bytes),
            contenders=source.contenders,
            mac_phy=mp,
            seed=seed,
            probe_start_us=source.probe_start_us,
        )
        gaps = np.array([t.output_gap_us for t in run_replications(cfg, reps)])
        mean = float(gaps.mean())
        se = float(gaps.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.inf
    else:
        mu_min = source.mu_min_us if source.mu_min_us > 0 else source.mean_us
        g = max(gap_fraction * mu_min, 1e-3)
        st = monte_carlo_gap(source, ProbeTrainSpec(2, g, size_bytes), reps, seed=seed)
        mean, se = st.mean_g_o_us, st.stderr_us
    r = rate_bps(size_bytes, mean)
    return PairEstimate(r, Z95 * r * se / mean, mean, se, g, reps)


# ---------------------------------------------------------------------------
# turning point


@dataclass(frozen=True)
class TurningPoint:
    rate_bps: float
    bracket: tuple[float, float | None]
    flag: str  # "ok", "no_knee" (never deviates) or "none" (deviates from the start)


def turning_point(curve, epsilon: float = 0.05) -> TurningPoint:
    """Largest sampled input rate whose output/input ratio is at least ``1 - epsilon``.

    ``curve`` is a :class:`RateResponseCurve` or a pair of arrays ``(r_i, r_o)``.
    """
    if isinstance(curve, RateResponseCurve):
        r_i, r_o = curve.r_i, curve.r_o
    else:
        r_i, r_o = (np.asarray(x, dtype=float) for x in curve)
    if np.any(np.diff(r_i) <= 0):
        raise ValueError("curve must be sorted by strictly increasing input rate")
    ok = np.flatnonzero(r_o / r_i >= 1 - epsilon)
    if ok.size == 0:
        return TurningPoint(float(r_i[0]), (0.0, float(r_i[0])), "none")
    k = int(ok[-1])
    if k == r_i.size - 1:
        return TurningPoint(float(r_i[k]), (float(r_i[k]), None), "no_knee")
    return TurningPoint(float(r_i[k]), (float(r_i[k]), float(r_i[k + 1])), "ok")
