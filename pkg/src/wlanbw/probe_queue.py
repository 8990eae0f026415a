"""Periodic probe trains through a FIFO queue with random head-of-line service.

A train of ``n`` packets arrives every ``g_I`` µs. Each packet waits for the
unfinished probe work ahead of it (the intrusion residual ``R_i``) and then
spends ``mu_i`` at the head of the queue. Departures and the output gap follow
directly. All arithmetic is done in integer nanoseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .units import NS_PER_US, gap_us, ns_to_us, rate_bps, us_to_ns

# rows per Monte-Carlo batch are chosen so a batch holds at most this many draws
_BATCH_CELLS = 1_000_000


@dataclass(frozen=True)
class ProbeTrainSpec:
    """Train length ``n``, input gap ``g_i_us`` and packet size ``size_bytes``."""

    n: int
    g_i_us: float
    size_bytes: int = 1500

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"train length n must be >= 2, got {self.n}")
        if not self.g_i_us > 0:
            raise ValueError(f"g_i_us must be positive, got {self.g_i_us}")
        if self.size_bytes <= 0:
            raise ValueError(f"size_bytes must be positive, got {self.size_bytes}")

    @classmethod
    def from_rate(cls, n: int, rate: float, size_bytes: int = 1500) -> "ProbeTrainSpec":
        return cls(n=n, g_i_us=gap_us(size_bytes, rate), size_bytes=size_bytes)

    @property
    def rate_bps(self) -> float:
        return rate_bps(self.size_bytes, self.g_i_us)

    @property
    def g_i_ns(self) -> int:
        return us_to_ns(self.g_i_us)


# ---------------------------------------------------------------------------
# service models


class ServiceModel:
    """Base class for head-of-line service-delay models.

    Subclasses draw a ``(reps, n)`` matrix of delays in integer ns.
    ``mu_min_us``/``mu_max_us`` are declared support bounds (possibly loose).
    """

    mu_min_us: float = 0.0
    mu_max_us: float = math.inf

    def draw_ns(self, rng: np.random.Generator, reps: int, n: int) -> np.ndarray:
        raise NotImplementedError

    def per_index_means_us(self, n: int) -> np.ndarray:
        return np.full(n, self.mean_us)

    @property
    def mean_us(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Deterministic(ServiceModel):
    mu_us: float

    def __post_init__(self):
        if not self.mu_us > 0:
            raise ValueError("mu_us must be positive")

    @property
    def mean_us(self) -> float:
        return self.mu_us

    @property
    def mu_min_us(self) -> float:
        return self.mu_us

    @property
    def mu_max_us(self) -> float:
        return self.mu_us

    def draw_ns(self, rng, reps, n):
        return np.full((reps, n), us_to_ns(self.mu_us), dtype=np.int64)


@dataclass(frozen=True)
class Exponential(ServiceModel):
    """Exponential delays with scale ``scale_us``, optionally truncated to [lower, upper].

    Truncation uses inverse-CDF sampling on the restricted support, so
    ``mean_us`` is the mean of the truncated law, not ``scale_us``.
    """

    scale_us: float
    lower_us: float | None = None
    upper_us: float | None = None

    def __post_init__(self):
        if not self.scale_us > 0:
            raise ValueError("scale_us must be positive")
        lo = self.lower_us or 0.0
        hi = math.inf if self.upper_us is None else self.upper_us
        if lo < 0 or not hi > lo:
            raise ValueError("truncation bounds must satisfy 0 <= lower < upper")

    @property
    def mu_min_us(self) -> float:
        return self.lower_us or 0.0

    @property
    def mu_max_us(self) -> float:
        return math.inf if self.upper_us is None else self.upper_us

    @property
    def mean_us(self) -> float:
        s, a, b = self.scale_us, self.mu_min_us, self.mu_max_us
        if math.isinf(b):
            return a + s
        # mean of exponential truncated to [a, b]
        ea, eb = math.exp(-a / s), math.exp(-b / s)
        return s + (a * ea - b * eb) / (ea - eb)

    def draw_ns(self, rng, reps, n):
        u = rng.random((reps, n))
        s, a, b = self.scale_us, self.mu_min_us, self.mu_max_us
        if math.isinf(b):
            x = a - s * np.log1p(-u)
        else:
            fa, fb = -math.expm1(-a / s), -math.expm1(-b / s)
            x = -s * np.log1p(-(fa + u * (fb - fa)))
        # keep strictly positive after rounding
        return np.maximum(us_to_ns(x), 1)


@dataclass(frozen=True, eq=False)
class BoundedEmpirical(ServiceModel):
    """Uniform resampling from a fixed set of delays (µs)."""

    samples_us: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples_us, dtype=float).ravel()
        if arr.size == 0:
            raise ValueError("empty sample set")
        if np.any(arr <= 0):
            raise ValueError("service delays must be positive")
        object.__setattr__(self, "samples_us", arr)

    @property
    def mean_us(self) -> float:
        return float(self.samples_us.mean())

    @property
    def mu_min_us(self) -> float:
        return float(self.samples_us.min())

    @property
    def mu_max_us(self) -> float:
        return float(self.samples_us.max())

    def draw_ns(self, rng, reps, n):
        pool = us_to_ns(self.samples_us)
        return pool[rng.integers(0, pool.size, size=(reps, n))]


@dataclass(frozen=True, eq=False)
class PerIndexEmpirical(ServiceModel):
    """Whole-trace resampling from an ensemble of per-packet delay traces.

    ``traces_us`` has one row per replication; a draw picks a row uniformly
    and uses its first ``n`` entries, which keeps the correlation between
    consecutive packets intact.
    """

    traces_us: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.traces_us, dtype=float))
        if arr.size == 0 or arr.shape[0] < 1:
            raise ValueError("empty sample set")
        if np.any(arr <= 0):
            raise ValueError("service delays must be positive")
        object.__setattr__(self, "traces_us", arr)
        object.__setattr__(self, "_traces_ns", us_to_ns(arr))

    @classmethod
    def from_traces(cls, traces) -> "PerIndexEmpirical":
        return cls(np.vstack([t.service_delay_us for t in traces]))

    @property
    def length(self) -> int:
        return self.traces_us.shape[1]

    @property
    def mean_us(self) -> float:
        return float(self.traces_us.mean())

    @property
    def mu_min_us(self) -> float:
        return float(self.traces_us.min())

    @property
    def mu_max_us(self) -> float:
        return float(self.traces_us.max())

    def per_index_means_us(self, n: int) -> np.ndarray:
        self._check_length(n)
        return self.traces_us[:, :n].mean(axis=0)

    def _check_length(self, n):
        if n > self.length:
            raise ValueError(f"traces hold {self.length} packets, {n} requested")

    def draw_ns(self, rng, reps, n):
        self._check_length(n)
        rows = rng.integers(0, self._traces_ns.shape[0], size=reps)
        return self._traces_ns[rows, :n]


# ---------------------------------------------------------------------------
# single-train queue


@dataclass(frozen=True, eq=False)
class ServiceDelaySequence:
    mu_ns: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.mu_ns, dtype=np.int64).ravel()
        if np.any(arr <= 0):
            raise ValueError("service delays must be positive")
        object.__setattr__(self, "mu_ns", arr)

    @classmethod
    def from_us(cls, mu_us) -> "ServiceDelaySequence":
        return cls(us_to_ns(np.atleast_1d(mu_us)))

    @property
    def mu_us(self) -> np.ndarray:
        return ns_to_us(self.mu_ns)

    def __len__(self):
        return self.mu_ns.size


def _as_sequence(mu) -> ServiceDelaySequence:
    if isinstance(mu, ServiceDelaySequence):
        return mu
    return ServiceDelaySequence.from_us(mu)


def sample_service(model: ServiceModel, n: int, seed=None) -> ServiceDelaySequence:
    """Draw one length-``n`` delay sequence from ``model``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return ServiceDelaySequence(model.draw_ns(rng, 1, n)[0])


def _residuals_ns(mu_ns: np.ndarray, g_ns: int) -> np.ndarray:
    r = np.zeros_like(mu_ns)
    acc = 0
    for i in range(1, mu_ns.size):
        acc = max(0, int(mu_ns[i - 1]) + acc - g_ns)
        r[i] = acc
    return r


def lindley_residuals(mu, g_i_us: float) -> np.ndarray:
    """Residual probe work ``R_i`` (µs) found by each arrival.

    >>> lindley_residuals([3000, 3000, 3000], 1000).tolist()
    [0.0, 2000.0, 4000.0]
    """
    if not g_i_us > 0:
        raise ValueError("g_i_us must be positive")
    seq = _as_sequence(mu)
    return ns_to_us(_residuals_ns(seq.mu_ns, us_to_ns(g_i_us)))


@dataclass(frozen=True, eq=False)
class ConvolutionResult:
    """Arrivals, residuals, system delays and departures of one train (integer ns)."""

    g_i_ns: int
    mu_ns: np.ndarray
    arrivals_ns: np.ndarray
    residuals_ns: np.ndarray
    system_delay_ns: np.ndarray
    departures_ns: np.ndarray

    @property
    def n(self) -> int:
        return self.mu_ns.size

    @property
    def arrivals_us(self):
        return ns_to_us(self.arrivals_ns)

    @property
    def residuals_us(self):
        return ns_to_us(self.residuals_ns)

    @property
    def system_delay_us(self):
        return ns_to_us(self.system_delay_ns)

    @property
    def departures_us(self):
        return ns_to_us(self.departures_ns)

    @property
    def g_o_us(self) -> float:
        return output_gap(self.departures_us)

    def gap_span_ns(self) -> int:
        """``d_n - d_1`` in ns."""
        return int(self.departures_ns[-1] - self.departures_ns[0])

    def decomposed_span_ns(self) -> int:
        """``(n-1) g_I + R_n + mu_n - mu_1`` in ns; equals ``gap_span_ns`` exactly."""
        return int(
            (self.n - 1) * self.g_i_ns
            + self.residuals_ns[-1]
            + self.mu_ns[-1]
            - self.mu_ns[0]
        )


def convolve(train: ProbeTrainSpec, mu) -> ConvolutionResult:
    seq = _as_sequence(mu)
    if len(seq) != train.n:
        raise ValueError(f"expected {train.n} service delays, got {len(seq)}")
    g = train.g_i_ns
    arrivals = np.arange(train.n, dtype=np.int64) * g
    residuals = _residuals_ns(seq.mu_ns, g)
    z = seq.mu_ns + residuals
    return ConvolutionResult(
        g_i_ns=g,
        mu_ns=seq.mu_ns,
        arrivals_ns=arrivals,
        residuals_ns=residuals,
        system_delay_ns=z,
        departures_ns=arrivals + z,
    )


def output_gap(departures) -> float:
    """Average inter-departure time ``(d_n - d_1)/(n - 1)``."""
    d = np.asarray(departures, dtype=float)
    if d.size < 2:
        raise ValueError("output gap needs at least two departures")
    return float((d[-1] - d[0]) / (d.size - 1))


# ---------------------------------------------------------------------------
# Monte-Carlo ensembles


@dataclass(frozen=True, eq=False)
class GapStats:
    """Monte-Carlo summary for one (model, train, trim) combination.

    The gap is measured over packets ``trim+1 .. n``. ``mean_r_first_us`` and
    ``mean_mu_first_us`` refer to packet ``trim+1`` (packet 1 when untrimmed),
    so ``mean_g_o_us == g_i_us + (mean_r_n - mean_r_first + mean_mu_last -
    mean_mu_first) / (n - trim - 1)`` holds on the means.
    """

    g_i_us: float
    n: int
    trim: int
    reps: int
    mean_g_o_us: float
    std_g_o_us: float
    mean_r_n_us: float
    mean_r_first_us: float
    mean_mu_first_us: float
    mean_mu_last_us: float
    mean_z_us: np.ndarray
    g_o_us: np.ndarray = field(repr=False)

    @property
    def stderr_us(self) -> float:
        return self.std_g_o_us / math.sqrt(self.reps) if self.reps > 1 else math.inf

    @property
    def mean_delta_z_us(self) -> np.ndarray:
        """``E[Z_i - Z_{i-1}]`` for i = 2..n."""
        return np.diff(self.mean_z_us)

    @property
    def decomposed_mean_g_o_us(self) -> float:
        span = self.n - self.trim - 1
        return self.g_i_us + (
            self.mean_r_n_us
            - self.mean_r_first_us
            + self.mean_mu_last_us
            - self.mean_mu_first_us
        ) / span


def batch_rng(seed: int, batch: int) -> np.random.Generator:
    """Generator for batch ``batch`` of a run seeded with ``seed`` (counter-based)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(batch)]))


def monte_carlo_gap(
    model: ServiceModel,
    train: ProbeTrainSpec,
    reps: int,
    seed: int = 0,
    trim: int = 0,
) -> GapStats:
    if reps < 1:
        raise ValueError("reps must be >= 1")
    n = train.n
    if not 0 <= trim < n - 1:
        raise ValueError(f"trim must satisfy 0 <= trim < n-1, got trim={trim}, n={n}")
    g = train.g_i_ns
    rows = max(1, _BATCH_CELLS // n)

    span_num = np.empty(reps, dtype=np.int64)
    sum_z = np.zeros(n, dtype=np.int64)
    sum_rn = sum_rk = sum_mu_k = sum_mu_n = 0

    for b, start in enumerate(range(0, reps, rows)):
        m = min(rows, reps - start)
        mu = model.draw_ns(batch_rng(seed, b), m, n)
        r = np.zeros(m, dtype=np.int64)
        r_k = r
        sum_z[0] += int(mu[:, 0].sum())
        for i in range(1, n):
            r = np.maximum(0, r + mu[:, i - 1] - g)
            if i == trim:
                r_k = r
            sum_z[i] += int((r + mu[:, i]).sum())
        # departures relative to a_1: d_i = (i-1) g + R_i + mu_i
        d_last = (n - 1) * g + r + mu[:, n - 1]
        d_first = trim * g + r_k + mu[:, trim]
        span_num[start : start + m] = d_last - d_first
        sum_rn += int(r.sum())
        sum_rk += int(r_k.sum())
        sum_mu_k += int(mu[:, trim].sum())
        sum_mu_n += int(mu[:, n - 1].sum())

    span = n - trim - 1
    g_o_us = span_num / (span * NS_PER_US)
    # exact integer sums keep the aggregate independent of batch order
    mean_g_o = int(span_num.sum()) / (reps * span * NS_PER_US)
    std = float(np.std(g_o_us, ddof=1)) if reps > 1 else 0.0
    scale = reps * NS_PER_US
    return GapStats(
        g_i_us=g / NS_PER_US,
        n=n,
        trim=trim,
        reps=reps,
        mean_g_o_us=mean_g_o,
        std_g_o_us=std,
        mean_r_n_us=sum_rn / scale,
        mean_r_first_us=sum_rk / scale,
        mean_mu_first_us=sum_mu_k / scale,
        mean_mu_last_us=sum_mu_n / scale,
        mean_z_us=sum_z / scale,
        g_o_us=g_o_us,
    )
