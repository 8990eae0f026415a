"""Per-index service-delay distributions and transitory detection.

The service delay seen by probe ``i`` is studied across replications: each
index gets its own empirical distribution, which is compared against the
pooled delays of the last ``tail`` probes with a two-sample KS statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# asymptotic two-sample KS coefficients c(alpha)
KS_COEFFICIENTS = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628}


@dataclass(frozen=True, eq=False)
class EmpiricalDist:
    samples: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if arr.size == 0:
            raise ValueError("empirical distribution needs at least one sample")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.size

    def cdf(self, x) -> np.ndarray:
        """Right-continuous step CDF."""
        return np.searchsorted(self.samples, x, side="right") / self.n

    def interpolated_cdf(self, x) -> np.ndarray:
        """Piecewise-linear CDF through ``(v, F(v))`` at each distinct sample value ``v``.

        Below the smallest sample it is 0, at and above the largest it is 1;
        at every sample value it agrees with the step CDF.
        """
        values, counts = np.unique(self.samples, return_counts=True)
        heights = np.cumsum(counts) / self.n
        return np.interp(x, values, heights, left=0.0, right=1.0)

    def mean(self) -> float:
        return float(self.samples.mean())


def _service_matrix(ensemble) -> np.ndarray:
    if isinstance(ensemble, np.ndarray):
        return np.atleast_2d(ensemble)
    return np.vstack([t.service_delay_us for t in ensemble])


def per_index_distribution(ensemble, index: int) -> EmpiricalDist:
    """Delays of probe ``index`` (1-based) across all replications."""
    mat = _service_matrix(ensemble)
    if not 1 <= index <= mat.shape[1]:
        raise IndexError(f"index {index} outside 1..{mat.shape[1]}")
    return EmpiricalDist(mat[:, index - 1])


def stationary_reference(ensemble, tail: int = 500) -> EmpiricalDist:
    """Pooled delays of the last ``tail`` probes of every replication."""
    mat = _service_matrix(ensemble)
    if tail < 1:
        raise ValueError("tail must be >= 1")
    if tail > mat.shape[1]:
        raise ValueError(f"traces hold {mat.shape[1]} packets, tail={tail} requested")
    return EmpiricalDist(mat[:, -tail:])


def ks_two_sample(a: EmpiricalDist, b: EmpiricalDist, interpolate: bool = False) -> float:
    """KS distance ``sup |F_a - F_b|`` evaluated at every sample of both sets.

    With ``interpolate`` the CDF of ``b`` is the piecewise-linear version from
    :meth:`EmpiricalDist.interpolated_cdf`.
    """
    points = np.concatenate([a.samples, b.samples])
    fa = a.cdf(points)
    fb = b.interpolated_cdf(points) if interpolate else b.cdf(points)
    return float(np.max(np.abs(fa - fb)))


def ks_critical(alpha: float, m: int, n: int) -> float:
    """Asymptotic two-sample KS critical value ``c(alpha) sqrt((m+n)/(m n))``."""
    if m < 1 or n < 1:
        raise ValueError("sample sizes must be >= 1")
    for key, c in KS_COEFFICIENTS.items():
        if math.isclose(alpha, key):
            return c * math.sqrt((m + n) / (m * n))
    raise ValueError(f"unsupported alpha {alpha}; choose one of {sorted(KS_COEFFICIENTS)}")


def ks_permutation_threshold(
    a: EmpiricalDist,
    b: EmpiricalDist,
    alpha: float = 0.05,
    permutations: int = 1000,
    seed: int = 0,
) -> float:
    """Permutation ``(1 - alpha)`` quantile of the KS distance; for small samples."""
    rng = np.random.default_rng(seed)
    pooled = np.concatenate([a.samples, b.samples])
    stats = np.empty(permutations)
    for k in range(permutations):
        perm = rng.permutation(pooled)
        stats[k] = ks_two_sample(EmpiricalDist(perm[: a.n]), EmpiricalDist(perm[a.n :]))
    return float(np.quantile(stats, 1 - alpha))


def settling_index(ok: np.ndarray, window: int, tolerance: int = 0) -> int | None:
    """Smallest 1-based ``i`` such that ``ok[i]`` holds and at most ``tolerance``
    entries of ``ok[i : i+window]`` are false.

    Windows are clipped at the end of the series. Returns None when no index
    qualifies.
    """
    ok = np.asarray(ok, dtype=bool)
    if window < 1:
        raise ValueError("window must be >= 1")
    bad = np.concatenate([[0], np.cumsum(~ok)])
    for i in range(ok.size):
        stop = min(i + window, ok.size)
        if ok[i] and bad[stop] - bad[i] <= tolerance:
            return i + 1
    return None


def queue_settling_index(series, final: float | None = None, rel_tol: float = 0.10,
                         window: int = 10, tail: int = 50, tolerance: int = 1) -> int | None:
    """First index from which ``series`` stays within ``rel_tol`` of its final value.

    ``final`` defaults to the mean of the last ``tail`` entries.
    """
    s = np.asarray(series, dtype=float)
    if final is None:
        final = float(s[-tail:].mean())
    return settling_index(np.abs(s - final) <= rel_tol * abs(final), window, tolerance)


@dataclass(frozen=True, eq=False)
class TransitoryReport:
    per_index_d: np.ndarray
    threshold: float
    n0: int | None
    mean_queue: np.ndarray
    mean_mu_us: np.ndarray
    tail: int
    window: int

    @property
    def reached(self) -> bool:
        return self.n0 is not None


def transitory_report(
    ensemble,
    tail: int = 500,
    alpha: float = 0.05,
    window: int = 10,
    interpolate: bool = True,
    tolerance: int = 1,
) -> TransitoryReport:
    """KS distance of every probe index against the tail reference.

    ``n0`` is the first index whose D is at or below the critical value and
    whose next ``window`` indices exceed it at most ``tolerance`` times, so an
    isolated excursion neither ends nor extends the transitory. ``mean_queue`` is the total
    contender queue length at probe delivery, averaged over replications.
    """
    mat = _service_matrix(ensemble)
    reps, n = mat.shape
    ref = stationary_reference(mat, tail)
    d = np.array([ks_two_sample(EmpiricalDist(mat[:, i]), ref, interpolate) for i in range(n)])
    threshold = ks_critical(alpha, reps, ref.n)
    if isinstance(ensemble, np.ndarray) or not ensemble[0].contender_queue.shape[1]:
        mean_queue = np.zeros(n)
    else:
        mean_queue = np.mean([t.contender_queue.sum(axis=1) for t in ensemble], axis=0)
    return TransitoryReport(
        per_index_d=d,
        threshold=threshold,
        n0=settling_index(d <= threshold, window, tolerance),
        mean_queue=mean_queue,
        mean_mu_us=mat.mean(axis=0),
        tail=tail,
        window=window,
    )
