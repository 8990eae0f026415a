"""Time-unit helpers.

Public APIs take and return microseconds as floats; queue arithmetic runs on
integer nanoseconds so that gap identities hold exactly.
"""

from __future__ import annotations

import numpy as np

NS_PER_US = 1000


def us_to_ns(value):
    """Round microseconds to integer nanoseconds (scalar or array)."""
    arr = np.rint(np.asarray(value, dtype=float) * NS_PER_US).astype(np.int64)
    if arr.ndim == 0:
        return int(arr)
    return arr


def ns_to_us(value):
    arr = np.asarray(value, dtype=float) / NS_PER_US
    if arr.ndim == 0:
        return float(arr)
    return arr


def gap_us(size_bytes: float, rate_bps: float) -> float:
    """Inter-packet gap (µs) that yields ``rate_bps`` with packets of ``size_bytes``."""
    if rate_bps <= 0:
        raise ValueError("rate_bps must be positive")
    return 8.0 * size_bytes / rate_bps * 1e6


def rate_bps(size_bytes: float, gap: float) -> float:
    """Rate (bps) of ``size_bytes`` packets spaced ``gap`` µs apart."""
    if gap <= 0:
        raise ValueError("gap must be positive")
    return 8.0 * size_bytes / (gap * 1e-6)
