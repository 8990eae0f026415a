"""CSV schemas shared by the runners and the plotter."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

SCHEMAS = {
    "curve": ("r_i_bps", "r_o_bps", "ci_bps", "fluid_bps", "bound_lo_bps", "bound_hi_bps"),
    "transitory": ("index", "ks_D", "threshold", "mean_queue", "mean_mu_us"),
    "gap": ("g_I_us", "mean_gO_us", "stderr_us", "region"),
    "throughput": ("r_i_bps", "probe_bps", "contender_bps"),
    "histogram": ("index", "bin_lo_us", "bin_hi_us", "density"),
    "delta_z": ("r_i_bps", "index", "mean_delta_z_us"),
    "pair": ("cross_bps", "pair_bps", "pair_ci_bps", "achievable_bps", "achievable_ci_bps"),
}


class SchemaError(ValueError):
    pass


def fmt(value) -> str:
    """Locale-free decimal rendering; blanks for missing values."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(round(x, 6))


def write_csv(path: Path, schema: str, rows) -> Path:
    header = SCHEMAS[schema]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise SchemaError(f"{schema} row has {len(row)} fields, expected {len(header)}")
            w.writerow([fmt(v) for v in row])
    return path


def detect_schema(header) -> str:
    for name, cols in SCHEMAS.items():
        if tuple(header) == cols:
            return name
    raise SchemaError(f"header {list(header)} matches no known schema")


def read_csv(path: Path, expect: str | None = None) -> tuple[str, list[dict]]:
    """Read a schema CSV; returns ``(schema, rows)`` with numeric fields as floats."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        schema = detect_schema(header)
        if expect is not None and schema != expect:
            raise SchemaError(f"{path}: expected {expect} schema, found {schema}")
        rows = []
        for raw in reader:
            rec = {}
            for key, val in zip(header, raw):
                if key == "region":
                    rec[key] = val
                else:
                    rec[key] = float(val) if val != "" else math.nan
            rows.append(rec)
    return schema, rows
