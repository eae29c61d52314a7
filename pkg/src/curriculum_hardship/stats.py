"""Standardization and small descriptive helpers shared by the index modules."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import StandardizationError


def zscore(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Standardize with the sample standard deviation (ddof=1).

    A constant vector maps to zeros instead of dividing by zero.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise StandardizationError(f"need at least 2 values to standardize, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise StandardizationError("cannot standardize non-finite values")
    if np.all(x == x[0]):
        return np.zeros_like(x)
    # z is scale-free; normalizing first keeps tiny or huge inputs representable
    x = x / np.max(np.abs(x))
    centered = x - x.mean()
    sd = centered.std(ddof=1)
    z = centered / sd
    # re-centre to wash out the rounding left by the first pass
    z = z - z.mean()
    return z / z.std(ddof=1)


def zscore_map(values: Mapping) -> dict:
    keys = sorted(values)
    z = zscore([values[k] for k in keys])
    return {k: float(v) for k, v in zip(keys, z)}


def describe(values: Sequence[float]) -> dict[str, float]:
    """count/mean/std/min/quartiles/max, pandas ``describe`` conventions."""
    s = pd.Series(values, dtype=float).describe()
    return {
        "count": float(s["count"]),
        "mean": float(s["mean"]),
        "std": float(s["std"]) if s["count"] > 1 else float("nan"),
        "min": float(s["min"]),
        "25%": float(s["25%"]),
        "50%": float(s["50%"]),
        "75%": float(s["75%"]),
        "max": float(s["max"]),
    }
