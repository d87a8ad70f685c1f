"""Least-squares slope fits shared by the exponent estimators."""

from __future__ import annotations

import numpy as np
from scipy import stats


class EstimationError(ValueError):
    """Not enough usable data for a requested estimate."""


def fit_slope(x, y) -> tuple[float, float]:
    """Slope and its standard error from an ordinary least-squares line fit."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or len(np.unique(x)) < 2:
        raise EstimationError("need at least two distinct abscissae for a slope fit")
    if len(x) == 2:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        return float(slope), 0.0
    res = stats.linregress(x, y)
    stderr = float(res.stderr) if np.isfinite(res.stderr) else 0.0
    return float(res.slope), stderr
