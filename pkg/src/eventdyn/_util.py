from __future__ import annotations

import numpy as np


def zscore(x, axis: int | None = None) -> np.ndarray:
    """Standardize with the population std; slices with zero spread become 0."""
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=axis, keepdims=True)
    std = x.std(axis=axis, keepdims=True)
    centered = x - mean
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(std > 0, centered / np.where(std > 0, std, 1.0), 0.0)
    return z


def fmt6(value) -> str:
    """CSV cell formatting: ints verbatim, floats at 6 decimals, None empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    out = f"{float(value):.6f}"
    return "0.000000" if out == "-0.000000" else out
