"""Equal-width binning, arithmetic-identical to the simulator's metrics.

Edges are numpy.linspace(min, max, bins + 1); every bin is left-closed and
the rightmost bin also includes the maximum. Keeping the formula in lockstep
with the producer is what makes cross-package golden tables byte-stable.
"""

from __future__ import annotations

import numpy as np


def bin_edges(lo: float, hi: float, bins: int = 100) -> np.ndarray:
    return np.linspace(lo, hi, bins + 1)


def bin_series(x, y, bins: int = 100) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0:
        return np.array([]), np.array([])
    edges = bin_edges(float(x.min()), float(x.max()), bins)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    total = np.zeros(bins)
    count = np.zeros(bins)
    np.add.at(total, idx, y)
    np.add.at(count, idx, 1)
    with np.errstate(invalid="ignore"):
        mean = total / count
    mean[count == 0] = np.nan
    centers = (edges[:-1] + edges[1:]) / 2
    return centers, mean
