"""Small shared helpers: parallel mapping, float formatting, line fits."""

from __future__ import annotations

import multiprocessing as mp

import numpy as np


def parallel_map(fn, items, workers: int = 1) -> list:
    """map() across a worker pool, preserving input order.

    With workers <= 1 runs in-process.  Results are independent of the
    worker count because each item carries its own seed and the returned
    list order is the input order.
    """
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with mp.Pool(processes=min(workers, len(items))) as pool:
        return pool.map(fn, items, chunksize=1)


def fmt(x) -> str:
    """Canonical float-to-text used in every CSV (round-trip exact)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def line_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line y ~ a*x + b; returns (slope, intercept, r**2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 if total == 0 else 1.0 - float((resid ** 2).sum()) / float(total)
    return float(slope), float(intercept), r2
