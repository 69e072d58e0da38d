"""Trap-window bookkeeping shared by the solver diagnostics and trap evaluation."""

import numpy as np


def trap_windows(sites, sys, radius=None):
    """One boolean disk per site, radius one Airy zero unless given."""
    r = sys.airy_radius if radius is None else radius
    return [sys.focal_disk(s.index, r) for s in sites]


def window_fractions(intensity, windows):
    """Fraction of the total focal energy falling in each window."""
    total = float(intensity.sum())
    if total == 0:
        return [0.0] * len(windows)
    return [float(intensity[w].sum()) / total for w in windows]


def union_fraction(intensity, windows):
    total = float(intensity.sum())
    if total == 0 or not windows:
        return 0.0
    mask = np.logical_or.reduce(windows)
    return float(intensity[mask].sum()) / total


def uniformity_deviation(values, weights=None):
    """
    ``max_i |v_i - mean| / mean`` of the weight-normalized values.

    Returns ``inf`` when the mean is zero and 0 for fewer than two values.
    """
    v = np.asarray(values, dtype=float)
    if weights is not None:
        v = v / np.asarray(weights, dtype=float)
    if v.size < 2:
        return 0.0
    m = v.mean()
    if m == 0:
        return float("inf")
    return float(np.max(np.abs(v - m)) / m)
