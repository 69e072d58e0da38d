"""
Physical figures of merit for holographic dipole-trap arrays.

Conventions
-----------
* Peak intensity of a Gaussian spot of power ``P`` and 1/e^2 radius ``w`` is
  ``2 P / (pi w^2)``.
* Trap depth is proportional to peak intensity. With depth scaling as
  ``P / w^2``, a trapping threshold that needs more power means a larger waist,
  ``w_test / w_ref = sqrt(P_test / P_ref)``.
* The capture threshold is a power per trap. A trap's power is the total power
  times the fraction of focal energy inside its window (radius one Airy zero).
* In the collisional-blockade regime every trap above threshold holds one atom
  with probability ``p_single`` (0.5), independently of the others.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq

from .errors import ConfigurationError, DetectionError, TrapRangeError
from .metrics import trap_windows, uniformity_deviation, union_fraction, window_fractions
from .target import trap_sites


def trap_spacing(wavelength, focal_length, period):
    """Spot separation ``wavelength * focal_length / period`` [m] of a grating of ``period``."""
    if not (wavelength > 0 and focal_length > 0 and period > 0):
        raise ConfigurationError("wavelength, focal length and period must be > 0")
    return wavelength * focal_length / period


def position_precision(spacing, wavelength, focal_length, slm_pixel):
    """
    Smallest step in trap separation reachable by changing the grating period by one pixel.

    The period giving ``spacing`` is ``p = wavelength * f / spacing``; the result is
    ``|wavelength f / p - wavelength f / (p + slm_pixel)|``.
    """
    lf = wavelength * focal_length
    if not (spacing > 0 and wavelength > 0 and focal_length > 0 and slm_pixel > 0):
        raise ConfigurationError("all arguments must be > 0")
    if spacing >= lf / slm_pixel:
        raise TrapRangeError(f"spacing must be below wavelength*f/pixel = {lf / slm_pixel:.4g} m")
    p = lf / spacing
    return abs(lf / p - lf / (p + slm_pixel))


def peak_intensity(power, waist):
    """``2 P / (pi w^2)`` [W/m^2]."""
    if not (power > 0 and waist > 0):
        raise ConfigurationError("power and waist must be > 0")
    return 2 * power / (math.pi * waist**2)


def waist_ratio_from_thresholds(p_thr_test, p_thr_ref):
    """Waist ratio implied by two threshold powers at equal trap depth."""
    if not (p_thr_test > 0 and p_thr_ref > 0):
        raise ConfigurationError("threshold powers must be > 0")
    return math.sqrt(p_thr_test / p_thr_ref)


def _truncated_second_moment(w, radius):
    # <r^2> of exp(-2 r^2 / w^2) restricted to r <= radius
    u = 2 * radius**2 / w**2
    return w**2 / 2 * (1 - (1 + u) * math.exp(-u)) / (-math.expm1(-u))


def estimate_waist(intensity, center, pitch, max_radius, shrink=1.5, max_iter=50):
    """
    1/e^2 radius of a spot from windowed second moments.

    The window starts at ``max_radius`` around the brightest sample near
    ``center``. It then shrinks to ``shrink`` times the current estimate, never
    growing past ``max_radius``. Each estimate solves the Gaussian model's second
    moment truncated to the window, so a pure Gaussian is recovered for any
    window size.

    Parameters
    ----------
    intensity : ndarray
        Focal intensity grid.
    center : (int, int)
        Pixel ``(row, col)`` near the spot.
    pitch : float
        Grid spacing [m].
    max_radius : float
        Largest window radius [m].

    Raises
    ------
    DetectionError
        If the window holds no interior local maximum.
    """
    I = np.asarray(intensity, dtype=float)
    n0, n1 = I.shape
    rows = np.arange(n0)[:, None]
    cols = np.arange(n1)[None, :]
    rr = ((rows - center[0]) ** 2 + (cols - center[1]) ** 2) * pitch**2
    win = rr <= max_radius**2
    if not np.any(I[win] > 0):
        raise DetectionError(f"no intensity in the window around {tuple(center)}")
    flat = np.where(win, I, -np.inf)
    pk = np.unravel_index(int(np.argmax(flat)), I.shape)
    r0, c0 = pk
    nb = I[max(r0 - 1, 0) : r0 + 2, max(c0 - 1, 0) : c0 + 2]
    edge = (rows - r0) ** 2 + (cols - c0) ** 2
    if (r0 - center[0]) ** 2 * pitch**2 + (c0 - center[1]) ** 2 * pitch**2 > (max_radius - pitch) ** 2 or I[pk] < nb.max():
        raise DetectionError(f"no local maximum inside the window around {tuple(center)}")

    radius = max_radius
    w = None
    for _ in range(max_iter):
        m = edge * pitch**2 <= radius**2
        weights = I * m
        tot = weights.sum()
        yc = (weights * rows).sum() / tot
        xc = (weights * cols).sum() / tot
        r2 = (weights * ((rows - yc) ** 2 + (cols - xc) ** 2)).sum() / tot * pitch**2
        limit = radius**2 / 2  # flat intensity over the disk
        if r2 >= limit * (1 - 1e-9):
            raise DetectionError("intensity is not peaked inside the window")
        w_new = brentq(lambda x: _truncated_second_moment(x, radius) - r2, 1e-3 * radius, 1e3 * radius)
        if w is not None and abs(w_new - w) <= 1e-9 * w:
            return w_new
        w = w_new
        radius = min(max_radius, max(shrink * w, 2 * pitch))
    return w


def detect_spots(intensity, rel_threshold=0.1, size=5):
    """Pixel ``(row, col)`` of local maxima brighter than ``rel_threshold`` of the global max."""
    I = np.asarray(intensity, dtype=float)
    if I.max() <= 0:
        return []
    peaks = (I == ndimage.maximum_filter(I, size=size, mode="wrap")) & (I >= rel_threshold * I.max())
    return [tuple(int(v) for v in p) for p in np.argwhere(peaks)]


@dataclass(frozen=True)
class LoadingModel:
    """
    Parameters
    ----------
    p_single : float
        Occupation probability of a trap above threshold.
    threshold_power_per_trap : float
        Minimum power [W] in a trap window to capture an atom.
    trials : int
    seed : int
    p_overrides : dict
        Per-trap probabilities keyed by trap label.
    """

    p_single: float = 0.5
    threshold_power_per_trap: float = 4e-3
    trials: int = 100_000
    seed: int = 0
    p_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        probs = [self.p_single, *self.p_overrides.values()]
        if any(not 0 <= p <= 1 for p in probs):
            raise ConfigurationError("occupation probabilities must lie in [0, 1]")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigurationError("trials must be an integer >= 1")
        if self.threshold_power_per_trap < 0:
            raise ConfigurationError("threshold power must be >= 0")


@dataclass
class TrapMetrics:
    label: str
    index: tuple
    x: float
    y: float
    power_fraction: float
    power: float
    peak_intensity: float
    waist: object
    depth_relative: float
    above_threshold: bool


@dataclass
class TrapReport:
    traps: list
    zeroth_order_intensity: float
    zeroth_order_fraction: float
    zeroth_order_power: float
    zeroth_order_above_threshold: bool
    efficiency: float
    uniformity_deviation: float
    total_power: float
    threshold_power_per_trap: float
    detected_spots: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        for t in d["traps"]:
            t["index"] = list(t["index"])
        d["detected_spots"] = [list(s) for s in self.detected_spots]
        if not math.isfinite(d["uniformity_deviation"]):
            d["uniformity_deviation"] = None
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["traps"] = [TrapMetrics(**{**t, "index": tuple(t["index"])}) for t in d["traps"]]
        d["detected_spots"] = [tuple(s) for s in d.get("detected_spots", [])]
        if d["uniformity_deviation"] is None:
            d["uniformity_deviation"] = math.inf
        return cls(**d)


def evaluate(focal_intensity, spec, sys, loading=LoadingModel(), total_power=40e-3):
    """
    Per-trap power, depth, waist and threshold status of a focal intensity map.

    Parameters
    ----------
    focal_intensity : ndarray
        N x N intensity on the system's focal grid (any scale).
    spec : TrapSpec or None
        Requested traps; the zeroth order counts as a trap when weighted.
        ``None`` evaluates the zeroth order only.
    sys : OpticalSystem
    loading : LoadingModel
        Supplies the capture threshold.
    total_power : float
        Power [W] reaching the focal plane.

    Returns
    -------
    TrapReport
    """
    I = np.asarray(focal_intensity, dtype=float)
    if I.shape != (sys.grid_size, sys.grid_size):
        raise ConfigurationError(f"intensity grid {I.shape} does not match the system grid")
    total = float(I.sum())
    sites = trap_sites(spec, sys) if spec is not None else []
    windows = trap_windows(sites, sys)
    fractions = window_fractions(I, windows)
    c = sys.center
    dp = sys.focal_pitch
    thr = loading.threshold_power_per_trap

    metrics = []
    for s, w, frac in zip(sites, windows, fractions):
        wI = I * w
        if wI.sum() > 0:
            yy, xx = np.nonzero(w)
            vals = I[yy, xx]
            y = float((vals * (yy - c)).sum() / vals.sum()) * dp
            x = float((vals * (xx - c)).sum() / vals.sum()) * dp
        else:
            y, x = (s.index[0] - c) * dp, (s.index[1] - c) * dp
        try:
            waist = estimate_waist(I, s.index, dp, 2 * sys.airy_radius)
        except DetectionError:
            waist = None
        peak = float(wI.max()) / total if total > 0 else 0.0
        power = total_power * frac
        metrics.append(TrapMetrics(s.label, s.index, x, y, frac, power, peak, waist, 0.0, power >= thr and power > 0))
    deepest = max((m.peak_intensity for m in metrics), default=0.0)
    for m in metrics:
        m.depth_relative = m.peak_intensity / deepest if deepest > 0 else 0.0

    zwin = sys.focal_disk((c, c), sys.airy_radius)
    zfrac = float(I[zwin].sum()) / total if total > 0 else 0.0
    zpow = total_power * zfrac
    return TrapReport(
        traps=metrics,
        zeroth_order_intensity=float(I[c, c]) / total if total > 0 else 0.0,
        zeroth_order_fraction=zfrac,
        zeroth_order_power=zpow,
        zeroth_order_above_threshold=zpow >= thr and zpow > 0,
        efficiency=union_fraction(I, windows),
        uniformity_deviation=uniformity_deviation(fractions, [s.weight for s in sites]),
        total_power=total_power,
        threshold_power_per_trap=thr,
        detected_spots=detect_spots(I),
    )


@dataclass
class OccupancyStats:
    labels: list
    per_trap_frequency: list
    joint_all_occupied: object
    mean_atom_number: float
    trials: int
    seed: int

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


CHUNK = 1 << 16


def _chunk_counts(seed, chunk, n_trials, probs):
    # each chunk owns a counter-based stream keyed by (seed, chunk index)
    bitgen = np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    u = np.random.Generator(bitgen).random((n_trials, len(probs)))
    occ = u < probs
    return occ.sum(axis=0), int(np.all(occ, axis=1).sum()), int(occ.sum())


def load_sim(report, loading, workers=1):
    """
    Monte Carlo occupancy of the traps in ``report``.

    Traps below threshold are never occupied; the others are occupied
    independently with ``p_single`` (or their override). Trials are split into
    fixed-size chunks with independent streams, so results do not depend on
    ``workers``.

    Returns
    -------
    OccupancyStats
    """
    traps = report.traps
    labels = [t.label for t in traps]
    if not traps:
        return OccupancyStats([], [], None, 0.0, loading.trials, loading.seed)
    probs = np.array(
        [loading.p_overrides.get(t.label, loading.p_single) if t.above_threshold else 0.0 for t in traps]
    )
    n = loading.trials
    jobs = [(loading.seed, i, min(CHUNK, n - i * CHUNK), probs) for i in range((n + CHUNK - 1) // CHUNK)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: _chunk_counts(*a), jobs))
    else:
        parts = [_chunk_counts(*a) for a in jobs]
    per = sum(p[0] for p in parts)
    joint = sum(p[1] for p in parts)
    atoms = sum(p[2] for p in parts)
    return OccupancyStats(
        labels,
        [float(v) / n for v in per],
        joint / n,
        atoms / n,
        n,
        loading.seed,
    )
