"""
Trap-array specifications and the focal target amplitude they define.

A :class:`TrapSpec` is a list of points in the focal plane with relative intensity
weights. Each point is snapped to the focal grid, weighted by ``sqrt(weight)`` and
convolved with the Airy amplitude of the entrance pupil. The convolution is done
by multiplying with the pupil indicator in the SLM plane, which is exact on the
grid and needs no truncated kernel.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, HologramIOError, TrapRangeError
from .optics import ComplexField, propagate_to_focal, propagate_to_slm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trap:
    x: float
    y: float
    weight: float = 1.0


@dataclass(frozen=True)
class TrapSpec:
    """
    Desired traps in the focal plane.

    Parameters
    ----------
    traps : tuple of Trap
        Positions [m] relative to the optical axis and intensity weights.
    zeroth_order_weight : float
        Weight of an extra spot placed on the optical axis (zeroth order).
    label : str
    """

    traps: tuple = ()
    zeroth_order_weight: float = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "traps", tuple(self.traps))
        if self.zeroth_order_weight < 0 or any(t.weight < 0 for t in self.traps):
            raise ConfigurationError("trap weights must be >= 0")
        if not (self.zeroth_order_weight > 0 or any(t.weight > 0 for t in self.traps)):
            raise ConfigurationError("at least one trap (or the zeroth order) needs a positive weight")

    @classmethod
    def from_dict(cls, d):
        try:
            traps = [Trap(float(t["x_um"]) * 1e-6, float(t["y_um"]) * 1e-6, float(t.get("weight", 1.0))) for t in d["traps"]]
        except (KeyError, TypeError) as e:
            raise ConfigurationError(f"malformed trap spec: {e}") from e
        return cls(tuple(traps), float(d.get("zeroth_order_weight", 0.0)), str(d.get("label", "")))

    def to_dict(self):
        return {
            "traps": [{"x_um": t.x * 1e6, "y_um": t.y * 1e6, "weight": t.weight} for t in self.traps],
            "zeroth_order_weight": self.zeroth_order_weight,
            "label": self.label,
        }

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise HologramIOError(f"cannot read trap spec {path}: {e}") from e
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"trap spec {path} is not valid JSON: {e}") from e

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class TrapSite:
    """A trap snapped to the focal grid, ``index = (row, col)``."""

    index: tuple
    weight: float
    label: str
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class TargetAmplitude:
    """Nonnegative focal amplitude with peak 1, plus the sites it was built from."""

    grid: np.ndarray
    pitch: float
    sites: tuple = ()
    overlap_warning: bool = False
    warnings: tuple = field(default_factory=tuple)


def _snap_index(v):
    # nearest integer, exact halves go to the lower index
    return math.ceil(v - 0.5)


def snap_traps(spec, sys):
    """
    Map each trap to the nearest focal grid sample.

    Returns
    -------
    list of ((row, col), residual)
        Pixel index pair and the distance [m] between requested and snapped
        position.

    Raises
    ------
    TrapRangeError
        If a trap lies outside the unaliased field of view.
    """
    half = sys.field_of_view / 2
    dp = sys.focal_pitch
    c = sys.center
    out = []
    for i, t in enumerate(spec.traps):
        if not (abs(t.x) < half and abs(t.y) < half):
            raise TrapRangeError(
                f"trap #{i} at ({t.x * 1e6:.3f}, {t.y * 1e6:.3f}) um is outside the "
                f"+/-{half * 1e6:.3f} um field of view"
            )
        col = _snap_index(t.x / dp)
        row = _snap_index(t.y / dp)
        if not (-c <= row < c and -c <= col < c):
            raise TrapRangeError(f"trap #{i} snaps onto the edge of the field of view")
        residual = math.hypot(t.x - col * dp, t.y - row * dp)
        out.append(((row + c, col + c), residual))
    return out


def trap_sites(spec, sys):
    """
    Snapped sites with weights, including the zeroth order when weighted.

    Traps landing on the same pixel are merged; their amplitudes add.
    """
    weights = {}
    labels = {}
    residual = {}
    for i, (idx, res) in enumerate(snap_traps(spec, sys)):
        weights.setdefault(idx, []).append(spec.traps[i].weight)
        labels.setdefault(idx, f"trap{i}")
        residual[idx] = max(residual.get(idx, 0.0), res)
    if spec.zeroth_order_weight > 0:
        idx = (sys.center, sys.center)
        weights.setdefault(idx, []).append(spec.zeroth_order_weight)
        labels.setdefault(idx, "zeroth")
        residual.setdefault(idx, 0.0)
    sites = []
    for idx, ws in weights.items():
        w = ws[0] if len(ws) == 1 else sum(math.sqrt(v) for v in ws) ** 2
        if w > 0:
            sites.append(TrapSite(idx, w, labels[idx], residual[idx]))
    return sites


def build_target(spec, sys):
    """
    Target focal amplitude: snapped deltas convolved with the pupil's Airy amplitude.

    Parameters
    ----------
    spec : TrapSpec
    sys : OpticalSystem

    Returns
    -------
    TargetAmplitude
        ``overlap_warning`` is set when two sites sit closer than one Airy radius.
    """
    sites = trap_sites(spec, sys)
    n = sys.grid_size
    deltas = np.zeros((n, n), dtype=np.complex128)
    for s in sites:
        deltas[s.index] += math.sqrt(s.weight)

    slm = propagate_to_slm(ComplexField(deltas, sys.focal_pitch, sys.wavelength, "focal"), sys)
    filtered = ComplexField(slm.samples * sys.pupil_mask(), sys.slm_pitch, sys.wavelength, "slm")
    amp = np.abs(propagate_to_focal(filtered, sys).samples)
    amp /= amp.max()

    warnings = []
    r_pix = sys.airy_radius / sys.focal_pitch
    for i, a in enumerate(sites):
        for b in sites[i + 1 :]:
            d = math.hypot(a.index[0] - b.index[0], a.index[1] - b.index[1])
            if d < r_pix:
                warnings.append(f"{a.label} and {b.label} are {d * sys.focal_pitch * 1e6:.3f} um apart (< one Airy radius)")
    for w in warnings:
        log.warning(w)
    amp.setflags(write=False)
    return TargetAmplitude(amp, sys.focal_pitch, tuple(sites), bool(warnings), tuple(warnings))
