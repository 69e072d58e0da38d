"""
Parametric model of a liquid-crystal phase SLM.

The defaults describe a 480 x 480 pixel, 20 x 20 mm optically addressed PAL-SLM
reaching 2.1 pi of phase at 633 nm. For a fixed optical path the phase scales as
1 / wavelength, so the range shrinks to about 1.64 pi at 810 nm. Requested phases
above the device range saturate, which feeds light into the zeroth order.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigurationError, DeviceDamageError, HologramIOError
from .optics import ComplexField
from .solver import PhaseMask, wrap_phase

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeviceModel:
    """
    Parameters
    ----------
    pixels_per_side : int
    active_side : float
        Side of the active area [m].
    max_phase_at_reference : float
        Largest phase shift [rad] at ``reference_wavelength``.
    reference_wavelength : float
        [m]
    gray_levels : int or None
        Number of addressable levels; ``None`` for a continuous response.
    max_intensity : float
        Damage threshold [W/m^2].
    """

    pixels_per_side: int = 480
    active_side: float = 20e-3
    max_phase_at_reference: float = 2.1 * math.pi
    reference_wavelength: float = 633e-9
    gray_levels: int = 256
    max_intensity: float = 2000.0  # 200 mW/cm^2

    def __post_init__(self):
        if self.pixels_per_side < 1 or not self.active_side > 0:
            raise ConfigurationError("device geometry must be positive")
        if not self.max_phase_at_reference > 0 or not self.reference_wavelength > 0:
            raise ConfigurationError("device phase range must be positive")
        if self.gray_levels is not None and self.gray_levels < 2:
            raise ConfigurationError("gray_levels must be >= 2 or None")

    @property
    def pixel_pitch(self):
        return self.active_side / self.pixels_per_side

    @classmethod
    def ideal(cls, wavelength, gray_levels=None, **kw):
        """Full 2 pi range at ``wavelength``, continuous levels unless ``gray_levels`` is given."""
        return cls(max_phase_at_reference=2 * math.pi, reference_wavelength=wavelength, gray_levels=gray_levels, **kw)

    def to_dict(self):
        return {
            "pixels_per_side": self.pixels_per_side,
            "active_side_mm": self.active_side * 1e3,
            "max_phase_at_reference_pi": self.max_phase_at_reference / math.pi,
            "reference_wavelength_nm": self.reference_wavelength * 1e9,
            "gray_levels": self.gray_levels,
            "max_intensity_mw_per_cm2": self.max_intensity / 10.0,
        }

    @classmethod
    def from_dict(cls, d):
        known = {
            "pixels_per_side",
            "active_side_mm",
            "max_phase_at_reference_pi",
            "reference_wavelength_nm",
            "gray_levels",
            "max_intensity_mw_per_cm2",
        }
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown device keys: {sorted(extra)}")
        base = cls()
        return cls(
            pixels_per_side=int(d.get("pixels_per_side", base.pixels_per_side)),
            active_side=float(d.get("active_side_mm", base.active_side * 1e3)) * 1e-3,
            max_phase_at_reference=float(d.get("max_phase_at_reference_pi", 2.1)) * math.pi,
            reference_wavelength=float(d.get("reference_wavelength_nm", 633.0)) * 1e-9,
            gray_levels=d.get("gray_levels", base.gray_levels),
            max_intensity=float(d.get("max_intensity_mw_per_cm2", 200.0)) * 10.0,
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class BeamProfile:
    """Gaussian read-out beam at the SLM; ``waist_at_slm = inf`` means flat."""

    waist_at_slm: float = 2.3e-3
    power: float = 10e-3
    polarization_ok: bool = True

    def __post_init__(self):
        if not self.waist_at_slm > 0 or not self.power > 0:
            raise ConfigurationError("beam waist and power must be > 0")

    @property
    def peak_intensity(self):
        """``power / (pi * waist**2 / 2)`` [W/m^2]."""
        return self.power / (math.pi * self.waist_at_slm**2 / 2)


def max_phase(dev, wavelength):
    """Phase range [rad] of ``dev`` at ``wavelength``; scales as 1/wavelength."""
    if not wavelength > 0:
        raise ConfigurationError("wavelength must be > 0")
    return dev.max_phase_at_reference * (dev.reference_wavelength / wavelength)


def round_half_up(x):
    return np.floor(np.asarray(x) + 0.5)


def device_region(sys, pixels_per_side):
    """Boolean mask of the central ``pixels_per_side`` square of the grid."""
    n = sys.grid_size
    if pixels_per_side > n:
        raise ConfigurationError(f"device ({pixels_per_side} px) does not fit the {n} px grid")
    lo = sys.center - pixels_per_side // 2
    m = np.zeros((n, n), dtype=bool)
    m[lo : lo + pixels_per_side, lo : lo + pixels_per_side] = True
    return m


def apply_device(mask, dev, beam, sys, modulated_diameter=None, gain=1.0):
    """
    Field reflected by the SLM when it displays ``mask``.

    The amplitude is the Gaussian beam, cut to the device area and the pupil.
    Inside the modulated disk the requested phase is shifted to ``[0, 2 pi)``,
    multiplied by ``gain``, saturated at :func:`max_phase` and rounded to the
    device's gray levels. Outside it the phase is 0.

    Parameters
    ----------
    mask : PhaseMask
    dev : DeviceModel
    beam : BeamProfile
    sys : OpticalSystem
    modulated_diameter : float, optional
        Diameter [m] of the modulated disk; defaults to the pupil diameter.
    gain : float
        Modulation amplitude applied before saturation.

    Returns
    -------
    ComplexField
        SLM-plane field with peak amplitude <= 1.

    Raises
    ------
    DeviceDamageError
        If the beam's peak intensity exceeds ``dev.max_intensity``.
    """
    mask.check_grid(sys)
    if not math.isclose(dev.pixel_pitch, sys.slm_pitch, rel_tol=1e-6):
        raise ConfigurationError(f"device pitch {dev.pixel_pitch:.6g} m differs from grid pitch {sys.slm_pitch:.6g} m")
    if beam.peak_intensity > dev.max_intensity:
        raise DeviceDamageError(
            f"beam peak intensity {beam.peak_intensity / 10:.1f} mW/cm^2 exceeds the "
            f"{dev.max_intensity / 10:.1f} mW/cm^2 rating"
        )
    if not beam.polarization_ok:
        log.warning("read-out polarization not aligned with the liquid crystal; modulation efficiency is overestimated")

    X, Y = sys.slm_coords()
    r2 = X**2 + Y**2
    aperture = device_region(sys, dev.pixels_per_side) & sys.pupil_mask()
    amplitude = np.exp(-r2 / beam.waist_at_slm**2) * aperture
    modulated = sys.pupil_mask(modulated_diameter)

    phi = mask.phase
    top = max_phase(dev, sys.wavelength)
    requested = gain * np.where(phi < 0, phi + 2 * np.pi, phi)
    if dev.gray_levels is None:
        # unsaturated samples keep the original value so the ideal device is exact
        kept = phi if gain == 1.0 else requested
        dev_phase = np.where(requested > top, top, kept)
    else:
        step = top / (dev.gray_levels - 1)
        dev_phase = round_half_up(np.clip(requested, 0.0, top) / step) * step
    dev_phase = np.where(modulated, dev_phase, 0.0)
    return ComplexField(amplitude * np.exp(1j * dev_phase), sys.slm_pitch, sys.wavelength, "slm")


def focus_shift(f_lens, sys):
    """Axial focus displacement [m] produced by a lens phase of focal length ``f_lens``."""
    return -sys.focal_length**2 / f_lens


def lens_for_focus_shift(dz, sys):
    """Lens focal length [m] moving the focus by ``dz`` (positive away from the objective)."""
    if dz == 0:
        return None
    return -sys.focal_length**2 / dz


def add_lens_phase(mask, f_lens, sys):
    """
    Add the quadratic phase ``-pi r^2 / (wavelength f_lens)`` and re-wrap.

    ``f_lens`` of ``None`` or ``inf`` leaves the mask unchanged.
    """
    if f_lens is None or math.isinf(f_lens):
        return mask
    if f_lens == 0:
        raise ConfigurationError("lens focal length must be non-zero")
    mask.check_grid(sys)
    X, Y = sys.slm_coords()
    lens = -np.pi * (X**2 + Y**2) / (sys.wavelength * f_lens)
    return PhaseMask(wrap_phase(mask.phase + lens), mask.pitch, mask.wavelength)


def phase_to_gray(phase):
    """Map ``[-pi, pi]`` linearly onto 0..255, rounding halves up."""
    g = round_half_up((np.asarray(phase) + np.pi) / (2 * np.pi) * 255.0)
    return np.clip(g, 0, 255).astype(np.uint8)


def gray_to_phase(gray):
    return np.asarray(gray, dtype=float) / 255.0 * 2 * np.pi - np.pi


def write_pgm(image, path):
    """Write an 8-bit array as binary PGM (P5, maxval 255)."""
    path = Path(path)
    try:
        Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode="L").save(path, format="PPM")
    except (OSError, ValueError) as e:
        raise HologramIOError(f"cannot write {path}: {e}") from e


def read_pgm(path):
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise HologramIOError(f"{path} is not an 8-bit grayscale image")
            return np.array(im)
    except OSError as e:
        raise HologramIOError(f"cannot read {path}: {e}") from e


def export_hologram(mask, path, pixels_per_side=480):
    """
    Save the device crop of ``mask`` as an 8-bit PGM.

    Gray 0 is -pi and gray 255 is +pi. Returns the gray-level array written.
    """
    n = mask.phase.shape[0]
    if pixels_per_side > n:
        raise ConfigurationError("device crop larger than the mask")
    lo = n // 2 - pixels_per_side // 2
    gray = phase_to_gray(mask.phase[lo : lo + pixels_per_side, lo : lo + pixels_per_side])
    write_pgm(gray, path)
    return gray


def import_hologram(path, sys):
    """Read a PGM hologram and embed it, centered, in the system grid (phase 0 outside)."""
    gray = read_pgm(path)
    m = gray.shape[0]
    if gray.shape != (m, m) or m > sys.grid_size:
        raise ConfigurationError(f"hologram {path} has shape {gray.shape}, incompatible with a {sys.grid_size} grid")
    phi = np.zeros((sys.grid_size, sys.grid_size))
    lo = sys.center - m // 2
    phi[lo : lo + m, lo : lo + m] = wrap_phase(gray_to_phase(gray))
    return PhaseMask(phi, sys.slm_pitch, sys.wavelength)


def intensity_to_pgm(intensity, path):
    """Save an intensity map scaled so its maximum is gray 255."""
    I = np.asarray(intensity, dtype=float)
    peak = I.max()
    img = np.zeros(I.shape, dtype=np.uint8) if peak <= 0 else round_half_up(I / peak * 255.0).astype(np.uint8)
    write_pgm(img, path)
    return img
