"""
Sampled complex fields and scalar propagation between the SLM and the focal plane.

The SLM plane and the focal plane of the objective are Fourier conjugates. With
``N`` samples of pitch ``dx`` on the SLM, the focal plane is sampled at

    drho = wavelength * focal_length / (N * dx)

and a plane wave ``exp(2j*pi*x/p)`` on the SLM focuses at ``rho = wavelength *
focal_length / p``. All transforms are unitary (``norm="ortho"``) and every stored
grid keeps zero spatial frequency at index ``N // 2``.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as spfft

from .errors import ConfigurationError, SamplingError

PLANES = ("slm", "focal", "intermediate")


def _fft2c(a):
    """Centered unitary forward 2D DFT."""
    return spfft.fftshift(spfft.fft2(spfft.ifftshift(a), norm="ortho"))


def _ifft2c(a):
    """Centered unitary inverse 2D DFT."""
    return spfft.fftshift(spfft.ifft2(spfft.ifftshift(a), norm="ortho"))


@dataclass(frozen=True)
class OpticalSystem:
    """
    Geometry of the SLM -> objective -> focal plane chain.

    Parameters
    ----------
    wavelength : float
        Laser wavelength [m].
    focal_length : float
        Effective focal length of the objective [m].
    pupil_diameter : float
        Entrance pupil diameter [m].
    numerical_aperture : float
        Objective NA, informational (scalar model).
    beam_waist_at_slm : float
        1/e^2 intensity radius of the beam at the SLM [m].
    grid_size : int
        Samples per side of the simulation grid (even).
    slm_pitch : float
        SLM pixel pitch [m].
    """

    wavelength: float = 810e-9
    focal_length: float = 3.55e-3
    pupil_diameter: float = 5e-3
    numerical_aperture: float = 0.7
    beam_waist_at_slm: float = 2.3e-3
    grid_size: int = 512
    slm_pitch: float = 20e-3 / 480

    def __post_init__(self):
        for name in ("wavelength", "focal_length", "pupil_diameter", "beam_waist_at_slm", "slm_pitch"):
            v = getattr(self, name)
            if not v > 0:
                raise ConfigurationError(f"{name} must be > 0, got {v!r}")
        if not 0 < self.numerical_aperture < 1:
            raise ConfigurationError(f"numerical_aperture must lie in (0, 1), got {self.numerical_aperture!r}")
        n = self.grid_size
        if int(n) != n or n < 2 or n % 2:
            raise ConfigurationError(f"grid_size must be an even integer >= 2, got {n!r}")

    @property
    def focal_pitch(self):
        """Focal-plane sample spacing [m]."""
        return self.wavelength * self.focal_length / (self.grid_size * self.slm_pitch)

    @property
    def field_of_view(self):
        """Full width of the focal grid [m]."""
        return self.grid_size * self.focal_pitch

    @property
    def airy_radius(self):
        """First zero of the Airy pattern, 1.22 * wavelength * f / D [m]."""
        return 1.22 * self.wavelength * self.focal_length / self.pupil_diameter

    @property
    def center(self):
        return self.grid_size // 2

    def slm_coords(self):
        """Meshgrid ``(X, Y)`` of SLM sample positions [m]."""
        x = (np.arange(self.grid_size) - self.center) * self.slm_pitch
        return np.meshgrid(x, x)

    def focal_coords(self):
        """Meshgrid ``(X, Y)`` of focal sample positions [m]."""
        x = (np.arange(self.grid_size) - self.center) * self.focal_pitch
        return np.meshgrid(x, x)

    def pupil_mask(self, diameter=None):
        """Boolean disk ``r < diameter / 2`` on the SLM grid (default: pupil)."""
        d = self.pupil_diameter if diameter is None else diameter
        X, Y = self.slm_coords()
        return X**2 + Y**2 < (d / 2) ** 2

    def focal_disk(self, center, radius):
        """Boolean disk of ``radius`` [m] around pixel ``center = (row, col)``."""
        idx = np.arange(self.grid_size)
        rr = (idx[:, None] - center[0]) ** 2 + (idx[None, :] - center[1]) ** 2
        return rr <= (radius / self.focal_pitch) ** 2


@dataclass(frozen=True, eq=False)
class ComplexField:
    """
    Square grid of complex amplitudes with its physical sampling.

    ``samples`` is copied on construction and made read-only.
    """

    samples: np.ndarray
    pitch: float
    wavelength: float
    plane: str = "slm"

    def __post_init__(self):
        a = np.array(self.samples, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ConfigurationError(f"field must be N x N with N >= 2, got shape {a.shape}")
        if not self.pitch > 0 or not self.wavelength > 0:
            raise ConfigurationError("pitch and wavelength must be > 0")
        if self.plane not in PLANES:
            raise ConfigurationError(f"plane must be one of {PLANES}, got {self.plane!r}")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def intensity(self):
        return np.abs(self.samples) ** 2

    @property
    def energy(self):
        return float(np.sum(self.intensity))


def _check_grid(field, sys, plane, pitch):
    if field.plane != plane:
        raise ConfigurationError(f"expected a {plane}-plane field, got {field.plane!r}")
    if field.n != sys.grid_size:
        raise ConfigurationError(f"field is {field.n}x{field.n} but system grid is {sys.grid_size}")
    if not math.isclose(field.pitch, pitch, rel_tol=1e-9):
        raise ConfigurationError(f"field pitch {field.pitch:.6g} m does not match system pitch {pitch:.6g} m")
    if not math.isclose(field.wavelength, sys.wavelength, rel_tol=1e-9):
        raise ConfigurationError("field wavelength does not match system wavelength")


def propagate_to_focal(field, sys):
    """
    Focus an SLM-plane field through the objective.

    Parameters
    ----------
    field : ComplexField
        SLM-plane field sampled at ``sys.slm_pitch``.
    sys : OpticalSystem

    Returns
    -------
    ComplexField
        Focal-plane field sampled at ``sys.focal_pitch``, same energy.
    """
    _check_grid(field, sys, "slm", sys.slm_pitch)
    return ComplexField(_fft2c(field.samples), sys.focal_pitch, sys.wavelength, "focal")


def propagate_to_slm(field, sys):
    """Exact inverse of :func:`propagate_to_focal`."""
    _check_grid(field, sys, "focal", sys.focal_pitch)
    return ComplexField(_ifft2c(field.samples), sys.slm_pitch, sys.wavelength, "slm")


def _phase_per_distance(fx, fy, wavelength, paraxial):
    # transfer-function phase for unit distance, constant piston dropped
    if paraxial:
        return -np.pi * wavelength * (fx**2 + fy**2)
    return 2 * np.pi * np.sqrt(np.maximum(1.0 / wavelength**2 - fx**2 - fy**2, 0.0))


def max_propagation_distance(field, paraxial=True, support_tol=1e-6):
    """
    Largest ``|distance|`` for which :func:`fresnel_propagate` stays unaliased.

    The transfer function is sampled at ``df = 1 / (N * pitch)``. Its phase must
    advance by less than ``pi`` between neighbouring frequency samples wherever
    the field's angular spectrum is non-negligible (amplitude above
    ``support_tol`` times the spectral maximum). Beyond that the propagated field
    wraps around the window.

    Returns
    -------
    float
        Bound in meters (``inf`` if the spectrum occupies a single sample).
    """
    spec = np.abs(_fft2c(field.samples))
    if spec.max() == 0:
        return math.inf
    support = spec > support_tol * spec.max()
    n = field.n
    f = (np.arange(n) - n // 2) / (n * field.pitch)
    fx, fy = np.meshgrid(f, f)
    psi = _phase_per_distance(fx, fy, field.wavelength, paraxial)
    worst = 0.0
    for axis in (0, 1):
        a = np.swapaxes(support, 0, axis)
        p = np.swapaxes(psi, 0, axis)
        pairs = a[:-1] & a[1:]
        if pairs.any():
            worst = max(worst, float(np.abs(np.diff(p, axis=0))[pairs].max()))
    return math.inf if worst == 0 else math.pi / worst


def fresnel_propagate(field, distance, paraxial=True, support_tol=1e-6):
    """
    Angular-spectrum propagation of a field by ``distance`` along the axis.

    Parameters
    ----------
    field : ComplexField
    distance : float
        Propagation distance [m]; positive is away from the objective.
    paraxial : bool
        Use the Fresnel (quadratic) transfer function. The exact
        ``sqrt(1/wavelength**2 - f**2)`` kernel is used otherwise, which requires
        the spectrum to be free of evanescent components.

    Raises
    ------
    SamplingError
        If ``|distance|`` exceeds :func:`max_propagation_distance`.
    """
    if distance == 0:
        return field
    n = field.n
    spectrum = _fft2c(field.samples)
    f = (np.arange(n) - n // 2) / (n * field.pitch)
    fx, fy = np.meshgrid(f, f)
    if not paraxial:
        amp = np.abs(spectrum)
        evanescent = fx**2 + fy**2 >= 1.0 / field.wavelength**2
        if np.any(amp[evanescent] > support_tol * amp.max()):
            raise SamplingError("field has evanescent spectral content; use paraxial=True", 0.0)
    zmax = max_propagation_distance(field, paraxial, support_tol)
    if abs(distance) >= zmax:
        raise SamplingError(
            f"|distance| = {abs(distance):.4g} m exceeds the unaliased bound; "
            f"use |distance| < {zmax:.4g} m or a finer focal grid",
            zmax,
        )
    h = np.exp(1j * distance * _phase_per_distance(fx, fy, field.wavelength, paraxial))
    return ComplexField(_ifft2c(spectrum * h), field.pitch, field.wavelength, "intermediate")


def save_intensity_csv(intensity, path):
    """Dump ``|E|^2`` (or an intensity array) as comma-separated rows."""
    if isinstance(intensity, ComplexField):
        intensity = intensity.intensity
    np.savetxt(path, np.asarray(intensity, dtype=float), delimiter=",", fmt="%.12e")


def load_intensity_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)
