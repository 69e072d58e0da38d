"""
Iterative FFT design of phase-only holograms for trap arrays.

One iteration:

1. unit amplitude over the pupil with the current phase, ``exp(1j * phi)``;
2. propagate to the focal plane, giving ``A_n * exp(1j * Phi_n)``;
3. impose the target on the amplitude, keeping ``Phi_n``:

   * ``"paper_multiply"``: ``k * target * A_n``;
   * ``"classic_replace"``: ``k * target`` (textbook Gerchberg-Saxton);

   ``k`` rescales the focal energy back to the SLM-plane energy;
4. propagate back to the SLM plane;
5. keep the phase inside the pupil, zero outside.

``paper_multiply`` is a power iteration of ``target * F``. It never equalises
spot powers and drifts towards the brightest spot, so ``classic_replace`` is
the default.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidTargetError
from .metrics import trap_windows, uniformity_deviation, union_fraction, window_fractions
from .optics import ComplexField, propagate_to_focal, propagate_to_slm
from .target import build_target

INIT_MODES = ("seeded_random", "flat", "quadratic")
UPDATE_RULES = ("paper_multiply", "classic_replace")


def wrap_phase(phi):
    """Wrap radians into ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)


@dataclass(frozen=True, eq=False)
class PhaseMask:
    """SLM phase map [rad] in ``(-pi, pi]`` on the simulation grid."""

    phase: np.ndarray
    pitch: float
    wavelength: float

    def __post_init__(self):
        p = np.array(self.phase, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ConfigurationError(f"phase mask must be square, got {p.shape}")
        if np.any(p <= -np.pi) or np.any(p > np.pi):
            raise ConfigurationError("phase values must lie in (-pi, pi]")
        p.setflags(write=False)
        object.__setattr__(self, "phase", p)

    def check_grid(self, sys):
        if self.phase.shape[0] != sys.grid_size or not math.isclose(self.pitch, sys.slm_pitch, rel_tol=1e-9):
            raise ConfigurationError("phase mask grid does not match the optical system")


@dataclass(frozen=True)
class SolverConfig:
    iterations: int = 4
    init_mode: str = "seeded_random"
    seed: int = 0
    update_rule: str = "classic_replace"

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigurationError(f"iterations must be an integer >= 1, got {self.iterations!r}")
        if self.init_mode not in INIT_MODES:
            raise ConfigurationError(f"init_mode must be one of {INIT_MODES}")
        if self.update_rule not in UPDATE_RULES:
            raise ConfigurationError(f"update_rule must be one of {UPDATE_RULES}")
        if self.init_mode == "seeded_random" and not isinstance(self.seed, (int, np.integer)):
            raise ConfigurationError("seeded_random initialisation needs an integer seed")


@dataclass(frozen=True)
class StepDiagnostics:
    """Focal-plane quality of the phase produced by one step."""

    trap_intensities: list
    uniformity_deviation: float
    efficiency: float
    focal_error: float
    slm_amplitude_span: float


@dataclass
class ConvergenceReport:
    update_rule: str
    init_mode: str
    seed: int
    trap_labels: list
    trap_intensities: list = field(default_factory=list)
    uniformity_deviation: list = field(default_factory=list)
    efficiency: list = field(default_factory=list)
    focal_error: list = field(default_factory=list)

    def append(self, d):
        self.trap_intensities.append(list(d.trap_intensities))
        self.uniformity_deviation.append(d.uniformity_deviation)
        self.efficiency.append(d.efficiency)
        self.focal_error.append(d.focal_error)

    @property
    def iterations(self):
        return len(self.efficiency)

    def to_dict(self):
        def clean(x):
            return x if math.isfinite(x) else None

        return {
            "update_rule": self.update_rule,
            "init_mode": self.init_mode,
            "seed": self.seed,
            "trap_labels": list(self.trap_labels),
            "iterations": [
                {
                    "iteration": i + 1,
                    "trap_intensities": self.trap_intensities[i],
                    "uniformity_deviation": clean(self.uniformity_deviation[i]),
                    "efficiency": self.efficiency[i],
                    "focal_error": self.focal_error[i],
                }
                for i in range(self.iterations)
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        r = cls(d["update_rule"], d["init_mode"], d["seed"], list(d["trap_labels"]))
        for it in d["iterations"]:
            u = it["uniformity_deviation"]
            r.append(StepDiagnostics(it["trap_intensities"], math.inf if u is None else u, it["efficiency"], it["focal_error"], 0.0))
        return r

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "uniformity_deviation", "efficiency", "focal_error"] + [f"I_{l}" for l in self.trap_labels])
        for i in range(self.iterations):
            w.writerow(
                [i + 1, repr(self.uniformity_deviation[i]), repr(self.efficiency[i]), repr(self.focal_error[i])]
                + [repr(v) for v in self.trap_intensities[i]]
            )
        return buf.getvalue()


def init_phase(cfg, sys):
    """
    Starting phase for the iteration.

    ``flat`` is all zeros, ``quadratic`` a centered parabola rising from -pi on
    axis to +pi at the grid edge (wrapped beyond), ``seeded_random`` i.i.d.
    uniform on ``(-pi, pi]`` from a seeded PCG64 stream.
    """
    n = sys.grid_size
    if cfg.init_mode == "flat":
        phi = np.zeros((n, n))
    elif cfg.init_mode == "quadratic":
        X, Y = sys.slm_coords()
        edge = sys.center * sys.slm_pitch
        phi = wrap_phase(-np.pi + 2 * np.pi * (X**2 + Y**2) / edge**2)
    else:
        u = np.random.default_rng(cfg.seed).random((n, n))
        phi = np.pi - 2 * np.pi * u
    return PhaseMask(phi, sys.slm_pitch, sys.wavelength)


def _diagnostics(focal, target, windows, slm_amplitude_span):
    intensity = np.abs(focal) ** 2
    fr = window_fractions(intensity, windows)
    weights = [s.weight for s in target.sites]
    mask = np.logical_or.reduce(windows)
    t = target.grid
    scale = math.sqrt(float(np.sum(t**2)) / float(intensity.sum())) if intensity.sum() > 0 else 0.0
    err = float(np.sqrt(np.mean((np.abs(focal[mask]) * scale - t[mask]) ** 2)))
    return StepDiagnostics(fr, uniformity_deviation(fr, weights), union_fraction(intensity, windows), err, slm_amplitude_span)


def _focal(phase, amplitude, sys):
    return propagate_to_focal(ComplexField(amplitude * np.exp(1j * phase), sys.slm_pitch, sys.wavelength, "slm"), sys)


def gs_step(phase, target, sys, rule="classic_replace", _windows=None):
    """
    One iteration of the hologram loop.

    Parameters
    ----------
    phase : PhaseMask
    target : TargetAmplitude
    sys : OpticalSystem
    rule : {"classic_replace", "paper_multiply"}

    Returns
    -------
    (PhaseMask, StepDiagnostics)
        Updated phase and the focal diagnostics of that updated phase.
    """
    if rule not in UPDATE_RULES:
        raise ConfigurationError(f"update_rule must be one of {UPDATE_RULES}")
    phase.check_grid(sys)
    t = target.grid
    if t.shape != phase.phase.shape:
        raise ConfigurationError("target and phase grids differ")
    if not np.any(t > 0):
        raise InvalidTargetError("target amplitude is identically zero")

    pupil = sys.pupil_mask()
    amplitude = pupil.astype(float)
    span = float(np.ptp(amplitude[pupil]))
    assert span == 0.0

    e_in = amplitude * np.exp(1j * phase.phase)
    focal = propagate_to_focal(ComplexField(e_in, sys.slm_pitch, sys.wavelength, "slm"), sys).samples
    new_amp = t * np.abs(focal) if rule == "paper_multiply" else t
    norm = float(np.sum(new_amp**2))
    if norm == 0:
        raise InvalidTargetError("achieved field has no overlap with the target")
    k = math.sqrt(float(np.sum(np.abs(e_in) ** 2)) / norm)
    back = propagate_to_slm(ComplexField(k * new_amp * np.exp(1j * np.angle(focal)), sys.focal_pitch, sys.wavelength, "focal"), sys)
    new_phase = np.where(pupil, wrap_phase(np.angle(back.samples)), 0.0)
    mask = PhaseMask(new_phase, sys.slm_pitch, sys.wavelength)

    windows = _windows if _windows is not None else trap_windows(target.sites, sys)
    diag = _diagnostics(_focal(new_phase, amplitude, sys).samples, target, windows, span)
    return mask, diag


def solve(spec, sys, cfg=SolverConfig()):
    """
    Design a phase mask for ``spec``.

    Returns
    -------
    (PhaseMask, ConvergenceReport)
        Final mask and per-iteration diagnostics.
    """
    target = build_target(spec, sys)
    windows = trap_windows(target.sites, sys)
    mask = init_phase(cfg, sys)
    report = ConvergenceReport(cfg.update_rule, cfg.init_mode, int(cfg.seed), [s.label for s in target.sites])
    for _ in range(cfg.iterations):
        mask, diag = gs_step(mask, target, sys, cfg.update_rule, _windows=windows)
        report.append(diag)
    return mask, report


def focal_intensity(mask, sys):
    """Focal intensity of ``mask`` under unit pupil illumination (the solver's model)."""
    mask.check_grid(sys)
    return _focal(mask.phase, sys.pupil_mask().astype(float), sys).intensity
