"""
JSON run configuration.

Lengths carry their unit in the key name (``wavelength_nm``, ``focal_length_mm``,
``x_um`` ...) and are converted to SI on load. Unknown keys are rejected so
that typos do not silently fall back to defaults.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigurationError, HologramIOError
from .optics import OpticalSystem
from .physics import LoadingModel
from .slm import BeamProfile, DeviceModel
from .solver import SolverConfig
from .target import TrapSpec

SECTIONS = {
    "system": {"wavelength_nm", "focal_length_mm", "pupil_diameter_mm", "numerical_aperture", "grid_size"},
    "device": None,  # validated by DeviceModel.from_dict
    "beam": {"waist_at_slm_mm", "power_mw", "polarization_ok"},
    "solver": {"iterations", "init_mode", "seed", "update_rule"},
    "traps": None,
    "loading": {"p_single", "threshold_power_per_trap_mw", "trials", "seed", "p_overrides"},
    "evaluation": {"total_power_mw", "modulated_diameter_mm", "gain", "simulate_device"},
    "export": {"lens_focal_length_mm", "focus_shift_um", "rotate_deg"},
    "output_dir": None,
}


@dataclass(frozen=True)
class EvaluationSettings:
    total_power: float = 40e-3
    modulated_diameter: float = None
    gain: float = 1.0
    simulate_device: bool = True


@dataclass(frozen=True)
class ExportSettings:
    lens_focal_length: float = None
    focus_shift: float = None
    rotate_deg: int = 0

    def __post_init__(self):
        if self.lens_focal_length is not None and self.focus_shift is not None:
            raise ConfigurationError("give either lens_focal_length_mm or focus_shift_um, not both")
        if self.rotate_deg % 90 != 0:
            raise ConfigurationError("rotate_deg must be a multiple of 90")


@dataclass(frozen=True)
class RunConfig:
    system: OpticalSystem = field(default_factory=OpticalSystem)
    device: DeviceModel = field(default_factory=DeviceModel)
    beam: BeamProfile = field(default_factory=BeamProfile)
    solver: SolverConfig = field(default_factory=SolverConfig)
    traps: TrapSpec = None
    traps_path: Path = None
    loading: LoadingModel = field(default_factory=LoadingModel)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    export: ExportSettings = field(default_factory=ExportSettings)
    output_dir: Path = Path("out")

    def with_overrides(self, seed=None, iterations=None, output_dir=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, solver=replace(cfg.solver, seed=seed), loading=replace(cfg.loading, seed=seed))
        if iterations is not None:
            cfg = replace(cfg, solver=replace(cfg.solver, iterations=iterations))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=Path(output_dir))
        return cfg


def _section(d, name):
    sec = d.get(name, {}) or {}
    if not isinstance(sec, dict):
        raise ConfigurationError(f"config section '{name}' must be an object")
    allowed = SECTIONS[name]
    extra = set(sec) - allowed
    if extra:
        raise ConfigurationError(f"unknown keys in '{name}': {sorted(extra)}")
    return sec


def _opt(v, scale):
    return None if v is None else float(v) * scale


def parse_config(d, base_dir="."):
    """
    Build a :class:`RunConfig` from a decoded JSON object.

    ``traps`` is either an inline trap spec or a path relative to ``base_dir``.
    """
    if not isinstance(d, dict):
        raise ConfigurationError("config must be a JSON object")
    extra = set(d) - set(SECTIONS)
    if extra:
        raise ConfigurationError(f"unknown config sections: {sorted(extra)}")
    base_dir = Path(base_dir)

    try:
        device = DeviceModel.from_dict(d.get("device", {}) or {})
        s = _section(d, "system")
        ref = OpticalSystem()
        system = OpticalSystem(
            wavelength=float(s.get("wavelength_nm", ref.wavelength * 1e9)) * 1e-9,
            focal_length=float(s.get("focal_length_mm", ref.focal_length * 1e3)) * 1e-3,
            pupil_diameter=float(s.get("pupil_diameter_mm", ref.pupil_diameter * 1e3)) * 1e-3,
            numerical_aperture=float(s.get("numerical_aperture", ref.numerical_aperture)),
            grid_size=int(s.get("grid_size", ref.grid_size)),
            slm_pitch=device.pixel_pitch,
        )
        b = _section(d, "beam")
        beam = BeamProfile(
            waist_at_slm=float(b.get("waist_at_slm_mm", 2.3)) * 1e-3,
            power=float(b.get("power_mw", 10.0)) * 1e-3,
            polarization_ok=bool(b.get("polarization_ok", True)),
        )
        system = replace(system, beam_waist_at_slm=beam.waist_at_slm)
        solver = SolverConfig(**_section(d, "solver"))
        lo = _section(d, "loading")
        loading = LoadingModel(
            p_single=float(lo.get("p_single", 0.5)),
            threshold_power_per_trap=float(lo.get("threshold_power_per_trap_mw", 4.0)) * 1e-3,
            trials=int(lo.get("trials", 100_000)),
            seed=int(lo.get("seed", 0)),
            p_overrides={str(k): float(v) for k, v in (lo.get("p_overrides") or {}).items()},
        )
        ev = _section(d, "evaluation")
        evaluation = EvaluationSettings(
            total_power=float(ev.get("total_power_mw", 40.0)) * 1e-3,
            modulated_diameter=_opt(ev.get("modulated_diameter_mm"), 1e-3),
            gain=float(ev.get("gain", 1.0)),
            simulate_device=bool(ev.get("simulate_device", True)),
        )
        ex = _section(d, "export")
        export = ExportSettings(
            lens_focal_length=_opt(ex.get("lens_focal_length_mm"), 1e-3),
            focus_shift=_opt(ex.get("focus_shift_um"), 1e-6),
            rotate_deg=int(ex.get("rotate_deg", 0)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid config value: {e}") from e

    traps = d.get("traps")
    traps_path = None
    if isinstance(traps, str):
        traps_path = base_dir / traps
        if not traps_path.is_file():
            raise ConfigurationError(f"trap file not found: {traps_path}")
        try:
            traps = TrapSpec.load(traps_path)
        except HologramIOError as e:
            raise ConfigurationError(str(e)) from e
    elif isinstance(traps, dict):
        traps = TrapSpec.from_dict(traps)
    elif traps is not None:
        raise ConfigurationError("'traps' must be a file path or an inline trap spec")

    return RunConfig(
        system=system,
        device=device,
        beam=beam,
        solver=solver,
        traps=traps,
        traps_path=traps_path,
        loading=loading,
        evaluation=evaluation,
        export=export,
        output_dir=base_dir / d.get("output_dir", "out"),
    )


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}") from e
    return parse_config(d, path.parent)
