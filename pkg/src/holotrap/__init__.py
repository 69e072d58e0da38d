"""Design and evaluation of holographic optical dipole-trap arrays."""

from .errors import (
    ConfigurationError,
    DetectionError,
    DeviceDamageError,
    HologramIOError,
    HolotrapError,
    InvalidTargetError,
    SamplingError,
    TrapRangeError,
)
from .optics import (
    ComplexField,
    OpticalSystem,
    fresnel_propagate,
    max_propagation_distance,
    propagate_to_focal,
    propagate_to_slm,
)
from .physics import (
    LoadingModel,
    OccupancyStats,
    TrapReport,
    estimate_waist,
    evaluate,
    load_sim,
    peak_intensity,
    position_precision,
    trap_spacing,
    waist_ratio_from_thresholds,
)
from .slm import (
    BeamProfile,
    DeviceModel,
    add_lens_phase,
    apply_device,
    export_hologram,
    import_hologram,
    max_phase,
)
from .solver import ConvergenceReport, PhaseMask, SolverConfig, gs_step, solve
from .target import Trap, TrapSpec, build_target, snap_traps

__version__ = "0.1.0"
