"""Exception types raised across holotrap."""


class HolotrapError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HolotrapError, ValueError):
    """Inconsistent grids, pitches, units or config files."""


class SamplingError(HolotrapError, ValueError):
    """A propagation distance exceeds the unaliased bound of the grid."""

    def __init__(self, message, max_distance=None):
        super().__init__(message)
        self.max_distance = max_distance


class TrapRangeError(HolotrapError, ValueError):
    """A trap lies outside the focal field of view."""


class InvalidTargetError(HolotrapError, ValueError):
    """Target amplitude carries no energy."""


class DeviceDamageError(HolotrapError, ValueError):
    """Beam intensity exceeds what the modulator withstands."""


class DetectionError(HolotrapError, ValueError):
    """No usable intensity maximum inside a trap window."""


class HologramIOError(HolotrapError, OSError):
    """Reading or writing an image/report file failed."""
