"""Exception hierarchy shared by every perimid module."""


class PerimidError(Exception):
    """Base class for all errors raised by perimid."""


class ShapeError(PerimidError, ValueError):
    """Array shapes do not agree."""


class NumericsError(PerimidError):
    """A tensor operation produced NaN/Inf or was misused."""


class PreprocessingError(PerimidError, ValueError):
    """Invalid input to normalization, decomposition or interpolation."""


class SpectralError(PerimidError, ValueError):
    """Period detection cannot satisfy the request."""


class PyramidError(PerimidError, ValueError):
    """Invalid periodic pyramid construction."""


class ConfigurationError(PerimidError, ValueError):
    """Invalid or inconsistent configuration."""


class DataError(PerimidError, ValueError):
    """Malformed dataset input."""


class MetricsError(PerimidError, ValueError):
    """A metric is undefined for the given inputs."""


class TrainingError(PerimidError):
    """Training diverged or was given unusable inputs."""
