"""Exception types shared across the package."""


class LungCadError(Exception):
    """Base class for package-specific failures."""


class PgmError(LungCadError):
    """Unreadable or malformed PGM data."""


class FcmDataError(LungCadError):
    """Clustering input cannot support the requested number of clusters."""


class NoLesionRegionError(LungCadError):
    """Clustering produced no candidate lesion region to segment."""


class EvolutionDivergedError(LungCadError):
    """Surface evolution produced non-finite values."""

    def __init__(self, iteration: int):
        self.iteration = iteration
        super().__init__(f"non-finite surface values at iteration {iteration}")


class FeatureFormatError(LungCadError):
    """Malformed feature file."""


class ModelFormatError(LungCadError):
    """Malformed model file."""


class ConfigError(LungCadError):
    """Invalid pipeline configuration."""
