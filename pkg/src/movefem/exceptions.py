"""Exception types shared across the solver."""


class MoveFemError(Exception):
    """Base class for all solver errors."""


class PartitionError(MoveFemError, ValueError):
    """Invalid partition data: bad bounds, too few elements, or unordered nodes."""


class DomainError(MoveFemError, ValueError):
    """An evaluation point lies outside the function's domain."""


class DegenerateMeshError(MoveFemError):
    """An element length collapsed below the hard degeneracy threshold."""


class NotPositiveDefiniteError(MoveFemError):
    """Symmetric factorization failed; the dissipation system is degenerate."""


class StepFloorError(MoveFemError):
    """The time step was halved past the configured limit without acceptance."""


class UnknownPresetError(MoveFemError, KeyError):
    """Requested experiment preset does not exist."""


class ConfigError(MoveFemError, ValueError):
    """Malformed experiment configuration."""
