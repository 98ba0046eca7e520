"""Exception types shared across the package."""


class RobustVmcError(Exception):
    """Base class for all package errors."""


class ValidationError(RobustVmcError, ValueError):
    """An input violates a documented invariant (shape, Hermiticity, PSD, trace)."""


class NumericIntegrityError(RobustVmcError):
    """A quantity that must be real/bounded came out numerically corrupted."""


class ZeroProbabilityError(RobustVmcError):
    """Conditioning on a measurement branch with probability below 1e-12."""


class DegenerateParameterError(RobustVmcError):
    """Variational parameters map to an unnormalizable reconstruction."""


class DecompositionSingularError(RobustVmcError):
    """A diagonal partial sum vanished; the canonical decomposition does not exist."""


class ChannelViolationError(RobustVmcError):
    """Entropy production came out below -1e-6, impossible for a valid channel."""


class EnumerationSizeError(RobustVmcError):
    """An exact enumeration was requested over too many basis states."""


class InverseSqrtError(RobustVmcError):
    """A matrix inverse square root hit an invalid (negative) eigenvalue."""


class SamplerDegeneracyError(RobustVmcError):
    """The sweep drew a measurement branch with probability below 1e-12."""

    def __init__(self, site, message=None):
        self.site = site
        super().__init__(message or f"zero-probability branch at site {site}")


class ReplayDegeneracyError(RobustVmcError):
    """A forced outcome has probability below 1e-12 under the replayed model."""

    def __init__(self, site, coordinate=None, message=None):
        self.site = site
        self.coordinate = coordinate
        extra = f" (parameter coordinate {coordinate})" if coordinate is not None else ""
        super().__init__(message or f"forced outcome has vanishing probability at site {site}{extra}")


class LineSearchError(RobustVmcError):
    """Every line-search candidate failed to evaluate."""


class ConfigError(RobustVmcError):
    """Experiment configuration file is malformed or inconsistent."""
