"""Exception types shared across the package."""


class AiryBeamError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AiryBeamError):
    """Inconsistent grid, propagation or configuration settings."""


class DomainError(AiryBeamError, ValueError):
    """An argument lies outside the documented evaluation domain."""


class GeometryError(AiryBeamError, ValueError):
    """Scenario geometry is invalid (e.g. obstacle outside the link)."""


class InfeasibleDesignError(AiryBeamError):
    """The requested trajectory cannot be realised by any Airy beam."""


class DegenerateParameterError(AiryBeamError, ValueError):
    """Parameters at which a closed form is undefined (e.g. B = 0)."""


class DegenerateChannelError(AiryBeamError):
    """Channel matrix carries no energy."""


class OracleError(AiryBeamError):
    """A numerical reference computation failed to converge."""


class AliasingWarning(UserWarning):
    """Significant spectral power close to the grid Nyquist limit."""
