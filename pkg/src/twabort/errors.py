"""Exception types shared across the package."""


class TwabortError(Exception):
    """Base class for package-specific errors."""


class InvalidParameterError(TwabortError, ValueError):
    """An argument lies outside its documented domain."""


class ConstructionError(TwabortError, RuntimeError):
    """A geometry construction target could not be met."""


class AccuracyError(TwabortError, RuntimeError):
    """A numeric routine failed to reach its accuracy contract.

    Carries the best available estimate so callers can report it.
    """

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class ThresholdInversionError(TwabortError, RuntimeError):
    """Threshold inversion could not bracket or refine a root."""


class InsufficientTrialsError(TwabortError, ValueError):
    """Too few Monte Carlo trials for the requested quantile."""


class UnsupportedDetectorError(TwabortError, ValueError):
    """The detector has no closed-form operating characteristic."""


class ConfigError(TwabortError, ValueError):
    """Malformed experiment configuration."""
