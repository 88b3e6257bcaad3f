"""Exception hierarchy shared by every gaul module."""


class GaulError(Exception):
    """Base class for all library errors."""


class DimensionError(GaulError, ValueError):
    """Input vector dimension does not match the target."""


class SingularityError(GaulError, ValueError):
    """Gradient requested at a point where the formula is singular."""


class DegeneratePriorError(GaulError, ValueError):
    """Sample covariance of the logistic design matrix is singular."""


class DegenerateSpectrumError(GaulError, ValueError):
    """Spectrum bounds do not define the requested quantity (e.g. s1 == sd)."""


class DiffusionIndefiniteError(GaulError, ValueError):
    """The symmetrised diffusion block is not positive semidefinite."""

    def __init__(self, coordinate, message):
        super().__init__(message)
        self.coordinate = coordinate


class DegenerateEigenvectorError(GaulError, ArithmeticError):
    """Closed-form eigenvector has a vanishing denominator."""


class NoFixedPointError(GaulError, ArithmeticError):
    """Discrete covariance map is not a contraction."""


class InstabilityError(GaulError, ArithmeticError):
    """Covariance integration left the PSD cone."""


class DomainError(GaulError, ValueError):
    """Metric evaluated outside its domain (non-SPD input, ...)."""


class EmptyHistogramError(GaulError, ValueError):
    """No sample fell inside the histogram box."""


class CatalogError(GaulError, KeyError):
    """Unknown experiment name or malformed experiment config."""


class SchemaError(GaulError, ValueError):
    """CSV file does not follow the expected schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DivergenceError(GaulError, ArithmeticError):
    """Sampler state became non-finite or exceeded the blow-up threshold.

    Attributes
    ----------
    step : int
        Index of the step whose update produced the bad state.
    snapshot : object or None
        Last finite ensemble (or partial trajectory) available to the caller.
    """

    def __init__(self, step, snapshot=None, message=None):
        super().__init__(message or f"sampler diverged at step {step}")
        self.step = step
        self.snapshot = snapshot
