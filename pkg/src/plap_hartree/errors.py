"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An equation instance violates one of its admissibility constraints."""


class RootDegeneracyError(ParameterError):
    """The two decay exponents collapse (mu >= mu_bar)."""


class NonConvergenceError(RuntimeError):
    """An iteration hit its cap before meeting its stopping rule.

    ``report`` and ``profile`` carry whatever partial result was produced.
    """

    def __init__(self, message, report=None, profile=None):
        super().__init__(message)
        self.report = report
        self.profile = profile


class DivergenceError(ArithmeticError):
    """A Riesz potential or weighted integral is infinite.

    Raised when the fitted tail exponent of ``g`` does not exceed ``N - nu``
    (the convolution with ``|x|^-nu`` is then identically ``+inf``).
    """


class PositivityLossError(RuntimeError):
    """Too many nodes went negative during a descent step."""


class ProfileFormatError(ValueError):
    """Malformed profile CSV (non-monotone radii, negative or NaN values)."""
