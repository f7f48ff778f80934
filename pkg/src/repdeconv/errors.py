"""Exception hierarchy shared across the package."""


class DeconvolutionError(Exception):
    """Base class for every error raised by repdeconv."""


class NonpositiveCF(DeconvolutionError):
    """A known characteristic function was nonpositive at a quadrature node."""


class NonpositiveDenominator(DeconvolutionError):
    """``cf_hat + rho`` was nonpositive at a quadrature node; regularize."""


class NoPairs(DeconvolutionError):
    """No group has two or more replicates, so the error CF is not estimable."""


class DegenerateError(DeconvolutionError):
    """The data carry no usable error (or signal) variance."""


class AllGuarded(DeconvolutionError):
    """The regression denominator is below the guard on the whole grid."""


class DegenerateWeights(DeconvolutionError):
    """Leave-one-out weights are degenerate for a candidate bandwidth."""


class AllDegenerate(DeconvolutionError):
    """Every bandwidth in a cross-validation search grid was excluded."""


class UnknownTarget(DeconvolutionError, ValueError):
    """Requested a simulation target that does not exist."""


class DomainMismatch(DeconvolutionError, ValueError):
    """An estimate grid does not cover the requested integration domain."""


class ParseError(DeconvolutionError, ValueError):
    """Malformed input file.

    Parameters
    ----------
    message : str
        What went wrong.
    line : int, optional
        1-based line number in the input file.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InconsistentY(ParseError):
    """A group's response differs between its replicate rows."""
