"""Exception and warning classes raised by the engine."""


class DipoleCavityError(Exception):
    """Base class for all engine errors."""


class NonConvergence(DipoleCavityError):
    """A quadrature or iteration exhausted its budget above tolerance."""


class SingularInterval(DipoleCavityError):
    """A non-finite integrand sample was met at an unannotated abscissa."""


class PoleTooCloseToEndpoint(DipoleCavityError):
    """A simple pole sits within resolution of an interval endpoint."""


class TailNotDecaying(DipoleCavityError):
    """Truncation doubling did not shrink a semi-infinite integral's tail."""


class SeriesDiverging(DipoleCavityError):
    """Series terms grew three times in a row after the minimum term count."""


class DomainError(DipoleCavityError, ValueError):
    """An argument lies outside the domain of the operation."""


class GeometryError(DipoleCavityError, ValueError):
    """The cavity geometry is invalid or unsuitable for the request."""


class GridTooCoarse(DipoleCavityError):
    """A tabulated function fails its leave-one-out interpolation check."""


class ResummationDiverges(DipoleCavityError):
    """The geometric resummation ratio reaches or exceeds one in modulus."""


class DivisionByZero1PI(DipoleCavityError, ZeroDivisionError):
    """The irreducible pseudo-susceptibility vanishes at a grid point."""


class NoSignChange(DipoleCavityError):
    """The resonance residual keeps its sign across the bracket."""


class NegativeRate(DipoleCavityError):
    """A decay rate came out negative (convention or convergence bug)."""


class FixedPointNotConverging(DipoleCavityError):
    """Self-consistent resonance iteration hit its cap."""


class IllConditionedFit(DipoleCavityError):
    """Least-squares design matrix is too ill-conditioned to trust."""


class ConfigError(DipoleCavityError, ValueError):
    """Scenario configuration is missing fields or holds invalid values.

    Parameters
    ----------
    key : str
        Dotted path of the offending configuration entry.
    message : str
        Human readable description.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ColumnNotFound(DipoleCavityError, KeyError):
    """A requested result column does not exist."""


class MultipleRootsWarning(UserWarning):
    """More than one sign change of the resonance residual was found."""


class ResummationWarning(UserWarning):
    """The resummation ratio is large enough to make the closed form doubtful."""


class ValidityWarning(UserWarning):
    """Parameters are outside the regime where the model is justified."""
