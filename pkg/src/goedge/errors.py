"""Exception hierarchy shared by all goedge modules."""


class GoEdgeError(Exception):
    """Base class for every error raised by goedge."""


class DomainError(GoEdgeError, ValueError):
    """An argument lies outside the domain where a model is defined."""


class IllConditionedSourceError(GoEdgeError, ValueError):
    """A Gaussian source covariance is singular or badly conditioned."""


class EmptyGridError(GoEdgeError, ValueError):
    """A source has no informative component, so no beta can be selected."""


class NumericalError(GoEdgeError, ArithmeticError):
    """A numerical routine failed (non-convergence, singular system...)."""


class FitError(GoEdgeError, ValueError):
    """The surrogate cannot be identified from the supplied samples."""


class ConfigError(GoEdgeError, ValueError):
    """Invalid scenario configuration.

    ``path`` is the dotted key path of the offending entry, e.g.
    ``devices[2].cpu.f_max``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
