"""Exception types shared across the package."""


class NotSPDError(ValueError):
    """A matrix required to be symmetric positive-definite is not."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    The last residual (or iterate change) is kept on ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SearchBoundError(RuntimeError):
    """The A-NN direction search exceeded its hard cap."""


class FormatError(ValueError):
    """A file does not match the expected image or volume format."""


class InstabilityError(RuntimeError):
    """An explicit time step blew up; a smaller step is needed."""
