"""Exception hierarchy shared across the package."""


class CLDMDError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CLDMDError, ValueError):
    """Argument has the wrong shape, sign or dimension."""


class SchemaError(CLDMDError, ValueError):
    """Input files or configs violate the expected layout."""


class SingularMatrixError(CLDMDError, ArithmeticError):
    """A linear system could not be solved reliably.

    Usually a Gram matrix that is not positive definite; increasing the
    regularization coefficients is the standard remedy.
    """


class NumericFailureError(CLDMDError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class DivergenceError(CLDMDError, ArithmeticError):
    """A simulated or predicted trajectory escaped the admissible region.

    Attributes
    ----------
    last_state : numpy.ndarray or None
        Last finite state before the escape.
    time : float or None
        Time of the last finite state.
    """

    def __init__(self, message, last_state=None, time=None):
        super().__init__(message)
        self.last_state = last_state
        self.time = time
