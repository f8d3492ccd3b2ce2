"""Control-Liouville dynamic mode decomposition (CLDMD)."""
from ._backend import BACKEND
from .exceptions import (CLDMDError, DivergenceError, InvalidArgumentError,
                         NumericFailureError, SchemaError, SingularMatrixError)

__version__ = "0.1.0"
