"""Exception hierarchy shared by the numerical core, the lab and the front ends."""


class ResourceTheoryError(ValueError):
    """Base class for every rejection raised by this package."""


class OperatorError(ResourceTheoryError):
    pass


class NotHermitianError(OperatorError):
    pass


class NotPositiveError(OperatorError):
    pass


class TraceError(OperatorError):
    pass


class LayoutError(ResourceTheoryError):
    """Tensor-factor dimensions, index sets or partitions do not fit together."""


class SupportViolationError(ResourceTheoryError):
    """An operator carries weight outside the support of another one."""


class OracleError(ResourceTheoryError):
    """A linear-minimisation oracle (or the solver around it) failed to converge.

    ``bracket`` is the best ``(lower, upper)`` pair known when the failure
    happened, ``residual`` the subsolver's last primal-dual gap.
    """

    def __init__(self, message, residual=None, bracket=None):
        super().__init__(message)
        self.residual = residual
        self.bracket = bracket


class SamplingError(ResourceTheoryError):
    pass


class SequenceError(ResourceTheoryError):
    """A generated sequence violates the premise it was constructed for."""


class ManifestError(ResourceTheoryError):
    """A state file or experiment manifest failed validation.

    ``row``/``col`` locate the first offending matrix entry when known.
    """

    def __init__(self, message, row=None, col=None):
        if row is not None:
            message = f"{message} (row {row}, col {col})"
        super().__init__(message)
        self.row = row
        self.col = col
