"""Exception hierarchy.

Validation problems (bad models, malformed files) derive from
:class:`ModelError`; numerical failures derive from :class:`NumericalError`.
The CLI maps the first family to exit code 1 and the second to exit code 2.
"""


class NetIdError(Exception):
    pass


class ModelError(NetIdError, ValueError):
    """Structurally invalid model, dataset or argument."""


class FormatError(ModelError):
    """Malformed input file; carries the file name and 1-based line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        super().__init__(where + message)


class DimensionError(ModelError):
    pass


class NumericalError(NetIdError, ArithmeticError):
    pass


class SimulationError(NumericalError):
    """The simulated network diverged (closed loop unstable)."""


class RankError(NumericalError):
    """Fewer usable rows than free parameters."""


class DegenerateDataError(NumericalError):
    """All singular values of the innovation covariance are negligible."""


class InconsistentRankError(NumericalError):
    """No node subset reaches the requested numerical rank."""


class ConvergenceError(NumericalError):
    """Iterative solver hit its iteration cap.

    ``last_iterate`` and ``kkt_residual`` describe where it stopped.
    """

    def __init__(self, message, last_iterate=None, kkt_residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.kkt_residual = kkt_residual


class StepError(NumericalError):
    """A step of the identification pipeline failed.

    ``partial`` holds the artifacts produced by the steps that completed.
    """

    def __init__(self, step, cause, partial=None):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause
        self.partial = partial if partial is not None else {}
