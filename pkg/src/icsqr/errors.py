"""Exception hierarchy.

Errors deriving from :class:`NumericalError` describe numerical failures that
are part of the expected behaviour on ill-conditioned data (the CLI maps them
to exit code 2). Everything else is a usage or input problem.
"""


class IcsError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(IcsError, ValueError):
    pass


class NonFiniteInput(IcsError, ValueError):
    pass


class NotSorted(IcsError, ValueError):
    pass


class UnreachableCondition(IcsError, ValueError):
    pass


class NumericalError(IcsError, ArithmeticError):
    """A computation that is mathematically undefined or numerically impossible."""


class ConvergenceError(NumericalError):
    pass


class SingularTriangular(NumericalError):
    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"triangular factor has a zero diagonal at index {self.index}")


class SingularCovariance(NumericalError):
    """The covariance matrix is not numerically positive definite.

    Attributes
    ----------
    smallest_eigenvalue : float
    rcond : float
        Ratio of the smallest to the largest eigenvalue.
    index : int
        Position (in decreasing order) of the first eigenvalue below the
        threshold; everything from there on is treated as numerically zero.
    """

    def __init__(self, smallest_eigenvalue, rcond, index, message=None):
        self.smallest_eigenvalue = float(smallest_eigenvalue)
        self.rcond = float(rcond)
        self.index = int(index)
        if message is None:
            message = (
                "covariance is computationally singular: "
                f"reciprocal condition number = {self.rcond:.6g} "
                f"(smallest eigenvalue {self.smallest_eigenvalue:.6g}, "
                f"gap opens at index {self.index})"
            )
        super().__init__(message)


class ZeroDistance(NumericalError):
    def __init__(self, indices, floor):
        self.indices = [int(i) for i in indices]
        self.floor = float(floor)
        shown = ", ".join(map(str, self.indices[:10]))
        more = "" if len(self.indices) <= 10 else f" (+{len(self.indices) - 10} more)"
        super().__init__(
            f"squared Mahalanobis distance <= {self.floor:.3g} for observations "
            f"[{shown}]{more}; negative-power weights are undefined there"
        )


class RankDeficient(NumericalError):
    def __init__(self, decision):
        self.decision = decision
        super().__init__(
            f"data are numerically rank deficient: rank {decision.q} < {len(decision.r_diag_abs)} "
            f"(epsilon={decision.epsilon:g}, criterion={decision.criterion.value})"
        )


class DegenerateData(NumericalError):
    pass
