"""Invariant coordinate selection for the cov / cov_w scatter pair.

Two routes are provided: the classical one built on spectral decompositions
of the covariance matrix (:func:`ics_eigen`) and a pivoted-QR route that
never forms the covariance or its inverse (:func:`ics_qr`), together with
rank-revealing dimension reduction (:func:`reduce_then_ics`).
"""

from .errors import (
    ConvergenceError,
    DegenerateData,
    IcsError,
    NonFiniteInput,
    NotSorted,
    NumericalError,
    RankDeficient,
    ShapeError,
    SingularCovariance,
    SingularTriangular,
    UnreachableCondition,
    ZeroDistance,
)
from .linalg import (
    PivotedQR,
    RankCriterion,
    RankDecision,
    numerical_rank,
    qr_pivoted,
    row_presort_linf,
    solve_upper_triangular_transposed,
    thin_svd,
    truncate_reduce,
    urv_reduce,
)
from .scatter import (
    CenteredData,
    WeightKind,
    WeightSpec,
    ZeroPolicy,
    center,
    cov_w,
    covariance,
    leverage_scores,
    mahalanobis_sq_explicit,
)
from .ics import (
    Algorithm,
    Diagnostics,
    IcsOptions,
    IcsResult,
    Reduction,
    SignConvention,
    detect_rank,
    fix_signs,
    ics_distances,
    ics_eigen,
    ics_qr,
    reduce_then_ics,
    unmixing_in_original_space,
)

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "center",
    "CenteredData",
    "ConvergenceError",
    "cov_w",
    "covariance",
    "DegenerateData",
    "detect_rank",
    "Diagnostics",
    "fix_signs",
    "ics_distances",
    "ics_eigen",
    "ics_qr",
    "IcsError",
    "IcsOptions",
    "IcsResult",
    "leverage_scores",
    "mahalanobis_sq_explicit",
    "NonFiniteInput",
    "NotSorted",
    "numerical_rank",
    "NumericalError",
    "PivotedQR",
    "qr_pivoted",
    "RankCriterion",
    "RankDecision",
    "RankDeficient",
    "reduce_then_ics",
    "Reduction",
    "row_presort_linf",
    "ShapeError",
    "SignConvention",
    "SingularCovariance",
    "SingularTriangular",
    "solve_upper_triangular_transposed",
    "thin_svd",
    "truncate_reduce",
    "unmixing_in_original_space",
    "UnreachableCondition",
    "urv_reduce",
    "WeightKind",
    "WeightSpec",
    "ZeroDistance",
    "ZeroPolicy",
]
