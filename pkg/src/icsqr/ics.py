"""Invariant coordinate selection for the scatter pair cov / cov_w.

Two implementations are provided:

``ics_eigen``
    The classical route: spectral decomposition of the covariance, its
    symmetric inverse square root, and a second spectral decomposition of
    ``cov^{-1/2} cov_w cov^{-1/2}``. Fails (by design) as soon as the
    covariance is not numerically positive definite.

``ics_qr``
    Works from a pivoted QR factorization of the centered data and never
    forms the covariance or an inverse. Mahalanobis distances are leverage
    scores of the orthonormal factor, and the eigenproblem is solved through
    the SVD of the weighted orthonormal factor.

Both return an :class:`IcsResult` with ``B @ cov @ B.T = I`` and
``B @ cov_w @ B.T = diag(eigenvalues)``, eigenvalues in decreasing order.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, RankDeficient, ShapeError
from .linalg import (
    RankCriterion,
    _thin_svd,
    numerical_rank,
    _qr_bundle,
    solve_upper_triangular_transposed,
    truncate_reduce,
    urv_reduce,
)
from .scatter import (
    CenteredData,
    WeightSpec,
    center,
    check_positive_definite,
    cov_w,
    covariance,
)


class Algorithm(str, enum.Enum):
    EIGEN = "eigen"
    QR = "qr"


class Reduction(str, enum.Enum):
    URV = "urv"
    TRUNCATE = "truncate"
    NONE = "none"


class SignConvention(str, enum.Enum):
    MAX_ABS_POSITIVE = "max_abs_positive"
    NONE = "none"


@dataclass(frozen=True)
class IcsOptions:
    weight: WeightSpec = field(default_factory=WeightSpec)
    row_pivot: bool = True
    rank_epsilon: float = 1e-8
    rank_criterion: RankCriterion = RankCriterion.LEADING
    reduction: Reduction = Reduction.URV
    sign_convention: SignConvention = SignConvention.MAX_ABS_POSITIVE
    # adjacent eigenvalues closer than this (relative) are reported, not separated
    gap_tolerance: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.rank_epsilon < 1.0:
            raise ValueError(f"rank_epsilon must lie in (0, 1), got {self.rank_epsilon}")
        object.__setattr__(self, "rank_criterion", RankCriterion(self.rank_criterion))
        object.__setattr__(self, "reduction", Reduction(self.reduction))
        object.__setattr__(self, "sign_convention", SignConvention(self.sign_convention))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Diagnostics:
    condition_estimate: float
    min_relative_gap: float
    near_equal_pairs: tuple
    gap_tolerance: float

    @property
    def near_equal(self):
        return bool(self.near_equal_pairs)

    def to_dict(self):
        return {
            "condition_estimate": float(self.condition_estimate),
            "min_relative_gap": float(self.min_relative_gap),
            "near_equal_pairs": [list(p) for p in self.near_equal_pairs],
            "gap_tolerance": float(self.gap_tolerance),
            "near_equal": self.near_equal,
        }


@dataclass(frozen=True)
class IcsResult:
    eigenvalues: np.ndarray
    unmixing: np.ndarray
    scores: np.ndarray
    algorithm: Algorithm
    rank_used: int
    col_perm: np.ndarray
    diagnostics: Diagnostics

    @property
    def p(self):
        return self.unmixing.shape[0]


def _diagnostics(eigenvalues, condition, tol):
    lam = np.asarray(eigenvalues)
    if lam.size < 2:
        return Diagnostics(float(condition), np.inf, (), tol)
    scale = np.maximum(np.abs(lam[:-1]), np.finfo(float).tiny)
    gaps = (lam[:-1] - lam[1:]) / scale
    pairs = tuple((int(i), int(i) + 1) for i in np.flatnonzero(gaps < tol))
    return Diagnostics(float(condition), float(gaps.min()), pairs, tol)


def _row_signs(b):
    # np.argmax returns the first maximiser, so magnitude ties go to the lowest column
    lead = b[np.arange(b.shape[0]), np.argmax(np.abs(b), axis=1)]
    return np.where(lead < 0, -1.0, 1.0)


def fix_signs(result):
    """Make the largest-magnitude entry of every row of ``B`` positive.

    Rows of ``B`` and ``Z`` are negated together; on magnitude ties the
    lowest column index decides. Idempotent.
    """
    b = result.unmixing
    signs = _row_signs(b)
    return dataclasses.replace(
        result,
        unmixing=b * signs[:, None],
        scores=result.scores * signs[:, None],
    )


def _finish(result, opts):
    if opts.sign_convention is SignConvention.MAX_ABS_POSITIVE:
        return fix_signs(result)
    return result


def ics_eigen(cd, opts=None):
    """Classical ICS through two spectral decompositions.

    Every step works on explicitly formed matrices: the covariance, its
    inverse (for the Mahalanobis distances inside cov_w), its symmetric
    inverse square root, and ``M = cov^{-1/2} cov_w cov^{-1/2}``.

    Raises
    ------
    SingularCovariance
        When an eigenvalue of the covariance is at or below
        ``p * eps * lambda_max``.
    """
    opts = opts or IcsOptions()
    xc = cd.xc
    p, n = xc.shape

    cov = covariance(cd)
    lam1, u1 = np.linalg.eigh(cov)
    check_positive_definite(lam1, p)
    cov_inv = (u1 / lam1) @ u1.T
    cov_inv_sqrt = (u1 / np.sqrt(lam1)) @ u1.T

    d2 = np.einsum("ij,ij->j", xc, cov_inv @ xc)
    scatter_w = cov_w(cd, d2, opts.weight)

    m = cov_inv_sqrt @ scatter_w @ cov_inv_sqrt
    lam2, u2 = np.linalg.eigh(0.5 * (m + m.T))
    lam2, u2 = lam2[::-1], u2[:, ::-1]

    b = u2.T @ cov_inv_sqrt
    z = b @ xc
    result = IcsResult(
        eigenvalues=lam2,
        unmixing=b,
        scores=z,
        algorithm=Algorithm.EIGEN,
        rank_used=p,
        col_perm=np.arange(p),
        diagnostics=_diagnostics(lam2, np.sqrt(lam1[-1] / lam1[0]), opts.gap_tolerance),
    )
    return _finish(result, opts)


def _factor(cd, row_pivot):
    """Pivoted QR of ``xc.T / sqrt(n-1)``; the scalar is applied to ``R``
    after factoring ``xc.T``, which leaves ``Q`` and both permutations unchanged."""
    # xc comes from center(), which has already validated it
    qr = _qr_bundle(cd.xc.T, column_pivot=True, row_pivot=row_pivot)
    scale = 1.0 / np.sqrt(cd.n_obs - 1.0)
    return dataclasses.replace(qr, r_factor=qr.r_factor * scale, r_diag_abs=qr.r_diag_abs * scale)


def _equilibrated(cd):
    """Row (variable) standard deviations used to make the rank scan
    insensitive to the units of measurement; zero rows keep scale 1."""
    sd = np.sqrt(np.einsum("ij,ij->i", cd.xc, cd.xc) / (cd.n_obs - 1))
    return np.where(sd > 0, sd, 1.0)


def detect_rank(cd, opts=None):
    """Rank scan of the centered data with each variable scaled to unit
    standard deviation.

    Returns ``(decision, qr, scale)`` where ``qr`` factors
    ``diag(1/scale) @ xc`` (transposed, divided by ``sqrt(n-1)``).

    Raises
    ------
    DegenerateData
        If every observation is identical.
    """
    opts = opts or IcsOptions()
    scale = _equilibrated(cd)
    eq = CenteredData(xc=cd.xc / scale[:, None], location=cd.location / scale)
    if not np.any(eq.xc):
        raise DegenerateData("all observations are identical; the data have rank 0")
    qr = _factor(eq, opts.row_pivot)
    decision = numerical_rank(qr.r_diag_abs, opts.rank_epsilon, opts.rank_criterion)
    return decision, qr, scale


def _ics_qr_from_factor(cd, qr, opts):
    xc = cd.xc
    p, n = xc.shape
    # Q with its rows back in observation order: leverage scores, weights
    # and scores then need no further reindexing
    q = qr.q_original_rows()
    d2 = (n - 1) * np.einsum("ij,ij->i", q, q)
    root_w = opts.weight.sqrt(d2)

    _, sigma, u2 = _thin_svd(q * root_w[:, None], compute_u=False, overwrite=True)
    eigenvalues = (n - 1) / n * sigma**2

    b = np.empty((p, p))
    b[:, qr.col_perm] = solve_upper_triangular_transposed(qr.r_factor, u2).T
    if opts.sign_convention is SignConvention.MAX_ABS_POSITIVE:
        # same rule as fix_signs, applied to U2 so the n-sized scores are formed once
        signs = _row_signs(b)
        b *= signs[:, None]
        u2 = u2 * signs
    z = (np.sqrt(n - 1.0) * u2.T) @ q.T

    d = qr.r_diag_abs
    condition = d[0] / d[-1] if d[-1] > 0 else np.inf
    result = IcsResult(
        eigenvalues=eigenvalues,
        unmixing=b,
        scores=z,
        algorithm=Algorithm.QR,
        rank_used=p,
        col_perm=qr.col_perm.copy(),
        diagnostics=_diagnostics(eigenvalues, condition, opts.gap_tolerance),
    )
    return result


def ics_qr(cd, opts=None):
    """ICS from the pivoted QR factorization of ``xc.T / sqrt(n-1)``.

    Steps: factor with column (and optional row) pivoting; leverage scores
    give the squared Mahalanobis distances ``(n-1) q_i``; the thin SVD of
    ``diag(sqrt(w)) Q`` gives singular values ``s`` and right vectors ``U2``,
    with eigenvalues ``(n-1)/n * s**2``; ``B = (R^{-1} U2)'`` by back
    substitution and ``Z' = sqrt(n-1) Q U2``.

    With ``opts.reduction == NONE`` the data are first checked with the rank
    scan and :class:`RankDeficient` is raised if it fires. Otherwise no
    reduction happens here; see :func:`reduce_then_ics`.
    """
    opts = opts or IcsOptions()
    p, n = cd.xc.shape
    if n <= p:
        raise ShapeError(f"ICS needs more observations than variables, got n={n}, p={p}")
    if opts.reduction is Reduction.NONE:
        decision, _, _ = detect_rank(cd, opts)
        if decision.deficient:
            raise RankDeficient(decision)
    return _ics_qr_from_factor(cd, _factor(cd, opts.row_pivot), opts)


def reduce_then_ics(x, opts=None):
    """Center, detect the numerical rank and run :func:`ics_qr` on the data
    reduced to that rank.

    Returns ``(result, decision, basis)``. ``basis`` is ``p x q`` with
    ``xc ~= basis @ x_reduced``; unmixing directions of the reduced problem
    map back to the original variables as ``result.unmixing @ pinv(basis)``
    (for URV, whose basis has orthogonal columns up to the variable scaling,
    see :func:`unmixing_in_original_space`).
    """
    opts = opts or IcsOptions()
    cd = center(x)
    p, n = cd.xc.shape
    decision, qr, scale = detect_rank(cd, opts)
    if not decision.deficient:
        return ics_qr(cd, opts), decision, np.eye(p)
    if opts.reduction is Reduction.NONE:
        raise RankDeficient(decision)

    if opts.reduction is Reduction.URV:
        x_red, basis = urv_reduce(qr, decision, n)
        basis = basis * scale[:, None]
    else:
        x_red, kept = truncate_reduce(qr, decision, n)
        x_red = x_red * scale[kept][:, None]
        basis = np.zeros((p, decision.q))
        basis[kept, np.arange(decision.q)] = 1.0

    sub = opts.replace(reduction=Reduction.URV)
    result = ics_qr(center(x_red), sub)
    return result, decision, basis


def unmixing_in_original_space(result, basis):
    """``q x p`` matrix ``W`` with ``result.scores ~= W @ xc`` for the
    original centered data."""
    return result.unmixing @ np.linalg.pinv(basis)


def ics_distances(result, k):
    """Squared ICS distances from the first ``k`` invariant coordinates."""
    k = int(k)
    if not 1 <= k <= result.scores.shape[0]:
        raise ShapeError(f"k must lie in [1, {result.scores.shape[0]}], got {k}")
    z = result.scores[:k]
    return np.einsum("ij,ij->j", z, z)
