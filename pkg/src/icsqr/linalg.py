"""Dense kernels: pivoted Householder QR, Jacobi SVD, back substitution,
numerical rank detection and rank reductions.

Matrices are plain ``float64`` numpy arrays. Every public function validates
its input (2-D, non-empty, finite) and never modifies it.

A tall ``n x p`` matrix is factored in two stages: an unpivoted blocked
Householder QR (LAPACK ``dgeqrt``, compact WY form) yields a ``p x p``
triangular factor, and the Businger-Golub pivoted Householder QR runs on
that factor. Orthogonal transformations preserve the norm of every trailing
sub-column, so the pivot sequence is the one the single-stage algorithm
would choose. The orthonormal factor is the product of both reflector sets,
applied with ``dgemqrt``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg.lapack

from .errors import (
    ConvergenceError,
    NonFiniteInput,
    NotSorted,
    ShapeError,
    SingularTriangular,
)

EPS = np.finfo(np.float64).eps
MAX_JACOBI_SWEEPS = 30  # fixed inside LAPACK's dgesvj
# dgeqrt block sizes: smaller panels factor faster, wider ones apply Q faster
GEQRT_BLOCK_R = 16
GEQRT_BLOCK_Q = 32


def as_matrix(a, name="a"):
    """Return ``a`` as a finite 2-D float64 array (a copy is not forced)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    return arr


def invert_permutation(perm):
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


@dataclass(frozen=True)
class PivotedQR:
    """Factors of ``a[row_perm][:, col_perm] = q_factor @ r_factor``."""

    q_factor: np.ndarray
    r_factor: np.ndarray
    col_perm: np.ndarray
    row_perm: np.ndarray
    r_diag_abs: np.ndarray

    @property
    def shape(self):
        return self.q_factor.shape[0], self.r_factor.shape[1]

    def q_original_rows(self):
        """Q with its rows put back into the caller's observation order."""
        return _take_rows(self.q_factor, invert_permutation(self.row_perm))


class RankCriterion(str, enum.Enum):
    SUCCESSIVE = "successive"  # |R[q+1,q+1]| < eps * |R[q,q]|
    LEADING = "leading"  # |R[q+1,q+1]| < eps * |R[1,1]|


@dataclass(frozen=True)
class RankDecision:
    q: int
    epsilon: float
    criterion: RankCriterion
    r_diag_abs: np.ndarray

    @property
    def p(self):
        return int(self.r_diag_abs.size)

    @property
    def deficient(self):
        return self.q < self.p

    def to_dict(self):
        return {
            "q": int(self.q),
            "epsilon": float(self.epsilon),
            "criterion": self.criterion.value,
            "r_diag_abs": [float(v) for v in self.r_diag_abs],
        }


def row_presort_linf(a):
    """Permutation sorting the rows of ``a`` by non-increasing infinity norm.

    The sort is stable, so rows with equal norms keep their original order.
    """
    a = as_matrix(a)
    return _presort(a)


def _presort(a):
    keys = -np.max(np.abs(a), axis=1)
    order = np.argsort(keys)
    # an unstable sort is only wrong where keys tie; redo those inputs stably
    if np.any(np.diff(keys[order]) == 0.0):
        order = np.argsort(keys, kind="stable")
    return order


def _householder_qr(a, column_pivot=True, want_q=True):
    """Householder QR of an ``m x p`` array (``m >= p``) with optional
    Businger-Golub column pivoting.

    Pivoting follows LAPACK ``dgeqp3``: at step ``k`` the remaining column
    of largest partial norm is swapped into position ``k`` (ties go to the
    first such column); partial norms are downdated and recomputed from
    scratch once the downdated value has lost about half its digits.

    Returns ``(q, r, perm)`` with ``a[:, perm] = q @ r``; ``q`` is ``m x p``
    (``None`` when ``want_q`` is false).
    """
    m, p = a.shape
    if column_pivot:
        qr, jpvt, tau, _, info = scipy.linalg.lapack.dgeqp3(a)
        perm = np.asarray(jpvt, dtype=np.intp) - 1
    else:
        qr, tau, _, info = scipy.linalg.lapack.dgeqrf(a)
        perm = np.arange(p)
    if info != 0:
        raise ValueError(f"Householder QR rejected argument {-info}")
    r = np.triu(qr[:p, :])
    if not want_q:
        return None, r, perm
    q, _, info = scipy.linalg.lapack.dorgqr(qr[:, :p], tau)
    if info != 0:
        raise ValueError(f"dorgqr rejected argument {-info}")
    return q, r, perm


def _blocked_qr(a, block=GEQRT_BLOCK_R, overwrite=False):
    """Unpivoted Householder QR of a tall matrix; returns the reflectors
    ``v`` and block factors ``t`` as LAPACK ``dgeqrt`` stores them.
    With ``overwrite`` a Fortran-ordered ``a`` is factored in place."""
    p = a.shape[1]
    v, t, info = scipy.linalg.lapack.dgeqrt(min(block, p), np.asfortranarray(a), overwrite_a=int(overwrite))
    if info != 0:
        raise ValueError(f"dgeqrt rejected argument {-info}")
    return v, t


def _take_rows(a, rows):
    # keep Fortran order so LAPACK does not copy again
    if a.flags.f_contiguous:
        return np.take(a.T, rows, axis=1).T
    return a[rows]


def _qr_pivoted(a, column_pivot=True, row_pivot=False, want_q=True):
    n, p = a.shape
    if n < p:
        raise ShapeError(f"need at least as many rows as columns, got {n} x {p}")
    row_perm = _presort(a) if row_pivot else np.arange(n)
    rows = _take_rows(a, row_perm) if row_pivot else a

    if n == p:
        q, r, col_perm = _householder_qr(rows, column_pivot=column_pivot, want_q=want_q)
        return q, r, col_perm, row_perm

    v, t = _blocked_qr(rows, GEQRT_BLOCK_Q if want_q else GEQRT_BLOCK_R, overwrite=row_pivot)
    r0 = np.triu(v[:p])
    if column_pivot:
        q2, r, col_perm = _householder_qr(r0, column_pivot=True, want_q=want_q)
    else:
        q2, r, col_perm = np.eye(p), r0, np.arange(p)
    if not want_q:
        return None, r, col_perm, row_perm

    c = np.zeros((n, p), order="F")
    c[:p] = q2
    q, info = scipy.linalg.lapack.dgemqrt(v, t, c, side="L", trans="N", overwrite_c=1)
    if info != 0:
        raise ValueError(f"dgemqrt rejected argument {-info}")
    return q, r, col_perm, row_perm


def qr_pivoted(a, column_pivot=True, row_pivot=False):
    """Householder QR with Businger-Golub column pivoting and optional row presort.

    Parameters
    ----------
    a : array_like, shape (n, p), n >= p
    column_pivot : bool
        At step ``k`` bring the remaining column of largest 2-norm (restricted
        to rows ``k:``) to the pivot position; ties go to the smallest index.
    row_pivot : bool
        Presort rows by decreasing infinity norm before eliminating.

    Returns
    -------
    PivotedQR
        With ``a[row_perm][:, col_perm] == q_factor @ r_factor`` and, when
        column pivoting is on, ``|R[i,i]| >= ||R[i:j+1, j]||`` for ``i <= j``.
    """
    a = as_matrix(a)
    return _qr_bundle(a, column_pivot, row_pivot)


def _qr_bundle(a, column_pivot, row_pivot):
    q, r, col_perm, row_perm = _qr_pivoted(a, column_pivot, row_pivot)
    return PivotedQR(
        q_factor=q,
        r_factor=r,
        col_perm=col_perm,
        row_perm=row_perm,
        r_diag_abs=np.abs(np.diag(r)),
    )


def thin_svd(a, compute_u=True):
    """Economy SVD ``a = u @ diag(sigma) @ v.T`` of an ``n x p`` matrix, ``n >= p``.

    A Householder QR reduces ``a`` to its ``p x p`` triangular factor ``R``;
    the columns of ``R`` are then orthogonalized by preconditioned one-sided
    Jacobi rotations (LAPACK ``dgejsv`` with ``JOBA='C'``, which first applies
    its own column-pivoted QR; at most 30 sweeps). Singular values come back
    non-increasing, and small ones keep high relative accuracy when ``a`` is
    a well-conditioned matrix with arbitrarily scaled columns.

    Returns ``(u, sigma, v)``; ``u`` is ``None`` when ``compute_u`` is false.

    Raises
    ------
    ConvergenceError
        If the Jacobi iteration does not converge within its sweep cap.
    """
    a = as_matrix(a)
    n, p = a.shape
    if n < p:
        raise ShapeError(f"thin_svd needs n >= p, got {n} x {p}")
    return _thin_svd(a, compute_u)


def _thin_svd(a, compute_u, overwrite=False):
    n, p = a.shape
    if n > p:
        v0, t0 = _blocked_qr(a, GEQRT_BLOCK_Q if compute_u else GEQRT_BLOCK_R, overwrite)
        r = np.triu(v0[:p])
    else:
        r = a

    if not np.any(r):
        sigma, u_r, v = np.zeros(p), np.eye(p), np.eye(p)
    else:
        # JOBA='C' (0): accuracy unaffected by column scaling; JOBU 'F' (1) / 'N' (3)
        sva, u_r, v, work, _, info = scipy.linalg.lapack.dgejsv(
            r, joba=0, jobu=1 if compute_u else 3, jobv=0
        )
        if info > 0:
            raise ConvergenceError(
                f"one-sided Jacobi SVD did not converge in {MAX_JACOBI_SWEEPS} sweeps (info={info})"
            )
        if info < 0:
            raise ValueError(f"dgejsv rejected argument {-info}")
        sigma = sva * (work[0] / work[1])

    order = np.argsort(-sigma, kind="stable")
    sigma = np.asarray(sigma[order], dtype=np.float64)
    v = np.asarray(v[:, order], dtype=np.float64)
    if not compute_u:
        return None, sigma, v
    u_r = u_r[:, order]
    if n == p:
        return np.array(u_r, dtype=np.float64), sigma, v
    c = np.zeros((n, p), order="F")
    c[:p] = u_r
    u, info = scipy.linalg.lapack.dgemqrt(v0, t0, c, side="L", trans="N", overwrite_c=1)
    return u, sigma, v


def solve_upper_triangular_transposed(r, rhs):
    """Back substitution: return ``X`` with ``r @ X = rhs``.

    ``r`` must be upper triangular with a non-zero diagonal; no inverse is
    formed. In the QR route the unmixing matrix is ``X.T`` for
    ``rhs = U2``, hence the name.
    """
    r = as_matrix(r, "r")
    p = r.shape[0]
    if r.shape != (p, p):
        raise ShapeError(f"r must be square, got {r.shape}")
    rhs = np.asarray(rhs, dtype=np.float64)
    vector = rhs.ndim == 1
    b = rhs.reshape(p, -1) if vector else as_matrix(rhs, "rhs")
    if b.shape[0] != p:
        raise ShapeError(f"rhs has {b.shape[0]} rows, r is {p} x {p}")
    diag = np.diag(r)
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        raise SingularTriangular(zero[0])

    x = np.empty_like(b)
    for i in range(p - 1, -1, -1):
        x[i] = (b[i] - r[i, i + 1 :] @ x[i + 1 :]) / diag[i]
    return x.ravel() if vector else x


def numerical_rank(r_diag_abs, epsilon=1e-8, criterion=RankCriterion.LEADING):
    """Scan ``|R_11| >= |R_22| >= ...`` for the first index that drops below
    the tolerance; the rank is the number of entries before it."""
    d = np.abs(np.asarray(r_diag_abs, dtype=np.float64).ravel())
    if d.size == 0:
        raise ShapeError("empty diagonal")
    if not np.isfinite(d).all():
        raise NonFiniteInput("diagonal contains NaN or infinite entries")
    criterion = RankCriterion(criterion)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    bad = np.flatnonzero(d[1:] > d[:-1] * (1.0 + 1e-12))
    if bad.size:
        i = int(bad[0])
        raise NotSorted(f"|R| diagonal increases at position {i + 1}: {d[i]:g} -> {d[i + 1]:g}")

    q = d.size
    for i in range(1, d.size):
        ref = d[i - 1] if criterion is RankCriterion.SUCCESSIVE else d[0]
        if d[i] < epsilon * ref:
            q = i
            break
    return RankDecision(q=q, epsilon=float(epsilon), criterion=criterion, r_diag_abs=d)


def _check_reduction(qr, rank):
    p = qr.r_factor.shape[1]
    if rank.r_diag_abs.size != p:
        raise ShapeError("rank decision does not belong to this factorization")
    if not 1 <= rank.q < p:
        raise ShapeError(f"reduction needs 1 <= q < p, got q={rank.q}, p={p}")
    return rank.q


def urv_reduce(qr, rank, n_obs):
    """Place the data in the ``q``-dimensional subspace found by the rank scan.

    With ``Xc.T / sqrt(n-1)`` factored as in :func:`qr_pivoted`, the block
    ``[R11.T; R12.T]`` (``p x q``) is factored again with column pivoting as
    ``Omega1 @ T``. Returns ``(x_reduced, basis)`` where
    ``x_reduced = sqrt(n-1) * T @ P3.T @ Q1.T`` is ``q x n`` in the original
    observation order and ``basis`` (``p x q``, orthonormal columns) gives
    ``Xc ~= basis @ x_reduced``.
    """
    q = _check_reduction(qr, rank)
    r = qr.r_factor
    stacked = np.vstack([r[:q, :q].T, r[:q, q:].T])
    second = qr_pivoted(stacked, column_pivot=True)
    q1 = qr.q_original_rows()[:, :q]
    x_reduced = np.sqrt(n_obs - 1.0) * (second.r_factor @ q1[:, second.col_perm].T)
    basis = np.empty_like(second.q_factor)
    basis[qr.col_perm] = second.q_factor
    return x_reduced, basis


def truncate_reduce(qr, rank, n_obs):
    """Keep the ``q`` variables the column pivoting selected first.

    Returns ``(x_reduced, kept_vars)`` with ``x_reduced = sqrt(n-1) * R11.T @ Q1.T``,
    i.e. (up to rounding) the centered rows ``kept_vars`` of the data.
    """
    q = _check_reduction(qr, rank)
    q1 = qr.q_original_rows()[:, :q]
    x_reduced = np.sqrt(n_obs - 1.0) * (qr.r_factor[:q, :q].T @ q1.T)
    return x_reduced, qr.col_perm[:q].copy()
