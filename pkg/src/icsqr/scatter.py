"""Location and scatter estimators: centering, covariance, Mahalanobis
distances (explicit and via leverage scores) and one-step M-scatter cov_w.

Data matrices are ``p x n``: variables in rows, observations in columns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, SingularCovariance, ZeroDistance
from .linalg import EPS, as_matrix, thin_svd


@dataclass(frozen=True)
class CenteredData:
    xc: np.ndarray
    location: np.ndarray

    @property
    def p_vars(self):
        return self.xc.shape[0]

    @property
    def n_obs(self):
        return self.xc.shape[1]


def center(x):
    """Subtract the row means of a ``p x n`` data matrix."""
    x = as_matrix(x, "x")
    if x.shape[1] < 2:
        raise ShapeError(f"need at least 2 observations, got {x.shape[1]}")
    location = x.mean(axis=1)
    xc = x - location[:, None]
    xc.setflags(write=False)
    location.setflags(write=False)
    return CenteredData(xc=xc, location=location)


def _symmetrize(s):
    return 0.5 * (s + s.T)


def covariance(cd):
    """Empirical covariance ``xc @ xc.T / (n - 1)``, exactly symmetric."""
    xc = cd.xc
    return _symmetrize(xc @ xc.T / (cd.n_obs - 1))


def leverage_scores(qr):
    """Squared row norms of the orthonormal factor, in original observation order.

    For ``qr`` computed from ``xc.T / sqrt(n-1)`` the squared Mahalanobis
    distance of observation ``i`` is ``(n - 1) * scores[i]``.
    """
    lev = np.einsum("ij,ij->i", qr.q_factor, qr.q_factor)
    out = np.empty_like(lev)
    out[qr.row_perm] = lev
    return out


def check_positive_definite(eigenvalues, p):
    """Raise :class:`SingularCovariance` unless every eigenvalue exceeds
    ``p * eps * lambda_max``. ``eigenvalues`` may be in any order."""
    lam = np.sort(np.asarray(eigenvalues, dtype=np.float64))[::-1]
    lam_max = lam[0]
    threshold = p * EPS * lam_max
    small = np.flatnonzero(lam <= threshold)
    if lam_max <= 0 or small.size:
        index = int(small[0]) if small.size else 0
        rcond = lam[-1] / lam_max if lam_max > 0 else 0.0
        raise SingularCovariance(lam[-1], rcond, index)
    return lam


def mahalanobis_sq_explicit(cd, method="svd"):
    """Squared Mahalanobis distances ``(x_i - m)' cov^{-1} (x_i - m)``.

    ``method="svd"`` builds ``cov^{-1/2} = V diag(1/s) V'`` from the thin SVD
    of ``xc.T / sqrt(n-1)``; ``method="eigh"`` uses the spectral
    decomposition of the explicitly formed covariance, as the classical
    algorithm does.

    Raises
    ------
    SingularCovariance
        If the covariance is not numerically positive definite.
    """
    xc = cd.xc
    p, n = xc.shape
    if method == "svd":
        _, s, v = thin_svd(xc.T / np.sqrt(n - 1.0), compute_u=False)
        check_positive_definite(s**2, p)
        whiten = (v / s) @ v.T
    elif method == "eigh":
        lam, u = np.linalg.eigh(covariance(cd))
        check_positive_definite(lam, p)
        whiten = (u / np.sqrt(lam)) @ u.T
    else:
        raise ValueError(f"unknown method {method!r}")
    y = whiten @ xc
    return np.einsum("ij,ij->j", y, y)


class WeightKind(str, enum.Enum):
    POWER = "power"
    CONSTANT = "constant"


class ZeroPolicy(str, enum.Enum):
    ERROR = "error"
    CLAMP = "clamp"


@dataclass(frozen=True)
class WeightSpec:
    """Weight function ``w`` applied to squared Mahalanobis distances.

    ``POWER`` is ``w(d) = d**alpha`` (``alpha=1`` gives cov4, ``alpha=-1``
    covAxis); ``CONSTANT`` is ``w(d) = 1``. For negative powers a distance at
    or below ``floor`` either raises :class:`ZeroDistance` (``ERROR``) or is
    raised to ``floor`` (``CLAMP``). ``floor=None`` means
    ``n * eps * mean(d2)``.
    """

    kind: WeightKind = WeightKind.POWER
    alpha: float = 1.0
    zero_policy: ZeroPolicy = ZeroPolicy.ERROR
    floor: float | None = None

    @classmethod
    def power(cls, alpha, zero_policy=ZeroPolicy.ERROR, floor=None):
        return cls(WeightKind.POWER, float(alpha), ZeroPolicy(zero_policy), floor)

    @classmethod
    def constant(cls):
        return cls(WeightKind.CONSTANT, 0.0)

    @property
    def label(self):
        if self.kind is WeightKind.CONSTANT:
            return "cov-cov1"
        names = {1.0: "cov-cov4", -1.0: "cov-covAxis"}
        return names.get(self.alpha, f"cov-cov[d^{self.alpha:g}]")

    def _prepared(self, d2):
        d2 = np.asarray(d2, dtype=np.float64)
        if np.any(d2 < 0):
            raise ValueError("squared distances must be non-negative")
        if self.kind is WeightKind.CONSTANT or self.alpha >= 0:
            return d2
        floor = self.floor
        if floor is None:
            floor = d2.size * EPS * float(np.mean(d2))
        low = d2 <= floor
        if low.any():
            if self.zero_policy is ZeroPolicy.ERROR:
                raise ZeroDistance(np.flatnonzero(low), floor)
            if floor <= 0:
                raise ZeroDistance(np.flatnonzero(low), floor)
            d2 = np.maximum(d2, floor)
        return d2

    def __call__(self, d2):
        d2 = self._prepared(d2)
        if self.kind is WeightKind.CONSTANT:
            return np.ones_like(d2)
        return d2**self.alpha

    def sqrt(self, d2):
        """``sqrt(w(d2))``, computed as ``d2 ** (alpha / 2)``."""
        d2 = self._prepared(d2)
        if self.kind is WeightKind.CONSTANT:
            return np.ones_like(d2)
        return d2 ** (0.5 * self.alpha)


def cov_w(cd, d2, w):
    """One-step M-scatter ``(1/n) xc diag(w(d2)) xc'``.

    Note the ``1/n`` prefactor (the covariance uses ``1/(n-1)``), so a
    constant weight gives ``(n-1)/n * cov``.
    """
    xc = cd.xc
    d2 = np.asarray(d2, dtype=np.float64).ravel()
    if d2.size != cd.n_obs:
        raise ShapeError(f"expected {cd.n_obs} distances, got {d2.size}")
    weights = w(d2)
    return _symmetrize((xc * weights) @ xc.T / cd.n_obs)
