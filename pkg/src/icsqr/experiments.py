"""Synthetic data, condition-number control, the stability sweep and the
runtime benchmark.

Random numbers come from numpy's Philox4x64 counter-based generator. Every
draw is keyed by a ``(seed, purpose)`` pair: the purpose string is hashed
with CRC-32 and fed, together with the 64-bit seed, to a ``SeedSequence``.
Streams for different purposes are independent, and the same pair gives the
same numbers on every platform numpy supports.
"""

from __future__ import annotations

import enum
import statistics
import time
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericalError, ShapeError, UnreachableCondition
from .ics import Algorithm, IcsOptions, ics_eigen, ics_qr
from .linalg import EPS, as_matrix, thin_svd
from .scatter import WeightSpec, center

DEFAULT_SEED = 20240101
DEFAULT_GRID = tuple(range(0, 31, 2))


def rng_for(seed, purpose):
    """Philox generator for the stream ``(seed, purpose)``."""
    seed = int(seed) % 2**64
    key = zlib.crc32(purpose.encode("utf-8"))
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, key])
    return np.random.Generator(np.random.Philox(ss))


# -- generators ---------------------------------------------------------------


@dataclass(frozen=True)
class MixtureSpec:
    """Two-group Gaussian mixture ``(1-eps) N(mu0, I) + eps N(mu1, I)`` with
    ``mu0 = (1, ..., 1)`` and ``mu1 = (delta, 1, ..., 1)``."""

    n: int = 10_000
    p: int = 4
    epsilon: float = 0.10
    delta: float = 6.0
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be positive, got {self.p}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.n * min(self.epsilon, 1.0 - self.epsilon) < 10:
            raise ValueError(
                f"n * min(epsilon, 1 - epsilon) must be at least 10 so both groups are populated, "
                f"got n={self.n}, epsilon={self.epsilon}"
            )


def mixture_labels(spec):
    """Group memberships (0 or 1) of the observations of :func:`gen_mixture`."""
    rng = rng_for(spec.seed, "mixture/labels")
    return (rng.random(spec.n) < spec.epsilon).astype(np.int64)


def gen_mixture(spec):
    """``p x n`` sample from the mixture described by ``spec``."""
    labels = mixture_labels(spec)
    rng = rng_for(spec.seed, "mixture/noise")
    y = rng.standard_normal((spec.p, spec.n)) + 1.0
    y[0] += (spec.delta - 1.0) * labels
    return y


class Source(str, enum.Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T5 = "t5"
    UNIFORM = "uniform"
    LAPLACE = "laplace"


DEFAULT_SOURCES = (Source.GAUSSIAN, Source.STUDENT_T5, Source.UNIFORM, Source.LAPLACE)


def _standardized(rng, source, n):
    # each distribution is scaled to mean 0, variance 1 by its analytic moments
    if source is Source.GAUSSIAN:
        return rng.standard_normal(n)
    if source is Source.STUDENT_T5:
        return rng.standard_t(5, n) / np.sqrt(5.0 / 3.0)
    if source is Source.UNIFORM:
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), n)
    if source is Source.LAPLACE:
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), n)
    raise ValueError(f"unknown source {source!r}")


@dataclass(frozen=True)
class IcaSpec:
    """Independent standardized sources mixed by a diagonal matrix.

    ``scales`` is the diagonal of the mixing matrix (all ones when omitted).
    """

    n: int = 10_000
    sources: tuple = DEFAULT_SOURCES
    seed: int = DEFAULT_SEED
    scales: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(Source(s) for s in self.sources))
        if not self.sources:
            raise ValueError("at least one source is required")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.scales is not None:
            scales = tuple(float(s) for s in self.scales)
            if len(scales) != len(self.sources):
                raise ValueError("scales must have one entry per source")
            if any(s == 0 or not np.isfinite(s) for s in scales):
                raise ValueError("scales must be finite and non-zero")
            object.__setattr__(self, "scales", scales)


def ica_sources(spec):
    """The ``p x n`` latent sources of :func:`gen_ica`."""
    out = np.empty((len(spec.sources), spec.n))
    for j, source in enumerate(spec.sources):
        rng = rng_for(spec.seed, f"ica/source/{j}")
        out[j] = _standardized(rng, source, spec.n)
    return out


def gen_ica(spec):
    """Return ``(x, mixing)`` with ``x = mixing @ sources`` and ``mixing`` diagonal."""
    s = ica_sources(spec)
    scales = np.ones(len(spec.sources)) if spec.scales is None else np.asarray(spec.scales)
    mixing = np.diag(scales)
    return mixing @ s, mixing


def random_mixing(rng, p, log10_kappa):
    """Random ``p x p`` matrix with 2-norm condition number ``10**log10_kappa``:
    Haar-orthogonal factors around log-spaced singular values."""
    u, _ = np.linalg.qr(rng.standard_normal((p, p)))
    v, _ = np.linalg.qr(rng.standard_normal((p, p)))
    s = np.logspace(0.0, -log10_kappa, p) if p > 1 else np.ones(1)
    return (u * s) @ v.T


def _graded_sources(rng, p, n):
    # sign(g) |g|^beta for standard normal g, standardized: kurtosis grows with beta,
    # so distinct exponents give components with distinct kurtosis
    betas = np.linspace(0.4, 1.8, p)
    rng.shuffle(betas)
    g = rng.standard_normal((p, n))
    s = np.sign(g) * np.abs(g) ** betas[:, None]
    s -= s.mean(axis=1, keepdims=True)
    return s / s.std(axis=1, keepdims=True)


@dataclass(frozen=True)
class RandomCase:
    index: int
    n: int
    p: int
    alpha: float
    log10_kappa: float
    x: np.ndarray = field(repr=False)


MAX_CASE_LOG10_KAPPA = 3.95


def random_case(seed, index, alphas=(-1.0, -0.5, 0.5, 1.0)):
    """One member of the randomized cross-check family.

    Independent sources of graded kurtosis are rotated by a random, mildly
    conditioned mixing, shifted to a random location, and then rescaled
    variable-wise with :func:`scale_to_condition` to a target condition
    number drawn log-uniformly up to ``10**3.95`` (so the data's own
    condition number stays below ``1e4``). ``n`` lies in [50, 2000], ``p`` in
    [2, 20] with ``n >= 25 p``; the weight power is drawn from ``alphas``.
    """
    rng = rng_for(seed, f"random-case/{index}")
    p = int(rng.integers(2, 21))
    n = int(rng.integers(max(50, 25 * p), 2001))
    alpha = float(rng.choice(np.asarray(alphas, dtype=float)))
    a = random_mixing(rng, p, float(rng.uniform(0.0, 1.0)))
    y = a @ _graded_sources(rng, p, n) + rng.normal(0.0, 1.0, (p, 1))
    floor = np.log10(condition_number(y))
    k = float(rng.uniform(min(floor, MAX_CASE_LOG10_KAPPA), MAX_CASE_LOG10_KAPPA))
    x, _ = scale_to_condition(y, k, tol=0.05 if k + 0.05 <= 4.0 else 4.0 - k)
    return RandomCase(index, n, p, alpha, float(np.log10(condition_number(x))), x)


# -- condition numbers --------------------------------------------------------


def condition_number(x):
    """Ratio of extreme singular values, ``inf`` for numerically singular input.

    The singular values come from :func:`~icsqr.linalg.thin_svd`, whose small
    singular values stay accurate under arbitrary scaling of the variables.
    Scaling alone therefore never makes a matrix "singular": the ``inf``
    marker is returned when ``sigma_min <= eps * sigma_max`` holds for the
    matrix with its variables scaled to unit norm (or a variable is zero).
    """
    x = as_matrix(x, "x")
    a = x.T if x.shape[0] < x.shape[1] else x
    norms = np.sqrt(np.einsum("ij,ij->j", a, a))
    if np.any(norms == 0):
        return np.inf
    _, s_eq, _ = thin_svd(a / norms, compute_u=False)
    if s_eq[-1] <= EPS * s_eq[0]:
        return np.inf
    _, s, _ = thin_svd(a, compute_u=False)
    return float(s[0] / s[-1])


def geometric_scales(p, spread):
    """``c_j = 10**(spread*(j-1)/(p-1) - spread/2)``, a geometric progression
    with ``c_p / c_1 = 10**spread`` and unit geometric mean."""
    if p == 1:
        return np.ones(1)
    return 10.0 ** (spread * np.arange(p) / (p - 1) - spread / 2.0)


def scale_to_condition(y, k, tol=0.05):
    """Rescale the variables of ``y`` so that ``log10 cond(x)`` is ``k``.

    The scales are :func:`geometric_scales` with the spread found by
    bisection on the achieved ``log10`` condition number (to within
    ``tol``). If ``y`` is already at least ``10**k`` conditioned, but no more
    than ``10**(k+0.5)``, it is returned unscaled.

    Returns ``(x, c)`` with ``x = diag(c) @ y``.

    Raises
    ------
    UnreachableCondition
        If ``y`` is singular or its own condition number exceeds ``10**(k+0.5)``.
    """
    y = as_matrix(y, "y")
    p = y.shape[0]
    base = condition_number(y)
    if not np.isfinite(base):
        raise UnreachableCondition("y is numerically singular; no rescaling reaches a finite target")
    log_base = np.log10(base)
    if log_base > k + 0.5:
        raise UnreachableCondition(
            f"y already has condition number 10^{log_base:.2f}, above the target bracket 10^{k}±0.5"
        )

    def achieved(spread):
        c = geometric_scales(p, spread)
        return c, np.log10(condition_number(c[:, None] * y))

    if log_base >= k or p == 1:
        c = np.ones(p)
        return y.copy(), c

    lo, hi = 0.0, max(1.0, k - log_base + 1.0)
    c, got = achieved(hi)
    while got < k:
        lo, hi = hi, 2.0 * hi
        c, got = achieved(hi)
    for _ in range(200):
        if abs(got - k) <= tol:
            break
        mid = 0.5 * (lo + hi)
        c_mid, got_mid = achieved(mid)
        if got_mid < k:
            lo = mid
        else:
            hi, c, got = mid, c_mid, got_mid
        if hi - lo < 1e-12:
            break
    if abs(got - k) > 0.5:
        raise UnreachableCondition(f"could only reach condition number 10^{got:.2f} for target 10^{k}")
    return c[:, None] * y, c


# -- sweep --------------------------------------------------------------------


class Status(str, enum.Enum):
    OK = "OK"
    SINGULAR_ERROR = "SINGULAR_ERROR"


DEFAULT_PAIRS = (WeightSpec.power(1.0), WeightSpec.power(-1.0))


@dataclass(frozen=True)
class SweepRow:
    k: float
    pair: str
    algorithm: Algorithm
    status: Status
    eigenvalues: tuple | None
    kappa: float
    message: str = ""

    def to_dict(self):
        d = asdict(self)
        d["algorithm"] = self.algorithm.value
        d["status"] = self.status.value
        d["eigenvalues"] = None if self.eigenvalues is None else list(self.eigenvalues)
        d["kappa"] = _json_float(self.kappa)
        return d


def _json_float(v):
    v = float(v)
    return v if np.isfinite(v) else None


@dataclass(frozen=True)
class SweepReport:
    p: int
    grid: tuple
    pairs: tuple
    algorithms: tuple
    rows: tuple
    base: dict

    def select(self, pair, algorithm):
        algorithm = Algorithm(algorithm)
        return [r for r in self.rows if r.pair == pair and r.algorithm is algorithm]

    def first_failure(self, pair, algorithm):
        """Smallest ``k`` with status ``SINGULAR_ERROR``, or ``None``."""
        for r in self.select(pair, algorithm):
            if r.status is Status.SINGULAR_ERROR:
                return r.k
        return None

    def eigenvalue_table(self, pair, algorithm):
        """``len(grid) x p`` array, NaN where the run failed."""
        rows = self.select(pair, algorithm)
        out = np.full((len(rows), self.p), np.nan)
        for i, r in enumerate(rows):
            if r.eigenvalues is not None:
                out[i] = r.eigenvalues
        return out

    def to_dict(self):
        return {
            "p": self.p,
            "grid": [float(k) for k in self.grid],
            "pairs": list(self.pairs),
            "algorithms": [a.value for a in self.algorithms],
            "base": self.base,
            "rows": [r.to_dict() for r in self.rows],
        }


def _run(algorithm, cd, weight):
    opts = IcsOptions(weight=weight)
    fn = ics_eigen if algorithm is Algorithm.EIGEN else ics_qr
    return fn(cd, opts)


def sweep(grid=DEFAULT_GRID, pairs=DEFAULT_PAIRS, algorithms=(Algorithm.EIGEN, Algorithm.QR), base=None):
    """Run every algorithm and scatter pair on the base data rescaled to
    condition number ``10**k`` for each ``k`` in ``grid``.

    ``base`` is a :class:`MixtureSpec` (default: ``MixtureSpec()``, n = 10000, p = 4) or
    a ``p x n`` array. Numerical failures are recorded as
    ``SINGULAR_ERROR`` rows, never raised.
    """
    if base is None:
        base = MixtureSpec()
    if isinstance(base, MixtureSpec):
        y = gen_mixture(base)
        base_info = {"kind": "mixture", **asdict(base)}
    else:
        y = as_matrix(base, "base")
        base_info = {"kind": "array", "p": y.shape[0], "n": y.shape[1]}
    pairs = tuple(pairs)
    algorithms = tuple(Algorithm(a) for a in algorithms)

    rows = []
    for k in grid:
        x, _ = scale_to_condition(y, k)
        kappa = condition_number(x)
        cd = center(x)
        for weight in pairs:
            for algorithm in algorithms:
                try:
                    res = _run(algorithm, cd, weight)
                except NumericalError as exc:
                    rows.append(SweepRow(k, weight.label, algorithm, Status.SINGULAR_ERROR, None, kappa, str(exc)))
                else:
                    eig = tuple(float(v) for v in res.eigenvalues)
                    rows.append(SweepRow(k, weight.label, algorithm, Status.OK, eig, kappa))
    return SweepReport(
        p=y.shape[0],
        grid=tuple(grid),
        pairs=tuple(w.label for w in pairs),
        algorithms=algorithms,
        rows=tuple(rows),
        base=base_info,
    )


# -- benchmark ----------------------------------------------------------------


def flop_estimates(n, p):
    """Leading-order operation counts of the two algorithms."""
    return {
        "qr_factorization": 2 * p**2 * (n - p / 3),
        "ics_qr_tall": 8 * n * p**2 - (32 / 3) * p**3,
        "ics_qr_square": (53 / 3) * p**3,
        "ics_eigen": 6 * n * p**2 + 26 * p**3,
    }


@dataclass(frozen=True)
class BenchReport:
    n: int
    p: int
    reps: int
    seed: int
    timings: dict
    flops: dict

    @property
    def ratio(self):
        return self.timings["qr"]["median_s"] / self.timings["eigen"]["median_s"]

    def to_dict(self):
        return {
            "n": self.n,
            "p": self.p,
            "reps": self.reps,
            "seed": self.seed,
            "timings": self.timings,
            "ratio_qr_over_eigen": self.ratio,
            "flops": self.flops,
        }


def benchmark(n=20_000, p=50, reps=7, seed=DEFAULT_SEED, warmup=1):
    """Median wall-clock time of :func:`ics_qr` and :func:`ics_eigen` on
    Gaussian data, the two algorithms interleaved to share machine noise."""
    if reps < 1:
        raise ShapeError(f"reps must be at least 1, got {reps}")
    if n <= p:
        raise ShapeError(f"need n > p, got n={n}, p={p}")
    x = rng_for(seed, "benchmark").standard_normal((p, n))
    cd = center(x)
    fns = {"eigen": ics_eigen, "qr": ics_qr}
    samples = {name: [] for name in fns}
    for _ in range(warmup):
        for fn in fns.values():
            fn(cd)
    for _ in range(reps):
        for name, fn in fns.items():
            t0 = time.perf_counter()
            fn(cd)
            samples[name].append(time.perf_counter() - t0)
    timings = {
        name: {"median_s": statistics.median(s), "min_s": min(s), "samples_s": s}
        for name, s in samples.items()
    }
    return BenchReport(n, p, reps, int(seed), timings, flop_estimates(n, p))
