"""
Photon-number statistics of coherent and thermal light.

A group of mutually indistinguishable sources is summarised by a
:class:`ModeSpec`: the coherent amplitudes add to a single complex amplitude
and the thermal mean photon numbers add to a single thermal mean.  Its
photon-number distribution is a finite sum of products of gamma functions
and Kummer functions ``1F1(1/2 + j; 1/2; x)``, evaluated here in log space.
Groups that are distinguishable from each other combine by discrete
convolution of their distributions (:func:`convolve`, :func:`distribution_mix`).

:func:`oracle_pn` evaluates the same probabilities by brute-force quadrature
of the Glauber-Sudarshan P-function and exists to cross-check the closed form.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError, TailTooHeavy, UndefinedG2

__all__ = [
    "DEFAULT_NMAX",
    "DEGENERATE_EPS",
    "ModeSpec",
    "DistinguishableMix",
    "PhotonDistribution",
    "DistributionStats",
    "QuadratureGrid",
    "log_gamma",
    "kummer_1f1_half",
    "pn_indistinguishable",
    "distribution_indistinguishable",
    "convolve",
    "distribution_mix",
    "stats",
    "source_stats",
    "oracle_pn",
    "poisson",
    "bose_einstein",
    "write_distribution_csv",
    "read_distribution_csv",
]

DEGENERATE_EPS = 1e-12
DEFAULT_NMAX = 20
TAIL_LIMIT_STATS = 1e-6

# Above this total Kummer argument the exponent -|a|^2/m + x_re + x_im is
# folded analytically into -|a|^2/(m+1); the unfolded sum cancels catastrophically.
_FOLD_THRESHOLD = 50.0
_SERIES_LIMIT = 50.0
_SERIES_MAX_TERMS = 500
_SERIES_RTOL = 1e-16

_LOG_PI = math.log(math.pi)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeSpec:
    """One indistinguishable group of sources.

    Parameters
    ----------
    alpha_re, alpha_im : float
        Real and imaginary parts of the total coherent amplitude.
    m_thermal : tuple of float
        Mean photon number of every thermal source in the group.
    """

    alpha_re: float = 0.0
    alpha_im: float = 0.0
    m_thermal: tuple = ()

    def __post_init__(self):
        mt = self.m_thermal
        if np.isscalar(mt):
            mt = (mt,)
        m = tuple(float(v) for v in mt)
        object.__setattr__(self, "m_thermal", m)
        object.__setattr__(self, "alpha_re", float(self.alpha_re))
        object.__setattr__(self, "alpha_im", float(self.alpha_im))
        if not (math.isfinite(self.alpha_re) and math.isfinite(self.alpha_im)):
            raise DomainError("coherent amplitude must be finite")
        for v in m:
            if not (v >= 0 and math.isfinite(v)):
                raise DomainError(f"thermal mean photon number must be >= 0, got {v}")

    @classmethod
    def coherent(cls, mean: float, phase: float = 0.0) -> "ModeSpec":
        if mean < 0:
            raise DomainError("coherent mean photon number must be >= 0")
        amp = math.sqrt(mean)
        return cls(amp * math.cos(phase), amp * math.sin(phase), ())

    @classmethod
    def thermal(cls, *means: float) -> "ModeSpec":
        return cls(0.0, 0.0, tuple(means))

    @classmethod
    def mixed(cls, coherent_mean: float, thermal_means: Sequence[float] = (),
              phase: float = 0.0) -> "ModeSpec":
        c = cls.coherent(coherent_mean, phase)
        return cls(c.alpha_re, c.alpha_im, tuple(thermal_means))

    @classmethod
    def vacuum(cls) -> "ModeSpec":
        return cls()

    @property
    def m_tot(self) -> float:
        return float(sum(self.m_thermal))

    @property
    def alpha_sq(self) -> float:
        return self.alpha_re ** 2 + self.alpha_im ** 2

    @property
    def mean(self) -> float:
        return self.alpha_sq + self.m_tot


@dataclass(frozen=True)
class DistinguishableMix:
    """Ordered collection of mutually distinguishable modes."""

    modes: tuple

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(modes) < 1:
            raise DomainError("a mix needs at least one mode")
        for m in modes:
            if not isinstance(m, ModeSpec):
                raise DomainError(f"expected ModeSpec, got {type(m).__name__}")
        object.__setattr__(self, "modes", modes)

    @property
    def mean(self) -> float:
        return float(sum(m.mean for m in self.modes))


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """Truncated photon-number distribution ``p(0..n_max)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, copy=True)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("probabilities must be a non-empty vector")
        if not np.all(np.isfinite(p)):
            raise DomainError("probabilities must be finite")
        if p.min() < -1e-15:
            raise DomainError(f"negative probability {p.min()!r}")
        p = np.clip(p, 0.0, None)
        if p.sum() > 1.0 + 1e-12:
            raise DomainError(f"probabilities sum to {p.sum()!r} > 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def tail_mass(self) -> float:
        return float(1.0 - self.probs.sum())

    def __len__(self):
        return self.probs.size

    def __eq__(self, other):
        if not isinstance(other, PhotonDistribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    __hash__ = None


@dataclass(frozen=True)
class DistributionStats:
    mean: float
    variance: float
    g2: float


@dataclass(frozen=True)
class QuadratureGrid:
    """Polar grid used by :func:`oracle_pn`.

    Gauss-Legendre nodes in the radius, midpoint (periodic trapezoid) nodes in
    the angle.
    """

    radial: int = 2000
    angular: int = 512
    sigmas: float = 8.0


Source = Union[ModeSpec, DistinguishableMix]


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not (x > 0) or not math.isfinite(x):
        raise DomainError(f"log_gamma needs x > 0, got {x!r}")
    return math.lgamma(x)


def _half_integer_index(a: float) -> int:
    k = a - 0.5
    if not (k >= 0 and float(k).is_integer()):
        raise DomainError(f"a must be a positive half-integer, got {a!r}")
    return int(k)


def _log_kummer_reduced(k: int, x: float) -> float:
    """``ln(exp(-x) * 1F1(1/2 + k; 1/2; x))``.

    Kummer's transformation turns the series into
    ``1F1(-k; 1/2; -x) = sum_j C(k, j) x^j / (1/2)_j``, a polynomial with
    positive coefficients that is exact for any ``x``.
    """
    if x == 0.0:
        return 0.0
    j = np.arange(k + 1, dtype=float)
    logs = (gammaln(k + 1.0) - gammaln(j + 1.0) - gammaln(k - j + 1.0)
            + j * math.log(x) - (gammaln(j + 0.5) - gammaln(0.5)))
    return float(logsumexp(logs))


def kummer_1f1_half(a: float, x: float) -> float:
    """Return ``ln 1F1(a; 1/2; x)`` for half-integer ``a`` and ``x >= 0``.

    The ascending series is summed until the newest term falls below
    ``1e-16`` of the partial sum (at most 500 terms).  Every term is positive
    so the sum carries no cancellation.  For ``x > 50``, or when the series
    has not converged, the terminating Kummer-transformed polynomial is used.
    """
    k = _half_integer_index(a)
    if not (x >= 0) or not math.isfinite(x):
        raise DomainError(f"x must be finite and >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if x <= _SERIES_LIMIT:
        term = 1.0
        total = 1.0
        for i in range(_SERIES_MAX_TERMS):
            term *= (a + i) * x / ((0.5 + i) * (i + 1.0))
            total += term
            if not math.isfinite(total):
                break
            if term < _SERIES_RTOL * total:
                return math.log(total)
    return x + _log_kummer_reduced(k, x)


# ---------------------------------------------------------------------------
# Closed-form distributions
# ---------------------------------------------------------------------------

def _log_poisson(mu: float, n: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return -mu + n * math.log(mu) - gammaln(n + 1.0)


def _log_bose_einstein(m: float, n: np.ndarray) -> np.ndarray:
    return n * math.log(m) - (n + 1.0) * math.log1p(m)


def _log_delta(n: np.ndarray) -> np.ndarray:
    return np.where(n == 0, 0.0, -np.inf)


def _log_pn_table(mode: ModeSpec, n_max: int) -> np.ndarray:
    """Log-probabilities ``ln p(n)`` for ``n = 0..n_max`` of one mode."""
    n = np.arange(n_max + 1, dtype=float)
    mu = mode.alpha_sq
    m = mode.m_tot
    if m < DEGENERATE_EPS and mu < DEGENERATE_EPS:
        return _log_delta(n)
    if m < DEGENERATE_EPS:
        return _log_poisson(mu, n)
    if mu < DEGENERATE_EPS:
        return _log_bose_einstein(m, n)

    scale = m * (m + 1.0)
    x_re = mode.alpha_re ** 2 / scale
    x_im = mode.alpha_im ** 2 / scale
    if x_re + x_im > _FOLD_THRESHOLD:
        l_re = np.array([_log_kummer_reduced(j, x_re) for j in range(n_max + 1)])
        l_im = np.array([_log_kummer_reduced(j, x_im) for j in range(n_max + 1)])
        exponent = -mu / (m + 1.0)
    else:
        l_re = np.array([kummer_1f1_half(0.5 + j, x_re) for j in range(n_max + 1)])
        l_im = np.array([kummer_1f1_half(0.5 + j, x_im) for j in range(n_max + 1)])
        exponent = -mu / m

    lg_half = gammaln(n + 0.5)
    lg_fact = gammaln(n + 1.0)
    k = np.arange(n_max + 1)
    nn = k[:, None]
    kk = k[None, :]
    valid = kk <= nn
    rest = np.where(valid, nn - kk, 0)
    summand = (lg_half[rest] + lg_half[kk] - lg_fact[kk] - lg_fact[rest]
               + l_re[rest] + l_im[kk])
    summand = np.where(valid, summand, -np.inf)
    log_sum = logsumexp(summand, axis=1)
    return n * math.log(m) - (n + 1.0) * math.log1p(m) + exponent - _LOG_PI + log_sum


def pn_indistinguishable(mode: ModeSpec, n: int) -> float:
    """Probability of detecting ``n`` photons from one indistinguishable group."""
    if n < 0 or int(n) != n:
        raise DomainError(f"photon number must be a non-negative integer, got {n!r}")
    n = int(n)
    return max(float(np.exp(_log_pn_table(mode, n)[n])), 0.0)


def distribution_indistinguishable(mode: ModeSpec, n_max: int = DEFAULT_NMAX) -> PhotonDistribution:
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    probs = np.exp(_log_pn_table(mode, int(n_max)))
    return PhotonDistribution(np.clip(probs, 0.0, None))


def poisson(mean: float, n_max: int = DEFAULT_NMAX) -> PhotonDistribution:
    return distribution_indistinguishable(ModeSpec.coherent(mean), n_max)


def bose_einstein(mean: float, n_max: int = DEFAULT_NMAX) -> PhotonDistribution:
    return distribution_indistinguishable(ModeSpec.thermal(mean), n_max)


def convolve(dists: Iterable[PhotonDistribution]) -> PhotonDistribution:
    """Distribution of the total count of independent, distinguishable modes.

    The result is truncated at the smallest ``n_max`` of the inputs, which is
    exactly the support on which the nested convolution sum is complete.
    """
    dists = list(dists)
    if not dists:
        raise DomainError("convolve needs at least one distribution")
    n_max = min(d.n_max for d in dists)
    out = dists[0].probs[: n_max + 1]
    for d in dists[1:]:
        out = np.convolve(out, d.probs[: n_max + 1])[: n_max + 1]
    return PhotonDistribution(out)


def distribution_mix(mix: Source, n_max: int = DEFAULT_NMAX) -> PhotonDistribution:
    if isinstance(mix, ModeSpec):
        return distribution_indistinguishable(mix, n_max)
    return convolve(distribution_indistinguishable(m, n_max) for m in mix.modes)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def stats(dist: PhotonDistribution) -> DistributionStats:
    """Mean, variance and g2 of a truncated distribution.

    Raises
    ------
    TailTooHeavy
        If more than ``1e-6`` of the probability lies above ``n_max``.
    UndefinedG2
        If the mean photon number is zero.
    """
    if dist.tail_mass > TAIL_LIMIT_STATS:
        raise TailTooHeavy(
            f"tail mass {dist.tail_mass:.3g} above n_max={dist.n_max} exceeds {TAIL_LIMIT_STATS}")
    n = np.arange(dist.n_max + 1, dtype=float)
    p = dist.probs
    mean = float(n @ p)
    variance = float(((n - mean) ** 2) @ p)
    if mean <= 0.0:
        raise UndefinedG2("g2 is undefined for a distribution with zero mean")
    g2 = 1.0 + (variance - mean) / mean ** 2
    return DistributionStats(mean=mean, variance=variance, g2=g2)


def source_stats(source: Source, tail_tol: float = 1e-9, n_start: int = DEFAULT_NMAX,
                 n_limit: int = 512) -> DistributionStats:
    """:func:`stats` with ``n_max`` doubled until the tail is below ``tail_tol``."""
    n_max = n_start
    while True:
        dist = distribution_mix(source, n_max)
        if dist.tail_mass < tail_tol or n_max >= n_limit:
            return stats(dist)
        n_max = min(2 * n_max, n_limit)


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=8)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def oracle_pn(mode: ModeSpec, n, grid: QuadratureGrid = QuadratureGrid()):
    """Photon-number probability by direct quadrature over the P-function.

    Integrates ``P(g) exp(-|g|^2) |g|^(2n) / n!`` over the complex plane on a
    polar grid, where ``P`` is the thermal Gaussian of mean
    ``m_tot`` displaced to the total coherent amplitude.  Accepts a scalar
    ``n`` or a sequence of photon numbers.  Intended for tests.
    """
    m = mode.m_tot
    if not m > 0:
        raise DomainError("quadrature oracle needs m_tot > 0 (P-function is a delta otherwise)")
    scalar = np.ndim(n) == 0
    ns = np.atleast_1d(np.asarray(n, dtype=float))
    alpha = complex(mode.alpha_re, mode.alpha_im)
    radius = max(abs(alpha), 1.0) + grid.sigmas * math.sqrt(m)
    nodes, weights = _gauss_legendre(grid.radial)
    r = 0.5 * radius * (nodes + 1.0)
    dr = 0.5 * radius * weights
    dth = 2.0 * math.pi / grid.angular
    th = (np.arange(grid.angular) + 0.5) * dth
    # |g - alpha|^2 = r^2 + |alpha|^2 - 2 r |alpha| cos(theta - arg alpha)
    cos_term = np.cos(th - math.atan2(alpha.imag, alpha.real))
    dist_sq = (r ** 2 + abs(alpha) ** 2)[:, None] - 2.0 * abs(alpha) * np.outer(r, cos_term)
    p_func = np.exp(-dist_sq / m) / (math.pi * m)
    # angular integral first; the photon-number kernel is radial only
    radial = p_func.sum(axis=1) * dth * r * dr
    log_r = np.log(r)
    out = np.empty(ns.size)
    for i, nv in enumerate(ns):
        kernel = np.exp(-r ** 2 + 2.0 * nv * log_r - math.lgamma(nv + 1.0))
        out[i] = float(radial @ kernel)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_distribution_csv(dist: PhotonDistribution, fh: TextIO,
                           header: Sequence[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    fh.write("n,p\n")
    for n, p in enumerate(dist.probs):
        fh.write(f"{n},{p:.17g}\n")


def read_distribution_csv(fh: TextIO) -> PhotonDistribution:
    """Read ``n,p`` rows.  Missing photon numbers are treated as zero."""
    rows = {}
    seen_header = False
    for raw in fh:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_header:
            if line.replace(" ", "") != "n,p":
                raise DomainError(f"expected header 'n,p', got {line!r}")
            seen_header = True
            continue
        a, b = line.split(",")
        rows[int(a)] = float(b)
    if not rows:
        raise DomainError("distribution file has no rows")
    probs = np.zeros(max(rows) + 1)
    for k, v in rows.items():
        probs[k] = v
    return PhotonDistribution(probs)
