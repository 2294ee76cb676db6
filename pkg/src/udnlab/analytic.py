"""Semi-analytic coverage, cell-load, and rate-distribution models.

Coverage of the typical user under nearest-AN association, Rayleigh
fading, and power-law path loss reduces to ``1 / (1 + a * rho(theta,
alpha))`` where ``a`` is the fraction of interferers active on the probe's
subchannel. Cell loads are modeled through the standard Gamma(3.5)
approximation of Poisson-Voronoi cell areas, which makes the number of
other users sharing a cell negative-binomial in the densification ratio.
Everything here is an approximation certified against the Monte Carlo
engine, not a replacement for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from .channel import ChannelParams
from .errors import DivergenceError, InvalidParameterError
from .montecarlo import RateCdf

# Gamma shape of the normalized Poisson-Voronoi cell area. The cell that
# contains a uniformly random point is size-biased, which raises the shape
# by one.
_CELL_SHAPE = 3.5

_K_EPS = 1e-6       # probability mass allowed beyond the truncated load sum
_K_CAP = 20_000
_LOG2_SINR_CAP = 60.0  # rates above ~60 bps/Hz per subchannel are treated as unreachable


def rho_integral(theta_linear: float, alpha: float) -> float:
    """Interference scaling factor
    ``rho = theta^(2/alpha) * integral_{theta^(-2/alpha)}^inf du / (1 + u^(alpha/2))``
    computed by adaptive quadrature (relative error <= 1e-8).
    """
    if not alpha > 2:
        raise DivergenceError("path-loss exponent must exceed 2 for finite interference")
    if not theta_linear > 0:
        raise InvalidParameterError("threshold must be positive")
    half = alpha / 2.0
    x0 = theta_linear ** (-2.0 / alpha)
    val, _err = integrate.quad(lambda u: 1.0 / (1.0 + u**half), x0, np.inf,
                               epsabs=0.0, epsrel=1e-10, limit=200)
    return theta_linear ** (2.0 / alpha) * val


def rho_closed_form_alpha4(theta_linear: float) -> float:
    """Closed form of ``rho`` at alpha = 4: sqrt(t) * (pi/2 - atan(1/sqrt(t)))."""
    s = math.sqrt(theta_linear)
    return s * (math.pi / 2.0 - math.atan(1.0 / s))


def _rho_fast(theta_linear, alpha: float):
    """Vectorized ``rho`` via the Gauss hypergeometric representation
    ``2*theta/(alpha-2) * 2F1(1, 1-2/alpha; 2-2/alpha; -theta)``."""
    t = np.asarray(theta_linear, dtype=float)
    return 2.0 * t / (alpha - 2.0) * special.hyp2f1(1.0, 1.0 - 2.0 / alpha,
                                                    2.0 - 2.0 / alpha, -t)


def coverage_probability(theta_linear: float, alpha: float, activity: float = 1.0) -> float:
    """P(SIR >= theta) for the typical user, interferers thinned by ``activity``."""
    if not 0.0 < activity <= 1.0:
        raise InvalidParameterError("activity must lie in (0, 1]")
    return 1.0 / (1.0 + activity * rho_integral(theta_linear, alpha))


def _coverage_fast(theta_linear, alpha: float, activity: float):
    return 1.0 / (1.0 + activity * _rho_fast(theta_linear, alpha))


@dataclass(frozen=True)
class LoadPmf:
    """Distribution of the typical user's serving-cell load K = 1, 2, ...

    ``pmf[k]`` is P(K = k+1); ``tail_mass`` is the probability beyond
    ``K_max``. Depends on the densification ratio only.
    """

    tau: float
    pmf: np.ndarray
    tail_mass: float

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(1, len(self.pmf) + 1)

    def mean_coload(self) -> float:
        """Mean number of other users in the typical cell (exact NB mean,
        not the truncated sum)."""
        return (_CELL_SHAPE + 1.0) / _CELL_SHAPE / self.tau


def _nb_p(tau: float) -> float:
    mu = 1.0 / tau
    return _CELL_SHAPE / (_CELL_SHAPE + mu)


def load_pmf(tau: float, k_max: int = 64) -> LoadPmf:
    """Serving-cell load law of the typical user.

    The cell containing the probe is size-biased, so the count of other
    users it shares with is negative binomial with shape ``3.5 + 1`` and
    mean ``(4.5/3.5)/tau``.
    """
    if not tau > 0:
        raise InvalidParameterError("tau must be positive")
    if int(k_max) < 1:
        raise InvalidParameterError("k_max must be at least 1")
    p = _nb_p(tau)
    others = np.arange(int(k_max))  # K = others + 1
    pmf = stats.nbinom.pmf(others, _CELL_SHAPE + 1.0, p)
    tail = float(stats.nbinom.sf(int(k_max) - 1, _CELL_SHAPE + 1.0, p))
    return LoadPmf(tau=float(tau), pmf=pmf, tail_mass=tail)


def activity_fraction(tau: float, n_subchannels: int) -> float:
    """Expected fraction of subchannels an interfering AN occupies.

    The load K' of a cell picked independently of the probe is negative
    binomial with shape 3.5 (no size bias); the AN occupies
    ``min(K', N)`` of its N subchannels.
    """
    if not tau > 0:
        raise InvalidParameterError("tau must be positive")
    n = int(n_subchannels)
    if n < 1:
        raise InvalidParameterError("n_subchannels must be at least 1")
    p = _nb_p(tau)
    k = np.arange(n)
    pk = stats.nbinom.pmf(k, _CELL_SHAPE, p)
    e_min = n - float(np.sum((n - k) * pk))
    return e_min / n


def _load_support(tau: float):
    """Truncated size-biased load pmf covering all but ``_K_EPS`` mass."""
    p = _nb_p(tau)
    k_hi = int(stats.nbinom.ppf(1.0 - _K_EPS, _CELL_SHAPE + 1.0, p)) + 1
    k_hi = min(max(k_hi, 64), _K_CAP)
    others = np.arange(k_hi)
    pk = stats.nbinom.pmf(others, _CELL_SHAPE + 1.0, p)
    tail = float(stats.nbinom.sf(k_hi - 1, _CELL_SHAPE + 1.0, p))
    return others + 1, pk, tail


def _rate_cdf_value(r, k, pk, tail, activity, alpha, theta0_linear):
    """F(r) for scalar or vector r, summing over the load support.

    The probe's conditional rate given load K and service is
    ``log2(1 + SIR)/K``, so F(r) mixes coverage at threshold
    ``max(theta0, 2^(rK) - 1)`` over K, treating load and SIR as
    independent (the documented approximation).
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    z = np.minimum(np.outer(r, k), _LOG2_SINR_CAP)
    theta = np.maximum(np.exp2(z) - 1.0, theta0_linear)
    cov = _coverage_fast(theta, alpha, activity)
    f = (1.0 - cov) @ pk
    # tail cells are at least as loaded as k[-1]
    f += tail * (1.0 - cov[:, -1])
    return f


def rate_cdf_semianalytic(tau: float, params: ChannelParams, n_grid: int = 1024) -> RateCdf:
    """Semi-analytic CDF of the typical-user rate at densification ``tau``."""
    if not tau > 0:
        raise InvalidParameterError("tau must be positive")
    k, pk, tail = _load_support(tau)
    a = activity_fraction(tau, params.n_subchannels)
    theta0 = params.theta0_linear
    alpha = params.alpha

    def f(r):
        return _rate_cdf_value(r, k, pk, tail, a, alpha, theta0)

    # find a grid top where essentially all mass is covered
    r_hi = 1.0
    while f(r_hi)[0] < 1.0 - 1e-7 and r_hi < _LOG2_SINR_CAP:
        r_hi *= 2.0
    r_lo = max(math.log2(1.0 + theta0) / k[-1], r_hi * 1e-12, 1e-12)
    grid = np.geomspace(r_lo, r_hi, int(n_grid) - 1)
    cdf = f(grid)
    grid = np.concatenate(([0.0], grid))
    outage = 1.0 - _coverage_fast(np.asarray(theta0), alpha, a) if theta0 > 0 else 0.0
    cdf = np.concatenate(([float(outage)], cdf))
    cdf = np.minimum(np.maximum.accumulate(cdf), 1.0)
    return RateCdf("semianalytic", grid, cdf, n_trials=None)


def median_rate_semianalytic(tau: float, params: ChannelParams) -> float:
    """Median of the semi-analytic rate distribution (root of F(r) = 1/2)."""
    if not tau > 0:
        raise InvalidParameterError("tau must be positive")
    k, pk, tail = _load_support(tau)
    a = activity_fraction(tau, params.n_subchannels)
    theta0 = params.theta0_linear
    alpha = params.alpha

    def f(r):
        return float(_rate_cdf_value(r, k, pk, tail, a, alpha, theta0)[0])

    if theta0 > 0:
        outage = 1.0 - float(_coverage_fast(np.asarray(theta0), alpha, a))
        if outage >= 0.5:
            return 0.0
    r_lo = 1e-9
    while f(r_lo) >= 0.5 and r_lo > 1e-300:
        r_lo /= 8.0
    r_hi = 1.0
    while f(r_hi) < 0.5 and r_hi < _LOG2_SINR_CAP:
        r_hi *= 2.0
    return float(optimize.brentq(lambda r: f(r) - 0.5, r_lo, r_hi, xtol=1e-12, rtol=1e-12))
