"""Densification planning: invert the rate distribution over tau.

Answers three questions: the minimum densification ratio that delivers a
target median rate, how that minimum scales with the target (linear for
small targets, exponential for large ones), and how a fixed densification
budget trades user density against per-user rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .channel import ChannelParams
from .errors import BracketError, InvalidParameterError, NonMonotoneError
from .montecarlo import SimSpec, quantile, simulate_typical_rate

ENGINE_MONTECARLO = "montecarlo"
ENGINE_SEMIANALYTIC = "semianalytic"

# reference UE density for Monte Carlo engine evaluations; only the ratio
# tau matters (certified by the tau-sufficiency tests), and holding
# lambda_AN fixed lets every tau evaluation reuse the same AN geometry,
# activity, and fading draws (common random numbers)
_REFERENCE_LAMBDA_AN = 100.0

_MAX_BISECTION_STEPS = 80


@dataclass(frozen=True)
class PlannerQuery:
    """A minimum-densification question for one engine."""

    target_median_rate: float  # bps/Hz
    engine: str = ENGINE_SEMIANALYTIC
    params: ChannelParams = field(default_factory=ChannelParams.interference_limited)
    tau_bracket: tuple[float, float] = (1e-3, 100.0)
    tolerance: float = 0.01  # relative, on the median rate
    n_trials: int = 10_000   # Monte Carlo engine only
    master_seed: int = 0
    n_workers: int = 1

    def __post_init__(self):
        lo, hi = self.tau_bracket
        if not (0 < lo < hi):
            raise InvalidParameterError("tau bracket must satisfy 0 < lo < hi")
        if not self.target_median_rate > 0:
            raise InvalidParameterError("target median rate must be positive")
        if self.engine not in (ENGINE_MONTECARLO, ENGINE_SEMIANALYTIC):
            raise InvalidParameterError(f"unknown engine {self.engine!r}")
        if not 0 < self.tolerance < 1:
            raise InvalidParameterError("tolerance must lie in (0, 1)")


def median_rate(tau: float, query: PlannerQuery) -> float:
    """Median typical-user rate at densification ``tau`` via the chosen engine."""
    if query.engine == ENGINE_SEMIANALYTIC:
        return analytic.median_rate_semianalytic(tau, query.params)
    spec = SimSpec(
        lambda_an=_REFERENCE_LAMBDA_AN,
        lambda_ue=_REFERENCE_LAMBDA_AN / tau,
        params=query.params,
        n_trials=query.n_trials,
        master_seed=query.master_seed,
    )
    cdf = simulate_typical_rate(spec, n_workers=query.n_workers)
    return quantile(cdf, 0.5)


def min_tau(query: PlannerQuery) -> float:
    """Smallest densification ratio whose median rate meets the target.

    Bisection in log(tau) over the bracket; with the Monte Carlo engine
    every evaluation reuses the same seed, which keeps the noisy median
    effectively monotone. Returns tau with
    ``|median(tau) - r0| <= tolerance * r0``.
    """
    lo, hi = query.tau_bracket
    target = query.target_median_rate
    m_lo = median_rate(lo, query)
    m_hi = median_rate(hi, query)
    if not (m_lo < target <= m_hi):
        raise BracketError(
            f"bracket ({lo}, {hi}) gives medians ({m_lo:.4g}, {m_hi:.4g}) "
            f"which do not straddle the target {target:.4g}"
        )
    # Monte Carlo medians carry sampling noise; allow that much disorder
    # before declaring the objective broken
    slack = 0.0 if query.engine == ENGINE_SEMIANALYTIC else 0.1 * target
    for _ in range(_MAX_BISECTION_STEPS):
        mid = math.sqrt(lo * hi)
        m_mid = median_rate(mid, query)
        if m_mid < m_lo - slack or m_mid > m_hi + slack:
            raise NonMonotoneError(
                f"median at tau={mid:.6g} is {m_mid:.6g}, outside the bracket "
                f"values [{m_lo:.6g}, {m_hi:.6g}] beyond the allowed slack"
            )
        if abs(m_mid - target) <= query.tolerance * target:
            return mid
        if m_mid < target:
            lo, m_lo = mid, m_mid
        else:
            hi, m_hi = mid, m_mid
    raise NonMonotoneError(
        f"bisection did not reach the {query.tolerance:.1%} tolerance in "
        f"{_MAX_BISECTION_STEPS} steps; final bracket ({lo:.6g}, {hi:.6g})"
    )


@dataclass(frozen=True)
class TradeoffCurve:
    """Feasible (user-density ratio, rate ratio) pairs after densification.

    ``x[i] = lambda_UE' / lambda_UE`` and ``y[i] = r0' / r0`` where the
    primed quantities describe the densified network.
    """

    x: np.ndarray
    y: np.ndarray
    base_lambda_an: float
    base_lambda_ue: float
    base_median_rate: float
    densification_factor: float

    @property
    def dense_lambda_an(self) -> float:
        return self.densification_factor * self.base_lambda_an


def tradeoff_curve(base: tuple[float, float], densification_factor: float,
                   x_grid, query: PlannerQuery) -> TradeoffCurve:
    """Rate ratio achievable at each user-density ratio after densifying.

    For each ``x`` the densified network runs at
    ``tau' = densification_factor * tau_base / x``; ``y`` is the ratio of
    its median rate to the baseline median. ``x == densification_factor``
    leaves tau unchanged, so ``y == 1`` there by construction.
    """
    lam_an, lam_ue = base
    if not (lam_an > 0 and lam_ue > 0):
        raise InvalidParameterError("base densities must be positive")
    if not densification_factor > 0:
        raise InvalidParameterError("densification factor must be positive")
    x = np.asarray(x_grid, dtype=float)
    if len(x) == 0 or np.any(x <= 0) or np.any(np.diff(x) <= 0):
        raise InvalidParameterError("x grid must be positive and strictly ascending")
    tau_base = lam_an / lam_ue
    r0 = median_rate(tau_base, query)
    y = np.empty_like(x)
    for i, xi in enumerate(x):
        tau_new = densification_factor * tau_base / xi
        if math.isclose(tau_new, tau_base, rel_tol=1e-12):
            y[i] = 1.0  # identical ratio means the identical distribution
        else:
            y[i] = median_rate(tau_new, query) / r0
    return TradeoffCurve(x=x, y=y, base_lambda_an=lam_an, base_lambda_ue=lam_ue,
                         base_median_rate=r0, densification_factor=densification_factor)


def area_capacity(curve: TradeoffCurve) -> tuple[np.ndarray, int]:
    """Area capacity ``lambda_AN' * r0'`` (bps/Hz per km^2) along the curve.

    Returns the capacity per grid point and the argmax index; exact ties
    resolve toward larger x (favoring more users at lower per-user rate).
    """
    capacity = curve.dense_lambda_an * curve.base_median_rate * curve.y
    best = 0
    for i in range(1, len(capacity)):
        if capacity[i] >= capacity[best]:
            best = i
    return capacity, best


def ratio_spread(r0_values, tau_values) -> float:
    """Relative spread of tau/r0 across a grid: max/min - 1.

    Near zero when the minimum densification ratio scales linearly with
    the target rate.
    """
    ratios = np.asarray(tau_values, dtype=float) / np.asarray(r0_values, dtype=float)
    return float(ratios.max() / ratios.min() - 1.0)


def log_linear_r2(r0_values, tau_values) -> float:
    """R^2 of a straight-line fit of log(tau) against r0.

    Close to one when the minimum densification ratio grows exponentially
    with the target rate.
    """
    x = np.asarray(r0_values, dtype=float)
    z = np.log(np.asarray(tau_values, dtype=float))
    slope, intercept = np.polyfit(x, z, 1)
    resid = z - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    return 1.0 - ss_res / ss_tot
