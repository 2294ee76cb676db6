"""Link gains, SIR/SINR, and Shannon rates.

Power-law path loss with a near-field clamp at the reference distance,
optional unit-mean Rayleigh (exponential power) fading, and a service
threshold below which the rate is zero. All functions accept scalars or
numpy arrays and are stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParameterError

FADING_RAYLEIGH = "rayleigh"
FADING_NONE = "none"


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Propagation and resource parameters.

    ``noise_psd_dbm_hz = -inf`` selects interference-limited operation
    (SIR instead of SINR). ``theta0_db`` is the service threshold: links
    whose SIR/SINR falls below it carry zero rate.
    """

    alpha: float = 4.0
    d0_m: float = 1.0
    fading: str = FADING_RAYLEIGH
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 10e6
    tx_power_dbm: float = 30.0
    theta0_db: float = -6.0
    n_subchannels: int = 10

    def __post_init__(self):
        if not self.alpha > 2:
            raise InvalidParameterError("path-loss exponent must exceed 2")
        if not self.d0_m > 0:
            raise InvalidParameterError("reference distance must be positive")
        if self.fading not in (FADING_RAYLEIGH, FADING_NONE):
            raise InvalidParameterError(f"unknown fading model {self.fading!r}")
        if int(self.n_subchannels) < 1:
            raise InvalidParameterError("n_subchannels must be at least 1")
        if not self.bandwidth_hz > 0:
            raise InvalidParameterError("bandwidth must be positive")

    @classmethod
    def interference_limited(cls, **kwargs) -> "ChannelParams":
        """Parameters with the noise term switched off."""
        kwargs.setdefault("noise_psd_dbm_hz", -math.inf)
        return cls(**kwargs)

    @property
    def is_interference_limited(self) -> bool:
        return math.isinf(self.noise_psd_dbm_hz) and self.noise_psd_dbm_hz < 0

    @property
    def theta0_linear(self) -> float:
        return float(db_to_linear(self.theta0_db))

    @property
    def tx_power_watt(self) -> float:
        return float(dbm_to_watt(self.tx_power_dbm))

    @property
    def subchannel_bandwidth_hz(self) -> float:
        return self.bandwidth_hz / int(self.n_subchannels)

    def noise_power_watt(self, bandwidth_hz: float) -> float:
        """Thermal noise power over ``bandwidth_hz`` (0 when noise is off)."""
        if self.is_interference_limited:
            return 0.0
        return float(dbm_to_watt(self.noise_psd_dbm_hz)) * bandwidth_hz


def path_gain(d_m, params: ChannelParams):
    """Linear power gain ``(max(d, d0)/d0)**(-alpha)``.

    Distances below the reference distance are clamped to ``d0`` so the
    received power stays bounded near the transmitter.
    """
    d = np.asarray(d_m, dtype=float)
    if np.any(d < 0):
        raise InvalidParameterError("distance must be nonnegative")
    g = (np.maximum(d, params.d0_m) / params.d0_m) ** (-params.alpha)
    return float(g) if np.isscalar(d_m) else g


def draw_fading(fading: str, rng: np.random.Generator, size=None):
    """Unit-mean power fading factor(s): Exp(1) for Rayleigh, 1 otherwise."""
    if fading == FADING_RAYLEIGH:
        return rng.standard_exponential(size)
    if fading == FADING_NONE:
        return 1.0 if size is None else np.ones(size)
    raise InvalidParameterError(f"unknown fading model {fading!r}")


def sinr(serving_gain, interferer_gains, interferer_active, params: ChannelParams) -> float:
    """Linear SINR of one link on one subchannel.

    Gains combine path loss and fading. Interference sums the active
    entries only; the noise term is ``N0 * (bandwidth / n_subchannels)``,
    zero in interference-limited mode. With no active interferer and no
    noise the ratio is reported as ``math.inf``.
    """
    gains = np.asarray(interferer_gains, dtype=float)
    active = np.asarray(interferer_active, dtype=bool)
    if gains.shape != active.shape:
        raise InvalidParameterError("interferer gain/activity lengths differ")
    p = params.tx_power_watt
    denom = p * float(gains[active].sum()) + params.noise_power_watt(
        params.subchannel_bandwidth_hz
    )
    num = p * float(serving_gain)
    if denom == 0.0:
        return math.inf
    return num / denom


def shannon_rate(sinr_linear, share, theta0_linear):
    """Spectral efficiency ``share * log2(1 + sinr)``, zero below threshold.

    ``share`` is the fraction of total system bandwidth the link occupies;
    the result is in bps/Hz of total bandwidth.
    """
    s = np.asarray(sinr_linear, dtype=float)
    sh = np.asarray(share, dtype=float)
    if np.any(sh < 0) or np.any(sh > 1):
        raise InvalidParameterError("share must lie in [0, 1]")
    # an infinite ratio (no interference, no noise) carries infinite rate
    # for any positive share; avoid the 0 * inf indeterminate form
    capped = np.where(np.isinf(s), 0.0, s)
    rate = np.where(s >= theta0_linear, sh * np.log2(1.0 + capped), 0.0)
    rate = np.where(np.isinf(s) & (sh > 0) & (s >= theta0_linear), np.inf, rate)
    return float(rate) if rate.ndim == 0 else rate
