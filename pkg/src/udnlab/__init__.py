"""udnlab: simulation and densification planning for ultra-dense wireless networks.

Random network geometries (Poisson and fixed-count), typical-user SIR and
rate distributions by Monte Carlo and by a certified semi-analytic model,
densification planning (minimum density ratio, density/rate tradeoffs),
and finite-area interference-coordination policies with guaranteed-rate
and densification-savings evaluation.
"""

__version__ = "0.1.0"

from .channel import ChannelParams, path_gain, shannon_rate, sinr
from .errors import (
    BracketError,
    ConfigError,
    DivergenceError,
    InvalidParameterError,
    NoServerError,
    SimulationFailureError,
    UdnlabError,
    UnachievableTargetError,
)
from .montecarlo import (
    RateCdf,
    SimSpec,
    estimate_coverage,
    ks_distance,
    quantile,
    simulate_typical_rate,
)
from .pointprocess import (
    NetworkSnapshot,
    PointSet,
    Window,
    associate_nearest,
    place_typical_ue,
    sample_fixed,
    sample_hppp,
)

__all__ = [
    "ChannelParams",
    "NetworkSnapshot",
    "PointSet",
    "RateCdf",
    "SimSpec",
    "Window",
    "associate_nearest",
    "estimate_coverage",
    "ks_distance",
    "path_gain",
    "place_typical_ue",
    "quantile",
    "sample_fixed",
    "sample_hppp",
    "shannon_rate",
    "simulate_typical_rate",
    "sinr",
    "BracketError",
    "ConfigError",
    "DivergenceError",
    "InvalidParameterError",
    "NoServerError",
    "SimulationFailureError",
    "UdnlabError",
    "UnachievableTargetError",
]
