"""Exception types shared across the package."""


class UdnlabError(Exception):
    """Base class for all udnlab errors."""


class InvalidParameterError(UdnlabError, ValueError):
    """A parameter violates its documented domain."""


class DivergenceError(InvalidParameterError):
    """An integral or series does not converge for the given parameters
    (e.g. path-loss exponent <= 2 makes far-field interference infinite)."""


class NoServerError(UdnlabError):
    """Association requested against an empty access-node set."""


class SimulationFailureError(UdnlabError):
    """A Monte Carlo trial could not be completed (e.g. resample cap hit)."""


class BracketError(UdnlabError):
    """A root-finding bracket does not straddle the target value."""


class NonMonotoneError(UdnlabError):
    """Objective evaluations violated the expected monotone ordering by
    more than the allowed Monte Carlo slack."""


class UnachievableTargetError(UdnlabError):
    """A target rate lies above the range covered by a policy curve."""

    def __init__(self, policy: str, target: float, message: str | None = None):
        self.policy = policy
        self.target = target
        super().__init__(
            message
            or f"target rate {target} bps/Hz is not achieved by policy "
            f"'{policy}' anywhere on the evaluated grid"
        )


class ConfigError(UdnlabError):
    """Experiment configuration failed validation.

    ``violations`` holds one human-readable message per offending field.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
