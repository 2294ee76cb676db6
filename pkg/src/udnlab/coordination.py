"""Finite-area coordination policies and guaranteed-rate evaluation.

Three downlink policies over one snapshot of fixed-count uniform AN/UE
positions:

* ``baseline``: nearest-AN association, full power, and channel-blind
  round-robin placement of each cell's UEs onto resource blocks.
* ``policy1``: nearest-AN association, constant full power, and greedy
  separation of the strongest-interfering links into orthogonal resource
  blocks.
* ``policy2``: policy1's block assignment plus per-block max-min SINR
  power control with a per-link cap; full power is kept wherever the
  optimizer cannot beat it, so policy2 never falls below policy1.

All three share one resource model: a UE in a cell with load at most
``n_rb`` occupies exactly one block (share ``1/n_rb`` of the bandwidth);
heavier cells time-share blocks equally (share ``1/load``).

The guaranteed rate of a snapshot is the minimum UE rate, and curves
average it over independent realizations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import streams
from .channel import (
    FADING_NONE,
    FADING_RAYLEIGH,
    ChannelParams,
    dbm_to_watt,
    shannon_rate,
)
from .errors import InvalidParameterError, UnachievableTargetError
from .pointprocess import (
    AN,
    UE,
    NetworkSnapshot,
    Window,
    make_snapshot,
    sample_fixed,
)

log = logging.getLogger(__name__)

POLICY_BASELINE = "baseline"
POLICY_1 = "policy1"
POLICY_2 = "policy2"
POLICIES = (POLICY_BASELINE, POLICY_1, POLICY_2)

_BISECTION_STEPS = 40
_GAMMA_HI = 1e6
_GAMMA_FLOOR = 1e-6  # keeps the bisection well-posed when theta0 is 0 or off
_FIXED_POINT_STEPS = 200
_FIXED_POINT_TOL = 1e-9


@dataclass(frozen=True)
class CoordProblem:
    """One coordination instance: geometry plus frozen link gains.

    ``gains[a, u]`` is the linear gain (path loss times fading) from AN
    ``a`` to UE ``u``, drawn once per snapshot.
    """

    snapshot: NetworkSnapshot
    params: ChannelParams
    n_rb: int
    gains: np.ndarray

    def __post_init__(self):
        if int(self.n_rb) < 1:
            raise InvalidParameterError("n_rb must be at least 1")
        expected = (len(self.snapshot.ans), len(self.snapshot.ues))
        if self.gains.shape != expected:
            raise InvalidParameterError(
                f"gains shape {self.gains.shape} does not match geometry {expected}"
            )

    @property
    def n_ans(self) -> int:
        return len(self.snapshot.ans)

    @property
    def n_ues(self) -> int:
        return len(self.snapshot.ues)


@dataclass(frozen=True)
class Allocation:
    """Per-link resource blocks, powers and rates produced by a policy."""

    policy: str
    assoc: np.ndarray      # UE -> serving AN
    rb_of: np.ndarray      # UE -> resource-block index
    power_dbm: np.ndarray  # UE -> transmit power of its link
    rates: np.ndarray      # UE -> bps/Hz of total bandwidth
    min_rate: float


def build_problem(n_ans: int, n_ues: int, window: Window, params: ChannelParams,
                  n_rb: int, rng: np.random.Generator) -> CoordProblem:
    """Sample a snapshot and draw its link gains."""
    if int(n_ans) < 1:
        raise InvalidParameterError("need at least one access node")
    if int(n_ues) < 1:
        raise InvalidParameterError("need at least one user")
    ans = sample_fixed(int(n_ans), window, rng, kind=AN)
    ues = sample_fixed(int(n_ues), window, rng, kind=UE)
    snapshot = make_snapshot(window, ans, ues)
    dx = ans.points[:, 0][:, None] - ues.points[:, 0][None, :]
    dy = ans.points[:, 1][:, None] - ues.points[:, 1][None, :]
    dist = np.hypot(dx, dy)
    gains = (np.maximum(dist, params.d0_m) / params.d0_m) ** (-params.alpha)
    if params.fading == FADING_RAYLEIGH:
        gains = gains * rng.standard_exponential(gains.shape)
    return CoordProblem(snapshot=snapshot, params=params, n_rb=int(n_rb), gains=gains)


def _shares(loads: np.ndarray, assoc: np.ndarray, n_rb: int) -> np.ndarray:
    """Bandwidth share per UE: one block each while they fit, equal
    time-sharing once the cell load exceeds the block count."""
    cell_load = loads[assoc]
    return np.where(cell_load <= n_rb, 1.0 / n_rb, 1.0 / cell_load)


def _rb_capacity(load: int, n_rb: int) -> int:
    return max(1, math.ceil(load / n_rb))


def round_robin_assignment(problem: CoordProblem) -> np.ndarray:
    """Each AN spreads its UEs over blocks in index order, cycling when
    the load exceeds the block count. Blind to channel conditions."""
    snap = problem.snapshot
    rb_of = np.zeros(problem.n_ues, dtype=np.int64)
    seen: dict[int, int] = {}
    for u in range(problem.n_ues):
        a = int(snap.assoc[u])
        rb_of[u] = seen.get(a, 0) % problem.n_rb
        seen[a] = seen.get(a, 0) + 1
    return rb_of


def evaluate_baseline(problem: CoordProblem) -> Allocation:
    """Uncoordinated operation: nearest-AN association, full power, and
    channel-blind round-robin block hopping.

    Each cell cycles its UEs over its blocks, so over time a UE receives a
    full ``1/load`` share of the bandwidth while colliding with a given
    neighbor cell only when their hopping patterns align. The SINR is
    evaluated on the UE's current slot of the round-robin alignment.
    """
    snap = problem.snapshot
    p = problem.params
    rb_of = round_robin_assignment(problem)
    power_w = np.full(problem.n_ues, p.tx_power_watt)
    sinr = np.empty(problem.n_ues)
    for r in range(problem.n_rb):
        links = np.flatnonzero(rb_of == r)
        if len(links) == 0:
            continue
        sinr[links] = _block_sinr(problem, links, power_w[links])
    shares = 1.0 / snap.loads[snap.assoc]
    rates = shannon_rate(sinr, shares, p.theta0_linear)
    return Allocation(POLICY_BASELINE, snap.assoc.copy(), rb_of,
                      np.full(problem.n_ues, p.tx_power_dbm), rates,
                      float(rates.min()))


def _block_sinr(problem: CoordProblem, links: np.ndarray, p_links: np.ndarray):
    """SINR of the links sharing one block, given their powers.

    Interference from an AN with several time-shared links on the block
    uses their average power (one transmits at a time); same-cell links
    never interfere.
    """
    snap = problem.snapshot
    assoc = snap.assoc
    sigma2 = problem.params.noise_power_watt(problem.params.bandwidth_hz / problem.n_rb)
    g_serv = problem.gains[assoc[links], links]
    an_power = np.zeros(problem.n_ans)
    an_count = np.zeros(problem.n_ans)
    np.add.at(an_power, assoc[links], p_links)
    np.add.at(an_count, assoc[links], 1.0)
    mean_power = np.divide(an_power, an_count, out=np.zeros_like(an_power),
                           where=an_count > 0)
    rx = mean_power @ problem.gains[:, links]
    interference = rx - mean_power[assoc[links]] * g_serv
    num = p_links * g_serv
    denom = interference + sigma2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, num / denom, np.where(num > 0, np.inf, 0.0))


def _policy_rates(problem: CoordProblem, rb_of: np.ndarray,
                  power_w: np.ndarray) -> np.ndarray:
    """Rates for a block assignment where each link transmits only on its
    own block."""
    snap = problem.snapshot
    p = problem.params
    shares = _shares(snap.loads, snap.assoc, problem.n_rb)
    sinr = np.empty(problem.n_ues)
    for r in range(problem.n_rb):
        links = np.flatnonzero(rb_of == r)
        if len(links) == 0:
            continue
        sinr[links] = _block_sinr(problem, links, power_w[links])
    return shannon_rate(sinr, shares, p.theta0_linear)


def evaluate_assignment(problem: CoordProblem, rb_of, power_w=None) -> Allocation:
    """Evaluate an explicit block assignment at the given link powers
    (full power when omitted). Rejects assignments that overfill a block
    at some AN beyond its time-sharing capacity."""
    rb_of = np.asarray(rb_of, dtype=np.int64)
    if rb_of.shape != (problem.n_ues,):
        raise InvalidParameterError("rb_of must assign every UE")
    if np.any(rb_of < 0) or np.any(rb_of >= problem.n_rb):
        raise InvalidParameterError("block index out of range")
    snap = problem.snapshot
    for a in np.unique(snap.assoc):
        cap = _rb_capacity(int(snap.loads[a]), problem.n_rb)
        counts = np.bincount(rb_of[snap.assoc == a], minlength=problem.n_rb)
        if counts.max() > cap:
            raise InvalidParameterError(
                f"AN {a} has {counts.max()} links on one block, capacity {cap}"
            )
    if power_w is None:
        power_w = np.full(problem.n_ues, problem.params.tx_power_watt)
    rates = _policy_rates(problem, rb_of, power_w)
    power_dbm = 10.0 * np.log10(np.maximum(power_w, 1e-300) * 1000.0)
    return Allocation("custom", snap.assoc.copy(), rb_of, power_dbm, rates,
                      float(rates.min()))


def _conflict_assignment(problem: CoordProblem) -> np.ndarray:
    """Greedy interference-aware coloring of links into blocks.

    Links are processed in descending order of their strongest conflict
    (the larger of the two cross-interference-to-signal ratios over all
    counterpart links); each goes to the feasible block where the sum of
    interference it would cause and receive, normalized by the victims'
    signal gains, is smallest.
    """
    snap = problem.snapshot
    assoc, loads = snap.assoc, snap.loads
    n_ue = problem.n_ues
    g_serv = problem.gains[assoc, np.arange(n_ue)]

    # cross[j, i] = gain from link j's AN to link i's UE, relative to
    # link i's own signal gain; same-cell pairs are orthogonal
    cross = problem.gains[assoc] / g_serv[None, :]
    same_cell = assoc[:, None] == assoc[None, :]
    np.fill_diagonal(same_cell, True)
    cross = np.where(same_cell, 0.0, cross)

    conflict = np.maximum(cross, cross.T)
    order = np.argsort(-conflict.max(axis=1), kind="stable")

    rb_of = np.full(n_ue, -1, dtype=np.int64)
    occupancy = np.zeros((problem.n_ans, problem.n_rb), dtype=np.int64)
    for i in order:
        a = int(assoc[i])
        cap = _rb_capacity(int(loads[a]), problem.n_rb)
        best_rb = -1
        best_score = math.inf
        for r in range(problem.n_rb):
            if occupancy[a, r] >= cap:
                continue
            placed = rb_of == r
            score = float(cross[placed, i].sum() + cross[i, placed].sum())
            if score < best_score:
                best_score = score
                best_rb = r
        rb_of[i] = best_rb
        occupancy[a, best_rb] += 1
    return rb_of


def evaluate_policy1(problem: CoordProblem) -> Allocation:
    """Interference-aware orthogonalization at constant full power."""
    rb_of = _conflict_assignment(problem)
    alloc = evaluate_assignment(problem, rb_of)
    return Allocation(POLICY_1, alloc.assoc, alloc.rb_of, alloc.power_dbm,
                      alloc.rates, alloc.min_rate)


def _max_min_powers(g_serv, cross, sigma2, cap_w, gamma_lo):
    """Max-min SINR power control for the links of one block.

    Bisection on a common SINR target over ``[gamma_lo, 1e6]``; each
    candidate is checked by a monotone fixed-point iteration from zero
    under the per-link cap. Returns the best feasible power vector, or
    None when no target in the range is feasible.
    """
    n = len(g_serv)
    lo, hi = max(gamma_lo, _GAMMA_FLOOR), _GAMMA_HI
    best = None
    cross_t = cross.T.copy()
    warm = np.zeros(n)
    for _ in range(_BISECTION_STEPS):
        gamma = math.sqrt(lo * hi)
        # the fixed point of any smaller gamma lies below this gamma's
        # minimal fixed point, so it is a valid monotone starting iterate
        p = warm
        converged = False
        for _ in range(_FIXED_POINT_STEPS):
            required = gamma * (cross_t @ p + sigma2) / g_serv
            # the iteration climbs monotonically toward the minimal fixed
            # point, so a required power above the cap already certifies
            # infeasibility of this gamma
            if np.any(required > cap_w * (1.0 + 1e-12)):
                break
            if np.all(np.abs(required - p) <= _FIXED_POINT_TOL * np.maximum(required, 1e-300)):
                p = required
                converged = True
                break
            p = required
        if converged:
            interference = cross_t @ p + sigma2
            with np.errstate(divide="ignore", invalid="ignore"):
                sinr = np.where(interference > 0, p * g_serv / interference,
                                np.where(p * g_serv > 0, np.inf, 0.0))
            feasible = bool(np.all(sinr >= gamma * (1.0 - 1e-9)))
        else:
            feasible = False
            log.debug("power control infeasible or not converged at gamma=%.3g", gamma)
        if feasible:
            best = p
            warm = p
            lo = gamma
        else:
            hi = gamma
    return best


def evaluate_policy2(problem: CoordProblem, base: Allocation | None = None) -> Allocation:
    """Policy1's block assignment plus per-block max-min power loading.

    Per block the optimized powers are adopted only when they raise that
    block's minimum rate above the full-power value, so the result never
    falls below policy1 on the same problem.
    """
    if base is None:
        base = evaluate_policy1(problem)
    snap = problem.snapshot
    p = problem.params
    assoc = snap.assoc
    n_ue = problem.n_ues
    g_serv = problem.gains[assoc, np.arange(n_ue)]
    cap_w = p.tx_power_watt
    sigma2 = p.noise_power_watt(p.bandwidth_hz / problem.n_rb)
    shares = _shares(snap.loads, assoc, problem.n_rb)

    # blocks are orthogonal, so each can be optimized and compared against
    # its full-power rates (= policy1's) in isolation
    power_w = np.full(n_ue, cap_w)
    rates = base.rates.copy()
    for r in range(problem.n_rb):
        links = np.flatnonzero(base.rb_of == r)
        if len(links) == 0:
            continue
        cross = problem.gains[np.ix_(assoc[links], links)].copy()
        same = assoc[links][:, None] == assoc[links][None, :]
        cross[same] = 0.0  # same-cell links are orthogonal (blocks or time slots)
        solved = _max_min_powers(g_serv[links], cross, sigma2, cap_w, p.theta0_linear)
        if solved is None:
            continue
        trial_rates = shannon_rate(_block_sinr(problem, links, solved),
                                   shares[links], p.theta0_linear)
        if trial_rates.min() > rates[links].min():
            power_w[links] = solved
            rates[links] = trial_rates
    power_dbm = 10.0 * np.log10(np.maximum(power_w, 1e-300) * 1000.0)
    return Allocation(POLICY_2, base.assoc, base.rb_of, power_dbm, rates,
                      float(rates.min()))


_EVALUATORS = {
    POLICY_BASELINE: evaluate_baseline,
    POLICY_1: evaluate_policy1,
    POLICY_2: evaluate_policy2,
}


def evaluate_policy(problem: CoordProblem, policy: str) -> Allocation:
    try:
        return _EVALUATORS[policy](problem)
    except KeyError:
        raise InvalidParameterError(
            f"unknown policy {policy!r}; expected one of {POLICIES}"
        ) from None


def random_assignment(problem: CoordProblem, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random feasible block per link (comparison baseline for
    the coloring heuristic)."""
    snap = problem.snapshot
    rb_of = np.full(problem.n_ues, -1, dtype=np.int64)
    occupancy = np.zeros((problem.n_ans, problem.n_rb), dtype=np.int64)
    for u in range(problem.n_ues):
        a = int(snap.assoc[u])
        cap = _rb_capacity(int(snap.loads[a]), problem.n_rb)
        free = np.flatnonzero(occupancy[a] < cap)
        r = int(free[rng.integers(len(free))])
        rb_of[u] = r
        occupancy[a, r] += 1
    return rb_of


@dataclass(frozen=True)
class GuaranteedRateCurve:
    """Mean minimum UE rate versus densification ratio for one policy."""

    policy: str
    tau: np.ndarray
    mean_min_rate: np.ndarray
    stderr: np.ndarray
    n_realizations: int


def _min_rates_one_realization(policies, n_ans, n_ues, window, params, n_rb,
                               master_seed, ti, rlz):
    rng = streams.substream(master_seed, streams.COORD_SNAPSHOT, ti, rlz)
    problem = build_problem(n_ans, n_ues, window, params, n_rb, rng)
    out = {}
    alloc1 = None
    if POLICY_1 in policies or POLICY_2 in policies:
        alloc1 = evaluate_policy1(problem)
    for pol in policies:
        if pol == POLICY_BASELINE:
            out[pol] = evaluate_baseline(problem).min_rate
        elif pol == POLICY_1:
            out[pol] = alloc1.min_rate
        else:
            out[pol] = evaluate_policy2(problem, base=alloc1).min_rate
    return out


def _curve_chunk(policies, counts, n_ues, window, params, n_rb, master_seed, tasks):
    return [
        _min_rates_one_realization(policies, counts[ti], n_ues, window, params,
                                   n_rb, master_seed, ti, rlz)
        for ti, rlz in tasks
    ]


def guaranteed_rate_curves(tau_grid, n_ues: int, window: Window, params: ChannelParams,
                           n_realizations: int, master_seed: int,
                           policies=POLICIES, n_rb: int = 4,
                           n_workers: int = 1) -> dict[str, GuaranteedRateCurve]:
    """Average guaranteed (minimum) UE rate per densification ratio, for
    several policies over shared snapshots.

    ``round(tau * n_ues)`` ANs and ``n_ues`` UEs are dropped uniformly per
    realization; realizations are seeded by (tau index, realization
    index), so every policy sees identical snapshots and the output is
    independent of the worker count.
    """
    from concurrent.futures import ProcessPoolExecutor

    taus = np.asarray(tau_grid, dtype=float)
    if len(taus) == 0 or np.any(taus <= 0):
        raise InvalidParameterError("tau grid must be positive")
    policies = tuple(policies)
    for pol in policies:
        if pol not in POLICIES:
            raise InvalidParameterError(f"unknown policy {pol!r}; expected one of {POLICIES}")
    counts = {}
    for ti, tau in enumerate(taus):
        n_ans = int(round(tau * n_ues))
        if n_ans < 1:
            raise InvalidParameterError(
                f"tau={tau} with {n_ues} UEs rounds to zero access nodes"
            )
        counts[ti] = n_ans

    n_real = int(n_realizations)
    tasks = [(ti, rlz) for ti in range(len(taus)) for rlz in range(n_real)]
    chunk = 8
    batches = [tasks[i : i + chunk] for i in range(0, len(tasks), chunk)]
    if n_workers <= 1 or len(batches) == 1:
        results = [_curve_chunk(policies, counts, n_ues, window, params, n_rb,
                                master_seed, b) for b in batches]
    else:
        with ProcessPoolExecutor(max_workers=int(n_workers)) as pool:
            futures = [pool.submit(_curve_chunk, policies, counts, n_ues, window,
                                   params, n_rb, master_seed, b) for b in batches]
            results = [f.result() for f in futures]
    flat = [rec for batch in results for rec in batch]

    curves = {}
    for pol in policies:
        vals = np.array([rec[pol] for rec in flat]).reshape(len(taus), n_real)
        means = vals.mean(axis=1)
        errs = (vals.std(axis=1, ddof=1) / math.sqrt(n_real)) if n_real > 1 else np.zeros(len(taus))
        curves[pol] = GuaranteedRateCurve(pol, taus, means, errs, n_real)
    return curves


def guaranteed_rate_curve(tau_grid, n_ues: int, window: Window, params: ChannelParams,
                          n_realizations: int, master_seed: int, policy: str,
                          n_rb: int = 4, n_workers: int = 1) -> GuaranteedRateCurve:
    """Guaranteed-rate curve of a single policy (see
    :func:`guaranteed_rate_curves`)."""
    return guaranteed_rate_curves(tau_grid, n_ues, window, params, n_realizations,
                                  master_seed, policies=(policy,), n_rb=n_rb,
                                  n_workers=n_workers)[policy]


def _tau_for_target(curve: GuaranteedRateCurve, target: float) -> float:
    """Smallest grid tau whose mean rate reaches ``target``, interpolating
    linearly in log(tau) between bracketing grid points."""
    means = curve.mean_min_rate
    taus = curve.tau
    reach = np.flatnonzero(means >= target)
    if len(reach) == 0:
        raise UnachievableTargetError(curve.policy, target)
    i = int(reach[0])
    if i == 0:
        return float(taus[0])  # already met at the left edge of the grid
    t0, t1 = math.log(taus[i - 1]), math.log(taus[i])
    m0, m1 = means[i - 1], means[i]
    frac = (target - m0) / (m1 - m0)
    return math.exp(t0 + frac * (t1 - t0))


def densification_savings(target_rates, curves: dict[str, GuaranteedRateCurve]):
    """Relative reduction in required densification versus the baseline.

    Returns rows ``(target_rate, policy, savings_pct)`` for every
    non-baseline policy in ``curves``. Raises
    :class:`UnachievableTargetError` (naming the policy) when a curve
    never reaches a target.
    """
    if POLICY_BASELINE not in curves:
        raise InvalidParameterError("curves must include the baseline policy")
    rows = []
    for target in target_rates:
        tau_base = _tau_for_target(curves[POLICY_BASELINE], float(target))
        for policy, curve in curves.items():
            if policy == POLICY_BASELINE:
                continue
            tau_p = _tau_for_target(curve, float(target))
            rows.append((float(target), policy, 100.0 * (1.0 - tau_p / tau_base)))
    return rows
