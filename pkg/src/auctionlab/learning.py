"""No-regret dynamics, best-response dynamics, and equilibrium audits
over discretized bid grids.

Agents play exponential weights over their grids with the anytime rate
eta_t = sqrt(8 ln K / t) on utilities rescaled to [0, 1].  Counterfactual
utilities (the payoff of every grid bid against the others' realized
bids) are computed by exact replay: the replay exploits that an agent's
utility, as a function of her own bid, is the upper envelope of at most
m+1 lines within each insertion position of the visit order.  The
vectorized replay is verified against naive re-running in the tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .mechanisms import DEFAULT_TIE, TieRule, run_grand_bundle, run_single_bid
from .optimizer import optimal_allocation
from .valuations import MONEY_TOL, Valuation, demand_mask, popcount_groups

MECHANISMS = ("single-bid", "grand-bundle")
_CACHE_CAP = 200_000


@dataclass(frozen=True)
class BidGrid:
    """Sorted candidate bids for one agent; contains 0 and reaches the
    agent's full-bundle value."""

    bids: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.bids:
            raise DomainError("empty bid grid")
        if list(self.bids) != sorted(set(self.bids)):
            raise DomainError("grid bids must be strictly increasing")
        if self.bids[0] != 0.0:
            raise DomainError("grid must contain the zero bid")

    def __len__(self) -> int:
        return len(self.bids)

    def array(self) -> np.ndarray:
        return np.asarray(self.bids)


def make_grid(
    v: Valuation,
    critical: Sequence[float] = (),
    lo_frac: float = 1e-3,
    ratio: float = 1.05,
) -> BidGrid:
    """Zero plus a geometric ladder up to the full-bundle value, plus any
    instance-critical bids."""
    if ratio <= 1.0 or lo_frac <= 0.0:
        raise DomainError("grid needs ratio > 1 and lo_frac > 0")
    vmax = v.vmax()
    bids = {0.0}
    if vmax > 0:
        b = lo_frac * vmax
        while b < vmax:
            bids.add(b)
            b *= ratio
        bids.add(vmax)
    for c in critical:
        if c >= 0:
            bids.add(float(c))
    return BidGrid(tuple(sorted(bids)))


def audit_grid(bids: Sequence[float]) -> BidGrid:
    """Small explicit grid (deduplicated, zero added)."""
    return BidGrid(tuple(sorted({0.0} | {float(b) for b in bids if b >= 0})))


# ---------------------------------------------------------------------------
# Exact counterfactual replay


def _size_envelope(v: Valuation, avail_mask: int) -> np.ndarray:
    """g[c] = best value of a c-item subset of the available items."""
    perm, starts = popcount_groups(v.m)
    masked = np.where((perm & ~avail_mask) == 0, v.table_by_popcount(), -np.inf)
    return np.maximum.reduceat(masked, starts)


def _envelope_utilities(g: np.ndarray, bids: np.ndarray) -> np.ndarray:
    """max_c g[c] - bid * c for each candidate bid; g may be a stack."""
    sizes = np.arange(g.shape[-1])
    return np.max(g[..., :, None] - bids[None, :] * sizes[:, None], axis=-2)


def _positions(
    bids: Sequence[float], agent: int, cand: np.ndarray, pos: list[int]
) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Visit-order slot of `agent` for every candidate bid.

    Returns the other agents in their mechanism order, the beats matrix,
    and the agent's position per candidate."""
    n = len(bids)
    others = sorted((j for j in range(n) if j != agent), key=lambda j: (-bids[j], pos[j]))
    before = np.array([pos[j] < pos[agent] for j in others], dtype=bool)
    other_bids = np.array([bids[j] for j in others], dtype=float)
    beats = (other_bids[:, None] > cand[None, :]) | (
        (other_bids[:, None] == cand[None, :]) & before[:, None]
    )
    return others, beats, beats.sum(axis=0)


def counterfactual_utilities(
    vals: Sequence[Valuation],
    mechanism: str,
    bids: Sequence[float],
    agent: int,
    grid: BidGrid,
    tie: TieRule | None = None,
    _cache: dict | None = None,
) -> np.ndarray:
    """Exact utility of every grid bid for one agent, others' bids fixed."""
    tie = tie or DEFAULT_TIE
    n = len(vals)
    cand = grid.array()
    others, beats, position = _positions(bids, agent, cand, tie.positions(n))

    if mechanism == "single-bid":
        used = np.unique(position)
        env = np.full((n, cand.size), np.nan)
        avail = (1 << vals[agent].m) - 1
        gs = {}
        for k in range(n):
            if k in used:
                gs[k] = _size_envelope(vals[agent], avail)
            if k < n - 1:
                if k + 1 > used.max():
                    break
                j = others[k]
                avail &= ~_cached_demand(vals, j, avail, bids[j], _cache)
        stack = _envelope_utilities(np.stack([gs[k] for k in sorted(gs)]), cand)
        for row, k in enumerate(sorted(gs)):
            env[k] = stack[row]
        return env[position, np.arange(cand.size)]

    if mechanism == "grand-bundle":
        vmax_i = vals[agent].vmax()
        declines = np.array([vals[j].vmax() < bids[j] - MONEY_TOL for j in others])
        # offered iff every agent served earlier declines
        blocked = (beats & ~declines[:, None]).any(axis=0)
        accept = vmax_i >= cand - MONEY_TOL
        return np.where(~blocked & accept, vmax_i - cand, 0.0)

    raise DomainError(f"unknown mechanism {mechanism!r}")


def _cached_demand(
    vals: Sequence[Valuation], j: int, avail: int, bid: float, cache: dict | None
) -> int:
    if cache is None:
        return demand_mask(vals[j], avail, bid)
    key = (j, avail, bid)
    taken = cache.get(key)
    if taken is None:
        taken = demand_mask(vals[j], avail, bid)
        cache[key] = taken
    return taken


def replay_utility(
    vals: Sequence[Valuation],
    mechanism: str,
    bids: Sequence[float],
    agent: int,
    deviation: float,
    tie: TieRule | None = None,
) -> float:
    """Naive oracle: rerun the mechanism with one bid replaced."""
    full = list(bids)
    full[agent] = deviation
    if mechanism == "single-bid":
        out = run_single_bid(vals, full, tie)
    elif mechanism == "grand-bundle":
        out = run_grand_bundle(vals, full, tie)
    else:
        raise DomainError(f"unknown mechanism {mechanism!r}")
    return out.utilities(vals)[agent]


# ---------------------------------------------------------------------------
# No-regret dynamics


@dataclass
class PlayHistory:
    """Full record of a learning run; the empirical joint distribution is
    uniform over the logged rounds."""

    mechanism: str
    vals: tuple[Valuation, ...]
    grids: tuple[BidGrid, ...]
    bids: np.ndarray       # rounds x agents
    utilities: np.ndarray  # rounds x agents
    welfare: np.ndarray    # rounds
    seed: int
    tie: TieRule = field(default_factory=TieRule)
    counterfactual_totals: tuple[np.ndarray, ...] = ()

    @property
    def rounds(self) -> int:
        return self.bids.shape[0]

    @property
    def agents(self) -> int:
        return self.bids.shape[1]

    def mean_welfare(self) -> float:
        return float(self.welfare.mean())


def _hedge_distribution(cum: np.ndarray, t: int) -> np.ndarray:
    k = cum.size
    if k == 1:
        return np.ones(1)
    eta = math.sqrt(8.0 * math.log(k) / t)
    z = eta * (cum - cum.max())
    w = np.exp(z)
    return w / w.sum()


def _realized_single_bid(
    vals: Sequence[Valuation], bids: Sequence[float], tie: TieRule, cache: dict
) -> tuple[list[int], list[float], float]:
    """Sequential purchases via the shared per-round demand cache;
    semantics identical to run_single_bid."""
    n = len(vals)
    pos = tie.positions(n)
    order = sorted(range(n), key=lambda i: (-bids[i], pos[i]))
    avail = (1 << vals[0].m) - 1
    taken = [0] * n
    utils = [0.0] * n
    sw = 0.0
    for i in order:
        tk = _cached_demand(vals, i, avail, bids[i], cache)
        taken[i] = tk
        value = vals[i].value_mask(tk)
        utils[i] = value - bids[i] * tk.bit_count()
        sw += value
        avail &= ~tk
    return taken, utils, sw


def no_regret_run(
    vals: Sequence[Valuation],
    mechanism: str,
    grids: Sequence[BidGrid],
    rounds: int,
    seed: int = 0,
    tie: TieRule | None = None,
) -> PlayHistory:
    """Exponential-weights play over bid grids; deterministic given seed."""
    if rounds < 1:
        raise PreconditionError("at least one round required")
    if mechanism not in MECHANISMS:
        raise DomainError(f"unknown mechanism {mechanism!r}")
    tie = tie or DEFAULT_TIE
    n = len(vals)
    rng = np.random.default_rng(seed)
    scales = [max(v.vmax(), MONEY_TOL) for v in vals]
    cum = [np.zeros(len(g)) for g in grids]
    bid_log = np.empty((rounds, n))
    util_log = np.empty((rounds, n))
    sw_log = np.empty(rounds)
    # repeat profiles dominate once the dynamics settle, so memoize both
    # demand answers and whole counterfactual rows across rounds
    demand_cache: dict = {}
    uvec_cache: dict = {}
    realized_cache: dict = {}
    for t in range(1, rounds + 1):
        bids = []
        for i in range(n):
            p = _hedge_distribution(cum[i], t)
            idx = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
            bids.append(grids[i].bids[min(idx, len(p) - 1)])
        profile = tuple(bids)
        realized = realized_cache.get(profile)
        if realized is None:
            if mechanism == "single-bid":
                _, utils, sw = _realized_single_bid(vals, bids, tie, demand_cache)
            else:
                outcome = run_grand_bundle(vals, bids, tie)
                utils = list(outcome.utilities(vals))
                sw = outcome.social_welfare
            realized = (utils, sw)
            if len(realized_cache) < _CACHE_CAP:
                realized_cache[profile] = realized
        bid_log[t - 1] = bids
        util_log[t - 1] = realized[0]
        sw_log[t - 1] = realized[1]
        for i in range(n):
            key = (i,) + profile[:i] + profile[i + 1 :]
            uvec = uvec_cache.get(key)
            if uvec is None:
                uvec = counterfactual_utilities(vals, mechanism, bids, i, grids[i], tie, demand_cache)
                if len(uvec_cache) < _CACHE_CAP:
                    uvec_cache[key] = uvec
            cum[i] += uvec / scales[i]
    totals = tuple(cum[i] * scales[i] for i in range(n))
    return PlayHistory(
        mechanism, tuple(vals), tuple(grids), bid_log, util_log, sw_log, seed, tie, totals
    )


def regret_of(history: PlayHistory, agent: int, grid: BidGrid | None = None) -> float:
    """Best fixed-deviation gain over the logged play (exact replay).

    The returned value certifies the history as an alpha-coarse
    equilibrium sample with alpha = max(regret, 0).  Counterfactual
    totals accumulated during the run are reused when the deviation grid
    is the play grid; supplying another grid forces a full replay.
    """
    if grid is None and history.counterfactual_totals:
        totals = history.counterfactual_totals[agent]
    else:
        grid = grid or history.grids[agent]
        totals = np.zeros(len(grid))
        for t in range(history.rounds):
            totals += counterfactual_utilities(
                list(history.vals), history.mechanism, history.bids[t], agent, grid, history.tie
            )
    realized = history.utilities[:, agent].sum()
    return float((totals.max() - realized) / history.rounds)


# ---------------------------------------------------------------------------
# Best-response dynamics and pure equilibria


@dataclass(frozen=True)
class BrdResult:
    converged: bool
    profile: tuple[float, ...]
    sweeps: int
    is_equilibrium: bool
    cycle: tuple[tuple[float, ...], ...] = ()


def best_response_dynamics(
    vals: Sequence[Valuation],
    mechanism: str,
    grids: Sequence[BidGrid],
    tie: TieRule | None = None,
    max_sweeps: int = 1000,
    start: Sequence[float] | None = None,
) -> BrdResult:
    """Round-robin exact best responses over the grids.

    An agent moves only on strict improvement (tolerance MONEY_TOL) and
    moves to the smallest maximizing bid.  Returns a verified fixed point
    or the detected cycle.
    """
    tie = tie or DEFAULT_TIE
    n = len(vals)
    profile = [0.0] * n if start is None else [float(b) for b in start]
    seen: dict[tuple[float, ...], int] = {tuple(profile): 0}
    trail = [tuple(profile)]
    for sweep in range(1, max_sweeps + 1):
        changed = False
        for i in range(n):
            uvec = counterfactual_utilities(vals, mechanism, profile, i, grids[i], tie)
            cand = grids[i].array()
            cur_idx = int(np.searchsorted(cand, profile[i]))
            cur_u = uvec[cur_idx] if cur_idx < cand.size and cand[cur_idx] == profile[i] else -np.inf
            best = uvec.max()
            if best > cur_u + MONEY_TOL:
                target = int(np.flatnonzero(uvec >= best - 1e-12)[0])
                profile[i] = float(cand[target])
                changed = True
        key = tuple(profile)
        if not changed:
            ok = verify_pure_equilibrium(vals, mechanism, profile, grids, tie)
            return BrdResult(True, key, sweep, ok)
        if key in seen:
            cycle = tuple(trail[seen[key]:]) + (key,)
            return BrdResult(False, key, sweep, False, cycle)
        seen[key] = len(trail)
        trail.append(key)
    return BrdResult(False, tuple(profile), max_sweeps, False)


def verify_pure_equilibrium(
    vals: Sequence[Valuation],
    mechanism: str,
    profile: Sequence[float],
    grids: Sequence[BidGrid],
    tie: TieRule | None = None,
    tol: float = MONEY_TOL,
) -> bool:
    """Independent audit: no agent gains more than tol by any grid bid."""
    tie = tie or DEFAULT_TIE
    for i in range(len(vals)):
        uvec = counterfactual_utilities(vals, mechanism, profile, i, grids[i], tie)
        cur = replay_utility(vals, mechanism, profile, i, profile[i], tie)
        if uvec.max() > cur + tol:
            return False
    return True


def verify_hybrid_equilibrium(
    vals: Sequence[Valuation],
    sb_profile: Sequence[float],
    gb_profile: Sequence[float],
    grids: Sequence[BidGrid],
    tie: TieRule | None = None,
    tol: float = MONEY_TOL,
) -> bool:
    """A hybrid profile is a pure equilibrium iff each branch is one:
    expected utility is separable across the two independent bids."""
    return verify_pure_equilibrium(
        vals, "single-bid", sb_profile, grids, tie, tol
    ) and verify_pure_equilibrium(vals, "grand-bundle", gb_profile, grids, tie, tol)


def find_pure_equilibria(
    vals: Sequence[Valuation],
    mechanism: str,
    grids: Sequence[BidGrid],
    tie: TieRule | None = None,
    starts: Sequence[Sequence[float]] | None = None,
    max_sweeps: int = 1000,
) -> list[tuple[float, ...]]:
    """Verified pure equilibria reached by best response from several
    deterministic starting profiles."""
    n = len(vals)
    if starts is None:
        tops = [g.bids[-1] for g in grids]
        mids = [g.bids[len(g) // 2] for g in grids]
        starts = [[0.0] * n, tops, mids]
        for i in range(n):
            one_high = [0.0] * n
            one_high[i] = tops[i]
            starts.append(one_high)
    found: list[tuple[float, ...]] = []
    for start in starts:
        res = best_response_dynamics(vals, mechanism, grids, tie, max_sweeps, start)
        if res.converged and res.is_equilibrium and res.profile not in found:
            found.append(res.profile)
    return found


# ---------------------------------------------------------------------------
# Efficiency ratios


def poa_estimate(
    vals: Sequence[Valuation],
    mechanism: str,
    equilibria: Sequence[Sequence[float] | PlayHistory],
    tie: TieRule | None = None,
) -> dict:
    """Optimal welfare over equilibrium welfare, across supplied equilibria.

    Pure profiles are re-run; learning histories contribute their mean
    realized welfare (the coarse-equilibrium expectation).  Zero-welfare
    equilibria report an infinite ratio.
    """
    _, opt = optimal_allocation(vals)
    run = run_single_bid if mechanism == "single-bid" else run_grand_bundle
    sws = []
    for eq in equilibria:
        if isinstance(eq, PlayHistory):
            sws.append(eq.mean_welfare())
        else:
            sws.append(run(vals, list(eq), tie).social_welfare)
    ratios = [opt / sw if sw > MONEY_TOL else math.inf for sw in sws]
    return {
        "opt": opt,
        "eq_welfare": sws,
        "ratio_worst": max(ratios) if ratios else math.nan,
        "ratio_best": min(ratios) if ratios else math.nan,
    }


def export_history_csv(history: PlayHistory, path: str | Path) -> None:
    """Per-round log: round, agent, bid, utility, realized_sw."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "agent", "bid", "utility", "realized_sw"])
        for t in range(history.rounds):
            for i in range(history.agents):
                writer.writerow(
                    [
                        t,
                        i,
                        f"{history.bids[t, i]:.9g}",
                        f"{history.utilities[t, i]:.9g}",
                        f"{history.welfare[t]:.9g}",
                    ]
                )


def history_summary(history: PlayHistory) -> dict:
    """Regret certificates and welfare ratios for one learning run."""
    regrets = [regret_of(history, i) for i in range(history.agents)]
    summary = {
        "mechanism": history.mechanism,
        "seed": history.seed,
        "rounds": history.rounds,
        "agents": history.agents,
        "mean_welfare": history.mean_welfare(),
        "regrets": regrets,
        "max_regret": max(regrets),
    }
    if history.vals and history.vals[0].m <= 16:
        _, opt = optimal_allocation(list(history.vals))
        summary["opt"] = opt
        summary["ratio"] = (
            opt / summary["mean_welfare"] if summary["mean_welfare"] > MONEY_TOL else math.inf
        )
    return summary


def export_history_summary(history: PlayHistory, path: str | Path) -> None:
    import json

    Path(path).write_text(json.dumps(history_summary(history), indent=2) + "\n")
