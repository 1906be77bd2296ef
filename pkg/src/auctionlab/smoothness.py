"""Randomized deviation distributions and numeric smoothness checks.

A mechanism is (lambda, mu)-smooth for a valuation class when some
deviation profile guarantees, against every bid profile b,

    sum_i E[u_i(deviation_i, b_-i)]  >=  lambda * OPT - mu * sum_i P_i(b)

which bounds the coarse price of anarchy by max(1, mu) / lambda.  The
deviations used here share one shape: bid t drawn with density
c / (anchor - t) on [0, (1 - e^(-1/c)) * anchor], which integrates to
exactly 1 for every c > 0 and turns the expected clamped utility into a
closed form, checked against quadrature in the tests:

    per target of size s:  c * s * max(0, support_top - entry_price)

Three instances cover the suites: blocks of a d-block-homogeneous
valuation (c = 1/d, anchor = the per-item value), the grand bundle
(c = 1, anchor = the deviator's full-bundle value), and per-item entry
at an allocation bundle (anchor = the bundle's mean per-item value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .hierarchy import is_d_ch
from .items import ItemSet
from .mechanisms import Outcome, run_grand_bundle, run_hybrid, run_single_bid
from .optimizer import lopsided_check, optimal_allocation
from .valuations import MONEY_TOL, HypergraphValuation, Valuation

FAMILIES = ("dch", "grand", "sba")


@dataclass(frozen=True)
class DeviationDistribution:
    """Bid distribution with density rate / (anchor - t) on [0, hi].

    hi = (1 - e^(-1/rate_inverse...)) is precomputed by make_deviation;
    the density integrates to exactly 1, so no residual mass is needed
    (residual_at_zero stays 0 and is kept for reporting symmetry).
    """

    family: str
    c: float
    anchor: float
    hi: float
    residual_at_zero: float = 0.0

    def density(self, t: float) -> float:
        if t < 0 or t > self.hi:
            return 0.0
        return self.c / (self.anchor - t)

    def integral_mass(self) -> float:
        """Closed-form mass of the continuous part."""
        return self.c * math.log(self.anchor / (self.anchor - self.hi))

    def total_mass(self) -> float:
        return self.integral_mass() + self.residual_at_zero

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF sampling: F(t) = c*ln(anchor/(anchor-t))."""
        u = rng.random(size)
        return self.anchor * (1.0 - np.exp(-u / self.c))


def make_deviation(family: str, **params: float) -> DeviationDistribution:
    """Build a deviation distribution.

    dch:   params d, v_hat    -> rate 1/d, anchor v_hat
    grand: params anchor      -> rate 1,   anchor = bundle value
    sba:   params c, anchor   -> rate c,   anchor = mean per-item value
    """
    if family == "dch":
        d, anchor = params["d"], params["v_hat"]
        if d < 1:
            raise DomainError("block bound d must be >= 1")
        c = 1.0 / d
    elif family == "grand":
        anchor = params["anchor"]
        c = 1.0
    elif family == "sba":
        anchor = params["anchor"]
        c = params["c"]
        if c <= 0:
            raise DomainError("rate c must be positive")
    else:
        raise DomainError(f"unknown deviation family {family!r}")
    if anchor <= 0:
        raise DomainError(f"anchor must be positive, got {anchor}")
    hi = (1.0 - math.exp(-1.0 / c)) * anchor
    return DeviationDistribution(family, c, anchor, hi)


def expected_clamped_utility(dist: DeviationDistribution, size: int, entry_price: float) -> float:
    """Closed form of integral from entry_price to hi of
    size * (anchor - t) * density(t) dt, clamped at zero."""
    return dist.c * size * max(0.0, dist.hi - max(entry_price, 0.0))


def expected_deviation_utility(
    dist: DeviationDistribution,
    targets: Sequence[tuple[int, float]],
) -> float:
    """Total closed-form deviation utility over (size, entry price) targets.

    For the block family the targets are the deviator's optimal-share
    blocks with the highest opposing item price inside each; for the
    grand bundle a single target of size 1 at the current winning bid;
    for per-item entry a single target (|S*_i|, max price in S*_i).
    """
    return sum(expected_clamped_utility(dist, size, price) for size, price in targets)


def quadrature_deviation_utility(
    dist: DeviationDistribution, targets: Sequence[tuple[int, float]]
) -> float:
    """Numeric cross-check of the closed form (adaptive quadrature)."""
    from scipy.integrate import quad

    total = 0.0
    for size, price in targets:
        lo = min(max(price, 0.0), dist.hi)
        if lo >= dist.hi:
            continue
        val, _ = quad(lambda t: size * (dist.anchor - t) * dist.density(t), lo, dist.hi)
        total += val
    return total


# ---------------------------------------------------------------------------
# Smoothness reports


@dataclass
class SmoothnessReport:
    mechanism: str
    lam: float
    mu: float
    trials: int
    margins: list[float] = field(default_factory=list)
    worst_profile: tuple[float, ...] | None = None

    @property
    def min_margin(self) -> float:
        return min(self.margins) if self.margins else math.nan

    @property
    def passed(self) -> bool:
        return bool(self.margins) and self.min_margin >= -MONEY_TOL

    @property
    def implied_poa(self) -> float:
        return max(1.0, self.mu) / self.lam

    def record(self, margin: float, profile: Sequence[float]) -> None:
        if not self.margins or margin < self.min_margin:
            self.worst_profile = tuple(profile)
        self.margins.append(margin)

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "lambda": self.lam,
            "mu": self.mu,
            "trials": self.trials,
            "min_margin": self.min_margin,
            "passed": self.passed,
            "implied_poa": self.implied_poa,
            "worst_profile": list(self.worst_profile) if self.worst_profile else None,
        }


def default_profile_sampler(
    vals: Sequence[Valuation], seed: int = 0
) -> Callable[[int], list[float]]:
    """Bids i.i.d. uniform on [0, 1.5 * max item value], with adversarial
    corners injected first: all-zero, all-huge, one-high."""
    n = len(vals)
    m = vals[0].m
    top = max(
        max((v.value_mask(1 << j) for j in range(m)), default=0.0) for v in vals
    )
    top = max(top, 1.0)
    rng = np.random.default_rng(seed)
    corners = [
        [0.0] * n,
        [10.0 * top] * n,
        [0.0] * (n - 1) + [10.0 * top],
    ]

    def sample(k: int) -> list[float]:
        if k < len(corners):
            return list(corners[k])
        return list(rng.uniform(0.0, 1.5 * top, size=n))

    return sample


@dataclass(frozen=True)
class DeviationPlan:
    """Per-agent deviation targets fixed by the valuation profile."""

    lam: float
    mu: float
    # agent -> (distribution, list of (block mask size, block mask)) for
    # price lookups; grand-bundle plans mark the single deviator
    kind: str
    dists: dict
    blocks: dict


def _item_price_max(prices: Sequence[float], mask_items: ItemSet) -> float:
    return max((prices[j] for j in mask_items), default=0.0)


def plan_dch_single_bid(vals: Sequence[HypergraphValuation], d: int) -> DeviationPlan:
    """Deviations for block-homogeneous bidders in the single-bid auction:
    each agent enters her optimal-share blocks at rate 1/d anchored at her
    per-item value.  Yields ((1 - e^-d)/d, 1)-smoothness."""
    alloc, _ = optimal_allocation(vals)
    lam = (1.0 - math.exp(-d)) / d
    dists: dict = {}
    blocks: dict = {}
    for i, v in enumerate(vals):
        rec = is_d_ch(v, d)
        if not rec:
            raise PreconditionError(f"agent {i} is not {d}-block-homogeneous")
        inside = [q for q in rec.blocks if q <= alloc[i]]
        if rec.v_hat > MONEY_TOL and inside:
            dists[i] = make_deviation("dch", d=d, v_hat=rec.v_hat)
            blocks[i] = inside
    return DeviationPlan(lam, 1.0, "dch", dists, blocks)


def plan_mps_single_bid(vals: Sequence[Valuation], d: int) -> DeviationPlan:
    """Composed deviation for degree-bounded profiles in the single-bid
    auction: certify a (d+1)-block-homogeneous minorant of each agent's
    valuation at her optimal share (factor beta = (d+2) * H(m/(d+1))),
    then enter the certificate's blocks at rate 1/(d+1) anchored at its
    per-item value.  Yields ((1 - e^-(d+1)) / ((d+1) * beta), 1)."""
    from .approximation import ApproxCertificate, pointwise_approx
    from .hierarchy import harmonic

    m = vals[0].m
    beta = (d + 2) * harmonic(m / (d + 1))
    alloc, _ = optimal_allocation(vals)
    lam = (1.0 - math.exp(-(d + 1))) / ((d + 1) * beta)
    dists: dict = {}
    blocks: dict = {}
    for i, v in enumerate(vals):
        if v.value(alloc[i]) <= MONEY_TOL:
            continue
        cert = pointwise_approx(v, alloc[i], d, beta)
        if not isinstance(cert, ApproxCertificate):
            raise PreconditionError(f"agent {i} has no certificate at factor {beta:.4g}")
        if cert.v_hat > MONEY_TOL and cert.blocks:
            dists[i] = make_deviation("dch", d=d + 1, v_hat=cert.v_hat)
            blocks[i] = list(cert.blocks)
    return DeviationPlan(lam, 1.0, "dch", dists, blocks)


def plan_grand_bundle(vals: Sequence[Valuation], beta: float, deviator: int) -> DeviationPlan:
    """Single designated deviator aims at the grand bundle; everyone else
    contributes nothing.  Yields (beta * (1 - 1/e), 1)-smoothness when the
    deviator's full-bundle value covers a beta fraction of the optimum."""
    lam = beta * (1.0 - math.exp(-1.0))
    v_full = vals[deviator].vmax()
    dists = {deviator: make_deviation("grand", anchor=v_full)}
    return DeviationPlan(lam, 1.0, "grand", dists, {})


def plan_small_bundles(
    vals: Sequence[Valuation],
    c: float,
    gamma: float,
    target: Sequence[ItemSet],
    beta: float,
) -> DeviationPlan:
    """Per-item entry deviations at a target allocation whose bundles have
    at most gamma items and carry a beta fraction of the optimum.  Yields
    (c * (1 - e^(-1/c)) * beta, c * gamma)-smoothness."""
    lam = c * (1.0 - math.exp(-1.0 / c)) * beta
    dists: dict = {}
    blocks: dict = {}
    for i, s in enumerate(target):
        if not s:
            continue
        value = vals[i].value(s)
        if value <= MONEY_TOL:
            continue
        anchor = value / len(s)
        dists[i] = make_deviation("sba", c=c, anchor=anchor)
        blocks[i] = [s]
    return DeviationPlan(lam, c * gamma, "sba", dists, blocks)


def _plan_lhs(plan: DeviationPlan, outcome: Outcome) -> float:
    """Closed-form lower bound on the total deviation utility at a profile."""
    total = 0.0
    if plan.kind == "grand":
        winning = max(outcome.payments, default=0.0)
        for i, dist in plan.dists.items():
            total += expected_deviation_utility(dist, [(1, winning)])
        return total
    prices = outcome.item_prices
    for i, dist in plan.dists.items():
        targets = [(len(q), _item_price_max(prices, q)) for q in plan.blocks[i]]
        total += expected_deviation_utility(dist, targets)
    return total


def smoothness_check(
    mechanism: str,
    vals: Sequence[Valuation],
    plan: DeviationPlan,
    trials: int = 200,
    seed: int = 0,
    sampler: Callable[[int], list[float]] | None = None,
) -> SmoothnessReport:
    """Verify the smoothness inequality on sampled bid profiles.

    The left side uses the plan's closed-form deviation utilities (lower
    bounds on the true expectations, so a pass implies the inequality);
    the right side is lam * OPT - mu * total payments at the profile.
    """
    _, opt = optimal_allocation(vals)
    sampler = sampler or default_profile_sampler(vals, seed)
    run = run_single_bid if mechanism == "single-bid" else run_grand_bundle
    report = SmoothnessReport(mechanism, plan.lam, plan.mu, trials)
    for k in range(trials):
        bids = sampler(k)
        outcome = run(vals, bids)
        lhs = _plan_lhs(plan, outcome)
        rhs = plan.lam * opt - plan.mu * sum(outcome.payments)
        report.record(lhs - rhs, bids)
    return report


def hybrid_smoothness_check(
    vals: Sequence[Valuation],
    p: float = 0.5,
    trials: int = 200,
    seed: int = 0,
    sampler: Callable[[int], list[float]] | None = None,
) -> SmoothnessReport:
    """Smoothness of the coin-flip composition of the two auctions for
    arbitrary valuations at lambda = (1 - 1/e) / (4 sqrt(m)), mu = 1.

    The profile class splits on whether some optimal allocation earns
    half its welfare from winners of at least sqrt(m) items: if so the
    grand-bundle branch supplies the deviation, otherwise per-item entry
    on the small-bundle side does.  The deviating branch is played with
    its branch probability while the agent keeps her own bid in the other
    branch, whose realized utility (nonnegative) joins the left side.
    """
    if not 0 < p < 1:
        raise PreconditionError("branch probability must lie in (0, 1)")
    m = vals[0].m
    z = math.sqrt(m)
    alloc, opt = optimal_allocation(vals)
    lam = (1.0 - math.exp(-1.0)) / (4.0 * math.sqrt(m))
    lop = lopsided_check(vals, z)
    if lop:
        heavy = max(lop.heavy_agents, key=lambda i: vals[i].value(lop.witness[i]))
        branch_plan = plan_grand_bundle(vals, beta=z / (2.0 * m), deviator=heavy)
        branch = "gb"
        weight = 1.0 - p
    else:
        small = [s if len(s) < z else ItemSet.empty(m) for s in alloc]
        c = 1.0 / z
        branch_plan = plan_small_bundles(vals, c=c, gamma=z, target=small, beta=0.5)
        branch = "sb"
        weight = p
    sampler = sampler or default_profile_sampler(vals, seed)
    report = SmoothnessReport("hybrid", lam, 1.0, trials)
    for k in range(trials):
        sb_bids = sampler(2 * k)
        gb_bids = sampler(2 * k + 1)
        hyb = run_hybrid(vals, sb_bids, gb_bids, p)
        if branch == "gb":
            dev_lhs = _plan_lhs(branch_plan, hyb.grand_bundle)
            other_utils = sum(hyb.single_bid.utilities(vals))
            lhs = weight * dev_lhs + p * other_utils
        else:
            dev_lhs = _plan_lhs(branch_plan, hyb.single_bid)
            other_utils = sum(hyb.grand_bundle.utilities(vals))
            lhs = weight * dev_lhs + (1.0 - p) * other_utils
        rhs = lam * opt - sum(hyb.expected_payments())
        report.record(lhs - rhs, tuple(sb_bids) + tuple(gb_bids))
    return report
