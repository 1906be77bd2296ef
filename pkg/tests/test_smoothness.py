import math

import numpy as np
import pytest

from auctionlab.errors import DomainError, PreconditionError
from auctionlab.instances import random_hypergraph
from auctionlab.items import ItemSet
from auctionlab.optimizer import lopsided_check, optimal_allocation
from auctionlab.smoothness import (
    default_profile_sampler,
    expected_deviation_utility,
    hybrid_smoothness_check,
    make_deviation,
    plan_dch_single_bid,
    plan_grand_bundle,
    plan_small_bundles,
    quadrature_deviation_utility,
    smoothness_check,
)
from auctionlab.valuations import Hyperedge, HypergraphValuation, validate_hypergraph


def random_block_homogeneous(m, d, seed):
    """Disjoint blocks of size <= d sharing one per-item value."""
    rng = np.random.default_rng(seed)
    v_hat = float(rng.uniform(0.3, 1.5))
    items = [int(j) for j in rng.permutation(m)]
    edges = []
    while items:
        size = int(rng.integers(1, d + 1))
        block, items = items[:size], items[size:]
        edges.append(Hyperedge(ItemSet.of(m, block), v_hat * len(block)))
        if rng.random() < 0.25:
            break
    return HypergraphValuation(m, edges)


# --- deviation distributions -------------------------------------------------


@pytest.mark.parametrize(
    "family,params",
    [
        ("dch", {"d": 1, "v_hat": 1.0}),
        ("dch", {"d": 4, "v_hat": 2.5}),
        ("grand", {"anchor": 3.0}),
        ("sba", {"c": 1.0, "anchor": 1.0}),
        ("sba", {"c": 0.5, "anchor": 1.0}),
        ("sba", {"c": 1 / 3, "anchor": 2.0}),
        ("sba", {"c": 2.0, "anchor": 0.7}),
    ],
)
def test_distribution_mass_is_one(family, params):
    from scipy.integrate import quad

    dist = make_deviation(family, **params)
    assert dist.total_mass() == pytest.approx(1.0, abs=1e-9)
    numeric, _ = quad(dist.density, 0.0, dist.hi)
    assert numeric + dist.residual_at_zero == pytest.approx(1.0, abs=1e-7)
    assert dist.hi < dist.anchor  # density stays bounded on the support


def test_make_deviation_rejects_bad_anchor():
    with pytest.raises(DomainError):
        make_deviation("grand", anchor=0.0)
    with pytest.raises(DomainError):
        make_deviation("sba", c=-1.0, anchor=1.0)
    with pytest.raises(DomainError):
        make_deviation("mystery", anchor=1.0)


def test_closed_form_matches_quadrature():
    rng = np.random.default_rng(6)
    for _ in range(20):
        c = float(rng.uniform(0.2, 2.0))
        anchor = float(rng.uniform(0.5, 3.0))
        dist = make_deviation("sba", c=c, anchor=anchor)
        targets = [
            (int(rng.integers(1, 5)), float(rng.uniform(0, 1.3 * dist.hi)))
            for _ in range(3)
        ]
        assert expected_deviation_utility(dist, targets) == pytest.approx(
            quadrature_deviation_utility(dist, targets), abs=1e-6
        )


def test_closed_form_matches_monte_carlo():
    rng = np.random.default_rng(12)
    dist = make_deviation("dch", d=3, v_hat=1.2)
    size, price = 2, 0.35
    draws = dist.sample(rng, 100_000)
    payoff = np.where(draws > price, size * (dist.anchor - draws), 0.0)
    est = payoff.mean()
    sigma = payoff.std() / math.sqrt(len(draws))
    assert abs(est - expected_deviation_utility(dist, [(size, price)])) <= 3 * sigma


def test_price_above_support_contributes_nothing():
    dist = make_deviation("grand", anchor=1.0)
    assert expected_deviation_utility(dist, [(1, dist.hi + 0.1)]) == 0.0


def test_zero_prices_give_full_closed_form():
    d, v_hat = 3, 1.0
    dist = make_deviation("dch", d=d, v_hat=v_hat)
    # blocks of total size s at zero prices: ((1 - e^-d)/d) * v_hat * s
    got = expected_deviation_utility(dist, [(2, 0.0), (3, 0.0)])
    assert got == pytest.approx((1 - math.exp(-d)) / d * v_hat * 5)


# --- suite checks --------------------------------------------------------------


def test_block_homogeneous_single_bid_smoothness():
    d = 3
    for seed in range(12):
        vals = [random_block_homogeneous(8, d, 20 * seed + a) for a in range(3)]
        plan = plan_dch_single_bid(vals, d)
        assert plan.lam == pytest.approx((1 - math.exp(-d)) / d)
        report = smoothness_check("single-bid", vals, plan, trials=40, seed=seed)
        assert report.passed, report.to_dict()


def test_plan_rejects_non_block_homogeneous():
    vals = [validate_hypergraph(3, [([0, 1], 1.0), ([1, 2], 1.0)])]
    with pytest.raises(PreconditionError):
        plan_dch_single_bid(vals, 2)


def test_grand_bundle_smoothness_on_lopsided_profiles():
    m = 9
    z = math.sqrt(m)
    big = validate_hypergraph(m, [([j], 10.0) for j in range(m)])
    small = validate_hypergraph(m, [([0], 1.0)])
    vals = [big, small]
    assert lopsided_check(vals, z)
    plan = plan_grand_bundle(vals, beta=z / (2 * m), deviator=0)
    report = smoothness_check("grand-bundle", vals, plan, trials=60, seed=2)
    assert report.passed
    assert report.lam == pytest.approx((1 - math.exp(-1)) / (2 * z))


def test_single_bid_smoothness_on_small_bundle_profiles():
    # one unit-demand agent per item: no optimal allocation can pad any
    # bundle, so the profile stays out of the lopsided class
    m = 9
    z = math.sqrt(m)
    vals = [validate_hypergraph(m, [([j], 1.0)]) for j in range(m)]
    assert not lopsided_check(vals, z)
    alloc, _ = optimal_allocation(vals)
    c = 1 / z
    plan = plan_small_bundles(vals, c=c, gamma=z, target=alloc, beta=0.5)
    assert plan.mu == pytest.approx(1.0)
    assert plan.lam == pytest.approx(c / 2 * (1 - math.exp(-1 / c)))
    report = smoothness_check("single-bid", vals, plan, trials=60, seed=3)
    assert report.passed


def test_general_valuations_single_bid_smoothness_footprint():
    # arbitrary monotone profiles: rate 1/m per-item entry at the optimal
    # allocation gives ((1 - e^-m)/m, 1)
    for seed in range(8):
        m = 6
        vals = [random_hypergraph(m, 4, 9, seed=70 + 3 * seed + a) for a in range(2)]
        alloc, _ = optimal_allocation(vals)
        plan = plan_small_bundles(vals, c=1 / m, gamma=m, target=alloc, beta=1.0)
        assert plan.lam == pytest.approx((1 - math.exp(-m)) / m)
        assert plan.mu == pytest.approx(1.0)
        report = smoothness_check("single-bid", vals, plan, trials=40, seed=seed)
        assert report.passed


def test_hybrid_smoothness_general_valuations():
    for seed in range(10):
        n = 2 + seed % 2
        vals = [random_hypergraph(6, 4, 8, seed=200 + 3 * seed + a) for a in range(n)]
        report = hybrid_smoothness_check(vals, p=0.5, trials=40, seed=seed)
        assert report.passed
        m = vals[0].m
        assert report.implied_poa == pytest.approx(
            4 * math.sqrt(m) / (1 - math.exp(-1))
        )


def test_hybrid_smoothness_zero_bids_margin():
    # all-zero opposing bids leave no payments: the margin is the full
    # deviation mass minus lam * OPT, which stays nonnegative
    vals = [random_hypergraph(4, 3, 6, seed=31), random_hypergraph(4, 3, 6, seed=32)]
    report = hybrid_smoothness_check(
        vals, p=0.5, trials=1, seed=0, sampler=lambda k: [0.0, 0.0]
    )
    assert report.passed


def test_smoothness_report_serializes():
    vals = [random_block_homogeneous(6, 2, 5) for _ in range(2)]
    plan = plan_dch_single_bid(vals, 2)
    report = smoothness_check("single-bid", vals, plan, trials=10, seed=0)
    data = report.to_dict()
    assert set(data) >= {"lambda", "mu", "min_margin", "passed", "implied_poa"}


def test_block_family_and_per_item_family_coincide():
    # the block deviation at bound d is the per-item deviation at rate 1/d
    dch = make_deviation("dch", d=4, v_hat=1.3)
    sba = make_deviation("sba", c=0.25, anchor=1.3)
    assert dch.hi == pytest.approx(sba.hi)
    assert dch.c == pytest.approx(sba.c)
    for t in (0.0, 0.3, dch.hi * 0.99):
        assert dch.density(t) == pytest.approx(sba.density(t))


def test_composed_smoothness_for_degree_bounded_max_profiles():
    # certificate composition: single-bid smoothness for max-form
    # degree-bounded profiles at ((1 - e^-(d+1)) / ((d+1)(d+2)H(m/(d+1))), 1)
    from auctionlab.hierarchy import harmonic
    from auctionlab.instances import random_mps_d
    from auctionlab.smoothness import plan_mps_single_bid

    d, m = 2, 8
    for seed in range(8):
        vals = [random_mps_d(m, d, parts=2, edge_budget=12, seed=40 + 2 * seed + a) for a in range(2)]
        _, opt = optimal_allocation(vals)
        if opt <= 1e-9:
            continue
        plan = plan_mps_single_bid(vals, d)
        beta = (d + 2) * harmonic(m / (d + 1))
        assert plan.lam == pytest.approx((1 - math.exp(-(d + 1))) / ((d + 1) * beta))
        report = smoothness_check("single-bid", vals, plan, trials=40, seed=seed)
        assert report.passed, report.to_dict()


def test_theory_consistency_learning_vs_smoothness():
    # measured coarse-equilibrium ratios never exceed the implied bound
    # plus regret slack
    from auctionlab.learning import make_grid, no_regret_run, regret_of

    d = 2
    vals = [random_block_homogeneous(6, d, 90 + a) for a in range(2)]
    plan = plan_dch_single_bid(vals, d)
    report = smoothness_check("single-bid", vals, plan, trials=30, seed=4)
    assert report.passed
    grids = [make_grid(v) for v in vals]
    h = no_regret_run(vals, "single-bid", grids, rounds=2500, seed=0)
    _, opt = optimal_allocation(vals)
    alpha = max(max(regret_of(h, i), 0.0) for i in range(2))
    slack = alpha * len(vals) / h.mean_welfare()
    assert opt / h.mean_welfare() <= report.implied_poa + slack
