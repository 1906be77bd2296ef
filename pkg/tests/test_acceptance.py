"""Acceptance suite: one test per exit criterion, each printing a
pass/fail line (run with `pytest -s` to see them in passing runs).

Every tolerance and runtime budget is pinned here; nothing is deferred
to later calibration.
"""

import math
import time

import numpy as np
import pytest

from auctionlab.approximation import (
    ApproxCertificate,
    best_kch_search,
    crossing_weight,
    greedy_partition,
    pair_by_coloring,
    ph2_pairing,
    pointwise_approx,
)
from auctionlab.harness import (
    repro_complete_hypergraph,
    repro_hybrid_lb,
    repro_sm_star,
    repro_star,
    repro_tight_partition,
)
from auctionlab.hierarchy import dep_plus, harmonic, ph_rank, supermodular_degree
from auctionlab.instances import (
    random_graph_valuation,
    random_hypergraph,
    random_mps_d,
    random_ps_d,
)
from auctionlab.items import ItemSet
from auctionlab.learning import make_grid, no_regret_run, regret_of
from auctionlab.optimizer import brute_force_optimum, optimal_allocation
from auctionlab.smoothness import (
    hybrid_smoothness_check,
    make_deviation,
    expected_deviation_utility,
    plan_dch_single_bid,
    plan_grand_bundle,
    plan_small_bundles,
    quadrature_deviation_utility,
    smoothness_check,
)
from auctionlab.valuations import Hyperedge, HypergraphValuation


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def test_criterion_01_star_equilibrium_welfare():
    t0 = time.perf_counter()
    res = repro_star(m=8, eps=0.01)
    elapsed = time.perf_counter() - t0
    rec = res.record
    ok = (
        rec.passed
        and abs(rec.eq_sw - 0.885) <= 1e-6
        and rec.ratio >= 8 * (1 - 0.02)
        and elapsed < 1.0
    )
    report(
        "criterion-01 star-instance equilibrium",
        ok,
        f"eq_sw={rec.eq_sw:.6f} ratio={rec.ratio:.4f} time={elapsed:.2f}s",
    )


def test_criterion_02_padded_star_stability():
    t0 = time.perf_counter()
    res = repro_sm_star(d=4, m=6, eps=0.01)
    elapsed = time.perf_counter() - t0
    rec = res.record
    ok = rec.passed and rec.ratio >= 3.95 and elapsed < 1.0
    report(
        "criterion-02 padded-star best equilibrium",
        ok,
        f"best ratio={rec.ratio:.4f} time={elapsed:.2f}s",
    )


def test_criterion_03_hybrid_lower_bound():
    t0 = time.perf_counter()
    res = repro_hybrid_lb(k=3, eps=1e-3)
    elapsed = time.perf_counter() - t0
    rec = res.record
    cap = 2 + 3e-3 + 1e-9
    ok = (
        rec.passed
        and res.detail["sb_sw"] <= cap
        and res.detail["gb_sw"] <= cap
        and rec.ratio >= 2.99
        and elapsed < 1.0
    )
    report(
        "criterion-03 hybrid lower bound",
        ok,
        f"sb={res.detail['sb_sw']:.4f} gb={res.detail['gb_sw']:.4f} "
        f"ratio={rec.ratio:.4f} time={elapsed:.2f}s",
    )


def test_criterion_04_greedy_partition_tightness():
    t0 = time.perf_counter()
    res = repro_tight_partition(d=3, bundles=2, eps=1e-6)
    elapsed = time.perf_counter() - t0
    rec = res.record
    ok = rec.passed and 2.999 <= rec.ratio <= 3.0 + 1e-12 and elapsed < 5.0
    report(
        "criterion-04 greedy partition tightness",
        ok,
        f"ratio={rec.ratio:.7f} blocks={res.detail['blocks']} time={elapsed:.2f}s",
    )


def _psd_corpus():
    """The shared 200-instance corpus for criteria 5 and 6."""
    corpus = []
    for i in range(200):
        d = [1, 2, 3][i % 3]
        m = 6 + i % 7  # 6..12
        corpus.append((d, m, random_ps_d(m, d, edge_budget=2 * m, seed=i)))
    return corpus


def test_criterion_05_pointwise_certificates_and_06_crossing_bound():
    t0 = time.perf_counter()
    corpus = _psd_corpus()
    certified = 0
    rechecked = 0
    crossing_ok = True
    for d, m, v in corpus:
        x = ItemSet.full(m)
        beta = (d + 2) * harmonic(m / (d + 1))
        res = pointwise_approx(v, x, d, beta)
        if isinstance(res, ApproxCertificate):
            certified += 1
            # exhaustive recheck of both certificate inequalities
            h = res.approximator.table()
            t = v.table()
            if np.all(h <= t + 1e-9) and beta * res.approximator.value(x) >= v.value(x) - 1e-9:
                rechecked += 1
        part = greedy_partition(v, x, d)
        crossing, interior = crossing_weight(v, part)
        if crossing > (d + 1) * interior + 1e-9:
            crossing_ok = False
    elapsed = time.perf_counter() - t0
    ok5 = certified == 200 and rechecked == 200 and elapsed < 60.0
    report(
        "criterion-05 pointwise approximation certificates",
        ok5,
        f"certified={certified}/200 rechecked={rechecked}/200 time={elapsed:.1f}s",
    )
    report("criterion-06 crossing weight bound", crossing_ok)


def test_criterion_07_pairing_pipeline():
    t0 = time.perf_counter()
    all_ok = True
    for i in range(100):
        d = 1 + i % 4
        m = 8 + i % 7  # 8..14
        v = random_ps_d(m, d, edge_budget=3 * m, seed=7000 + i, max_edge_size=2)
        x = ItemSet.full(m)
        info = pair_by_coloring(v, x)
        col = info.coloring
        if not (col.is_proper() and col.num_colors <= col.max_degree + 1):
            all_ok = False
            break
        total_edges = sum(info.class_weights)
        if (d + 1) * info.heaviest_weight() < total_edges - 1e-9:
            all_ok = False
            break
        beta = (d + 1) * harmonic(m / 2)
        res = ph2_pairing(v, x, beta)
        if not isinstance(res, ApproxCertificate):
            all_ok = False
            break
    elapsed = time.perf_counter() - t0
    report("criterion-07 rank-2 pairing pipeline", all_ok, f"time={elapsed:.1f}s")


def _random_block_homogeneous(m, d, seed):
    rng = np.random.default_rng(seed)
    v_hat = float(rng.uniform(0.3, 1.5))
    items = [int(j) for j in rng.permutation(m)]
    edges = []
    while items:
        size = int(rng.integers(1, d + 1))
        block, items = items[:size], items[size:]
        edges.append(Hyperedge(ItemSet.of(m, block), v_hat * len(block)))
        if rng.random() < 0.2:
            break
    return HypergraphValuation(m, edges)


def test_criterion_08_smoothness_suites():
    margins = []

    # block-homogeneous profiles at ((1 - e^-d)/d, 1): 1000 sampled profiles
    for s in range(50):
        d = [1, 2, 3][s % 3]
        vals = [_random_block_homogeneous(8, d, 100 * s + a) for a in range(3)]
        plan = plan_dch_single_bid(vals, d)
        rep = smoothness_check("single-bid", vals, plan, trials=20, seed=s)
        margins.append(rep.min_margin)

    # grand bundle anchored at a dominant agent: (beta (1 - 1/e), 1)
    for s in range(10):
        vals = [random_hypergraph(6, 4, 9, seed=300 + 2 * s + a) for a in range(2)]
        _, opt = optimal_allocation(vals)
        if opt <= 0:
            continue
        deviator = int(np.argmax([v.vmax() for v in vals]))
        beta = vals[deviator].vmax() / opt
        plan = plan_grand_bundle(vals, beta=beta, deviator=deviator)
        rep = smoothness_check("grand-bundle", vals, plan, trials=50, seed=s)
        margins.append(rep.min_margin)

    # per-item entry at the optimal allocation: (c(1-e^(-1/c)) beta, c gamma)
    for s in range(10):
        c = [0.3, 1.0, 2.0][s % 3]
        vals = [random_hypergraph(6, 4, 9, seed=400 + 2 * s + a) for a in range(2)]
        alloc, opt = optimal_allocation(vals)
        if opt <= 0:
            continue
        gamma = max((len(b) for b in alloc), default=1) or 1
        plan = plan_small_bundles(vals, c=c, gamma=gamma, target=alloc, beta=1.0)
        rep = smoothness_check("single-bid", vals, plan, trials=50, seed=s)
        margins.append(rep.min_margin)

    # lopsided split at z = sqrt(m): grand side and small side
    m = 9
    z = math.sqrt(m)
    big = HypergraphValuation.from_pairs(m, [([j], 5.0) for j in range(m)])
    small = HypergraphValuation.from_pairs(m, [([0], 1.0)])
    plan = plan_grand_bundle([big, small], beta=z / (2 * m), deviator=0)
    rep = smoothness_check("grand-bundle", [big, small], plan, trials=100, seed=0)
    margins.append(rep.min_margin)
    assert rep.lam == pytest.approx((1 - math.exp(-1)) / (2 * z))
    unit = [HypergraphValuation.from_pairs(m, [([j], 1.0)]) for j in range(m)]
    alloc, _ = optimal_allocation(unit)
    plan = plan_small_bundles(unit, c=1 / z, gamma=z, target=alloc, beta=0.5)
    assert plan.mu == pytest.approx(1.0)
    rep = smoothness_check("single-bid", unit, plan, trials=100, seed=1)
    margins.append(rep.min_margin)

    # hybrid composition at ((1 - 1/e)/(4 sqrt(m)), 1) on general profiles
    for s in range(10):
        vals = [random_hypergraph(6, 4, 8, seed=500 + 2 * s + a) for a in range(2)]
        rep = hybrid_smoothness_check(vals, p=0.5, trials=40, seed=s)
        margins.append(rep.min_margin)
        assert rep.lam == pytest.approx((1 - math.exp(-1)) / (4 * math.sqrt(6)))

    worst = min(margins)
    ok = worst >= -1e-9

    # closed forms against quadrature at 1e-6
    rng = np.random.default_rng(99)
    quad_ok = True
    for _ in range(30):
        c = float(rng.uniform(0.2, 2.5))
        anchor = float(rng.uniform(0.4, 3.0))
        dist = make_deviation("sba", c=c, anchor=anchor)
        targets = [(int(rng.integers(1, 6)), float(rng.uniform(0, 1.2 * dist.hi)))]
        if abs(
            expected_deviation_utility(dist, targets)
            - quadrature_deviation_utility(dist, targets)
        ) > 1e-6:
            quad_ok = False
    report(
        "criterion-08 smoothness suites",
        ok and quad_ok,
        f"min margin={worst:.2e} quadrature={'ok' if quad_ok else 'off'}",
    )


def test_criterion_09_no_regret_welfare_bound():
    t0 = time.perf_counter()
    failures = []
    for inst in range(20):
        d = 1 + inst % 2
        m = 6 + inst % 5  # 6..10
        n = 2 + inst % 2
        vals = [
            random_mps_d(m, d, parts=2, edge_budget=2 * m, seed=37 * inst + a)
            for a in range(n)
        ]
        _, opt = optimal_allocation(vals)
        if opt <= 1e-9:
            continue
        grids = [make_grid(v) for v in vals]
        bound = (d + 1) * (d + 2) * harmonic(m / (d + 1)) / (1 - math.exp(-(d + 1)))
        for seed in range(5):
            h = no_regret_run(vals, "single-bid", grids, rounds=10_000, seed=seed)
            mean_sw = h.mean_welfare()
            alpha = max(max(regret_of(h, i), 0.0) for i in range(n))
            slack = alpha * n / mean_sw
            ratio = opt / mean_sw
            if ratio > bound + slack:
                failures.append((inst, seed, ratio, bound, slack))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 600.0
    report(
        "criterion-09 no-regret welfare bound",
        ok,
        f"instances=20 seeds=5 failures={len(failures)} time={elapsed:.0f}s",
    )


def test_criterion_10_block_search_exact():
    res = repro_complete_hypergraph(d=3, k=2)
    ok = res.record.passed and abs(res.record.ratio - 3.0) <= 1e-9
    report("criterion-10 exhaustive block search", ok, f"beta*={res.record.ratio}")


def test_criterion_11_dependency_rule_equivalence():
    mismatches = 0
    for i in range(500):
        m = 4 + i % 7  # 4..10
        v = random_hypergraph(m, max_size=min(4, m), edge_budget=2 * m, seed=11_000 + i)
        for j in range(m):
            if dep_plus(v, j, "edge_rule") != dep_plus(v, j, "brute_force"):
                mismatches += 1
    report(
        "criterion-11 dependency rule equivalence",
        mismatches == 0,
        f"mismatches={mismatches}/500 instances",
    )


def test_criterion_12_allocator_oracle_equivalence():
    bad = 0
    for i in range(100):
        n = 2 + i % 2
        m = 4 + i % 5  # 4..8
        vals = [
            random_hypergraph(m, max_size=3, edge_budget=2 * m, seed=12_000 + 3 * i + a)
            for a in range(n)
        ]
        _, opt = optimal_allocation(vals)
        if opt != brute_force_optimum(vals):
            bad += 1
    report("criterion-12 allocator oracle equivalence", bad == 0, f"mismatches={bad}/100")


def test_criterion_13_random_graph_property_report():
    reports = []
    for seed in range(50):
        _, rep = random_graph_valuation(36, 1 / 12, seed=seed, samples_per_size=120)
        reports.append(rep)
    rate_density = sum(r.density_ok for r in reports) / len(reports)
    rate_degree = sum(r.degree_ok for r in reports) / len(reports)
    rate_edges = sum(r.edges_ok for r in reports) / len(reports)
    rate_all = sum(r.all_ok for r in reports) / len(reports)
    # probabilistic properties: only report generation is asserted
    ok = len(reports) == 50 and all(r.edge_count >= 0 for r in reports)
    report(
        "criterion-13 random graph property rates",
        ok,
        f"density={rate_density:.2f} degree={rate_degree:.2f} "
        f"edges={rate_edges:.2f} all={rate_all:.2f}",
    )
