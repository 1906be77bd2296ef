"""Named instance generators with expected-ratio metadata.

Each generator returns the agents' valuations plus closed-form
expectations (optimal welfare, equilibrium welfare, efficiency ratio)
and the bid-grid hooks its equilibrium needs: critical bids to inject
into learning grids and, for shipped equilibria, a small audit grid and
the bid profiles to verify.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .items import ItemSet
from .valuations import (
    MONEY_TOL,
    Hyperedge,
    HypergraphValuation,
    MaxValuation,
    Valuation,
    valuation_from_dict,
)


@dataclass
class InstanceMeta:
    name: str
    params: dict
    m: int
    n: int
    d: int | None = None
    expected_opt: float | None = None
    expected_eq_sw: float | None = None
    expected_ratio: float | None = None
    critical_bids: tuple[float, ...] = ()
    audit_bids: tuple[float, ...] = ()
    sb_profile: tuple[float, ...] | None = None
    gb_profile: tuple[float, ...] | None = None
    expected_blocks: tuple[tuple[int, ...], ...] | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "params": self.params,
            "m": self.m,
            "n": self.n,
            "d": self.d,
            "expected_opt": self.expected_opt,
            "expected_eq_sw": self.expected_eq_sw,
            "expected_ratio": self.expected_ratio,
            "critical_bids": list(self.critical_bids),
            "audit_bids": list(self.audit_bids),
            "sb_profile": list(self.sb_profile) if self.sb_profile else None,
            "gb_profile": list(self.gb_profile) if self.gb_profile else None,
            "expected_blocks": [list(b) for b in self.expected_blocks]
            if self.expected_blocks
            else None,
            "notes": self.notes,
        }
        return out


@dataclass
class InstanceBundle:
    vals: list[Valuation]
    meta: InstanceMeta

    def save(self, path: str | Path) -> None:
        path = Path(path)
        payload = {"m": self.meta.m, "agents": [v.to_dict() for v in self.vals]}
        path.write_text(json.dumps(payload, indent=2) + "\n")
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        sidecar.write_text(json.dumps(self.meta.to_dict(), indent=2) + "\n")


def load_agents(path: str | Path) -> list[Valuation]:
    data = json.loads(Path(path).read_text())
    if "agents" in data:
        return [valuation_from_dict(v) for v in data["agents"]]
    return [valuation_from_dict(data)]


def _star(m: int, members: Sequence[int], weight: float) -> HypergraphValuation:
    """Star-shaped valuation: center = lowest index of members, one edge
    of the given weight from the center to each other member."""
    center = min(members)
    edges = [Hyperedge(ItemSet.of(m, [center, j]), weight) for j in members if j != center]
    return HypergraphValuation(m, edges)


def star_instance(m: int, eps: float) -> InstanceBundle:
    """Two bidders on m items: a star bidder worth |T|-1 for any T holding
    the hub, against a rival wanting only the hub at (m-1)/m + eps.

    Every pure equilibrium hands the hub to the rival, so equilibrium
    welfare is (m-1)/m + eps against an optimum of m-1."""
    if m < 2:
        raise ParameterError(f"star instance needs m >= 2, got {m}")
    if eps <= 0:
        raise ParameterError("eps must be positive (the rival needs a strict edge)")
    hub_value = (m - 1) / m + eps
    star = _star(m, range(m), 1.0)
    rival = HypergraphValuation(m, [Hyperedge(ItemSet.of(m, [0]), hub_value)])
    threshold = (m - 1) / m
    crit = (threshold - eps, threshold, threshold + eps / 2, threshold + eps, threshold + 2 * eps)
    meta = InstanceMeta(
        name="star",
        params={"m": m, "eps": eps},
        m=m,
        n=2,
        d=1,
        expected_opt=float(m - 1),
        expected_eq_sw=hub_value,
        expected_ratio=(m - 1) / hub_value,
        critical_bids=crit,
        audit_bids=(0.0,) + crit + (hub_value,),
    )
    return InstanceBundle([star, rival], meta)


def sm_star_instance(d: int, m: int, eps: float) -> InstanceBundle:
    """Star instance on d+1 items padded with worthless items up to m."""
    if m < d + 1:
        raise ParameterError(f"need m >= d+1, got m={m}, d={d}")
    if d < 1:
        raise ParameterError("d must be >= 1")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    hub_value = d / (d + 1) + eps
    star = _star(m, range(d + 1), 1.0)
    rival = HypergraphValuation(m, [Hyperedge(ItemSet.of(m, [0]), hub_value)])
    threshold = d / (d + 1)
    crit = (threshold - eps, threshold, threshold + eps / 2, threshold + eps, threshold + 2 * eps)
    meta = InstanceMeta(
        name="sm-star",
        params={"d": d, "m": m, "eps": eps},
        m=m,
        n=2,
        d=d,
        expected_opt=float(d),
        expected_eq_sw=hub_value,
        expected_ratio=d / hub_value,
        critical_bids=crit,
        audit_bids=(0.0,) + crit + (hub_value,),
    )
    return InstanceBundle([star, rival], meta)


def hybrid_lb_instance(k: int, eps: float) -> InstanceBundle:
    """k star bidders on k disjoint k-item bundles, each facing a rival
    wanting only that star's hub at (k-1)/k + eps (m = k^2 items).

    Rivals occupy the low agent indices so the default tie order serves
    them first at equal bids; the shipped profile has everyone bidding
    just below (k-1)/k in the per-item branch, while the bundle branch
    ships star bidders at their full-bundle value k-1.  Welfare on either
    branch stays within k*eps of k-1 against an optimum of k(k-1)."""
    if k < 2:
        raise ParameterError(f"need k >= 2, got {k}")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    m = k * k
    hub_value = (k - 1) / k + eps
    rivals = []
    stars = []
    for t in range(k):
        members = range(t * k, (t + 1) * k)
        stars.append(_star(m, members, 1.0))
        rivals.append(
            HypergraphValuation(m, [Hyperedge(ItemSet.of(m, [t * k]), hub_value)])
        )
    vals: list[Valuation] = rivals + stars
    threshold = (k - 1) / k
    sb_bid = threshold - eps
    sb_profile = tuple([sb_bid] * (2 * k))
    gb_profile = tuple([0.0] * k + [float(k - 1)] * k)
    audit = (
        0.0,
        sb_bid,
        threshold,
        threshold + eps,
        hub_value,
        k - 1 - eps,
        float(k - 1),
        k - 1 + eps,
    )
    eq_sw = (k - 1) + k * eps
    meta = InstanceMeta(
        name="hybrid-lb",
        params={"k": k, "eps": eps},
        m=m,
        n=2 * k,
        d=k - 1,
        expected_opt=float(k * (k - 1)),
        expected_eq_sw=eq_sw,
        expected_ratio=k * (k - 1) / eq_sw,
        critical_bids=audit,
        audit_bids=audit,
        sb_profile=sb_profile,
        gb_profile=gb_profile,
        notes={"gb_eq_sw": float(k - 1)},
    )
    return InstanceBundle(vals, meta)


def tight_partition_instance(d: int, bundles: int, eps: float) -> InstanceBundle:
    """Single valuation showing the greedy partition's ratio is nearly d.

    Each of the `bundles` groups has d^2+1 items indexed (t, 0..d^2):
    hub edges join (t, d^2) to each spoke anchor (t, k*d) at weight 1/t,
    rim edges join each anchor to its d-1 satellites at weight 1/t - eps.
    The greedy pass takes exactly the hub-plus-anchors block from each
    group, so the block values sum to sum_t d/t while the total value is
    d times that (minus the eps mass)."""
    if d < 1:
        raise ParameterError("d must be >= 1")
    if bundles < 1:
        raise ParameterError("need at least one bundle")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    group = d * d + 1
    m = bundles * group
    if d >= math.sqrt(m):
        raise ParameterError(f"need d < sqrt(m), got d={d}, m={m}")
    edges = []
    expected_blocks = []
    for t in range(1, bundles + 1):
        base = (t - 1) * group
        hub = base + d * d
        w_center = 1.0 / t
        w_rim = 1.0 / t - eps
        if w_rim <= 0:
            raise ParameterError("eps too large: rim weights must stay positive")
        for kk in range(d):
            anchor = base + kk * d
            edges.append(Hyperedge(ItemSet.of(m, [hub, anchor]), w_center))
            for j in range(1, d):
                edges.append(Hyperedge(ItemSet.of(m, [anchor, anchor + j]), w_rim))
        expected_blocks.append(tuple(base + kk * d for kk in range(d)) + (hub,))
    v = HypergraphValuation(m, edges)
    interior = sum(d / t for t in range(1, bundles + 1))
    total = d * interior - bundles * d * (d - 1) * eps
    meta = InstanceMeta(
        name="tight-partition",
        params={"d": d, "bundles": bundles, "eps": eps},
        m=m,
        n=1,
        d=d,
        expected_opt=total,
        expected_ratio=total / interior,
        expected_blocks=tuple(expected_blocks),
        notes={"interior_value": interior},
    )
    return InstanceBundle([v], meta)


def complete_hypergraph_instance(d: int, k: int) -> InstanceBundle:
    """All size-k edges over d+1 items at weight 1; the hardest target for
    k-block minorants, whose best factor is C(d, k-1)."""
    if k < 1 or k > d + 1:
        raise ParameterError(f"need 1 <= k <= d+1, got k={k}, d={d}")
    m = d + 1
    from itertools import combinations

    edges = [Hyperedge(ItemSet.of(m, combo), 1.0) for combo in combinations(range(m), k)]
    v = HypergraphValuation(m, edges)
    meta = InstanceMeta(
        name="complete-hypergraph",
        params={"d": d, "k": k},
        m=m,
        n=1,
        d=d,
        expected_opt=float(math.comb(d + 1, k)),
        expected_ratio=float(math.comb(d, k - 1)),
    )
    return InstanceBundle([v], meta)


def layered_star_instance(
    k: int, d: int, eps: float = 1e-3, strict: bool = True, include_b0: bool = False
) -> InstanceBundle:
    """Layered star construction driving the stability gap to order d + k.

    Items form layers t = 1..k-1 of size k^t (layer 0 has a single item
    and cannot host d-item stars; include_b0 adds it as one worthless
    item to keep the count faithful).  Layer t splits into k^t / d stars
    of d items with edge weight d/(d-1) * k^(k-t); a fraction d/(d+k) of
    the star centers attracts a rival pair bidding k^(k-t) + eps each,
    and the rest a pair at k^(k-t-1).

    The center-count fractions are fractional for every (k, d) at t = 1,
    so strict mode always rejects; strict=False rounds the counts and
    records them, keeping the generator usable for exploratory runs.
    """
    if k < 2 or d < 2:
        raise ParameterError("need k >= 2 and d >= 2")
    if k % d != 0:
        raise ParameterError(f"k must be divisible by d, got k={k}, d={d}")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    lam = d / (d + k)
    failures = []
    layer_stars = {}
    for t in range(1, k):
        if k**t % d != 0:
            failures.append(f"layer {t}: k^t = {k**t} not divisible by d = {d}")
            continue
        stars = k**t // d
        strong_share = lam * stars
        weak_share = (1 - lam) * stars
        if abs(strong_share - round(strong_share)) > 1e-9:
            failures.append(
                f"layer {t}: strong center count {strong_share:.6g} of {stars} stars is fractional"
            )
        if abs(weak_share - round(weak_share)) > 1e-9:
            failures.append(
                f"layer {t}: weak center count {weak_share:.6g} of {stars} stars is fractional"
            )
        layer_stars[t] = stars
    if strict and failures:
        raise ParameterError("; ".join(failures))
    offset = 1 if include_b0 else 0
    m = offset + sum(k**t for t in range(1, k))
    edges = []
    strong_centers: dict[int, list[int]] = {}
    weak_centers: dict[int, list[int]] = {}
    base = offset
    for t in range(1, k):
        stars = layer_stars.get(t, k**t // d)
        n_strong = int(round(lam * stars))
        weight = d / (d - 1) * k ** (k - t)
        centers = []
        for s in range(stars):
            members = range(base + s * d, base + (s + 1) * d)
            center = base + s * d
            centers.append(center)
            for j in members:
                if j != center:
                    edges.append(Hyperedge(ItemSet.of(m, [center, j]), weight))
        strong_centers[t] = centers[:n_strong]
        weak_centers[t] = centers[n_strong:]
        base += k**t
    strong = HypergraphValuation(m, edges)
    vals: list[Valuation] = [strong]
    sb_profile = [0.0]
    for t in range(1, k):
        value = float(k ** (k - t)) + eps
        pairs = [(ItemSet.of(m, [c]), value) for c in strong_centers[t]]
        for _ in range(2):
            vals.append(
                HypergraphValuation(m, [Hyperedge(s, w) for s, w in pairs])
            )
            sb_profile.append(value)
    for t in range(1, k):
        value = float(k ** (k - t - 1))
        pairs = [(ItemSet.of(m, [c]), value) for c in weak_centers[t]]
        for _ in range(2):
            vals.append(
                HypergraphValuation(m, [Hyperedge(s, w) for s, w in pairs])
            )
            sb_profile.append(value)
    opt = strong.vmax()
    meta = InstanceMeta(
        name="layered-star",
        params={"k": k, "d": d, "eps": eps, "strict": strict, "include_b0": include_b0},
        m=m,
        n=len(vals),
        d=d - 1,
        expected_opt=opt,
        expected_ratio=None,
        sb_profile=tuple(sb_profile),
        notes={
            "integrality_failures": failures,
            "layer_weight_total": {t: k**k for t in layer_stars},
            "b0_included": include_b0,
        },
    )
    return InstanceBundle(vals, meta)


def random_ps_d(
    m: int, d: int, edge_budget: int, seed: int = 0, max_edge_size: int | None = None
) -> HypergraphValuation:
    """Random positive-hypergraph valuation with dependency sets capped at d.

    Proposed edges are rejected whenever they would push any member's
    positive-edge neighborhood beyond d items, so the output always sits
    at level <= d of the hierarchy by construction."""
    rng = np.random.default_rng(seed)
    top = d + 1 if max_edge_size is None else max_edge_size
    top = max(1, min(top, m))
    neighbors: dict[int, set[int]] = {j: set() for j in range(m)}
    chosen: dict[tuple[int, ...], float] = {}
    attempts = 0
    while len(chosen) < edge_budget and attempts < 50 * max(edge_budget, 1):
        attempts += 1
        size = int(rng.integers(1, top + 1))
        members = tuple(sorted(rng.choice(m, size=size, replace=False).tolist()))
        if members in chosen:
            continue
        ok = True
        for j in members:
            grown = neighbors[j] | (set(members) - {j})
            if len(grown) > d:
                ok = False
                break
        if not ok:
            continue
        for j in members:
            neighbors[j] |= set(members) - {j}
        chosen[members] = float(rng.uniform(0.1, 1.0))
    return HypergraphValuation.from_pairs(m, list(chosen.items()))


def random_mps_d(m: int, d: int, parts: int, edge_budget: int, seed: int = 0) -> MaxValuation:
    """Max of independently sampled degree-bounded hypergraph valuations."""
    return MaxValuation(
        [random_ps_d(m, d, edge_budget, seed=seed * 1000 + i) for i in range(parts)]
    )


def random_hypergraph(m: int, max_size: int, edge_budget: int, seed: int = 0) -> HypergraphValuation:
    """Unconstrained random positive hypergraph (test fixture)."""
    rng = np.random.default_rng(seed)
    chosen: dict[tuple[int, ...], float] = {}
    attempts = 0
    while len(chosen) < edge_budget and attempts < 50 * max(edge_budget, 1):
        attempts += 1
        size = int(rng.integers(1, min(max_size, m) + 1))
        members = tuple(sorted(rng.choice(m, size=size, replace=False).tolist()))
        if members in chosen:
            continue
        chosen[members] = float(rng.uniform(0.1, 1.0))
    return HypergraphValuation.from_pairs(m, list(chosen.items()))


@dataclass
class RandomGraphReport:
    """Empirical check of the three sparse-random-graph properties used by
    the low-rank lower bound: bounded edge density inside small sets,
    bounded maximum degree, and enough total edges."""

    m: int
    p: float
    d: int
    seed: int
    edge_count: int
    max_degree: int
    density_ok: bool
    degree_ok: bool
    edges_ok: bool
    worst_density_ratio: float

    @property
    def all_ok(self) -> bool:
        return self.density_ok and self.degree_ok and self.edges_ok

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "p": self.p,
            "d": self.d,
            "seed": self.seed,
            "edge_count": self.edge_count,
            "max_degree": self.max_degree,
            "density_ok": self.density_ok,
            "degree_ok": self.degree_ok,
            "edges_ok": self.edges_ok,
            "worst_density_ratio": self.worst_density_ratio,
            "all_ok": self.all_ok,
        }


def random_graph_valuation(
    m: int, p: float, seed: int = 0, samples_per_size: int = 200
) -> tuple[HypergraphValuation, RandomGraphReport]:
    """Erdos-Renyi graph valuation (unit edge weights) plus a property
    report calibrated to d = sqrt(m): subset edge counts against
    12*k*log(d), max degree against d, and edge count against d^3/9.

    The subset check samples vertex sets per size (exhausting all sets is
    infeasible); the properties are probabilistic, so the report records
    pass rates rather than asserting them."""
    rng = np.random.default_rng(seed)
    d = int(round(math.sqrt(m)))
    adj = rng.random((m, m)) < p
    edges = []
    deg = [0] * m
    adj_sets: list[set[int]] = [set() for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            if adj[i, j]:
                edges.append(Hyperedge(ItemSet.of(m, [i, j]), 1.0))
                deg[i] += 1
                deg[j] += 1
                adj_sets[i].add(j)
                adj_sets[j].add(i)
    v = HypergraphValuation(m, edges)
    worst = 0.0
    density_ok = True
    logd = math.log(max(d, 2))
    for k in range(1, min(d + 1, m) + 1):
        bound = 12.0 * k * logd
        for _ in range(samples_per_size):
            subset = rng.choice(m, size=k, replace=False)
            inside = set(subset.tolist())
            count = sum(1 for x in inside for y in adj_sets[x] if y in inside and y > x)
            worst = max(worst, count / bound)
            if count > bound:
                density_ok = False
    report = RandomGraphReport(
        m=m,
        p=p,
        d=d,
        seed=seed,
        edge_count=len(edges),
        max_degree=max(deg) if deg else 0,
        density_ok=density_ok,
        degree_ok=(max(deg) if deg else 0) <= d,
        edges_ok=len(edges) >= d**3 / 9.0,
        worst_density_ratio=worst,
    )
    return v, report


GENERATORS = {
    "star": star_instance,
    "sm-star": sm_star_instance,
    "hybrid-lb": hybrid_lb_instance,
    "tight-partition": tight_partition_instance,
    "complete-hypergraph": complete_hypergraph_instance,
    "layered-star": layered_star_instance,
}


def make_instance(name: str, params: dict) -> InstanceBundle:
    if name not in GENERATORS:
        raise ParameterError(f"unknown instance generator {name!r}")
    return GENERATORS[name](**params)
