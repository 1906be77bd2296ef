"""Pointwise approximation of complement-carrying valuations by
block-homogeneous ones.

The pipeline: greedily partition the target set into blocks of size d+1
(each step takes a maximum-value block of remaining items), scale a
block-homogeneous candidate from the partition, and shrink the ground
set past any violating block union until the candidate is dominated by
the valuation everywhere.  A certificate records the approximator and
the factor beta with beta * h(X) >= v(X) and h <= v pointwise.

For rank-2 valuations a sharper route pairs items via a proper edge
coloring: the heaviest color class is a matching carrying at least a
1/(d+1) fraction of the edge weight, and the same shrinking iteration
then certifies a 2-block approximator.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .edge_coloring import EdgeColoring, vizing_color
from .errors import CapacityError, DomainError, PreconditionError
from .hierarchy import ph_rank
from .items import ItemSet
from .valuations import (
    MONEY_TOL,
    Hyperedge,
    HypergraphValuation,
    MaxValuation,
    Valuation,
)

GREEDY_GROUND_LIMIT = 24
GREEDY_BLOCK_LIMIT = 6
POINTWISE_LIMIT = 20
FULL_RECHECK_LIMIT = 14
KCH_SEARCH_LIMIT = 10


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks covering a ground set."""

    ground: ItemSet
    blocks: tuple[ItemSet, ...]

    def __post_init__(self) -> None:
        union = 0
        total = 0
        for q in self.blocks:
            if not q:
                raise DomainError("empty partition block")
            if q.mask & union:
                raise DomainError("overlapping partition blocks")
            union |= q.mask
            total += len(q)
        if union != self.ground.mask:
            raise DomainError("blocks do not cover the ground set")


def greedy_partition(v: Valuation, x: ItemSet, d: int) -> Partition:
    """Partition x into blocks of size d+1 chosen greedily by value.

    Each iteration takes a maximum-value subset of the remaining items of
    size exactly d+1 (all remaining items when fewer are left); argmax
    ties resolve to the smallest member tuple.
    """
    if d + 1 < 1:
        raise DomainError("block size must be at least 1")
    if d + 1 > GREEDY_BLOCK_LIMIT:
        raise CapacityError(f"greedy blocks capped at size {GREEDY_BLOCK_LIMIT}")
    if len(x) > GREEDY_GROUND_LIMIT:
        raise CapacityError(f"greedy ground set capped at {GREEDY_GROUND_LIMIT} items")
    remaining = list(x.indices())
    blocks: list[ItemSet] = []
    while remaining:
        if len(remaining) <= d + 1:
            blocks.append(ItemSet.of(v.m, remaining))
            break
        best_mask = None
        best_val = -1.0
        for combo in combinations(remaining, d + 1):
            mask = 0
            for j in combo:
                mask |= 1 << j
            val = v.value_mask(mask)
            if val > best_val + MONEY_TOL:
                best_val = val
                best_mask = mask
        blocks.append(ItemSet(v.m, best_mask))
        remaining = [j for j in remaining if not best_mask >> j & 1]
    return Partition(x, tuple(blocks))


def build_block_homogeneous(
    v: Valuation,
    x: ItemSet,
    partition: Partition,
    beta: float,
    sub_ground: ItemSet,
) -> tuple[HypergraphValuation, float]:
    """Block-homogeneous candidate scaled to hit v(X)/beta on sub_ground.

    sub_ground must be a union of partition blocks; the candidate gives
    v_hat = v(X) / (|sub_ground| * beta) per item, released block-wise.
    Returns the valuation and v_hat.
    """
    vx = v.value(x)
    if vx <= MONEY_TOL:
        raise PreconditionError("target value must be positive")
    blocks = [q for q in partition.blocks if q <= sub_ground]
    covered = 0
    for q in blocks:
        covered |= q.mask
    if covered != sub_ground.mask:
        raise PreconditionError("sub_ground must be a union of partition blocks")
    v_hat = vx / (len(sub_ground) * beta)
    edges = [Hyperedge(q, v_hat * len(q)) for q in blocks]
    return HypergraphValuation(v.m, edges), v_hat


@dataclass(frozen=True)
class ApproxCertificate:
    """Witness that beta * approximator(x) >= v(x) with approximator <= v."""

    approximator: HypergraphValuation
    v_hat: float
    blocks: tuple[ItemSet, ...]
    beta: float
    x: ItemSet
    checked_count: int
    fully_rechecked: bool

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "v_hat": self.v_hat,
            "blocks": [list(q) for q in self.blocks],
            "x": list(self.x),
            "checked_count": self.checked_count,
            "fully_rechecked": self.fully_rechecked,
        }


@dataclass(frozen=True)
class ApproxFailure:
    """Trace of an exhausted shrinking iteration: the block partition and
    the removed unions T_i together with the ratios |T_i| / |S_i|."""

    partition: Partition
    removed: tuple[ItemSet, ...]
    ratios: tuple[float, ...]

    def ratio_sum(self) -> float:
        return float(sum(self.ratios))


def _select_part(v: Valuation, x: ItemSet) -> Valuation:
    if isinstance(v, MaxValuation):
        return v.best_part_at(x)
    return v


def _iterate_blocks(
    v: Valuation, x: ItemSet, partition: Partition, beta: float
) -> ApproxCertificate | ApproxFailure:
    """Shrink past violating block unions until the candidate is dominated.

    Restricting the violation search to unions of blocks loses nothing:
    the candidate's value depends only on contained blocks, so any
    violating set yields a violating block union by monotonicity.
    """
    vx = v.value(x)
    current = x
    removed: list[ItemSet] = []
    ratios: list[float] = []
    checked = 0
    while current:
        active = [q for q in partition.blocks if q <= current]
        v_hat = vx / (len(current) * beta)
        sizes = [len(q) for q in active]
        worst_gap = MONEY_TOL
        worst_mask = None
        for pick in range(1, 1 << len(active)):
            mask = 0
            size = 0
            for b in range(len(active)):
                if pick >> b & 1:
                    mask |= active[b].mask
                    size += sizes[b]
            gap = v_hat * size - v.value_mask(mask)
            checked += 1
            if gap > worst_gap:
                worst_gap = gap
                worst_mask = mask
        if worst_mask is None:
            approx, v_hat_out = build_block_homogeneous(v, x, partition, beta, current)
            fully = False
            if v.m <= FULL_RECHECK_LIMIT:
                gaps = approx.table() - v.table()
                if np.any(gaps > MONEY_TOL):
                    raise AssertionError("block-union search missed a violating set")
                checked += 1 << v.m
                fully = True
            return ApproxCertificate(
                approximator=approx,
                v_hat=v_hat_out,
                blocks=tuple(q for q in partition.blocks if q <= current),
                beta=beta,
                x=x,
                checked_count=checked,
                fully_rechecked=fully,
            )
        t = ItemSet(v.m, worst_mask)
        removed.append(t)
        ratios.append(len(t) / len(current))
        current = current - t
    return ApproxFailure(partition, tuple(removed), tuple(ratios))


def pointwise_approx(
    v: Valuation, x: ItemSet, d: int, beta: float
) -> ApproxCertificate | ApproxFailure:
    """Search for a (d+1)-block-homogeneous pointwise approximator at x.

    Max-form valuations are handled through the part achieving the value
    at x: a certificate against that part also certifies the maximum.
    A zero-value target yields the trivial (empty) certificate.
    """
    if v.m > POINTWISE_LIMIT:
        raise CapacityError(f"pointwise search capped at m <= {POINTWISE_LIMIT}")
    if beta <= 0:
        raise DomainError("approximation factor must be positive")
    if v.value(x) <= MONEY_TOL:
        empty = HypergraphValuation(v.m, [])
        return ApproxCertificate(empty, 0.0, (), beta, x, 0, True)
    base = _select_part(v, x)
    partition = greedy_partition(base, x, d)
    return _iterate_blocks(base, x, partition, beta)


def crossing_weight(v: HypergraphValuation, partition: Partition) -> tuple[float, float]:
    """Split the positive-edge mass inside the ground set into the part
    crossing between blocks and the part interior to single blocks.

    Returns (crossing, interior) with v(ground) = crossing + interior.
    """
    if not isinstance(v, HypergraphValuation):
        raise PreconditionError("crossing weights need an explicit hypergraph")
    ground = partition.ground.mask
    crossing = 0.0
    for emask, w in v._edge_masks:
        if emask & ~ground:
            continue
        if not any(emask & ~q.mask == 0 for q in partition.blocks):
            crossing += w
    interior = sum(v.value(q) for q in partition.blocks)
    return crossing, interior


@dataclass(frozen=True)
class PairingInfo:
    """Pair partition built from the heaviest color class of the positive
    graph, with the coloring and the class weights."""

    partition: Partition
    coloring: EdgeColoring
    class_weights: tuple[float, ...]
    heaviest: int
    vertex_weight: float

    def heaviest_weight(self) -> float:
        return self.class_weights[self.heaviest] if self.class_weights else 0.0


def pair_by_coloring(v: HypergraphValuation, x: ItemSet) -> PairingInfo:
    """Pair the items of x using a proper edge coloring of the positive
    rank-2 edges: keep the heaviest color class as a matching, then pair
    the remaining items in ascending index order (odd leftover stays
    alone)."""
    if ph_rank(v) > 2:
        raise PreconditionError("pairing needs a rank-2 valuation")
    pos = [e for e in v.positive_edges() if e.members <= x]
    graph = [tuple(e.members.indices()) for e in pos if len(e.members) == 2]
    weights = {tuple(e.members.indices()): e.weight for e in pos if len(e.members) == 2}
    vertex_weight = sum(e.weight for e in pos if len(e.members) == 1)
    coloring = vizing_color(graph)
    ncolors = max(coloring.colors) + 1 if coloring.colors else 0
    class_weights = [0.0] * ncolors
    for e, c in zip(coloring.edges, coloring.colors):
        class_weights[c] += weights[e]
    heaviest = int(np.argmax(class_weights)) if class_weights else 0
    blocks: list[ItemSet] = []
    used = 0
    for e, c in zip(coloring.edges, coloring.colors):
        if c == heaviest:
            blocks.append(ItemSet.of(v.m, e))
            used |= blocks[-1].mask
    rest = [j for j in x.indices() if not used >> j & 1]
    for i in range(0, len(rest) - 1, 2):
        blocks.append(ItemSet.of(v.m, rest[i : i + 2]))
    if len(rest) % 2:
        blocks.append(ItemSet.of(v.m, [rest[-1]]))
    return PairingInfo(
        partition=Partition(x, tuple(blocks)),
        coloring=coloring,
        class_weights=tuple(class_weights),
        heaviest=heaviest,
        vertex_weight=vertex_weight,
    )


def ph2_pairing(
    v: HypergraphValuation, x: ItemSet, beta: float
) -> ApproxCertificate | ApproxFailure:
    """2-block pointwise approximation for rank-2 valuations via pairing."""
    if v.m > POINTWISE_LIMIT:
        raise CapacityError(f"pointwise search capped at m <= {POINTWISE_LIMIT}")
    if not isinstance(v, HypergraphValuation):
        raise PreconditionError("pairing route needs an explicit hypergraph")
    if ph_rank(v) > 2:
        raise PreconditionError("pairing route needs rank <= 2")
    if v.value(x) <= MONEY_TOL:
        empty = HypergraphValuation(v.m, [])
        return ApproxCertificate(empty, 0.0, (), beta, x, 0, True)
    info = pair_by_coloring(v, x)
    return _iterate_blocks(v, x, info.partition, beta)


def best_kch_search(v: Valuation, x: ItemSet, k: int) -> float:
    """Smallest beta achievable by any k-block-homogeneous minorant at x.

    Exhausts families of disjoint blocks of size <= k inside x; for a
    fixed family the best per-item value is the minimum of v(U)/|U| over
    block unions U, which makes the scan exact.  Returns infinity when
    no candidate has positive value at x, and 1.0 when v(x) = 0.
    """
    if v.m > KCH_SEARCH_LIMIT:
        raise CapacityError(f"block-family search capped at m <= {KCH_SEARCH_LIMIT}")
    if k < 1:
        raise DomainError("block size bound must be >= 1")
    vx = v.value(x)
    if vx <= MONEY_TOL:
        return 1.0
    items = x.indices()
    best = float("inf")

    def evaluate(blocks: list[int]) -> None:
        nonlocal best
        sizes = [b.bit_count() for b in blocks]
        v_hat = float("inf")
        for pick in range(1, 1 << len(blocks)):
            mask = 0
            size = 0
            for i in range(len(blocks)):
                if pick >> i & 1:
                    mask |= blocks[i]
                    size += sizes[i]
            v_hat = min(v_hat, v.value_mask(mask) / size)
        total = sum(sizes)
        if v_hat * total > MONEY_TOL:
            best = min(best, vx / (v_hat * total))

    def extend(pos: int, used: int, blocks: list[int]) -> None:
        while pos < len(items) and used >> items[pos] & 1:
            pos += 1
        if pos == len(items):
            if blocks:
                evaluate(blocks)
            return
        # items[pos] left out of every block
        extend(pos + 1, used, blocks)
        # items[pos] anchors a new block with members drawn above it
        rest = [j for j in items[pos + 1 :] if not used >> j & 1]
        anchor = 1 << items[pos]
        for r in range(0, min(k - 1, len(rest)) + 1):
            for combo in combinations(rest, r):
                mask = anchor
                for j in combo:
                    mask |= 1 << j
                if v.value_mask(mask) <= MONEY_TOL:
                    continue  # zero-value block forces v_hat to zero
                blocks.append(mask)
                extend(pos + 1, used | mask, blocks)
                blocks.pop()

    extend(0, 0, [])
    return best
