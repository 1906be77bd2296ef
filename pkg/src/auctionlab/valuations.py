"""Hypergraph-represented valuations, max-form valuations, and demand queries.

A hypergraph valuation stores nonnegative weights on distinct hyperedges;
the value of a bundle S is the total weight of edges contained in S:

    v(S) = sum of w_e over edges e with e a subset of S

A max-form valuation is the pointwise maximum of several hypergraph
valuations over the same ground set.  Both are normalized (v(empty) = 0)
and monotone by construction.  All queries are exact; money is double
precision with comparison tolerance MONEY_TOL.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    CapacityError,
    DomainError,
    DuplicateEdgeError,
    EmptyEdgeError,
    NegativeWeightError,
    PreconditionError,
)
from .items import ItemSet

MONEY_TOL = 1e-9
TABLE_LIMIT = 20   # build 2^m lookup tables lazily up to this m
DEMAND_LIMIT = 24  # exhaustive demand queries cap


@lru_cache(maxsize=None)
def mask_arrays(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All masks of width m, their popcounts, and the canonical order.

    Canonical order sorts by cardinality, then by member tuple (so the
    empty set comes first and {0, 5} precedes {1, 2}).  Ties in demand
    queries and allocation reconstruction resolve to the first mask in
    this order.
    """
    masks = np.arange(1 << m, dtype=np.int64)
    pop = np.zeros(1 << m, dtype=np.int64)
    rev = np.zeros(1 << m, dtype=np.int64)
    for j in range(m):
        bit = (masks >> j) & 1
        pop += bit
        rev |= bit << (m - 1 - j)
    # member-tuple order == descending bit-reversed mask
    order = np.lexsort((-rev, pop))
    return masks, pop, order


@lru_cache(maxsize=None)
def canonical_arrays(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Canonically ordered masks and their popcounts."""
    _, pop, order = mask_arrays(m)
    return order, pop[order]


@lru_cache(maxsize=None)
def popcount_groups(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Masks regrouped by cardinality: (mask permutation, group starts).

    Masks equal their indices, so the permutation array doubles as the
    reordered mask list."""
    _, pop, _ = mask_arrays(m)
    perm = np.argsort(pop, kind="stable").astype(np.int64)
    starts = np.searchsorted(pop[perm], np.arange(m + 1))
    return perm, starts


@dataclass(frozen=True)
class Hyperedge:
    members: ItemSet
    weight: float


class HypergraphValuation:
    """Nonnegative weights on distinct hyperedges over items 0..m-1."""

    kind = "hypergraph"

    def __init__(self, m: int, edges: Sequence[Hyperedge]):
        if m < 0:
            raise DomainError("m must be nonnegative")
        seen: set[int] = set()
        for e in edges:
            if e.members.m != m:
                raise DomainError(f"edge over m={e.members.m} in valuation over m={m}")
            if not e.members:
                raise EmptyEdgeError("edges must be nonempty")
            if e.weight < 0:
                raise NegativeWeightError(f"edge {e.members.indices()} has weight {e.weight}")
            if e.members.mask in seen:
                raise DuplicateEdgeError(f"duplicate edge {e.members.indices()}")
            seen.add(e.members.mask)
        self.m = m
        self.edges = tuple(sorted(edges, key=lambda e: e.members.sort_key()))
        self._edge_masks = [(e.members.mask, e.weight) for e in self.edges]
        self._table: np.ndarray | None = None

    @classmethod
    def from_pairs(cls, m: int, pairs: Iterable[tuple[Iterable[int], float]]) -> "HypergraphValuation":
        return cls(m, [Hyperedge(ItemSet.of(m, items), float(w)) for items, w in pairs])

    def value_mask(self, mask: int) -> float:
        if self._table is not None:
            return float(self._table[mask])
        if self.m <= TABLE_LIMIT:
            return float(self.table()[mask])
        return sum(w for emask, w in self._edge_masks if emask & ~mask == 0)

    def value(self, s: ItemSet) -> float:
        if s.m != self.m:
            raise DomainError(f"set over m={s.m}, valuation over m={self.m}")
        return self.value_mask(s.mask)

    def marginal(self, j: int, s: ItemSet) -> float:
        if j in s:
            raise PreconditionError(f"item {j} already in the base set")
        return self.value(s.add(j)) - self.value(s)

    def table(self) -> np.ndarray:
        """Dense 2^m value table via the subset-sum transform."""
        if self._table is None:
            if self.m > TABLE_LIMIT:
                raise CapacityError(f"value table needs m <= {TABLE_LIMIT}, got {self.m}")
            t = np.zeros(1 << self.m)
            for mask, w in self._edge_masks:
                t[mask] += w
            idx = np.arange(1 << self.m, dtype=np.int64)
            for j in range(self.m):
                bit = 1 << j
                src = idx[(idx & bit) == 0]
                t[src + bit] += t[src]
            self._table = t
        return self._table

    def vmax(self) -> float:
        """Value of the full bundle."""
        return self.value_mask((1 << self.m) - 1)

    def table_by_popcount(self) -> np.ndarray:
        """Value table permuted into cardinality groups (cached)."""
        if getattr(self, "_table_pop", None) is None:
            perm, _ = popcount_groups(self.m)
            self._table_pop = self.table()[perm]
        return self._table_pop

    def table_canonical(self) -> np.ndarray:
        """Value table permuted into canonical order (cached)."""
        if getattr(self, "_table_canon", None) is None:
            _, _, order = mask_arrays(self.m)
            self._table_canon = self.table()[order]
        return self._table_canon

    def positive_edges(self) -> list[Hyperedge]:
        return [e for e in self.edges if e.weight > MONEY_TOL]

    def to_dict(self) -> dict:
        return {"m": self.m, "edges": [[list(e.members), e.weight] for e in self.edges]}

    def __repr__(self) -> str:
        return f"HypergraphValuation(m={self.m}, edges={len(self.edges)})"


class MaxValuation:
    """Pointwise maximum over hypergraph valuations on the same ground set."""

    kind = "max"

    def __init__(self, parts: Sequence[HypergraphValuation]):
        if not parts:
            raise DomainError("max-form valuation needs at least one part")
        m = parts[0].m
        for p in parts:
            if p.m != m:
                raise DomainError("all parts must share the same ground set")
        self.m = m
        self.parts = tuple(parts)
        self._table: np.ndarray | None = None

    def value_mask(self, mask: int) -> float:
        if self._table is not None:
            return float(self._table[mask])
        if self.m <= TABLE_LIMIT:
            return float(self.table()[mask])
        return max(p.value_mask(mask) for p in self.parts)

    def value(self, s: ItemSet) -> float:
        if s.m != self.m:
            raise DomainError(f"set over m={s.m}, valuation over m={self.m}")
        return self.value_mask(s.mask)

    def marginal(self, j: int, s: ItemSet) -> float:
        if j in s:
            raise PreconditionError(f"item {j} already in the base set")
        return self.value(s.add(j)) - self.value(s)

    def table(self) -> np.ndarray:
        if self._table is None:
            self._table = np.maximum.reduce([p.table() for p in self.parts])
        return self._table

    def table_by_popcount(self) -> np.ndarray:
        if getattr(self, "_table_pop", None) is None:
            perm, _ = popcount_groups(self.m)
            self._table_pop = self.table()[perm]
        return self._table_pop

    def table_canonical(self) -> np.ndarray:
        if getattr(self, "_table_canon", None) is None:
            _, _, order = mask_arrays(self.m)
            self._table_canon = self.table()[order]
        return self._table_canon

    def vmax(self) -> float:
        return self.value_mask((1 << self.m) - 1)

    def best_part_at(self, s: ItemSet) -> HypergraphValuation:
        """A part achieving the maximum at s (first such part)."""
        vals = [p.value(s) for p in self.parts]
        return self.parts[int(np.argmax(vals))]

    def to_dict(self) -> dict:
        return {"max": [p.to_dict() for p in self.parts]}

    def __repr__(self) -> str:
        return f"MaxValuation(m={self.m}, parts={len(self.parts)})"


Valuation = Union[HypergraphValuation, MaxValuation]


def validate_hypergraph(m: int, pairs: Iterable[tuple[Iterable[int], float]]) -> HypergraphValuation:
    """Build a hypergraph valuation, rejecting negative weights, duplicate
    member sets, and empty edges.  Edge order is canonicalized."""
    return HypergraphValuation.from_pairs(m, pairs)


@dataclass(frozen=True)
class StructureReport:
    monotone: bool
    subadditive: bool


def check_structure(v: Valuation, cap: int = 16) -> StructureReport:
    """Exhaustively verify monotonicity and subadditivity over all set pairs."""
    if v.m > cap:
        raise CapacityError(f"structure check capped at m <= {cap}, got {v.m}")
    t = v.table()
    idx = np.arange(1 << v.m, dtype=np.int64)
    monotone = True
    for j in range(v.m):
        bit = 1 << j
        src = idx[(idx & bit) == 0]
        if np.any(t[src + bit] < t[src] - MONEY_TOL):
            monotone = False
            break
    subadditive = True
    for s in range(1 << v.m):
        if np.any(t[idx | s] > t[s] + t + MONEY_TOL):
            subadditive = False
            break
    return StructureReport(monotone=monotone, subadditive=subadditive)


def demand_select(v: Valuation, available: ItemSet, bid: float, tie: object | None = None) -> ItemSet:
    """Utility-maximizing bundle from the available items at a per-item price.

    Returns an argmax of v(S) - |S| * bid over subsets S of `available`.
    Bundles within MONEY_TOL of the maximum tie; ties resolve to the
    smallest cardinality, then the smallest member tuple, so the empty
    set wins whenever the best achievable utility is zero.
    """
    if bid < 0:
        raise PreconditionError(f"bid must be nonnegative, got {bid}")
    if available.m != v.m:
        raise DomainError("available set and valuation disagree on m")
    if math.isinf(bid):
        return ItemSet.empty(v.m)
    k = len(available)
    if k > DEMAND_LIMIT:
        raise CapacityError(f"demand query capped at {DEMAND_LIMIT} items, got {k}")
    if v.m <= TABLE_LIMIT:
        return ItemSet(v.m, demand_mask(v, available.mask, bid))
    # slow path for wide ground sets: enumerate subsets of the available items
    items = available.indices()
    best_util = 0.0
    for mask in _submasks_by_canonical(items):
        u = v.value_mask(mask) - bid * mask.bit_count()
        if u > best_util + MONEY_TOL:
            best_util = u
    for mask in _submasks_by_canonical(items):
        u = v.value_mask(mask) - bid * mask.bit_count()
        if u >= best_util - MONEY_TOL:
            return ItemSet(v.m, mask)
    return ItemSet.empty(v.m)


def demand_mask(v: Valuation, avail_mask: int, bid: float) -> int:
    """Fast-path demand query over raw masks (table-backed valuations)."""
    order, pop_canon = canonical_arrays(v.m)
    util = v.table_canonical() - bid * pop_canon
    util[(order & ~avail_mask) != 0] = -np.inf
    best = util.max()
    return int(order[int(np.argmax(util >= best - MONEY_TOL))])


def _submasks_by_canonical(items: tuple[int, ...]):
    from itertools import combinations

    for r in range(len(items) + 1):
        for combo in combinations(items, r):
            mask = 0
            for j in combo:
                mask |= 1 << j
            yield mask


# ---------------------------------------------------------------------------
# JSON round trip


def valuation_from_dict(data: dict) -> Valuation:
    if "max" in data:
        return MaxValuation([_hypergraph_from_dict(p) for p in data["max"]])
    return _hypergraph_from_dict(data)


def _hypergraph_from_dict(data: dict) -> HypergraphValuation:
    return HypergraphValuation.from_pairs(int(data["m"]), [(e[0], e[1]) for e in data["edges"]])


def valuation_to_dict(v: Valuation) -> dict:
    return v.to_dict()


def save_valuation(v: Valuation, path: str | Path) -> None:
    Path(path).write_text(json.dumps(v.to_dict(), indent=2) + "\n")


def load_valuation(path: str | Path) -> Valuation:
    return valuation_from_dict(json.loads(Path(path).read_text()))
