"""Complementarity structure of a valuation: dependency sets, hypergraph
rank, supermodular degree, and block-homogeneous recognition.

The dependency set of item j collects the items j' whose presence strictly
raises some marginal of j.  For a hypergraph valuation this coincides with
the positive-edge neighborhood of j, which gives an O(edges) rule checked
here against brute-force enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DomainError, PreconditionError
from .items import ItemSet
from .valuations import (
    MONEY_TOL,
    HypergraphValuation,
    MaxValuation,
    Valuation,
)

BRUTE_LIMIT = 16


def harmonic(x: float) -> float:
    """Harmonic number with the fractional convention H_floor(x) + 1.

    For integer x this is 1 + 1/2 + ... + 1/x (H_0 = 0); for fractional
    x it is H_floor(x) + 1.
    """
    if x < 0:
        raise DomainError(f"harmonic needs a nonnegative argument, got {x}")
    n = math.floor(x + 1e-12)
    h = math.fsum(1.0 / i for i in range(1, n + 1))
    if abs(x - n) <= 1e-12:
        return h
    return h + 1.0


def dep_plus(v: Valuation, j: int, method: str = "auto") -> ItemSet:
    """Items whose presence strictly increases some marginal of item j.

    method "edge_rule" scans positive edges through j (hypergraph
    valuations only); "brute_force" enumerates all context sets S and
    requires m <= 16; "auto" picks the edge rule when available.
    """
    if not 0 <= j < v.m:
        raise DomainError(f"item {j} outside 0..{v.m - 1}")
    if method == "auto":
        method = "edge_rule" if isinstance(v, HypergraphValuation) else "brute_force"
    if method == "edge_rule":
        if not isinstance(v, HypergraphValuation):
            raise PreconditionError("edge rule needs a single hypergraph valuation")
        mask = 0
        for emask, w in v._edge_masks:
            if w > MONEY_TOL and emask >> j & 1:
                mask |= emask
        return ItemSet(v.m, mask & ~(1 << j))
    if method != "brute_force":
        raise DomainError(f"unknown method {method!r}")
    if v.m > BRUTE_LIMIT:
        raise CapacityError(f"brute-force dependency scan capped at m <= {BRUTE_LIMIT}")
    t = v.table()
    masks = np.arange(1 << v.m, dtype=np.int64)
    bj = 1 << j
    out = 0
    for jp in range(v.m):
        if jp == j:
            continue
        bp = 1 << jp
        ctx = masks[(masks & (bj | bp)) == 0]
        base = t[ctx | bj] - t[ctx]
        lifted = t[ctx | bj | bp] - t[ctx | bp]
        if np.any(lifted > base + MONEY_TOL):
            out |= bp
    return ItemSet(v.m, out)


def supermodular_degree(v: Valuation, method: str = "auto") -> int:
    """Largest dependency-set size over all items."""
    if v.m == 0:
        return 0
    return max(len(dep_plus(v, j, method)) for j in range(v.m))


def ph_rank(v: HypergraphValuation) -> int:
    """Largest member count among positive-weight edges (0 if none)."""
    if not isinstance(v, HypergraphValuation):
        raise PreconditionError("rank is defined for hypergraph valuations")
    return max((len(e.members) for e in v.positive_edges()), default=0)


@dataclass(frozen=True)
class DchResult:
    """Outcome of block-homogeneous recognition."""

    ok: bool
    v_hat: float = 0.0
    blocks: tuple[ItemSet, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def is_d_ch(v: HypergraphValuation, d: int) -> DchResult:
    """Recognize a d-block-homogeneous valuation.

    Such a valuation is additive over disjoint blocks of size at most d
    with one shared per-item value v_hat: v(S) = v_hat * (total size of
    blocks inside S).  Its hypergraph representation is unique, so the
    test reduces to: positive edges are pairwise disjoint, each has at
    most d members, and weight/|members| is the same for every edge.
    """
    if d < 1:
        raise DomainError(f"block size bound must be >= 1, got {d}")
    edges = v.positive_edges()
    if not edges:
        return DchResult(True, 0.0, ())
    used = 0
    v_hat = edges[0].weight / len(edges[0].members)
    blocks = []
    for e in edges:
        if len(e.members) > d:
            return DchResult(False)
        if used & e.members.mask:
            return DchResult(False)
        if abs(e.weight / len(e.members) - v_hat) > MONEY_TOL:
            return DchResult(False)
        used |= e.members.mask
        blocks.append(e.members)
    return DchResult(True, v_hat, tuple(blocks))


def is_ps_d(v: HypergraphValuation, d: int) -> bool:
    """Hypergraph valuation whose dependency sets all have size <= d."""
    return supermodular_degree(v, "edge_rule") <= d


def is_mps_d(v: Valuation, d: int) -> bool:
    """Part-wise membership check for max-form valuations."""
    if isinstance(v, MaxValuation):
        return all(is_ps_d(p, d) for p in v.parts)
    return is_ps_d(v, d)


@dataclass(frozen=True)
class ClassLabel:
    """Structural classification of an explicitly represented valuation."""

    kind: str
    m: int
    ph_rank: int
    sm_degree: int
    dch_levels: dict[int, bool] = field(default_factory=dict)
    part_labels: tuple["ClassLabel", ...] = ()

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "m": self.m,
            "ph_rank": self.ph_rank,
            "sm_degree": self.sm_degree,
            "dch_levels": {str(k): v for k, v in self.dch_levels.items()},
        }
        if self.part_labels:
            out["parts"] = [p.to_dict() for p in self.part_labels]
        return out


def classify(v: Valuation) -> ClassLabel:
    """Rank, degree, and block-homogeneity flags for a valuation.

    Max-form valuations are classified part-wise: the explicit part list
    is the membership certificate, so the reported degree and rank are
    maxima over parts.
    """
    if isinstance(v, MaxValuation):
        parts = tuple(classify(p) for p in v.parts)
        return ClassLabel(
            kind="max",
            m=v.m,
            ph_rank=max(p.ph_rank for p in parts),
            sm_degree=max(p.sm_degree for p in parts),
            part_labels=parts,
        )
    levels = {d: bool(is_d_ch(v, d)) for d in range(1, v.m + 1)}
    return ClassLabel(
        kind="hypergraph",
        m=v.m,
        ph_rank=ph_rank(v),
        sm_degree=supermodular_degree(v, "edge_rule"),
        dch_levels=levels,
    )
