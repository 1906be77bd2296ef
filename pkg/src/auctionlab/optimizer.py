"""Exact welfare maximization over item subsets.

The allocator runs a dynamic program over agent prefixes and item
subsets (states are masks, transitions enumerate submasks), giving the
exact optimum at desk scale.  A backtracking variant enumerates every
optimal allocation up to a value tolerance, which supports the lopsided
test: does some optimal allocation earn at least half its welfare from
winners of at least z items?
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, DomainError
from .items import ItemSet
from .valuations import MONEY_TOL, Valuation, mask_arrays

DP_LIMIT = 16
ENUM_LIMIT = 12
ENUM_CAP = 500_000


def _dp_tables(vals: Sequence[Valuation]) -> list[np.ndarray]:
    n = len(vals)
    m = vals[0].m
    size = 1 << m
    tables = [v.table() for v in vals]
    dp = [np.zeros(size) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        t = tables[i]
        nxt = dp[i + 1]
        cur = dp[i]
        for mask in range(size):
            best = nxt[mask]  # agent i takes nothing
            sub = mask
            while sub:
                cand = t[sub] + nxt[mask ^ sub]
                if cand > best:
                    best = cand
                sub = (sub - 1) & mask
            cur[mask] = best
    return dp


def optimal_allocation(vals: Sequence[Valuation]) -> tuple[tuple[ItemSet, ...], float]:
    """Exact maximum welfare and one optimal allocation.

    Ties during reconstruction resolve to the canonically smallest bundle
    (cardinality, then member tuple) agent by agent.  Items may stay
    unassigned; with monotone valuations this never costs welfare.
    """
    if not vals:
        raise DomainError("at least one agent required")
    m = vals[0].m
    if any(v.m != m for v in vals):
        raise DomainError("all valuations must share the ground set")
    if m > DP_LIMIT:
        raise CapacityError(f"exact allocator capped at m <= {DP_LIMIT}")
    dp = _dp_tables(vals)
    _, _, order = mask_arrays(m)  # order lists all masks canonically sorted
    allocation = []
    mask = (1 << m) - 1
    for i in range(len(vals)):
        t = vals[i].table()
        target = dp[i][mask]
        # canonical-order scan: first exact match is the canonical minimum
        sel = order[(order & ~mask) == 0]
        hits = np.flatnonzero(t[sel] + dp[i + 1][mask ^ sel] == target)
        if hits.size == 0:
            raise AssertionError("allocator reconstruction lost the optimum")
        pick = int(sel[hits[0]])
        allocation.append(ItemSet(m, pick))
        mask ^= pick
    return tuple(allocation), float(dp[0][(1 << m) - 1])


def social_welfare(vals: Sequence[Valuation], allocation: Sequence[ItemSet]) -> float:
    """Total value of a disjoint allocation."""
    if len(vals) != len(allocation):
        raise DomainError("one bundle per agent required")
    used = 0
    for s in allocation:
        if used & s.mask:
            raise DomainError("allocation blocks overlap")
        used |= s.mask
    total = 0.0
    for i in range(len(vals) - 1, -1, -1):
        total = vals[i].value(allocation[i]) + total
    return total


def brute_force_optimum(vals: Sequence[Valuation]) -> float:
    """Independent oracle: enumerate every assignment of each item to one
    agent or to nobody, folding values in the same order as the DP so the
    two maxima agree bit-for-bit."""
    n = len(vals)
    m = vals[0].m
    best = 0.0
    for code in range((n + 1) ** m):
        masks = [0] * n
        c = code
        for j in range(m):
            owner = c % (n + 1)
            if owner < n:
                masks[owner] |= 1 << j
            c //= n + 1
        total = 0.0
        for i in range(n - 1, -1, -1):
            total = vals[i].value_mask(masks[i]) + total
        if total > best:
            best = total
    return best


def enumerate_optimal_allocations(
    vals: Sequence[Valuation], tol: float = MONEY_TOL, cap: int = ENUM_CAP
) -> Iterator[tuple[ItemSet, ...]]:
    """Yield every allocation within tol of the optimum (DP-pruned DFS)."""
    m = vals[0].m
    if m > ENUM_LIMIT:
        raise CapacityError(f"optimal-allocation enumeration capped at m <= {ENUM_LIMIT}")
    dp = _dp_tables(vals)
    tables = [v.table() for v in vals]
    n = len(vals)
    count = 0

    def rec(i: int, mask: int, slack: float, prefix: list[int]) -> Iterator[tuple[ItemSet, ...]]:
        nonlocal count
        if i == n:
            count += 1
            if count > cap:
                raise CapacityError("too many optimal allocations to enumerate")
            yield tuple(ItemSet(m, mk) for mk in prefix)
            return
        t = tables[i]
        nxt = dp[i + 1]
        target = dp[i][mask]
        sub = mask
        while True:
            loss = target - (t[sub] + nxt[mask ^ sub])
            if loss <= slack:
                prefix.append(sub)
                yield from rec(i + 1, mask ^ sub, slack - max(loss, 0.0), prefix)
                prefix.pop()
            if sub == 0:
                break
            sub = (sub - 1) & mask

    yield from rec(0, (1 << m) - 1, tol, [])


@dataclass(frozen=True)
class LopsidedResult:
    ok: bool
    witness: tuple[ItemSet, ...] | None = None
    heavy_agents: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def lopsided_check(vals: Sequence[Valuation], z: float) -> LopsidedResult:
    """Does some optimal allocation earn at least half its welfare from
    agents holding at least z items?"""
    _, opt = optimal_allocation(vals)
    if opt <= MONEY_TOL:
        return LopsidedResult(False)
    for alloc in enumerate_optimal_allocations(vals):
        heavy = tuple(i for i, s in enumerate(alloc) if len(s) >= z)
        heavy_sw = 0.0
        for i in heavy:
            heavy_sw += vals[i].value(alloc[i])
        if heavy_sw >= 0.5 * opt - MONEY_TOL:
            return LopsidedResult(True, alloc, heavy)
    return LopsidedResult(False)
