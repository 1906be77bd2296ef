"""Deterministic auction mechanics.

Single-bid auction: agents are visited in decreasing bid order and each
buys a utility-maximizing bundle of the remaining items at a per-item
price equal to her own bid.  Grand-bundle auction: the whole item set is
offered at each agent's own bid in decreasing bid order until someone
accepts (an agent declines when the bid exceeds her value, in which case
the offer passes on).  The hybrid mechanism collects separate bids for
both formats and plays the single-bid branch with probability p.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .items import ItemSet
from .valuations import MONEY_TOL, Valuation, demand_select


@dataclass(frozen=True)
class TieRule:
    """Deterministic tie handling.

    agent_order is a permutation of agent indices; among equal bids the
    agent appearing earlier is served first (default: ascending index).
    Bundle ties inside demand queries always prefer smaller bundles, so
    an agent facing only zero-utility purchases buys nothing.
    """

    agent_order: tuple[int, ...] | None = None

    def positions(self, n: int) -> list[int]:
        if self.agent_order is None:
            return list(range(n))
        if sorted(self.agent_order) != list(range(n)):
            raise DomainError("agent_order must be a permutation of 0..n-1")
        pos = [0] * n
        for rank, agent in enumerate(self.agent_order):
            pos[agent] = rank
        return pos


DEFAULT_TIE = TieRule()


def visit_order(bids: Sequence[float], tie: TieRule | None = None) -> list[int]:
    """Agents in decreasing bid order, ties resolved by the tie rule."""
    tie = tie or DEFAULT_TIE
    pos = tie.positions(len(bids))
    return sorted(range(len(bids)), key=lambda i: (-bids[i], pos[i]))


def _check_bids(vals: Sequence[Valuation], bids: Sequence[float]) -> None:
    if len(vals) != len(bids):
        raise PreconditionError("one bid per agent required")
    for b in bids:
        if b < 0:
            raise PreconditionError(f"bids must be nonnegative, got {b}")


@dataclass(frozen=True)
class Outcome:
    allocation: tuple[ItemSet, ...]
    payments: tuple[float, ...]
    item_prices: tuple[float, ...]
    social_welfare: float

    def utilities(self, vals: Sequence[Valuation]) -> tuple[float, ...]:
        return tuple(v.value(s) - p for v, s, p in zip(vals, self.allocation, self.payments))

    def to_dict(self) -> dict:
        return {
            "alloc": [list(s) for s in self.allocation],
            "pay": list(self.payments),
            "prices": list(self.item_prices),
            "sw": self.social_welfare,
        }


def run_single_bid(
    vals: Sequence[Valuation], bids: Sequence[float], tie: TieRule | None = None
) -> Outcome:
    _check_bids(vals, bids)
    m = vals[0].m
    remaining = ItemSet.full(m)
    allocation = [ItemSet.empty(m)] * len(vals)
    payments = [0.0] * len(vals)
    prices = [0.0] * m
    for i in visit_order(bids, tie):
        taken = demand_select(vals[i], remaining, bids[i])
        allocation[i] = taken
        payments[i] = bids[i] * len(taken)
        for j in taken:
            prices[j] = bids[i]
        remaining = remaining - taken
    sw = sum(v.value(s) for v, s in zip(vals, allocation))
    return Outcome(tuple(allocation), tuple(payments), tuple(prices), sw)


def run_grand_bundle(
    vals: Sequence[Valuation], bids: Sequence[float], tie: TieRule | None = None
) -> Outcome:
    _check_bids(vals, bids)
    m = vals[0].m
    allocation = [ItemSet.empty(m)] * len(vals)
    payments = [0.0] * len(vals)
    prices = [0.0] * m
    sw = 0.0
    for i in visit_order(bids, tie):
        if vals[i].vmax() >= bids[i] - MONEY_TOL:
            allocation[i] = ItemSet.full(m)
            payments[i] = bids[i]
            prices = [bids[i]] * m
            sw = vals[i].vmax()
            break
    return Outcome(tuple(allocation), tuple(payments), tuple(prices), sw)


def item_prices(outcome: Outcome) -> tuple[float, ...]:
    """Per-item prices induced by an outcome: the holder's bid, 0 if unsold."""
    return outcome.item_prices


@dataclass(frozen=True)
class HybridOutcome:
    single_bid: Outcome
    grand_bundle: Outcome
    p: float
    realized_branch: str | None = None

    @property
    def expected_sw(self) -> float:
        return self.p * self.single_bid.social_welfare + (1 - self.p) * self.grand_bundle.social_welfare

    def expected_payments(self) -> tuple[float, ...]:
        return tuple(
            self.p * a + (1 - self.p) * b
            for a, b in zip(self.single_bid.payments, self.grand_bundle.payments)
        )

    def expected_utilities(self, vals: Sequence[Valuation]) -> tuple[float, ...]:
        usb = self.single_bid.utilities(vals)
        ugb = self.grand_bundle.utilities(vals)
        return tuple(self.p * a + (1 - self.p) * b for a, b in zip(usb, ugb))

    @property
    def realized(self) -> Outcome | None:
        if self.realized_branch == "sb":
            return self.single_bid
        if self.realized_branch == "gb":
            return self.grand_bundle
        return None


def run_hybrid(
    vals: Sequence[Valuation],
    sb_bids: Sequence[float],
    gb_bids: Sequence[float],
    p: float,
    coin: str | np.random.Generator | None = None,
    tie: TieRule | None = None,
) -> HybridOutcome:
    """Run both branches deterministically; expectations are exact.

    coin may force a branch ("sb" / "gb") or supply a generator for a
    sampled realization; with coin=None no branch is realized.
    """
    if not 0 < p < 1:
        raise PreconditionError(f"branch probability must lie in (0, 1), got {p}")
    sb = run_single_bid(vals, sb_bids, tie)
    gb = run_grand_bundle(vals, gb_bids, tie)
    branch: str | None
    if coin is None:
        branch = None
    elif isinstance(coin, str):
        if coin not in ("sb", "gb"):
            raise DomainError(f"forced branch must be 'sb' or 'gb', got {coin!r}")
        branch = coin
    else:
        branch = "sb" if coin.random() < p else "gb"
    return HybridOutcome(sb, gb, p, branch)
