"""Immutable bit-vector subsets of a ground set of m goods.

Items are indices 0..m-1.  Python integers give arbitrary width, so the
same representation covers every instance size used here (m up to a few
hundred) without a multi-word variant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import DomainError


@dataclass(frozen=True)
class ItemSet:
    """A subset of goods 0..m-1 stored as a bit mask."""

    m: int
    mask: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "mask", int(self.mask))
        if self.m < 0:
            raise DomainError(f"ground-set size must be nonnegative, got {self.m}")
        if self.mask < 0 or self.mask >> self.m:
            raise DomainError(f"mask {self.mask:#x} has items outside 0..{self.m - 1}")

    @classmethod
    def of(cls, m: int, items: Iterable[int]) -> "ItemSet":
        mask = 0
        for j in items:
            j = int(j)
            if not 0 <= j < m:
                raise DomainError(f"item {j} outside 0..{m - 1}")
            mask |= 1 << j
        return cls(m, mask)

    @classmethod
    def empty(cls, m: int) -> "ItemSet":
        return cls(m, 0)

    @classmethod
    def full(cls, m: int) -> "ItemSet":
        return cls(m, (1 << m) - 1)

    def _check(self, other: "ItemSet") -> None:
        if self.m != other.m:
            raise DomainError(f"mixed ground sets: m={self.m} vs m={other.m}")

    def __or__(self, other: "ItemSet") -> "ItemSet":
        self._check(other)
        return ItemSet(self.m, self.mask | other.mask)

    def __and__(self, other: "ItemSet") -> "ItemSet":
        self._check(other)
        return ItemSet(self.m, self.mask & other.mask)

    def __sub__(self, other: "ItemSet") -> "ItemSet":
        self._check(other)
        return ItemSet(self.m, self.mask & ~other.mask)

    def __le__(self, other: "ItemSet") -> bool:
        self._check(other)
        return self.mask & ~other.mask == 0

    def __contains__(self, j: int) -> bool:
        return 0 <= j < self.m and bool(self.mask >> j & 1)

    def __iter__(self) -> Iterator[int]:
        mask = self.mask
        while mask:
            low = mask & -mask
            yield low.bit_length() - 1
            mask ^= low

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def add(self, j: int) -> "ItemSet":
        if not 0 <= j < self.m:
            raise DomainError(f"item {j} outside 0..{self.m - 1}")
        return ItemSet(self.m, self.mask | 1 << j)

    def remove(self, j: int) -> "ItemSet":
        return ItemSet(self.m, self.mask & ~(1 << j))

    def indices(self) -> tuple[int, ...]:
        return tuple(self)

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        """Canonical order: cardinality first, then member tuple."""
        return (len(self), self.indices())

    def __repr__(self) -> str:
        return f"ItemSet(m={self.m}, {{{', '.join(map(str, self))}}})"
