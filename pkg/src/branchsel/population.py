"""Finite counting measures on Z and the translation quotient.

A population is stored densely: an integer ``offset`` (leftmost occupied site)
plus a tuple of per-site counts whose first and last entries are positive.
Windows stay short because the diameter of the N-particle chain never exceeds
``ceil(log2 N) + 1``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

INT64_MAX = np.iinfo(np.int64).max
INT64_MIN = np.iinfo(np.int64).min

CanonicalClass = tuple  # tuple[int, ...] of trimmed counts, offset dropped


def _check_position(x: int) -> int:
    x = int(x)
    if not INT64_MIN <= x <= INT64_MAX:
        raise OverflowError(f"position {x} does not fit in a signed 64-bit integer")
    return x


@dataclass(frozen=True)
class ModelParams:
    """Branching probability ``p`` and particle count ``N``.

    ``p`` is allowed on the closed interval so the degenerate drifts p=0 and
    p=1 can be simulated; the theory layer insists on 0 < p < 1 itself.
    """

    p: float
    N: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "p", float(self.p))


@dataclass(frozen=True)
class Population:
    offset: int
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise ValueError("a population needs at least one particle")
        if any(c < 0 for c in counts):
            raise ValueError(f"negative count in {counts}")
        lo = 0
        while lo < len(counts) and counts[lo] == 0:
            lo += 1
        if lo == len(counts):
            raise ValueError("a population needs at least one particle")
        hi = len(counts)
        while counts[hi - 1] == 0:
            hi -= 1
        offset = _check_position(int(self.offset) + lo)
        _check_position(offset + hi - lo - 1)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "counts", counts[lo:hi])

    @classmethod
    def from_mapping(cls, sites: Mapping[int, int]) -> "Population":
        occupied = {int(x): int(c) for x, c in sites.items() if c}
        if not occupied:
            raise ValueError("a population needs at least one particle")
        lo, hi = min(occupied), max(occupied)
        return cls(lo, tuple(occupied.get(x, 0) for x in range(lo, hi + 1)))

    @classmethod
    def from_positions(cls, positions: Iterable[int]) -> "Population":
        sites: dict[int, int] = {}
        for x in positions:
            sites[int(x)] = sites.get(int(x), 0) + 1
        return cls.from_mapping(sites)

    @property
    def mass(self) -> int:
        return sum(self.counts)

    @property
    def min(self) -> int:
        return self.offset

    @property
    def max(self) -> int:
        return self.offset + len(self.counts) - 1

    @property
    def diameter(self) -> int:
        return len(self.counts) - 1

    def count_at(self, x: int) -> int:
        i = x - self.offset
        return self.counts[i] if 0 <= i < len(self.counts) else 0

    def as_mapping(self) -> dict:
        return {self.offset + i: c for i, c in enumerate(self.counts) if c}

    def positions_desc(self) -> list:
        """Particle positions sorted from the rightmost down."""
        out = []
        for i in range(len(self.counts) - 1, -1, -1):
            out.extend([self.offset + i] * self.counts[i])
        return out

    def translate(self, k: int) -> "Population":
        return Population(self.offset + int(k), self.counts)

    def to_text(self) -> str:
        return f"{self.offset}:[{','.join(str(c) for c in self.counts)}]"

    @classmethod
    def from_text(cls, text: str) -> "Population":
        m = re.fullmatch(r"\s*(-?\d+)\s*:\s*\[([\d,\s]*)\]\s*", text)
        if m is None:
            raise ValueError(f"cannot parse population {text!r}; expected 'offset:[c0,c1,...]'")
        counts = [int(c) for c in m.group(2).split(",") if c.strip()]
        return cls(int(m.group(1)), tuple(counts))

    def __str__(self) -> str:
        return self.to_text()


def delta_population(N: int, x: int = 0) -> Population:
    """``N`` particles stacked on site ``x``."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    return Population(x, (int(N),))


def front_stats(pop: Population) -> tuple:
    """(min, max, diameter, mass) of a population."""
    return pop.min, pop.max, pop.diameter, pop.mass


def dominates(mu: Population, nu: Population) -> bool:
    """True iff ``mu`` is stochastically below ``nu``: mu([x, inf)) <= nu([x, inf)) for all x.

    Masses may differ; mass(mu) <= mass(nu) is then necessary.
    """
    lo = min(mu.min, nu.min)
    hi = max(mu.max, nu.max)
    tail_mu = tail_nu = 0
    for x in range(hi, lo - 1, -1):
        tail_mu += mu.count_at(x)
        tail_nu += nu.count_at(x)
        if tail_mu > tail_nu:
            return False
    return True


def canonicalize(pop: Population) -> CanonicalClass:
    return pop.counts


def from_class(cls_: Sequence[int], offset: int = 0) -> Population:
    return Population(offset, tuple(cls_))
