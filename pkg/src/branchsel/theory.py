"""Closed-form constants: the Bernoulli rate function, the critical speed and
the quantities derived from it."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.optimize import bisect

LOG2 = math.log(2.0)
REGIMES = ("subcritical", "critical", "supercritical")


def _xlogy_ratio(x: float, y: float) -> float:
    # x * log(x / y) with the 0 log 0 = 0 convention
    return 0.0 if x == 0.0 else x * math.log(x / y)


def _check_p(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return float(p)


def rate_function(x: float, p: float) -> float:
    """Cramer rate x log(x/p) + (1-x) log((1-x)/(1-p)) of Bernoulli(p) sums."""
    _check_p(p)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    return _xlogy_ratio(x, p) + _xlogy_ratio(1.0 - x, 1.0 - p)


def critical_speed(p: float) -> float:
    """Root of rate_function(x, p) = log 2 on (p, 1) for p < 1/2, and 1 otherwise."""
    _check_p(p)
    if p >= 0.5:
        return 1.0
    # bisect to machine precision: downstream identities compound the root error over m steps
    return bisect(lambda x: rate_function(x, p) - LOG2, p + 1e-15, 1.0 - 1e-15,
                  xtol=1e-16, rtol=4 * 2.220446049250313e-16, maxiter=200)


@dataclass(frozen=True)
class TheoryConstants:
    p: float
    v: float
    q: int | None
    gamma: float | None
    log2: float = LOG2

    def to_dict(self):
        return asdict(self)


def derived_constants(p: float) -> TheoryConstants:
    """v(p), q = ceil(v/(1-v)) and gamma = (p/(1-p)) / (v/(1-v)) for p < 1/2."""
    _check_p(p)
    if p >= 0.5:
        raise ValueError(f"q and gamma need p < 1/2 (v(p) = 1 otherwise), got {p}")
    v = critical_speed(p)
    q = math.ceil(v / (1.0 - v))
    gamma = (p * (1.0 - v)) / (v * (1.0 - p))
    return TheoryConstants(p=p, v=v, q=q, gamma=gamma)


def theory_constants(p: float) -> TheoryConstants:
    """Like :func:`derived_constants` but defined on all of (0, 1); q and gamma are None when v = 1."""
    _check_p(p)
    if p >= 0.5:
        return TheoryConstants(p=p, v=1.0, q=None, gamma=None)
    return derived_constants(p)


def gap_model(regime: str, N: float) -> float:
    """Unit-constant scale of v_inf - v_N: log(N)^-2, 1/N or exp(-N)."""
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if regime == "subcritical":
        return math.log(N) ** -2
    if regime == "critical":
        return 1.0 / N
    if regime == "supercritical":
        return math.exp(-N)
    raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def regime_of(p: float) -> str:
    _check_p(p)
    if p < 0.5:
        return "subcritical"
    return "critical" if p == 0.5 else "supercritical"
