"""Exact speed of the N-particle system for small N.

Modulo translation the chain lives on a finite set of count vectors. We
discover that set by breadth-first search from the class of N*delta_0, build
every transition row by enumerating the per-site Binomial(2k, p) up-moves, and
read v_N off the stationary mean of the one-step increment of the maximum.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .dynamics import diameter_bound, select_step
from .errors import CapacityError, InvariantViolation, NumericalError
from .population import ModelParams, Population

DEFAULT_MAX_N = 8
DEFAULT_MAX_STATES = 50_000


@dataclass
class QuotientChain:
    params: ModelParams
    states: list
    transition: np.ndarray = field(repr=False)
    drift: np.ndarray = field(repr=False)

    def index(self, cls_) -> int:
        return self.states.index(tuple(cls_))


def _binom_pmf(n: int, p: float) -> list:
    return [math.comb(n, u) * p**u * (1.0 - p) ** (n - u) for u in range(n + 1)]


def transition_row(cls_: tuple, params: ModelParams):
    """Exact one-step law from class ``cls_``.

    Returns ``({target_class: prob}, expected max increment)``; probabilities
    are accumulated with ``math.fsum`` per target.
    """
    p, N = params.p, params.N
    pmfs = [_binom_pmf(2 * k, p) for k in cls_]
    ranges = [range(2 * k + 1) for k in cls_]
    old_max = len(cls_) - 1
    parts: dict = {}
    drift_parts = []
    for ups in itertools.product(*ranges):
        w = 1.0
        for pmf, u in zip(pmfs, ups):
            w *= pmf[u]
        if w == 0.0:
            continue
        new = [0] * (len(cls_) + 1)
        for j, (k, u) in enumerate(zip(cls_, ups)):
            new[j] += 2 * k - u
            new[j + 1] += u
        child = select_step(Population(0, tuple(new)), N)
        parts.setdefault(child.counts, []).append(w)
        if child.max > old_max:
            drift_parts.append(w * (child.max - old_max))
    return {c: math.fsum(ws) for c, ws in parts.items()}, math.fsum(drift_parts)


def build_chain(params: ModelParams, max_n: int = DEFAULT_MAX_N,
                max_states: int = DEFAULT_MAX_STATES) -> QuotientChain:
    N = params.N
    if N > max_n:
        raise CapacityError(f"N={N} exceeds the exact-chain budget max_n={max_n}")
    bound = diameter_bound(N)
    start = (N,)
    index = {start: 0}
    states = [start]
    rows = []
    drift = []
    queue = deque([start])
    while queue:
        s = queue.popleft()
        row, d = transition_row(s, params)
        rows.append((index[s], row))
        drift.append((index[s], d))
        for t in row:
            if len(t) - 1 > bound:
                raise InvariantViolation(f"class {t} breaks the diameter bound {bound}")
            if t not in index:
                if len(states) >= max_states:
                    raise CapacityError(f"more than {max_states} reachable classes for N={N}")
                index[t] = len(states)
                states.append(t)
                queue.append(t)
    n = len(states)
    P = np.zeros((n, n))
    dr = np.zeros(n)
    for i, row in rows:
        for t, w in row.items():
            P[i, index[t]] = w
    for i, d in drift:
        dr[i] = d
    err = np.abs(P.sum(axis=1) - 1.0).max()
    if err > 1e-12:
        raise NumericalError(f"transition rows deviate from 1 by {err:.3e}")
    return QuotientChain(params, states, P, dr)


def _residual(pi, P):
    return float(np.abs(pi @ P - pi).max())


def stationary_distribution(chain: QuotientChain, tol: float = 1e-12) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1; power iteration if the dense solve is off."""
    P = chain.transition
    n = P.shape[0]
    ncomp, _ = connected_components(P > 0, directed=True, connection="strong")
    if ncomp != 1 or P[0, 0] <= 0.0:
        raise InvariantViolation("quotient chain is not irreducible and aperiodic")
    if n == 1:
        return np.ones(1)
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        pi = np.full(n, 1.0 / n)
    res = _residual(pi, P)
    if res > tol or (pi < -tol).any():
        pi = np.clip(pi, 0.0, None) if np.isfinite(pi).all() else np.full(n, 1.0 / n)
        pi /= pi.sum()
        for _ in range(100_000):
            pi = pi @ P
            res = _residual(pi, P)
            if res <= tol:
                break
        else:
            raise NumericalError(f"stationary solve did not converge, residual {res:.3e}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def exact_speed(params: ModelParams, **budget) -> float:
    chain = build_chain(params, **budget)
    return float(stationary_distribution(chain) @ chain.drift)


def chain_report(params: ModelParams, **budget) -> dict:
    chain = build_chain(params, **budget)
    pi = stationary_distribution(chain)
    return {
        "p": params.p,
        "N": params.N,
        "states": [list(s) for s in chain.states],
        "pi": pi.tolist(),
        "drift": chain.drift.tolist(),
        "residual": _residual(pi, chain.transition),
        "v_N": float(pi @ chain.drift),
    }
