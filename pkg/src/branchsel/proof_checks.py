"""Executable surrogates for the upper-bound and p >= 1/2 arguments.

* good vertices along a single descending path and the red/blue segmentation
  that lower-bounds how many of them a high path must contain;
* the truncated front-count chain V, its untruncated martingale version Z
  and the hitting time U;
* critical Galton-Watson survival with Binomial(2, 1/2) offspring;
* an empirical decay exponent for the probability that the root of a
  branching random walk is good.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dynamics import advance, child_seed, make_rng
from .errors import InvariantViolation
from .population import ModelParams, delta_population
from .theory import critical_speed


@dataclass(frozen=True)
class ValuedPath:
    values: tuple

    def __post_init__(self):
        vals = tuple(int(z) for z in self.values)
        if not vals or vals[0] != 0:
            raise ValueError("a valued path starts at Z(x_0) = 0")
        if any(b - a not in (0, 1) for a, b in zip(vals, vals[1:])):
            raise ValueError("path increments must be 0 or 1")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.values) - 1

    @classmethod
    def from_steps(cls, steps) -> "ValuedPath":
        return cls((0, *np.cumsum(np.asarray(steps, dtype=np.int64)).tolist()))


def is_good_vertex(path: ValuedPath, start: int, m: int, v: float) -> bool:
    """Z(u_i) - Z(u_0) >= v i for i = 0..m along the path from ``start``."""
    if start < 0 or start + m > path.n:
        raise ValueError(f"window [{start}, {start + m}] overruns a path of length {path.n}")
    z = path.values
    return all(z[start + i] - z[start] >= v * i for i in range(m + 1))


@dataclass(frozen=True)
class Coloring:
    red_count: int
    good_count: int
    colors: tuple  # 'r' / 'b' for x_0 .. x_{n-1}
    good_starts: tuple


def count_good_by_coloring(path: ValuedPath, m: int, v1: float) -> Coloring:
    """Segment the path with the stopping times tau_i and color the segments.

    From tau, scan forward until the path first falls below the v1-line
    through Z(x_tau), or m steps pass, or the path ends. A segment of full
    length m that never fell below is red and starts at an (m, v1)-good vertex;
    everything else is blue.
    """
    n, z = path.n, path.values
    if n < m:
        raise ValueError(f"path length {n} is shorter than m={m}")
    colors = []
    starts = []
    tau = 0
    while tau < n:
        j = tau + 1
        while True:
            fell = z[j] - z[tau] < v1 * (j - tau)
            if fell or j == tau + m or j == n:
                break
            j += 1
        red = not fell and j == tau + m
        colors.extend("r" * (j - tau) if red else "b" * (j - tau))
        if red:
            starts.append(tau)
        tau = j
    return Coloring(colors.count("r"), len(starts), tuple(colors), tuple(starts))


def good_vertex_lower_bound(n: int, m: int, v1: float, v2: float) -> float:
    """Minimum number of (m, v1)-good vertices on a depth-n path ending at or above v2 n."""
    return (v2 - v1) / (1 - v1) * n / m - 1 / (1 - v1)


def sample_conditioned_paths(n: int, p: float, v2: float, count: int,
                             rng: np.random.Generator, batch: int = 4096) -> list:
    """Bernoulli(p)-step paths of length n conditioned on Z(x_n) >= v2 n, by rejection."""
    out = []
    while len(out) < count:
        steps = (rng.random((batch, n)) < p).astype(np.int64)
        keep = steps.sum(axis=1) >= v2 * n
        for row in steps[keep]:
            out.append(ValuedPath.from_steps(row))
            if len(out) == count:
                break
    return out


def front_count_step(V: int, N: int, rng: np.random.Generator) -> int:
    """min(N, Binomial(2V, 1/2))."""
    if not 0 <= V <= N:
        raise ValueError(f"V={V} must lie in [0, N={N}]")
    return min(N, int(rng.binomial(2 * V, 0.5))) if V else 0


@dataclass(frozen=True)
class FrontCountChain:
    N: int
    values: tuple

    def __post_init__(self):
        vals = tuple(int(x) for x in self.values)
        for a, b in zip(vals, vals[1:]):
            if not 0 <= b <= min(self.N, 2 * a):
                raise ValueError(f"transition {a} -> {b} impossible for N={self.N}")
        object.__setattr__(self, "values", vals)


def front_count_chain(V0: int, N: int, k: int, rng: np.random.Generator) -> FrontCountChain:
    vals = [V0]
    for _ in range(k):
        vals.append(front_count_step(vals[-1], N, rng))
    return FrontCountChain(N, tuple(vals))


def martingale_step(Z: int, rng: np.random.Generator) -> int:
    """Untruncated version: Binomial(2Z, 1/2)."""
    return int(rng.binomial(2 * Z, 0.5)) if Z else 0


def hitting_time_U(N: int, m: int, rng: np.random.Generator) -> int:
    """First k in [1, m] with V_k <= 2N/3 for V started at N; m if there is none."""
    if m < 1:
        raise ValueError("m must be positive")
    V = N
    for k in range(1, m + 1):
        V = front_count_step(V, N, rng)
        if 3 * V <= 2 * N:
            return k
    return m


def hitting_time_stay_probability(N: int, eps: float, trials: int, seed: int) -> dict:
    """Monte Carlo P(U = m) with m = floor(eps N)."""
    m = math.floor(eps * N)
    if m < 1:
        raise ValueError(f"eps * N = {eps * N} gives an empty horizon")
    rng = make_rng(seed)
    hits = sum(hitting_time_U(N, m, rng) == m for _ in range(trials))
    return _proportion(hits, trials) | {"N": N, "m": m}


def _proportion(hits: int, trials: int) -> dict:
    est = hits / trials
    ci = stats.binomtest(int(hits), int(trials)).proportion_ci(confidence_level=0.95)
    return {"estimate": est, "sigma": math.sqrt(est * (1 - est) / trials),
            "ci_low": ci.low, "ci_high": ci.high, "hits": int(hits), "trials": int(trials)}


def gw_survival(m: int, trials: int, rng: np.random.Generator) -> dict:
    """Fraction of Binomial(2, 1/2) Galton-Watson trees alive at generation m."""
    if m < 1 or trials < 1:
        raise ValueError("m and trials must be positive")
    z = np.ones(trials, dtype=np.int64)
    for _ in range(m):
        z = rng.binomial(2 * z, 0.5)
        z = z[z > 0]
        if z.size == 0:
            break
    return _proportion(z.size, trials) | {"m": m}


def top_site_occupied_probability(N: int, m: int, trials: int, seed: int) -> dict:
    """P(X^N_m(m) >= 1) at p = 1/2: some particle moved up at every step."""
    params = ModelParams(0.5, N)
    hits = 0
    for t in range(trials):
        pop, _, _ = advance(delta_population(N), params, m, make_rng(child_seed(seed, t)))
        hits += pop.max == m
    return _proportion(hits, trials) | {"N": N, "m": m}


def good_root_probability(p: float, m: int, trials: int, seed: int,
                          slope: float | None = None, chunk: int = 20_000) -> dict:
    """P(the root of a binary Bernoulli(p) branching random walk is (m, slope)-good).

    ``slope`` defaults to v(p) - m**(-2/3). Each trial runs the tree killed
    below the slope line, in counting form, and records survival to depth m.
    Heights are kept in a window starting at the current kill line.
    """
    if slope is None:
        slope = critical_speed(p) - m ** (-2.0 / 3.0)
    rng = make_rng(seed)
    width = math.floor((1.0 - slope) * m) + 3
    hits = 0
    for first in range(0, trials, chunk):
        n = min(chunk, trials - first)
        alive = np.zeros((n, width), dtype=np.int64)
        alive[:, 0] = 1
        base = 0  # height of column 0
        for i in range(1, m + 1):
            u = rng.binomial(2 * alive, p)
            nxt = np.zeros((alive.shape[0], width + 1), dtype=np.int64)
            nxt[:, :width] += 2 * alive - u
            nxt[:, 1:] += u
            shift = math.ceil(slope * i) - base
            if shift > 0:
                nxt = nxt[:, shift:]
                base += shift
            if nxt.shape[1] > width:
                if nxt[:, width:].any():
                    raise InvariantViolation("good-root window too narrow")
                nxt = nxt[:, :width]
            elif nxt.shape[1] < width:
                nxt = np.pad(nxt, ((0, 0), (0, width - nxt.shape[1])))
            alive = nxt[nxt.any(axis=1)]
            if alive.shape[0] == 0:
                break
        hits += alive.shape[0]
    return _proportion(hits, trials) | {"m": m, "slope": slope}


@dataclass(frozen=True)
class DecayFit:
    kappa: float
    kappa_se: float
    intercept: float
    ms: tuple
    probabilities: tuple

    @property
    def ci(self):
        return self.kappa - 1.96 * self.kappa_se, self.kappa + 1.96 * self.kappa_se


def fit_good_decay(p: float, ms=(125, 216, 343), trials=(200_000, 400_000, 1_000_000),
                   seed: int = 0) -> DecayFit:
    """Weighted fit of log P(root good) = c - kappa m**(1/3).

    ``trials`` is one count for every m or a sequence matched to ``ms``.
    """
    if np.ndim(trials) == 0:
        trials = [int(trials)] * len(ms)
    if len(trials) != len(ms):
        raise ValueError("trials and ms differ in length")
    xs, ys, ws, ps = [], [], [], []
    for k, (m, T) in enumerate(zip(ms, trials)):
        r = good_root_probability(p, m, T, child_seed(seed, k))
        if r["hits"] == 0:
            raise ValueError(f"no good roots in {T} trials at m={m}; raise trials")
        P = r["estimate"]
        xs.append(m ** (1.0 / 3.0))
        ys.append(math.log(P))
        ws.append(T * P / (1.0 - P))  # inverse delta-method variance of log P
        ps.append(P)
    x, y, w = map(np.asarray, (xs, ys, ws))
    xm = (w * x).sum() / w.sum()
    ym = (w * y).sum() / w.sum()
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    return DecayFit(float(-slope), float(math.sqrt(1.0 / sxx)), float(ym - slope * xm),
                    tuple(ms), tuple(ps))


def brute_force_good_count(path: ValuedPath, m: int, v: float) -> int:
    return sum(is_good_vertex(path, s, m, v) for s in range(path.n - m + 1))


def good_vertex_check(n: int = 200, m: int = 20, p: float = 0.5, v1: float = 0.3,
                  v2: float | None = None, count: int = 1000, seed: int = 0) -> dict:
    """Coloring count against the good-vertex lower bound on conditioned paths."""
    if v2 is None:
        v2 = p + 2.0 * math.sqrt(p * (1.0 - p) / n)
    bound = good_vertex_lower_bound(n, m, v1, v2)
    paths = sample_conditioned_paths(n, p, v2, count, make_rng(seed))
    below = witness_over = 0
    worst = math.inf
    for path in paths:
        col = count_good_by_coloring(path, m, v1)
        worst = min(worst, col.good_count)
        below += col.good_count < bound
        witness_over += col.good_count > brute_force_good_count(path, m, v1)
    return {"passed": below == 0 and witness_over == 0, "bound": bound, "min_good_count": worst,
            "violations": below, "coloring_exceeds_brute_force": witness_over,
            "n": n, "m": m, "p": p, "v1": v1, "v2": v2, "count": count, "seed": seed}


def monotone_path_check(count: int = 1000, seed: int = 0) -> dict:
    from .admissible import monotone_path, path_ok, sample_path_instance

    rng = make_rng(seed)
    failures = []
    for _ in range(count):
        rho, sigma, v, ell, x, y = inst = sample_path_instance(rng)
        try:
            path = monotone_path(*inst)
            ok = len(path) == ell + 1 and path_ok(path, rho, sigma, v, x, y)
        except InvariantViolation:
            ok = False
        if not ok:
            failures.append(list(inst))
    return {"passed": not failures, "count": count, "failures": failures[:5], "seed": seed}


def gw_check(m: int = 1000, trials: int = 1_000_000, seed: int = 0,
             band=(3.2, 4.8)) -> dict:
    r = gw_survival(m, trials, make_rng(seed))
    scaled = m * r["estimate"]
    return {"passed": band[0] <= scaled <= band[1], "m_times_p": scaled, "band": list(band),
            **r, "seed": seed}


def hitting_check(Ns=(64, 128, 256), eps: float = 1 / 16, trials: int = 2000, seed: int = 0,
                  floor: float = 0.05) -> dict:
    rows = [hitting_time_stay_probability(N, eps, trials, child_seed(seed, k))
            for k, N in enumerate(Ns)]
    return {"passed": all(r["estimate"] >= floor for r in rows), "floor": floor, "eps": eps,
            "rows": rows, "seed": seed}


def good_decay_check(p: float = 0.25, seed: int = 0, **kw) -> dict:
    fit = fit_good_decay(p, seed=seed, **kw)
    lo, hi = fit.ci
    return {"passed": fit.kappa > 0 and lo > 0, "kappa": fit.kappa, "kappa_se": fit.kappa_se,
            "ci": [lo, hi], "ms": list(fit.ms), "probabilities": list(fit.probabilities),
            "p": p, "seed": seed}


SUITES = {
    "good_vertices": good_vertex_check,
    "monotone_path": monotone_path_check,
    "gw": gw_check,
    "hitting": hitting_check,
    "good_decay": good_decay_check,
}


def run_suites(names=None, seed: int = 0) -> dict:
    names = list(SUITES) if names is None else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}")
    return {n: SUITES[n](seed=child_seed(seed, k)) for k, n in enumerate(names)}
