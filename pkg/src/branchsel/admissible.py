"""Barrier-confined random-walk measures that certify a lower bound on v_N.

``nu_i(x) = 2**i * P(g(k) <= S_k <= d(k) for k <= i, S_i = x)`` for the
Bernoulli(p) walk S. The measures are built by a forward recursion, cross
checked against the same quantity written under the walk tilted to drift
v(p), and then tested for the five admissibility properties that feed the
binomial-deviation bound on P(B) and the run-decomposition lower bound on v_N.

Measures are stored as natural logs (``-inf`` off the support) so the same
code serves the linear recursion and its log-domain fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dynamics import advance, child_seed, make_rng
from .errors import InvariantViolation
from .population import ModelParams, delta_population
from .theory import derived_constants

_TINY = np.finfo(float).tiny
_REL_TOL = 1e-12


def icbrt(n: int) -> int:
    """floor(n ** (1/3)) computed on integers."""
    r = round(n ** (1.0 / 3.0))
    while r**3 > n:
        r -= 1
    while (r + 1) ** 3 <= n:
        r += 1
    return r


@dataclass(frozen=True)
class BarrierSpec:
    p: float
    v: float
    m: int
    A: int

    def __post_init__(self):
        if self.A < 4 or int(self.A) != self.A:
            raise ValueError(f"A must be an integer >= 4, got {self.A}")
        if self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")

    @property
    def a_m(self) -> int:
        return icbrt(self.m)

    @property
    def c_m(self) -> int:
        return icbrt(self.m * self.m)

    @property
    def s_m(self) -> int:
        return math.floor(self.a_m / (2.0 * (1.0 - self.v)))

    def upper(self, k: int) -> float:
        return float(k) if k <= self.s_m else self.v * k + self.a_m

    def lower(self, k: int) -> float:
        if k <= self.s_m:
            return float(k)
        if k <= self.m - self.c_m:
            return self.v * (k + 1)
        return self.v * k - self.A * self.a_m

    def window(self, i: int) -> tuple:
        """Integer sites allowed at step i: [ceil(lower), floor(upper)]."""
        if i == 0:
            return 0, 0
        return math.ceil(self.lower(i)), math.floor(self.upper(i))


def _forward(spec: BarrierSpec, up: float, stay: float, log_domain: bool) -> np.ndarray:
    """Barrier-restricted forward recursion; returns an (m+1, m+1) matrix of logs."""
    m = spec.m
    out = np.full((m + 1, m + 1), -np.inf)
    out[0, 0] = 0.0
    lu, ls = math.log(up), math.log(stay)
    prev = np.zeros(m + 1)
    prev[0] = 1.0
    for i in range(1, m + 1):
        lo, hi = spec.window(i)
        lo, hi = max(lo, 0), min(hi, i)
        if lo > hi:
            raise ValueError(f"infeasible barriers at step {i}: empty window")
        if log_domain:
            row = np.full(m + 1, -np.inf)
            src = out[i - 1]
            row[1:] = np.logaddexp(src[:-1] + lu, src[1:] + ls)
            row[0] = src[0] + ls
            row[:lo] = -np.inf
            row[hi + 1:] = -np.inf
            out[i] = row
            if not np.isfinite(row).any():
                raise ValueError(f"infeasible barriers at step {i}: no mass in window")
        else:
            row = np.zeros(m + 1)
            row[1:] = up * prev[:-1] + stay * prev[1:]
            row[0] = stay * prev[0]
            row[:lo] = 0.0
            row[hi + 1:] = 0.0
            if not row.any():
                raise ValueError(f"infeasible barriers at step {i}: no mass in window")
            with np.errstate(divide="ignore"):
                out[i] = np.log(row)
            prev = row
    return out


def _reachable(spec: BarrierSpec) -> np.ndarray:
    m = spec.m
    reach = np.zeros((m + 1, m + 1), dtype=bool)
    reach[0, 0] = True
    for i in range(1, m + 1):
        lo, hi = spec.window(i)
        row = np.zeros(m + 1, dtype=bool)
        row[1:] = reach[i - 1, :-1] | reach[i - 1, 1:]
        row[0] = reach[i - 1, 0]
        row[:max(lo, 0)] = False
        row[max(hi + 1, 0):] = False
        reach[i] = row
    return reach


def _measure_logs(spec: BarrierSpec, force_log: bool = False):
    p = spec.p
    if not force_log:
        logs = _forward(spec, 2 * p, 2 * (1 - p), log_domain=False)
        reach = _reachable(spec)
        vals = np.exp(logs[reach])
        if (vals >= _TINY).all():
            return logs, False
    return _forward(spec, 2 * p, 2 * (1 - p), log_domain=True), True


@dataclass
class AdmissibleSequence:
    spec: BarrierSpec
    q: int
    gamma: float
    beta: float
    log_nu: np.ndarray = field(repr=False)
    log_domain: bool = False

    @property
    def p(self):
        return self.spec.p

    @property
    def v(self):
        return self.spec.v

    @property
    def m(self):
        return self.spec.m

    def nu(self, i: int) -> tuple:
        """(offset, values) of the i-th measure restricted to its support hull."""
        row = self.log_nu[i]
        idx = np.flatnonzero(np.isfinite(row))
        return int(idx[0]), np.exp(row[idx[0]:idx[-1] + 1])

    def support(self, i: int) -> np.ndarray:
        return np.flatnonzero(np.isfinite(self.log_nu[i]))

    def mass(self, i: int) -> float:
        row = self.log_nu[i]
        fin = row[np.isfinite(row)]
        return float(np.exp(np.logaddexp.reduce(fin)))

    @property
    def log_epsilon(self) -> float:
        body = self.log_nu[: self.m]
        return float(body[np.isfinite(body)].min())

    @property
    def epsilon(self) -> float:
        return math.exp(self.log_epsilon)

    @property
    def alpha(self) -> float:
        return 2.0 * self.spec.A * self.m ** (-2.0 / 3.0)

    @property
    def K(self) -> int:
        return int(np.isfinite(self.log_nu[: self.m]).sum())

    @property
    def delta(self) -> float:
        return delta_for(self.beta, self.m)

    @property
    def chi_hat(self) -> float:
        """-log(epsilon) / m**(1/3)."""
        return -self.log_epsilon / self.m ** (1.0 / 3.0)


def delta_for(beta: float, m: int) -> float:
    return -math.expm1(-math.log(beta) / m)


def build_sequence(p: float, m: int, A: int, beta: float = 2.0,
                   force_log: bool = False) -> AdmissibleSequence:
    tc = derived_constants(p)
    spec = BarrierSpec(p, tc.v, int(m), int(A))
    if m < tc.q:
        raise ValueError(f"m={m} must be at least q={tc.q}")
    if spec.s_m < 1:
        raise ValueError(f"s_m={spec.s_m} must be at least 1 (m={m} too small)")
    if beta <= 1:
        raise ValueError(f"beta must exceed 1, got {beta}")
    logs, used_log = _measure_logs(spec, force_log=force_log)
    return AdmissibleSequence(spec, tc.q, tc.gamma, float(beta), logs, used_log)


def tilted_log_measures(seq: AdmissibleSequence) -> np.ndarray:
    """log of E_hat[gamma**(S_i - v i) 1{barriers, S_i = x}] under the v-drift walk."""
    v, m = seq.v, seq.m
    hat = _forward(seq.spec, v, 1.0 - v, log_domain=True)
    i = np.arange(m + 1)[:, None]
    x = np.arange(m + 1)[None, :]
    return hat + (x - v * i) * math.log(seq.gamma)


def tilted_cross_check(seq: AdmissibleSequence) -> float:
    """Max relative difference between the direct and the tilted recursions."""
    tilt = tilted_log_measures(seq)
    direct = seq.log_nu
    fin_d, fin_t = np.isfinite(direct), np.isfinite(tilt)
    if (fin_d != fin_t).any():
        return math.inf
    return float(np.abs(np.expm1(tilt[fin_d] - direct[fin_d])).max())


def descent_check(seq: AdmissibleSequence) -> tuple:
    """(nu_m(Z) * gamma**((A/2) a_m), P_hat(barriers, S_hat_m <= -(A/2) a_m)).

    The first must dominate the second; this is the mechanism behind
    property (v).
    """
    v, m, a = seq.v, seq.m, seq.spec.a_m
    shift = seq.spec.A / 2.0 * a
    hat = _forward(seq.spec, v, 1.0 - v, log_domain=True)[m]
    x = np.arange(m + 1)
    sel = np.isfinite(hat) & (x - v * m <= -shift)
    rhs = float(np.exp(np.logaddexp.reduce(hat[sel]))) if sel.any() else 0.0
    lhs = seq.mass(m) * seq.gamma ** shift
    return lhs, rhs


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: dict


@dataclass
class AdmissibilityReport:
    properties: dict
    epsilon: float
    alpha: float
    beta: float

    @property
    def admissible(self) -> bool:
        return all(r.passed for r in self.properties.values())

    def to_dict(self):
        return {
            "admissible": self.admissible,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "beta": self.beta,
            "properties": {k: {"pass": r.passed, **r.detail} for k, r in self.properties.items()},
        }


def branch_image_logs(log_row: np.ndarray, p: float) -> np.ndarray:
    """log of 2 * (nu convolved with p delta_1 + (1-p) delta_0)."""
    out = np.full_like(log_row, -np.inf)
    out[1:] = np.logaddexp(log_row[:-1] + math.log(2 * p), log_row[1:] + math.log(2 * (1 - p)))
    out[0] = log_row[0] + math.log(2 * (1 - p))
    return out


def check_admissibility(seq: AdmissibleSequence, beta: float | None = None) -> AdmissibilityReport:
    beta = seq.beta if beta is None else float(beta)
    p, v, m, q = seq.p, seq.v, seq.m, seq.q
    alpha = seq.alpha
    props = {}

    # (i) pinned start
    bad = None
    for i in range(0, min(q, m) + 1):
        sup = seq.support(i)
        ok = list(sup) == [i] and abs(math.exp(seq.log_nu[i, i] - i * math.log(2 * p)) - 1) <= _REL_TOL
        if not ok:
            bad = {"i": i, "support": sup.tolist()}
            break
    props["i"] = PropertyResult("pinned start", bad is None, {"first_violation": bad})

    # (ii) below the branching image
    bad = None
    for i in range(q + 1, m + 1):
        img = branch_image_logs(seq.log_nu[i - 1], p)
        row = seq.log_nu[i]
        over = np.flatnonzero(np.isfinite(row) & (row > img + _REL_TOL))
        if over.size:
            bad = {"i": i, "x": int(over[0])}
            break
    props["ii"] = PropertyResult("dominated by branching image", bad is None, {"first_violation": bad})

    # (iii) minimum positive mass
    eps = seq.epsilon
    props["iii"] = PropertyResult("mass floor", eps > 0 or math.isfinite(seq.log_epsilon),
                                  {"epsilon": eps, "log_epsilon": seq.log_epsilon})

    # (iv) supports above the (v - alpha) line
    bad = None
    for i in range(q, m):
        sup = seq.support(i)
        below = sup[sup < (v - alpha) * (i + 1)]
        if below.size:
            bad = {"i": i, "x": int(below[0])}
            break
    props["iv"] = PropertyResult("support above (v - alpha)(i + 1)", bad is None,
                                 {"first_violation": bad})

    # (v) final mass
    total = seq.mass(m)
    props["v"] = PropertyResult("final mass >= beta + 1", total >= beta + 1,
                                {"final_mass": total, "required": beta + 1})
    return AdmissibilityReport(props, eps, alpha, beta)


@dataclass(frozen=True)
class LemmaBound:
    bound: float
    n_star: int
    K: int
    epsilon: float
    delta: float
    exponent_per_particle: float


def lemma_bound(seq: AdmissibleSequence, N: float, beta: float | None = None) -> LemmaBound:
    """2 K exp(-N eps p delta**2 / beta) and the first N at which it drops below 1."""
    beta = seq.beta if beta is None else float(beta)
    report = check_admissibility(seq, beta)
    if not report.admissible:
        failed = [k for k, r in report.properties.items() if not r.passed]
        raise ValueError(f"sequence is not admissible for beta={beta}: properties {failed} fail")
    delta = delta_for(beta, seq.m)
    rate = seq.epsilon * seq.p * delta**2 / beta
    log2k = math.log(2 * seq.K)
    bound = math.exp(log2k - N * rate)
    n_star = math.floor(log2k / rate) + 1
    return LemmaBound(bound, n_star, seq.K, seq.epsilon, delta, rate)


@dataclass(frozen=True)
class EventEstimate:
    estimate: float
    sigma: float
    ci_low: float
    ci_high: float
    hits: int
    trials: int


def line_event_probability(params: ModelParams, m: int, slope: float, trials: int,
                           seed: int, backend: str | None = None) -> EventEstimate:
    """P(min X_i < slope * i for every 1 <= i <= m) from N delta_0, by Monte Carlo."""
    if trials < 1:
        raise ValueError("trials must be positive")
    line = slope * np.arange(1, m + 1)
    hits = 0
    for t in range(trials):
        rng = make_rng(child_seed(seed, t))
        _, rec, _ = advance(delta_population(params.N), params, m, rng, record_every=1,
                            backend=backend)
        if (rec[:, 0] < line).all():
            hits += 1
    est = hits / trials
    ci = stats.binomtest(hits, trials).proportion_ci(confidence_level=0.95)
    return EventEstimate(est, math.sqrt(est * (1 - est) / trials), ci.low, ci.high, hits, trials)


def event_B_probability(params: ModelParams, seq: AdmissibleSequence, trials: int,
                        seed: int, backend: str | None = None) -> EventEstimate:
    return line_event_probability(params, seq.m, seq.v - seq.alpha, trials, seed, backend)


@dataclass(frozen=True)
class Certificate:
    value: float
    vacuous: bool
    v: float
    alpha: float
    bound: float
    n_star: int


def certificate_lower_bound(p: float, N: float, m: int, A: int, beta: float = 2.0) -> Certificate:
    """(v - alpha)(1 - m * lemma bound), a lower bound on v_N."""
    seq = build_sequence(p, m, A, beta)
    lb = lemma_bound(seq, N, beta)
    value = (seq.v - seq.alpha) * (1.0 - m * lb.bound)
    return Certificate(value, value <= 0, seq.v, seq.alpha, lb.bound, lb.n_star)


def _check_path_preconditions(rho, sigma, v, ell, x, y):
    if not 0 < v < 1:
        raise ValueError(f"v must lie in (0, 1), got {v}")
    if int(ell) != ell or ell < 1:
        raise ValueError(f"ell must be a positive integer, got {ell}")
    if not rho + 1 < sigma:
        raise ValueError("need rho + 1 < sigma")
    if not sigma + ell * v < rho + ell:
        raise ValueError("need sigma + ell v < rho + ell")
    if not rho + v * ell > sigma:
        raise ValueError("need rho + v ell > sigma")
    if int(x) != x or not rho <= x <= sigma:
        raise ValueError(f"x={x} must be an integer in [rho, sigma]")
    if int(y) != y or not rho + v * ell <= y <= sigma + v * ell:
        raise ValueError(f"y={y} must be an integer in [rho + v ell, sigma + v ell]")


def path_ok(path, rho, sigma, v, x, y) -> bool:
    if path[0] != x or path[-1] != y:
        return False
    for i, z in enumerate(path):
        if not rho + v * i <= z <= sigma + v * i:
            return False
        if i and path[i] - path[i - 1] not in (0, 1):
            return False
    return True


def monotone_path(rho: float, sigma: float, v: float, ell: int, x: int, y: int) -> list:
    """A path x = x_0, ..., x_ell = y with 0/1 steps inside the strip rho + v i <= x_i <= sigma + v i.

    Forward reachable intervals, then a backward pass that picks a parent in
    the previous interval.
    """
    _check_path_preconditions(rho, sigma, v, ell, x, y)
    ell, x, y = int(ell), int(x), int(y)
    lo, hi = [x], [x]
    for i in range(1, ell + 1):
        a = max(lo[-1], math.ceil(rho + v * i))
        b = min(hi[-1] + 1, math.floor(sigma + v * i))
        if a > b:
            raise InvariantViolation(f"strip closes at step {i} despite valid preconditions")
        lo.append(a)
        hi.append(b)
    if not lo[ell] <= y <= hi[ell]:
        raise InvariantViolation(f"y={y} unreachable despite valid preconditions")
    path = [y]
    for i in range(ell, 0, -1):
        z = path[-1]
        path.append(z if lo[i - 1] <= z <= hi[i - 1] else z - 1)
    path.reverse()
    if not path_ok(path, rho, sigma, v, x, y):
        raise InvariantViolation(f"constructed path violates the strip: {path}")
    return path


def sample_path_instance(rng: np.random.Generator, max_ell: int = 200) -> tuple:
    """Random (rho, sigma, v, ell, x, y) meeting the monotone_path preconditions.

    The strip width w = sigma - rho must satisfy 1 < w < ell * min(v, 1 - v).
    """
    while True:
        v = float(rng.uniform(0.02, 0.98))
        ell = int(rng.integers(2, max_ell + 1))
        wmax = ell * min(v, 1.0 - v)
        if wmax <= 1.0:
            continue
        w = float(rng.uniform(1.0, wmax))
        rho = float(rng.uniform(-50.0, 50.0))
        sigma = rho + w
        if not (rho + 1 < sigma and sigma + ell * v < rho + ell and rho + v * ell > sigma):
            continue
        xs = np.arange(math.ceil(rho), math.floor(sigma) + 1)
        ys = np.arange(math.ceil(rho + v * ell), math.floor(sigma + v * ell) + 1)
        if xs.size and ys.size:
            return rho, sigma, v, ell, int(rng.choice(xs)), int(rng.choice(ys))
