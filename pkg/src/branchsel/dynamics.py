"""Branching and selection kernels, the monotone coupling, and trajectories.

One step of the chain doubles every particle, moves each child up by one with
probability ``p`` and then keeps the ``N`` rightmost children. Children of
particles sharing a site are exchangeable, so branching draws one
Binomial(2k, p) per occupied site instead of 2k Bernoulli variables.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvariantViolation
from .population import INT64_MAX, ModelParams, Population, delta_population, dominates


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream (period 2**128) seeded from a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def child_seed(master_seed: int, index: int) -> int:
    """Deterministic 64-bit seed for task ``index`` of a run seeded by ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def diameter_bound(N: int) -> int:
    """ceil(log2 N) + 1, computed exactly on integers."""
    return (int(N) - 1).bit_length() + 1


def sample_binomial(n: int, q: float, rng: np.random.Generator) -> int:
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if n == 0 or q == 0.0:
        return 0
    if q == 1.0:
        return int(n)
    return int(rng.binomial(n, q))


def branch_step(pop: Population, p: float, rng: np.random.Generator) -> Population:
    """Each particle is replaced by two children displaced by independent Bernoulli(p) steps."""
    new = [0] * (len(pop.counts) + 1)
    for j, k in enumerate(pop.counts):
        u = sample_binomial(2 * k, p, rng)
        new[j] += 2 * k - u
        new[j + 1] += u
    return Population(pop.offset, tuple(new))


def select_step(pop: Population, N: int) -> Population:
    """Keep the ``N`` rightmost particles, splitting the pivot site if needed."""
    if pop.mass < N:
        raise ValueError(f"cannot select {N} particles out of {pop.mass}")
    kept = []
    keep = N
    for c in reversed(pop.counts):
        if c >= keep:
            kept.append(keep)
            break
        kept.append(c)
        keep -= c
    kept.reverse()
    return Population(pop.max - len(kept) + 1, tuple(kept))


def chain_step(pop: Population, params: ModelParams, rng: np.random.Generator) -> Population:
    if pop.mass != params.N:
        raise ValueError(f"population has mass {pop.mass}, expected N={params.N}")
    return select_step(branch_step(pop, params.p, rng), params.N)


def coupled_step(mu: Population, nu: Population, p: float, rng: np.random.Generator):
    """Advance ``mu`` (mass N1) and ``nu`` (mass N2 >= N1) with shared rank-indexed steps.

    The i-th largest particle of each population uses the same pair of
    Bernoulli variables, which preserves ``mu`` below ``nu``.
    """
    if mu.mass > nu.mass or not dominates(mu, nu):
        raise ValueError("coupled_step needs mu dominated by nu with mass(mu) <= mass(nu)")
    n1, n2 = mu.mass, nu.mass
    steps = (rng.random((2, n2)) < p).astype(np.int64)

    def advance(pop, n):
        x = np.asarray(pop.positions_desc(), dtype=np.int64)
        children = np.concatenate([x + steps[0, :n], x + steps[1, :n]])
        return select_step(Population.from_positions(children.tolist()), n)

    return advance(mu, n1), advance(nu, n2)


@dataclass
class Trajectory:
    params: ModelParams
    seed: int
    record_every: int
    records: np.ndarray = field(repr=False)  # rows of (step, min, max, diameter)

    @property
    def steps(self):
        return self.records[:, 0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# p={self.params.p!r}\n# N={self.params.N}\n# seed={self.seed}\n")
        buf.write(f"# record_every={self.record_every}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "min", "max", "diameter"])
        w.writerows(self.records.tolist())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
        if rows[0] != ["step", "min", "max", "diameter"]:
            raise ValueError(f"unexpected trajectory header {rows[0]}")
        recs = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64).reshape(-1, 4)
        params = ModelParams(float(meta["p"]), int(meta["N"]))
        return cls(params, int(meta["seed"]), int(meta["record_every"]), recs)


def advance(pop: Population, params: ModelParams, steps: int, rng: np.random.Generator,
            record_every: int = 0, backend: str | None = None):
    """Run ``steps`` chain steps through the selected kernel.

    Returns ``(population, records, max_diameter)``; ``records`` rows are
    (min, max, diameter) after every ``record_every``-th step. Every step is
    checked against the diameter bound.
    """
    if pop.mass != params.N:
        raise ValueError(f"population has mass {pop.mass}, expected N={params.N}")
    if pop.max + steps > INT64_MAX:
        raise OverflowError("positions would leave the signed 64-bit range")
    if 2 * params.N > INT64_MAX:
        raise OverflowError(f"N={params.N} is too large for 64-bit counts")
    kernel = _backend.get_kernel(backend)
    bound = diameter_bound(params.N)
    counts, offset, rec, max_diam = kernel.run_chain(
        np.asarray(pop.counts, dtype=np.int64), pop.offset, params.N, params.p,
        int(steps), int(record_every), rng.bit_generator, bound)
    return Population(int(offset), tuple(int(c) for c in counts)), rec, int(max_diam)


def evolve(params: ModelParams, steps: int, record_every: int, seed: int,
           backend: str | None = None) -> Trajectory:
    if steps < 1 or record_every < 1:
        raise ValueError("steps and record_every must be positive")
    rng = make_rng(seed)
    _, rec, max_diam = advance(delta_population(params.N), params, steps, rng,
                               record_every=record_every, backend=backend)
    if max_diam > diameter_bound(params.N):
        raise InvariantViolation(f"diameter {max_diam} exceeds bound {diameter_bound(params.N)}")
    idx = np.arange(1, len(rec) + 1, dtype=np.int64)[:, None] * record_every
    return Trajectory(params, int(seed), int(record_every), np.hstack([idx, rec]))
