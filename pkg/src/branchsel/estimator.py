"""Monte Carlo front-speed estimation, multi-N sweeps and regime scaling fits."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import stats

from .dynamics import advance, child_seed, make_rng
from .population import ModelParams, delta_population
from .theory import critical_speed, gap_model

MIN_BATCHES = 8


@dataclass(frozen=True)
class SpeedEstimate:
    v_hat: float
    stderr: float
    steps: int
    burnin: int
    batches: int
    seed: int
    max_diameter_seen: int


@dataclass(frozen=True)
class SweepRow:
    p: float
    N: int
    replicate: int
    seed: int
    steps: int
    burnin: int
    batches: int
    v_hat: float
    stderr: float
    gap_hat: float
    max_diameter: int


SWEEP_COLUMNS = [f.name for f in fields(SweepRow)]


@dataclass(frozen=True)
class FitReport:
    regime: str
    slope: float
    intercept: float
    r2: float
    points: list
    band_ratio: float

    def to_dict(self):
        return asdict(self)


class NoiseFloorError(ValueError):
    """Too few N with a gap resolved above three standard errors."""


def default_burnin(N: int) -> int:
    """10 * ceil(log2 N)^3 steps, the relaxation scale of the front."""
    return 10 * (int(N) - 1).bit_length() ** 3


def aligned_burnin(N: int, steps: int, batches: int) -> int:
    """Default burn-in rounded up so the measured span splits evenly into batches."""
    b = default_burnin(N)
    b += (steps - b) % batches
    if b >= steps:
        raise ValueError(f"steps={steps} leaves nothing after burn-in {b} for N={N}")
    return b


def estimate_speed(params: ModelParams, steps: int, burnin: int, batches: int, seed: int,
                   backend: str | None = None) -> SpeedEstimate:
    """Speed of the maximum after burn-in, with a batch-means standard error."""
    if not steps > burnin >= 0:
        raise ValueError(f"need steps > burnin >= 0, got steps={steps}, burnin={burnin}")
    if batches < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches, got {batches}")
    span = steps - burnin
    if span % batches:
        raise ValueError(f"steps - burnin = {span} is not divisible by batches = {batches}")
    rng = make_rng(seed)
    pop = delta_population(params.N)
    diam0 = 0
    if burnin:
        pop, _, diam0 = advance(pop, params, burnin, rng, backend=backend)
    start = pop.max
    pop, rec, diam1 = advance(pop, params, span, rng, record_every=span // batches,
                              backend=backend)
    maxima = np.concatenate([[start], rec[:, 1]])
    per_batch = np.diff(maxima) / (span // batches)
    v_hat = (maxima[-1] - start) / span
    se = float(per_batch.std(ddof=1) / math.sqrt(batches))
    return SpeedEstimate(float(v_hat), se, steps, burnin, batches, int(seed), max(diam0, diam1))


def _sweep_task(task):
    p, N, rep, seed, steps, batches, burnin, backend = task
    if burnin is None:
        burnin = aligned_burnin(N, steps, batches)
    est = estimate_speed(ModelParams(p, N), steps, burnin, batches, seed, backend)
    return SweepRow(p, N, rep, seed, steps, burnin, batches, est.v_hat, est.stderr,
                    critical_speed(p) - est.v_hat, est.max_diameter_seen)


def sweep(p: float, N_list, steps: int, batches: int = 32, replicates: int = 4,
          master_seed: int = 0, jobs: int = 1, burnin: int | None = None,
          backend: str | None = None) -> list:
    """One estimate per (N, replicate); seeds come from (master_seed, row index).

    ``burnin=None`` uses :func:`aligned_burnin` per N.
    """
    N_list = [int(n) for n in N_list]
    if not N_list or N_list != sorted(N_list):
        raise ValueError(f"N_list must be nonempty and ascending, got {N_list}")
    tasks = []
    for N in N_list:
        for rep in range(replicates):
            tasks.append((p, N, rep, child_seed(master_seed, len(tasks)), steps, batches, burnin,
                          backend))
    if jobs <= 1:
        rows = []
        for t in tasks:
            rows.append(_run_checked(t))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_task, t) for t in tasks]
            rows = [_result_checked(f, t) for f, t in zip(futures, tasks)]
    return sorted(rows, key=lambda r: (r.N, r.replicate))


def _run_checked(task):
    try:
        return _sweep_task(task)
    except Exception as exc:
        raise RuntimeError(f"sweep row N={task[1]} replicate={task[2]} failed: {exc}") from exc


def _result_checked(future, task):
    try:
        return future.result()
    except Exception as exc:
        raise RuntimeError(f"sweep row N={task[1]} replicate={task[2]} failed: {exc}") from exc


def rows_to_csv(rows, header: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = asdict(r)
        for k in ("v_hat", "stderr", "gap_hat"):
            d[k] = repr(float(d[k]))
        w.writerow(d)
    return buf.getvalue()


def rows_from_csv(text: str) -> list:
    body = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    out = []
    casts = {f.name: f.type for f in fields(SweepRow)}
    for d in csv.DictReader(body):
        missing = set(SWEEP_COLUMNS) - set(d)
        if missing:
            raise ValueError(f"sweep CSV lacks columns {sorted(missing)}")
        out.append(SweepRow(**{k: (float(d[k]) if casts[k] == "float" else int(d[k]))
                               for k in SWEEP_COLUMNS}))
    return out


def pool_replicates(rows) -> list:
    """Inverse-variance pooling per N: returns sorted (N, gap, stderr)."""
    by_n: dict = {}
    for r in rows:
        by_n.setdefault(r.N, []).append(r)
    out = []
    for N in sorted(by_n):
        rs = by_n[N]
        se = np.array([r.stderr for r in rs])
        gap = np.array([r.gap_hat for r in rs])
        if (se > 0).all():
            w = 1.0 / se**2
            out.append((N, float((w * gap).sum() / w.sum()), float(1.0 / math.sqrt(w.sum()))))
        else:
            # zero-variance replicates are exact; average those alone
            out.append((N, float(gap[se == 0].mean()), 0.0))
    return out


def scale_coordinates(regime: str, N, gap):
    """Regression coordinates (x, y) for a regime; slope targets -2, -1 and > 0."""
    N = np.asarray(N, dtype=float)
    gap = np.asarray(gap, dtype=float)
    if regime == "subcritical":
        return np.log(np.log(N)), np.log(gap)
    if regime == "critical":
        return np.log(N), np.log(gap)
    if regime == "supercritical":
        return N, -np.log(gap)
    raise ValueError(f"unknown regime {regime!r}")


def fit_scaling(rows, regime: str) -> FitReport:
    pooled = pool_replicates(rows)
    usable = [(N, g, s) for N, g, s in pooled if g > 3.0 * s and g > 0]
    if len(usable) < 4:
        raise NoiseFloorError(
            f"gap below noise floor: only N={[u[0] for u in usable]} resolve gap > 3*stderr "
            f"(need at least 4 of {[q[0] for q in pooled]})")
    Ns = [u[0] for u in usable]
    gaps = [u[1] for u in usable]
    x, y = scale_coordinates(regime, Ns, gaps)
    res = stats.linregress(x, y)
    ratios = [g / gap_model(regime, N) for N, g in zip(Ns, gaps)]
    return FitReport(regime, float(res.slope), float(res.intercept),
                     float(min(1.0, res.rvalue**2)), Ns, float(max(ratios) / min(ratios)))


def emit_plot_data(rows, regime: str, path) -> None:
    """Two whitespace-separated columns (scale variable, transformed gap) with a '#' header."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to plot")
    pooled = [(N, g) for N, g, _ in pool_replicates(rows) if g > 0]
    x, y = scale_coordinates(regime, [q[0] for q in pooled], [q[1] for q in pooled])
    names = {"subcritical": ("log_log_N", "log_gap"), "critical": ("log_N", "log_gap"),
             "supercritical": ("N", "neg_log_gap")}[regime]
    lines = [f"# regime={regime}", f"# {names[0]} {names[1]}"]
    lines += [f"{a!r} {b!r}" for a, b in zip(x.tolist(), y.tolist())]
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write plot data to {path}: {exc}") from exc
