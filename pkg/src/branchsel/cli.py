"""Command-line front end: ``branchsel <subcommand> [flags]``.

JSON goes to stdout, tables and data files to ``--out`` paths. Every output
carries the parameters and seeds that produced it. Exit codes: 0 success,
1 a requested check failed, 2 usage, 3 capacity, 4 numerical, 5 internal.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import _backend
from .errors import BranchselError, InvariantViolation

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
EXIT_CAPACITY, EXIT_NUMERIC, EXIT_INTERNAL = 3, 4, 5
SEED_ENV = "BRANCHSEL_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---- flag types -------------------------------------------------------------

def _prob(text):
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < p < 1.0:
        raise argparse.ArgumentTypeError(f"p must lie in (0, 1), got {text}")
    return p


def _int_at_least(lo):
    def conv(text):
        try:
            k = int(text)
        except ValueError:
            try:
                x = float(text)
            except ValueError:
                raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
            if not x.is_integer():
                raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
            k = int(x)
        if k < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {text}")
        return k
    return conv


def _positive_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text}")
    return x


def _n_list(text):
    conv = _int_at_least(1)
    try:
        Ns = [conv(t) for t in text.split(",") if t.strip()]
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"bad N list {text!r}: {exc}")
    if not Ns:
        raise argparse.ArgumentTypeError("empty N list")
    if Ns != sorted(set(Ns)):
        raise argparse.ArgumentTypeError(f"N list must be strictly ascending, got {text}")
    return Ns


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return _int_at_least(0)(raw)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"{SEED_ENV}={raw!r}: {exc}")


# ---- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="branchsel", description="N-particle branching-selection chain on Z.")
    ap.add_argument("--backend", choices=sorted(_backend.AVAILABLE),
                    help="simulation kernel (default: %(default)s or $BRANCHSEL_BACKEND)",
                    default=None)
    sub = ap.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    seed_help = f"master seed (default ${SEED_ENV} or 0)"

    s = sub.add_parser("theory", help="v(p), q and gamma")
    s.add_argument("--p", type=_prob, required=True)

    s = sub.add_parser("simulate", help="one trajectory, recorded as CSV")
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--N", type=_int_at_least(1), required=True)
    s.add_argument("--steps", type=_int_at_least(1), required=True)
    s.add_argument("--record-every", type=_int_at_least(1), default=1)
    s.add_argument("--seed", type=_int_at_least(0), default=None, help=seed_help)
    s.add_argument("--out", help="trajectory CSV path (default stdout)")

    s = sub.add_parser("speed", help="batch-means estimate of v_N")
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--N", type=_int_at_least(1), required=True)
    s.add_argument("--steps", type=_int_at_least(1), required=True)
    s.add_argument("--burnin", type=_int_at_least(0), default=None,
                   help="default 10*ceil(log2 N)^3, rounded up to batch alignment")
    s.add_argument("--batches", type=_int_at_least(8), default=32)
    s.add_argument("--seed", type=_int_at_least(0), default=None, help=seed_help)

    s = sub.add_parser("sweep", help="speed estimates over several N")
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--Ns", type=_n_list, required=True, help="comma-separated, ascending")
    s.add_argument("--steps", type=_int_at_least(1), default=1_000_000)
    s.add_argument("--burnin", type=_int_at_least(0), default=None)
    s.add_argument("--batches", type=_int_at_least(8), default=32)
    s.add_argument("--replicates", type=_int_at_least(1), default=4)
    s.add_argument("--seed", type=_int_at_least(0), default=None, help=seed_help)
    s.add_argument("--jobs", type=_int_at_least(1), default=1)
    s.add_argument("--out", help="sweep CSV path (default stdout)")

    s = sub.add_parser("fit", help="regime scaling fit of a sweep CSV")
    s.add_argument("--in", dest="inp", required=True, help="sweep CSV")
    s.add_argument("--regime", choices=("subcritical", "critical", "supercritical"),
                   required=True)
    s.add_argument("--plot", help="plot data path (default <in>.<regime>.dat)")

    s = sub.add_parser("exact", help="exact v_N from the quotient chain (small N)")
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--N", type=_int_at_least(1), required=True)
    s.add_argument("--max-n", type=_int_at_least(1), default=None)
    s.add_argument("--max-states", type=_int_at_least(1), default=None)

    s = sub.add_parser("admissible", help="admissible sequence, lemma bound and certificate")
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--m", type=_int_at_least(1), required=True)
    s.add_argument("--A", type=_int_at_least(1), default=8)
    s.add_argument("--beta", type=_positive_float, default=2.0)
    s.add_argument("--N", type=_positive_float, default=None,
                   help="population size for the bound (default: the reported N*)")
    s.add_argument("--trials", type=_int_at_least(0), default=0,
                   help="Monte Carlo trials for P(B); 0 skips it")
    s.add_argument("--seed", type=_int_at_least(0), default=None, help=seed_help)
    s.add_argument("--dump-measures", metavar="PATH", help="CSV of i, x, nu_i(x)")

    s = sub.add_parser("checks", help="executable checks with a JSON pass/fail summary")
    s.add_argument("--suite", action="append", default=None,
                   help="suite name (repeatable; default all)")
    s.add_argument("--seed", type=_int_at_least(0), default=None, help=seed_help)
    return ap


def parse_args(argv) -> argparse.Namespace:
    """Parse and range-check ``argv``; raises :class:`UsageError` on any problem."""
    cmd = build_parser().parse_args(argv)
    if getattr(cmd, "seed", "absent") is None:
        cmd.seed = _default_seed()
    if cmd.command in ("speed", "sweep") and cmd.burnin is not None and cmd.burnin >= cmd.steps:
        raise UsageError(f"--burnin {cmd.burnin} must be below --steps {cmd.steps}")
    if cmd.command == "admissible" and cmd.beta <= 1:
        raise UsageError(f"--beta must exceed 1, got {cmd.beta}")
    if cmd.command == "checks" and cmd.suite:
        from .proof_checks import SUITES
        bad = [s for s in cmd.suite if s not in SUITES]
        if bad:
            raise UsageError(f"--suite: unknown {bad}; choose from {sorted(SUITES)}")
    return cmd


# ---- commands ---------------------------------------------------------------

def _emit(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _write(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _cmd_theory(cmd):
    from .theory import regime_of, theory_constants
    _emit({"command": "theory", "regime": regime_of(cmd.p), **theory_constants(cmd.p).to_dict()})
    return EXIT_OK


def _cmd_simulate(cmd):
    from .dynamics import diameter_bound, evolve
    from .population import ModelParams
    params = ModelParams(cmd.p, cmd.N)
    traj = evolve(params, cmd.steps, cmd.record_every, cmd.seed, backend=cmd.backend)
    text = traj.to_csv()
    if cmd.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    _write(cmd.out, text)
    last = traj.records[-1] if len(traj.records) else None
    _emit({"command": "simulate", "p": cmd.p, "N": cmd.N, "steps": cmd.steps,
           "record_every": cmd.record_every, "seed": cmd.seed, "out": cmd.out,
           "records": int(len(traj.records)),
           "final_min": None if last is None else int(last[1]),
           "final_max": None if last is None else int(last[2]),
           "max_diameter": int(traj.records[:, 3].max()) if len(traj.records) else None,
           "diameter_bound": diameter_bound(cmd.N)})
    return EXIT_OK


def _cmd_speed(cmd):
    from .estimator import aligned_burnin, estimate_speed
    from .population import ModelParams
    from .theory import critical_speed
    burnin = aligned_burnin(cmd.N, cmd.steps, cmd.batches) if cmd.burnin is None else cmd.burnin
    est = estimate_speed(ModelParams(cmd.p, cmd.N), cmd.steps, burnin, cmd.batches, cmd.seed,
                         backend=cmd.backend)
    v = critical_speed(cmd.p)
    _emit({"command": "speed", "p": cmd.p, "N": cmd.N, "steps": cmd.steps, "burnin": burnin,
           "batches": cmd.batches, "seed": cmd.seed, "v_hat": est.v_hat, "stderr": est.stderr,
           "v_inf": v, "gap_hat": v - est.v_hat, "max_diameter": est.max_diameter_seen})
    return EXIT_OK


def _cmd_sweep(cmd):
    from .estimator import rows_to_csv, sweep
    rows = sweep(cmd.p, cmd.Ns, cmd.steps, batches=cmd.batches, replicates=cmd.replicates,
                 master_seed=cmd.seed, jobs=cmd.jobs, burnin=cmd.burnin, backend=cmd.backend)
    # --jobs is left out on purpose: output bytes must not depend on it
    header = {"command": "sweep", "p": repr(cmd.p), "Ns": ",".join(map(str, cmd.Ns)),
              "steps": cmd.steps, "burnin": "auto" if cmd.burnin is None else cmd.burnin,
              "batches": cmd.batches, "replicates": cmd.replicates, "seed": cmd.seed}
    text = rows_to_csv(rows, header)
    if cmd.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    _write(cmd.out, text)
    _emit({**header, "p": cmd.p, "out": cmd.out, "rows": len(rows),
           "max_diameter": max(r.max_diameter for r in rows)})
    return EXIT_OK


def _cmd_fit(cmd):
    from .estimator import emit_plot_data, fit_scaling, rows_from_csv
    try:
        with open(cmd.inp) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"--in: cannot read {cmd.inp}: {exc}")
    rows = rows_from_csv(text)
    if not rows:
        raise UsageError(f"--in: {cmd.inp} holds no sweep rows")
    plot = cmd.plot or f"{cmd.inp}.{cmd.regime}.dat"
    emit_plot_data(rows, cmd.regime, plot)
    rep = fit_scaling(rows, cmd.regime)
    _emit({"command": "fit", "in": cmd.inp, "plot": plot, **rep.to_dict()})
    return EXIT_OK


def _cmd_exact(cmd):
    from .exact_chain import chain_report
    from .population import ModelParams
    budget = {k: v for k, v in (("max_n", cmd.max_n), ("max_states", cmd.max_states))
              if v is not None}
    _emit({"command": "exact", **chain_report(ModelParams(cmd.p, cmd.N), **budget)})
    return EXIT_OK


def _cmd_admissible(cmd):
    from .admissible import (build_sequence, check_admissibility, event_B_probability,
                             lemma_bound, tilted_cross_check)
    from .population import ModelParams
    seq = build_sequence(cmd.p, cmd.m, cmd.A, cmd.beta)
    report = check_admissibility(seq, cmd.beta)
    out = {"command": "admissible", "p": cmd.p, "m": cmd.m, "A": cmd.A, "beta": cmd.beta,
           "seed": cmd.seed, "v": seq.v, "q": seq.q, "gamma": seq.gamma,
           "log_domain": seq.log_domain, "a_m": seq.spec.a_m, "c_m": seq.spec.c_m,
           "s_m": seq.spec.s_m, "alpha": seq.alpha, "K": seq.K, "delta": seq.delta,
           "chi_hat": seq.chi_hat, "tilted_cross_check": tilted_cross_check(seq),
           **report.to_dict()}
    if report.admissible:
        n_star = lemma_bound(seq, 1.0, cmd.beta).n_star
        N = float(n_star) if cmd.N is None else cmd.N
        lb = lemma_bound(seq, N, cmd.beta)
        value = (seq.v - seq.alpha) * (1.0 - cmd.m * lb.bound)
        out.update({"N": N, "N_star": lb.n_star, "lemma_bound": lb.bound,
                    "exponent_per_particle": lb.exponent_per_particle,
                    "certificate": value, "certificate_vacuous": value <= 0})
        if cmd.trials:
            if N != int(N) or N > 2**61:
                raise UsageError(f"--N must be an integer below 2**61 to simulate, got {N}")
            ev = event_B_probability(ModelParams(cmd.p, int(N)), seq, cmd.trials, cmd.seed,
                                     backend=cmd.backend)
            out["event_B"] = {"estimate": ev.estimate, "sigma": ev.sigma,
                              "ci_low": ev.ci_low, "ci_high": ev.ci_high,
                              "hits": ev.hits, "trials": ev.trials,
                              "consistent": ev.estimate + 3 * ev.sigma <= lb.bound}
    else:
        out.update({"N": cmd.N, "N_star": None, "lemma_bound": None, "certificate": None})
    if cmd.dump_measures:
        lines = [f"# p={cmd.p!r} m={cmd.m} A={cmd.A} beta={cmd.beta!r}", "i,x,value"]
        for i in range(cmd.m + 1):
            for x in seq.support(i):
                lines.append(f"{i},{int(x)},{math.exp(seq.log_nu[i, x])!r}")
        _write(cmd.dump_measures, "\n".join(lines) + "\n")
        out["dump_measures"] = cmd.dump_measures
    _emit(out)
    ev = out.get("event_B")
    return EXIT_FAILED if ev is not None and not ev["consistent"] else EXIT_OK


def _cmd_checks(cmd):
    from .proof_checks import run_suites
    results = run_suites(cmd.suite, cmd.seed)
    passed = all(r["passed"] for r in results.values())
    _emit({"command": "checks", "seed": cmd.seed, "passed": passed, "suites": results})
    return EXIT_OK if passed else EXIT_FAILED


COMMANDS = {
    "theory": _cmd_theory,
    "simulate": _cmd_simulate,
    "speed": _cmd_speed,
    "sweep": _cmd_sweep,
    "fit": _cmd_fit,
    "exact": _cmd_exact,
    "admissible": _cmd_admissible,
    "checks": _cmd_checks,
}


def run(cmd: argparse.Namespace) -> int:
    return COMMANDS[cmd.command](cmd)


def main(argv=None) -> int:
    from .estimator import NoiseFloorError
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cmd = parse_args(argv)
        return run(cmd)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoiseFloorError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except BranchselError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OverflowError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
