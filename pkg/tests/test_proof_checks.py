import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from branchsel.dynamics import make_rng
from branchsel.proof_checks import (SUITES, FrontCountChain, ValuedPath, brute_force_good_count,
                                    count_good_by_coloring, fit_good_decay, front_count_chain,
                                    front_count_step, good_root_probability,
                                    good_vertex_lower_bound, gw_survival, hitting_time_U,
                                    hitting_time_stay_probability, is_good_vertex, good_vertex_check,
                                    martingale_step, run_suites, sample_conditioned_paths,
                                    top_site_occupied_probability)

paths = st.lists(st.integers(0, 1), min_size=1, max_size=40).map(ValuedPath.from_steps)


def test_valued_path_validation():
    with pytest.raises(ValueError):
        ValuedPath((1, 2))
    with pytest.raises(ValueError):
        ValuedPath((0, 2))
    assert ValuedPath.from_steps([1, 0, 1]).values == (0, 1, 1, 2)


def test_is_good_vertex_examples():
    ones = ValuedPath.from_steps([1] * 10)
    zeros = ValuedPath.from_steps([0] * 10)
    assert is_good_vertex(ones, 2, 5, 1.0)
    assert is_good_vertex(zeros, 0, 10, 0.0)
    assert not is_good_vertex(zeros, 0, 1, 0.01)
    with pytest.raises(ValueError):
        is_good_vertex(ones, 6, 5, 0.5)


def trace_coloring(z, m, v1):
    """Direct transcription of the stopping-time recursion, kept separate from the module."""
    n = len(z) - 1
    colors, tau = [], 0
    while tau < n:
        end = None
        for j in range(tau + 1, min(tau + m, n) + 1):
            if z[j] - z[tau] < v1 * (j - tau):
                end = j
                break
        if end is None:
            end = min(tau + m, n)
        red = end == tau + m and all(z[j] - z[tau] >= v1 * (j - tau) for j in range(tau, end + 1))
        colors += ["r" if red else "b"] * (end - tau)
        tau = end
    return colors


def test_coloring_all_ones_hand_trace():
    path = ValuedPath.from_steps([1] * 10)
    col = count_good_by_coloring(path, 2, 0.5)
    assert col.colors == tuple("r" * 10)
    assert col.red_count == 10 == 2 * (10 // 2)
    assert col.good_starts == (0, 2, 4, 6, 8)
    col = count_good_by_coloring(ValuedPath.from_steps([1] * 11), 2, 0.5)
    assert col.red_count == 10 and col.colors[-1] == "b"


def test_coloring_all_zero_path_has_no_red():
    col = count_good_by_coloring(ValuedPath.from_steps([0] * 12), 3, 0.4)
    assert col.red_count == 0 and col.good_count == 0


@given(paths, st.integers(1, 8), st.floats(0.05, 0.95))
def test_coloring_properties(path, m, v1):
    if path.n < m:
        with pytest.raises(ValueError):
            count_good_by_coloring(path, m, v1)
        return
    col = count_good_by_coloring(path, m, v1)
    assert list(col.colors) == trace_coloring(path.values, m, v1)
    assert len(col.colors) == path.n
    assert col.red_count == m * col.good_count
    assert all(is_good_vertex(path, s, m, v1) for s in col.good_starts)
    assert col.good_count <= brute_force_good_count(path, m, v1)


def test_good_vertex_bound_on_conditioned_paths():
    p, n, m, v1 = 0.5, 200, 20, 0.3
    v2 = p + 2 * math.sqrt(p * (1 - p) / n)
    bound = good_vertex_lower_bound(n, m, v1, v2)
    for path in sample_conditioned_paths(n, p, v2, 1000, make_rng(4)):
        assert path.values[-1] >= v2 * n
        assert count_good_by_coloring(path, m, v1).good_count >= bound


def test_good_vertex_check_summary():
    r = good_vertex_check(count=200, seed=1)
    assert r["passed"] and r["violations"] == 0 and r["coloring_exceeds_brute_force"] == 0


def test_front_count_step(rng):
    assert front_count_step(0, 5, rng) == 0
    draws = [front_count_step(5, 5, rng) for _ in range(2000)]
    assert max(draws) <= 5 and min(draws) >= 0
    with pytest.raises(ValueError):
        front_count_step(6, 5, rng)


def test_truncated_binomial_law(rng):
    from scipy import stats
    N, trials = 4, 50_000
    obs = np.bincount([front_count_step(N, N, rng) for _ in range(trials)], minlength=N + 1)
    pmf = stats.binom.pmf(np.arange(2 * N + 1), 2 * N, 0.5)
    exp = np.append(pmf[:N], pmf[N:].sum()) * trials
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_martingale_mean(rng):
    z = 7
    draws = np.array([martingale_step(z, rng) for _ in range(100_000)])
    assert abs(draws.mean() - z) <= 4 * math.sqrt(z / 2 / draws.size)
    assert martingale_step(0, rng) == 0


def test_front_count_chain_invariant(rng):
    ch = front_count_chain(10, 10, 50, rng)
    assert len(ch.values) == 51
    with pytest.raises(ValueError):
        FrontCountChain(3, (1, 3))


def test_front_count_monotone_coupling():
    # common uniforms through the binomial inverse cdf give a monotone coupling
    from scipy import stats
    rng = make_rng(6)
    N = 20
    for _ in range(500):
        x, y = sorted(rng.integers(0, N + 1, size=2))
        for _ in range(10):
            u = rng.random()
            x = min(N, int(stats.binom.ppf(u, 2 * x, 0.5))) if x else 0
            y = min(N, int(stats.binom.ppf(u, 2 * y, 0.5))) if y else 0
            assert x <= y


def test_hitting_time_conventions(rng):
    assert all(hitting_time_U(7, 1, rng) == 1 for _ in range(20))
    with pytest.raises(ValueError):
        hitting_time_U(4, 0, rng)


def test_hitting_time_N1(rng):
    trials = 40_000
    hits = sum(hitting_time_U(1, 5, rng) == 1 for _ in range(trials))
    assert abs(hits / trials - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / trials)


@pytest.mark.parametrize("N", [64, 128, 256])
def test_hitting_time_stay_probability(N):
    r = hitting_time_stay_probability(N, 1 / 16, 1000, seed=N)
    assert r["m"] == N // 16 and r["estimate"] >= 0.05


def test_gw_survival_one_generation(rng):
    r = gw_survival(1, 200_000, rng)
    assert abs(r["estimate"] - 0.75) <= 4 * math.sqrt(0.75 * 0.25 / 200_000)


def test_gw_survival_decreasing():
    ests = [gw_survival(m, 100_000, make_rng(m))["estimate"] for m in (5, 20, 80)]
    assert ests[0] > ests[1] > ests[2]
    with pytest.raises(ValueError):
        gw_survival(0, 10, make_rng(0))


def test_gw_kolmogorov_scale():
    r = gw_survival(200, 200_000, make_rng(3))
    assert 3.2 <= 200 * r["estimate"] <= 4.8


@pytest.mark.parametrize("N", [2, 4])
def test_gw_union_bound(N):
    m = 10
    top = top_site_occupied_probability(N, m, 4000, seed=N)
    gw = gw_survival(m, 200_000, make_rng(N))
    assert top["estimate"] / N <= gw["ci_high"]


def test_good_root_trivial_slopes():
    assert good_root_probability(0.25, 30, 500, 1, slope=0.0)["estimate"] == 1.0
    r = good_root_probability(0.25, 30, 500, 1, slope=1.01)
    assert r["estimate"] == 0.0


def test_good_root_chunking_independent_of_chunk_size_in_law():
    a = good_root_probability(0.3, 40, 20_000, 5, slope=0.5, chunk=20_000)
    b = good_root_probability(0.3, 40, 20_000, 6, slope=0.5, chunk=3_000)
    se = math.hypot(a["sigma"], b["sigma"])
    assert abs(a["estimate"] - b["estimate"]) <= 4 * se


def test_good_root_N1_slope_matches_single_path_dp():
    # at slope 1 the root is good iff one lineage steps up every time: 1 - P(no up-child) per level
    # is the GW survival of Binomial(2, p) offspring, computed exactly by iteration
    p, m = 0.6, 12
    s = 1.0
    for _ in range(m):
        s = 1 - (1 - p * s) ** 2
    r = good_root_probability(p, m, 100_000, 9, slope=1.0)
    assert abs(r["estimate"] - s) <= 4 * math.sqrt(s * (1 - s) / 100_000)


@pytest.mark.slow
def test_good_decay_positive():
    fit = fit_good_decay(0.25, seed=2)
    assert fit.kappa > 0 and fit.ci[0] > 0


def test_fit_good_decay_validation():
    with pytest.raises(ValueError):
        fit_good_decay(0.25, ms=(125, 216), trials=(10, 20, 30))
    with pytest.raises(ValueError, match="no good roots"):
        fit_good_decay(0.25, ms=(343, 512), trials=10)


def test_run_suites_unknown():
    with pytest.raises(ValueError):
        run_suites(["nope"])
    assert set(SUITES) == {"good_vertices", "monotone_path", "gw", "hitting", "good_decay"}
