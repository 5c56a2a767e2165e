import numpy as np
import pytest
from hypothesis import given, strategies as st

from branchsel.population import (INT64_MAX, ModelParams, Population, canonicalize,
                                  delta_population, dominates, from_class, front_stats)


def pops(max_sites=6, max_count=4, max_offset=5):
    counts = st.lists(st.integers(0, max_count), min_size=1, max_size=max_sites).filter(any)
    return st.builds(Population, st.integers(-max_offset, max_offset), counts.map(tuple))


def brute_dominates(mu, nu):
    a, b = mu.positions_desc(), nu.positions_desc()
    return len(a) <= len(b) and all(x <= y for x, y in zip(a, b))


def tail_dominates(mu, nu):
    lo, hi = min(mu.min, nu.min), max(mu.max, nu.max)
    return all(sum(c for x, c in mu.as_mapping().items() if x >= t)
               <= sum(c for x, c in nu.as_mapping().items() if x >= t)
               for t in range(lo, hi + 1))


@pytest.mark.parametrize("N,x,offset,counts", [(3, 0, 0, (3,)), (1, -5, -5, (1,))])
def test_delta_population(N, x, offset, counts):
    pop = delta_population(N, x)
    assert (pop.offset, pop.counts, pop.diameter, pop.mass) == (offset, counts, 0, N)


def test_delta_population_rejects_empty():
    with pytest.raises(ValueError):
        delta_population(0, 0)


@pytest.mark.parametrize("pop,expected", [
    (Population(2, (1, 0, 4)), (2, 4, 2, 5)),
    (delta_population(7, -1), (-1, -1, 0, 7)),
    (Population(0, (2, 3)), (0, 1, 1, 5)),
])
def test_front_stats(pop, expected):
    assert front_stats(pop) == expected


def test_trimming_and_text_roundtrip():
    pop = Population(-2, (0, 0, 3, 0, 1, 0))
    assert pop.offset == 0 and pop.counts == (3, 0, 1)
    assert pop.to_text() == "0:[3,0,1]"
    assert Population.from_text("0:[3,0,1]") == pop
    assert Population.from_text(" -4 : [ 1, 2 ] ") == Population(-4, (1, 2))
    with pytest.raises(ValueError):
        Population.from_text("garbage")
    with pytest.raises(ValueError):
        Population(0, (0, 0))
    with pytest.raises(ValueError):
        Population(0, (1, -1, 1))


def test_position_overflow_is_checked():
    with pytest.raises(OverflowError):
        Population(INT64_MAX, (1, 1))


def test_model_params_validation():
    assert ModelParams(0.25, 3).N == 3
    for bad in [(1.5, 3), (-0.1, 3), (0.5, 0), (0.5, 2.5)]:
        with pytest.raises(ValueError):
            ModelParams(*bad)


@pytest.mark.parametrize("mu,nu,fwd,back", [
    ({0: 2}, {0: 1, 1: 1}, True, False),
    ({0: 1, 5: 1}, {2: 2}, False, False),
    ({1: 3, 4: 1}, {1: 3, 4: 1}, True, True),
])
def test_dominates_examples(mu, nu, fwd, back):
    mu, nu = Population.from_mapping(mu), Population.from_mapping(nu)
    assert dominates(mu, nu) is fwd
    assert dominates(nu, mu) is back


def test_dominates_unequal_mass():
    assert dominates(Population.from_mapping({3: 1}), Population.from_mapping({3: 1, 0: 4}))
    assert not dominates(Population.from_mapping({0: 3}), Population.from_mapping({5: 2}))


def test_dominates_agrees_with_tail_sums_random(rng):
    for _ in range(10_000):
        a = rng.integers(0, 3, size=rng.integers(1, 5))
        b = rng.integers(0, 3, size=rng.integers(1, 5))
        if not a.any() or not b.any():
            continue
        mu = Population(int(rng.integers(-3, 4)), tuple(a))
        nu = Population(int(rng.integers(-3, 4)), tuple(b))
        assert dominates(mu, nu) == tail_dominates(mu, nu) == brute_dominates(mu, nu)


@given(pops(), pops(), pops())
def test_dominates_partial_order(a, b, c):
    assert dominates(a, a)
    if a.mass == b.mass and dominates(a, b) and dominates(b, a):
        assert a == b
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


@given(pops(), st.integers(-10**6, 10**6))
def test_canonicalize_translation_invariant(pop, k):
    assert canonicalize(pop.translate(k)) == canonicalize(pop)
    assert from_class(canonicalize(pop), pop.offset) == pop
    assert pop.counts[0] >= 1 and pop.counts[-1] >= 1


@pytest.mark.parametrize("pop,cls_", [
    (Population(3, (1, 2)), (1, 2)),
    (Population(-9, (1, 2)), (1, 2)),
    (delta_population(4, 100), (4,)),
])
def test_canonicalize_examples(pop, cls_):
    assert canonicalize(pop) == cls_


def test_positions_desc_and_mapping():
    pop = Population(1, (2, 0, 1))
    assert pop.positions_desc() == [3, 1, 1]
    assert pop.as_mapping() == {1: 2, 3: 1}
    assert Population.from_positions([3, 1, 1]) == pop
    assert pop.count_at(2) == 0 and pop.count_at(1) == 2 and pop.count_at(99) == 0
