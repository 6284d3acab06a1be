import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusdecomp import RejectedInputError, make_measure, spectrum
from torusdecomp.spectral_sets import (FrequencySet, covering_number, dimension_stat,
                                       level_set, level_set_of, max_separated_subset,
                                       neighborhood_union)

from conftest import brute_cover, brute_packing

int_sets = st.lists(st.integers(-60, 60).filter(lambda x: x != 0), min_size=1, max_size=12,
                    unique=True)


def fs(values, N=1000, M=1.0):
    return FrequencySet(N, M, tuple(values))


def test_level_set_dirac():
    spec = spectrum(make_measure("dirac", 64, index=0), 20)
    A = level_set(spec, 0.5, 10)
    assert len(A) == 20 and 0 not in A.elements


def test_level_set_uniform_empty():
    assert len(level_set(spectrum(make_measure("uniform", 64), 30), 0.1, 30)) == 0


def test_level_set_mixture():
    mu = make_measure("mixture", 64, components=[(0.5, {"kind": "dirac", "index": 0}),
                                                 (0.5, {"kind": "uniform"})])
    A = level_set(spectrum(mu, 10), 0.4, 10)
    assert A.elements == tuple(a for a in range(-10, 11) if a)


def test_level_set_strict_threshold():
    mu = make_measure("mixture", 64, components=[(0.5, {"kind": "dirac", "index": 0}),
                                                 (0.5, {"kind": "uniform"})])
    spec = spectrum(mu, 10)
    c = float(abs(spec(3)))
    assert 3 in level_set(spec, np.nextafter(c, 0), 10).elements
    assert 3 not in level_set(spec, c, 10).elements


def test_level_set_of_matches_spectrum(rng):
    mu = make_measure("weights", 128, weights=rng.dirichlet(np.ones(128) * 0.1))
    assert level_set_of(mu, 0.2, 40).elements == level_set(spectrum(mu, 40), 0.2, 40).elements


def test_frequency_set_rejects_zero_and_bad_separation():
    with pytest.raises(RejectedInputError):
        fs([0, 1])
    with pytest.raises(RejectedInputError):
        FrequencySet(10, 2, (1, 3), separated=True)


def test_covering_examples():
    assert covering_number(fs([1, 2, 3]), 2).count == 1
    assert covering_number(fs([1, 10, 11, 30]), 2).count == 3
    assert covering_number(fs([7]), 0.1).count == 1


def test_cover_report_covers():
    A = fs([1, 10, 11, 30, 31, 33])
    rep = covering_number(A, 2)
    assert rep.covers(A.elements)


def test_max_separated_examples():
    assert len(max_separated_subset(fs([1, 2, 3, 4]), 1)) == 2
    assert max_separated_subset(fs([1, 5, 9]), 3).elements == (1, 5, 9)
    assert len(max_separated_subset(fs([1, 2]), 5)) == 1


def test_neighborhood_union_examples():
    assert neighborhood_union([0], 1)[0] == 2
    assert neighborhood_union([0, 1], 1)[0] == 3
    total, iv = neighborhood_union([0, 10], 1)
    assert total == 4 and len(iv) == 2


def test_dimension_stat():
    spec = spectrum(make_measure("dirac", 1024, index=0), 100)
    assert dimension_stat(spec, 0.5, 100, 1) == pytest.approx(
        math.log(100) / math.log(100), abs=0.02)
    assert dimension_stat(spectrum(make_measure("uniform", 256), 100), 0.1, 100, 1) == 0


@settings(max_examples=150, deadline=None)
@given(int_sets, st.sampled_from([0.5, 1, 1.5, 2, 3, 5, 8]))
def test_greedy_cover_is_optimal(values, M):
    assert covering_number(fs(values), M).count == brute_cover(values, M)


@settings(max_examples=150, deadline=None)
@given(int_sets, st.sampled_from([0.5, 1, 2, 3, 5, 8]))
def test_greedy_packing_is_optimal(values, M):
    sub = max_separated_subset(fs(values), M)
    assert len(sub) == brute_packing(values, M)
    assert set(sub.elements) <= set(values)


@settings(max_examples=100, deadline=None)
@given(int_sets, st.sampled_from([1, 2, 3, 4, 6]))
def test_packing_covering_duality(values, M):
    pack = len(max_separated_subset(fs(values), M))
    assert covering_number(fs(values), M).count <= pack
    assert pack <= covering_number(fs(values), M / 2).count
