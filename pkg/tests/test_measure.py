import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusdecomp import RejectedInputError, make_measure, spectrum, walk_power, walk_step
from torusdecomp.measure import (GridMeasure, ball_mask, interval_union_mass, pushforward,
                                 split_by_union, torus_distance, walk_sequence, zero_measure)

from conftest import dft_oracle, walk_oracle


# construction


def test_uniform_weights():
    assert np.allclose(make_measure("uniform", 4).weights, [0.25] * 4)


def test_dirac_weights():
    w = make_measure("dirac", 8, index=1).weights
    assert w[1] == 1 and w.sum() == 1


def test_mixture_hand_sum():
    mu = make_measure("mixture", 4, components=[(0.5, {"kind": "dirac", "index": 0}),
                                                (0.5, {"kind": "uniform"})])
    assert np.allclose(mu.weights, [0.625, 0.125, 0.125, 0.125], atol=1e-15)


@pytest.mark.parametrize("w", [[0.5, -0.1, 0.6], [0.7, 0.7, 0.0], [np.nan, 0, 0]])
def test_bad_weights_rejected(w):
    with pytest.raises(RejectedInputError):
        GridMeasure(3, w)


def test_wrong_length_and_kind_rejected():
    with pytest.raises(RejectedInputError):
        GridMeasure(4, [0.25] * 3)
    with pytest.raises(RejectedInputError):
        make_measure("gaussian", 4)
    with pytest.raises(RejectedInputError):
        make_measure("dirac", 4, index=4)


def test_subprobability_allowed():
    assert GridMeasure(4, [0.1, 0, 0, 0]).mass == pytest.approx(0.1)


# spectrum


def test_dirac_zero_spectrum_is_one():
    spec = spectrum(make_measure("dirac", 32, index=0), 20)
    assert np.allclose(spec.coeffs, 1.0)


def test_uniform_spectrum_orthogonality():
    spec = spectrum(make_measure("uniform", 8), 7)
    c = spec.coeffs
    assert c[7] == pytest.approx(1.0)
    assert np.allclose(np.delete(c, 7), 0, atol=1e-12)


def test_dirac_one_phase():
    spec = spectrum(make_measure("dirac", 16, index=1), 4)
    assert abs(spec(1) - cmath.exp(-2j * math.pi / 16)) < 1e-14


def test_direct_and_fft_agree(rng):
    mu = GridMeasure(256, rng.dirichlet(np.ones(256)))
    a = spectrum(mu, 100, "direct").coeffs
    b = spectrum(mu, 100, "fft").coeffs
    assert np.max(np.abs(a - b)) < 1e-10


def test_spectrum_matches_dft_oracle(rng):
    w = rng.dirichlet(np.ones(37))
    mu = GridMeasure(37, w)
    spec = spectrum(mu, 18)
    for n in range(-18, 19):
        assert abs(spec(n) - dft_oracle(w, n)) < 1e-12


def test_aliased_window_flagged():
    spec = spectrum(make_measure("uniform", 8), 8)
    assert spec.aliased and "warning" in spec.meta


def test_frequency_outside_window_rejected():
    spec = spectrum(make_measure("uniform", 8), 3)
    with pytest.raises(RejectedInputError):
        spec(4)


# pushforward and walks


def test_pushforward_examples():
    assert pushforward(make_measure("dirac", 8, index=1), 3).weights[3] == 1
    assert pushforward(make_measure("dirac", 8, index=5), 2).weights[2] == 1
    u = make_measure("uniform", 15)
    assert np.allclose(pushforward(u, 7).weights, u.weights)


def test_walk_identity_multiplier(rng):
    mu = GridMeasure(16, rng.dirichlet(np.ones(16)))
    assert np.array_equal(walk_step(mu, [1]).weights, mu.weights)
    assert np.array_equal(walk_power(mu, [1], 2).weights, mu.weights)
    assert walk_power(mu, [2, 3], 0) is mu


def test_walk_two_multipliers():
    mu = make_measure("dirac", 16, index=1)
    out = walk_step(mu, [2, 3])
    assert out.weights[2] == 0.5 and out.weights[3] == 0.5
    want = (cmath.exp(-2j * math.pi * 2 / 16) + cmath.exp(-2j * math.pi * 3 / 16)) / 2
    assert abs(out.fourier([1])[0] - want) < 1e-14


def test_walk_power_doubling():
    out = walk_power(make_measure("dirac", 16, index=1), [2], 2)
    assert out.weights[4] == 1


def test_walk_matches_loop_oracle(rng):
    w = rng.dirichlet(np.ones(64))
    got = walk_step(GridMeasure(64, w), [5, 6, 9]).weights
    assert np.allclose(got, walk_oracle(w, [5, 6, 9], 64), atol=1e-15)


def test_walk_sequence_lengths():
    seq = walk_sequence(make_measure("dirac", 32, index=1), [2, 3], 3)
    assert len(seq) == 4
    assert np.array_equal(seq[2].weights, walk_power(seq[0], [2, 3], 2).weights)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 300), st.lists(st.integers(1, 50), min_size=1, max_size=6, unique=True),
       st.integers(0, 2 ** 32 - 1))
def test_walk_preserves_mass(Q, S, seed):
    w = np.random.default_rng(seed).dirichlet(np.ones(Q)) * 0.9
    mu = GridMeasure(Q, w)
    assert abs(walk_step(mu, S).mass - mu.mass) <= 1e-12
    assert abs(pushforward(mu, S[0]).mass - mu.mass) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(8, 400), st.lists(st.integers(1, 40), min_size=1, max_size=5, unique=True),
       st.integers(0, 2 ** 32 - 1))
def test_walk_convolution_identity(Q, S, seed):
    rng = np.random.default_rng(seed)
    mu = GridMeasure(Q, rng.dirichlet(np.ones(Q)))
    n_max = min(Q // 2, 40)
    lhs = spectrum(walk_step(mu, S), n_max)
    xi = lhs.frequencies
    rhs = np.mean([mu.fourier(np.mod(s * xi, Q)) for s in S], axis=0)
    assert np.max(np.abs(lhs.coeffs - rhs)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 200), st.integers(1, 120), st.integers(0, 2 ** 32 - 1),
       st.floats(0.1, 1.0))
def test_spectrum_invariants(Q, n_max, seed, mass):
    mu = GridMeasure(Q, np.random.default_rng(seed).dirichlet(np.ones(Q)) * mass)
    for method in ("direct", "fft"):
        spectrum(mu, n_max, method).check_invariants()


# splitting and balls


def test_split_examples():
    mu = make_measure("uniform", 4)
    out, inside = split_by_union(mu, set())
    assert np.array_equal(out.weights, mu.weights) and inside.mass == 0
    out, inside = split_by_union(mu, range(4))
    assert out.mass == 0 and np.array_equal(inside.weights, mu.weights)
    out, inside = split_by_union(mu, {0, 1})
    assert (out.mass, inside.mass) == (0.5, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 100), st.integers(0, 2 ** 32 - 1))
def test_split_is_exact(Q, seed):
    rng = np.random.default_rng(seed)
    mu = GridMeasure(Q, rng.dirichlet(np.ones(Q)))
    region = rng.random(Q) < 0.4
    a, b = split_by_union(mu, region)
    assert np.array_equal(a.weights + b.weights, mu.weights)


def test_ball_mask_wraps_and_is_open():
    m = ball_mask(16, [0], 2 / 16)
    assert set(np.flatnonzero(m)) == {15, 0, 1}


def test_interval_union_mass_merges_overlaps():
    mu = make_measure("uniform", 100)
    # two balls of radius 0.05 at 0 and 0.05 overlap; 14 distinct grid points
    assert interval_union_mass(mu, [0, 5], 0.05) == pytest.approx(0.14)


def test_torus_distance_symmetric():
    assert torus_distance(0.1, 0.9) == pytest.approx(0.2)
    assert zero_measure(5).mass == 0
