import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusdecomp import RejectedInputError, make_measure
from torusdecomp.granulation import (C2, GranuleFamily, build_window_bump, granulate,
                                     hypothesis_cover, max_separated_in_interval,
                                     verify_family)
from torusdecomp.measure import GridMeasure


def admissible_s(mu, N, M, t):
    cover, _ = hypothesis_cover(mu, N, M, t)
    return cover * M / N * (1 - 1e-9)


def recount(mu, points, radius):
    """Mass of the union of open balls, one grid index at a time."""
    Q = mu.Q
    total = 0.0
    for j in range(Q):
        if any(min(abs(j - p) % Q, Q - abs(j - p) % Q) / Q < radius for p in points):
            total += mu.weights[j]
    return total


def test_c2_constant():
    assert max_separated_in_interval() == 2
    assert C2 == 20


def test_window_bump_certificate():
    bump = build_window_bump(4, 1024)
    a = np.arange(-4, 5)
    assert np.all(bump.spectrum[a % 1024] >= 0.5)
    assert bump.spectrum.min() >= 0
    assert bump.spectrum[0] == pytest.approx(1, abs=1e-12)
    offs = np.minimum(np.arange(1024), 1024 - np.arange(1024))
    assert np.all(bump.samples[offs * 4 > 1024] == 0)
    assert bump.samples.sum() / 1024 == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("N,Q", [(4, 1024), (16, 4096), (64, 1024), (300, 2 ** 16)])
def test_window_bump_spectrum_matches_dft(N, Q):
    bump = build_window_bump(N, Q)
    direct = np.real(np.fft.fft(bump.samples)) / Q
    assert np.max(np.abs(direct - bump.spectrum)) < 1e-10


def test_window_bump_needs_fine_grid():
    with pytest.raises(RejectedInputError):
        build_window_bump(128, 1024)


def test_granulate_dirac():
    mu = make_measure("dirac", 1024, index=0)
    fam = granulate(mu, 16, 4, 0.5, admissible_s(mu, 16, 4, 0.5))
    assert fam.points == [0] and fam.captured_mass == 1


def test_granulate_four_atoms():
    w = np.zeros(1024)
    w[::256] = 0.25
    mu = GridMeasure(1024, w)
    fam = granulate(mu, 64, 8, 0.5, admissible_s(mu, 64, 8, 0.5))
    assert fam.points == [0, 256, 512, 768]
    assert fam.captured_mass == pytest.approx(1)
    assert recount(mu, fam.points, fam.radius) == pytest.approx(fam.captured_mass, abs=1e-12)


def test_granulate_mixture():
    mu = make_measure("mixture", 1024, components=[(0.5, {"kind": "dirac", "index": 0}),
                                                   (0.5, {"kind": "uniform"})])
    fam = granulate(mu, 64, 8, 0.25, admissible_s(mu, 64, 8, 0.25))
    assert 0 in fam.points and fam.captured_mass >= 0.5
    assert verify_family(fam, mu)["ok"]


def test_granulate_rejects_failed_hypothesis():
    mu = make_measure("uniform", 1024)
    with pytest.raises(RejectedInputError):
        granulate(mu, 16, 4, 0.5, 1.0)


def test_odd_cube_count_keeps_separation():
    w = np.zeros(2048)
    w[[0, 2047 - 40, 700, 1400]] = 0.25
    mu = GridMeasure(2048, w)
    fam = granulate(mu, 45, 5, 0.2, admissible_s(mu, 45, 5, 0.2))
    assert verify_family(fam, mu)["separated"]


def test_verify_family_detects_bad_separation():
    mu = make_measure("uniform", 1024)
    fam = GranuleFamily(1024, [0, 64], 1 / 8, 1 / 64, 0.0)
    assert not verify_family(fam, mu)["separated"]


def test_verify_family_overlapping_balls():
    mu = make_measure("uniform", 1024)
    fam = GranuleFamily(1024, [0, 10], 1 / 128, 1 / 64, 0.0)
    rep = verify_family(fam, mu)
    assert rep["mass_recount"] == pytest.approx(recount(mu, [0, 10], 1 / 64), abs=1e-12)
    assert rep["mass_recount"] == pytest.approx(41 / 1024)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.sampled_from([(32, 4), (64, 8),
                                                                         (48, 6), (40, 5)]))
def test_granulate_bound_and_recount(seed, atoms, nm):
    N, M = nm
    rng = np.random.default_rng(seed)
    Q = 2048
    w = np.zeros(Q)
    w[rng.choice(Q, atoms, replace=False)] = rng.dirichlet(np.ones(atoms)) * 0.8
    w += 0.2 / Q
    mu = GridMeasure(Q, w)
    t = 0.3
    cover, _ = hypothesis_cover(mu, N, M, t)
    if cover == 0:
        return
    fam = granulate(mu, N, M, t, admissible_s(mu, N, M, t))
    rep = verify_family(fam, mu)
    assert rep["ok"]
    assert fam.captured_mass > fam.trace.constants["bound"]
    assert fam.trace.constants["C3"] == pytest.approx(math.sqrt(fam.trace.constants["C1"] * 20))
