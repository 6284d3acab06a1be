import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusdecomp import MultiplierSet, RejectedInputError, generate, regularity_constant
from torusdecomp.multipliers import interval_count, is_regular


def brute_regularity(S, lam, r, steps=8):
    """Dense scan of real intervals [x, x + ell] on a 1/steps grid."""
    L = S.L
    grid = np.arange(L * steps, 2 * L * steps + 1) / steps
    best = 0.0
    a = S.as_array()
    for x, y in itertools.combinations_with_replacement(grid, 2):
        ell = y - x
        if ell < r:
            continue
        count = np.count_nonzero((a >= x) & (a <= y))
        best = max(best, count / len(S) * (L / ell) ** lam)
    return best


def test_generate_examples():
    assert generate("full", 4).elements == (4, 5, 6, 7, 8)
    assert generate("progression", 4, step=2).elements == (4, 6, 8)
    a = generate("random", 100, beta=0.5, seed=7)
    b = generate("random", 100, beta=0.5, seed=7)
    assert len(a) == 10 and a == b
    assert all(100 <= s <= 200 for s in a)


def test_dyadic_lacunary():
    assert generate("dyadic_lacunary", 8).elements == (8, 9, 10, 12, 16)


def test_generate_rejects():
    with pytest.raises(RejectedInputError):
        generate("random", 16, beta=0.5)
    with pytest.raises(RejectedInputError):
        generate("progression", 16)
    with pytest.raises(RejectedInputError):
        MultiplierSet(4, [3, 5])


def test_two_point_set():
    L = 16
    cert = regularity_constant(MultiplierSet(L, [L, 2 * L]), 1.0, 1.0)
    assert cert.c_tilde == pytest.approx(L / 2)
    assert cert.witness == (L, 1.0) and cert.witness_count == 1


def test_full_set_bounded():
    for L in (16, 64, 256):
        assert regularity_constant(generate("full", L), 1.0).c_tilde <= 4
        assert regularity_constant(generate("full", L), 0.5).c_tilde <= 4


def test_full_set_lambda_one_close_to_two():
    assert regularity_constant(generate("full", 16), 1.0).c_tilde <= 2 + 1e-12


def test_small_lambda_tends_to_one():
    S = generate("random", 32, beta=0.7, seed=1)
    assert regularity_constant(S, 1e-9).c_tilde <= 1 + 1e-6


@pytest.mark.parametrize("S", [
    MultiplierSet(8, [8, 9, 13, 16]),
    MultiplierSet(12, [12, 13, 14, 20, 24]),
    generate("progression", 10, step=3),
    generate("random", 16, beta=0.6, seed=4),
])
@pytest.mark.parametrize("lam,r", [(0.5, 1.0), (1.0, 1.0), (0.8, 2.5)])
def test_pair_scan_matches_dense_scan(S, lam, r):
    got = regularity_constant(S, lam, r).c_tilde
    assert got >= brute_regularity(S, lam, r) - 1e-12
    # the dense grid contains every element-spanning interval of integer length
    if float(r).is_integer():
        assert got == pytest.approx(brute_regularity(S, lam, r), rel=1e-12)


def test_witness_realizes_value():
    S = generate("random", 64, beta=0.6, seed=3)
    cert = regularity_constant(S, 0.7, 2.0)
    left, length = cert.witness
    assert 64 <= left and left + length <= 128
    count = interval_count(S, left, length)
    assert count / len(S) * (64 / length) ** 0.7 == pytest.approx(cert.c_tilde)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 40), st.integers(0, 2 ** 32 - 1), st.floats(0.1, 1.0),
       st.floats(0.1, 1.0))
def test_monotone_in_lambda_and_scale(L, seed, lam1, lam2):
    # (L/|I|)^lam >= 1 grows with lam, so c_tilde is non-decreasing in lam
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, L + 2))
    S = MultiplierSet(L, sorted(rng.choice(np.arange(L, 2 * L + 1), k, replace=False)))
    lo, hi = sorted((lam1, lam2))
    assert regularity_constant(S, lo).c_tilde <= regularity_constant(S, hi).c_tilde + 1e-12
    r2 = float(rng.uniform(1, L))
    assert regularity_constant(S, lo, r2).c_tilde <= regularity_constant(S, lo, 1.0).c_tilde + 1e-12
    assert is_regular(S, regularity_constant(S, lo).c_tilde, lo)
