"""Shared oracles: slow, independent reimplementations used to check the library."""

import cmath
import itertools
import math

import numpy as np
import pytest

from torusdecomp import make_measure


def dft_oracle(weights, n):
    """sum_j w_j exp(-2 pi i n j / Q) with cmath, one term at a time."""
    Q = len(weights)
    return sum(w * cmath.exp(-2j * math.pi * ((n * j) % Q) / Q)
               for j, w in enumerate(weights) if w)


def brute_cover(points, M):
    """Fewest open intervals of radius M covering ``points``, by exhaustive search.

    Any coverable group fits in an interval starting at its leftmost point,
    so candidates are {q : p <= q < p + 2M} for each point p.
    """
    pts = sorted(set(points))
    if not pts:
        return 0
    masks = []
    for p in pts:
        m = 0
        for i, q in enumerate(pts):
            if p <= q < p + 2 * M:
                m |= 1 << i
        masks.append(m)
    full = (1 << len(pts)) - 1
    for k in range(1, len(pts) + 1):
        for combo in itertools.combinations(masks, k):
            acc = 0
            for m in combo:
                acc |= m
            if acc == full:
                return k
    return len(pts)


def brute_packing(points, M):
    """Largest subset with all pairwise distances > M, by exhaustive search."""
    pts = sorted(set(points))
    for k in range(len(pts), 0, -1):
        for combo in itertools.combinations(pts, k):
            if all(b - a > M for a, b in zip(combo, combo[1:])):
                return k
    return 0


def walk_oracle(weights, S, Q):
    """Walk step by explicit loops over atoms and multipliers."""
    out = [0.0] * Q
    for j, w in enumerate(weights):
        if w:
            for s in S:
                out[(j * s) % Q] += w / len(S)
    return out


def random_measure(rng, Q, atoms=8, uniform_part=0.0):
    w = np.zeros(Q)
    idx = rng.choice(Q, size=atoms, replace=False)
    w[idx] = rng.dirichlet(np.ones(atoms)) * (1 - uniform_part)
    w += uniform_part / Q
    return make_measure("weights", Q, weights=w)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
