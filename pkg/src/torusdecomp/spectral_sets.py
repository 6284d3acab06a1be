"""Large-coefficient level sets, covering numbers and separated subsets on Z.

"M-separated" always means pairwise distance strictly greater than M, and
covering balls are open with arbitrary real centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RejectedInputError
from .measure import Spectrum


@dataclass(frozen=True)
class FrequencySet:
    window_n: float
    sep_m: float
    elements: tuple
    separated: bool = False

    def __post_init__(self):
        elems = tuple(sorted(int(a) for a in self.elements))
        if any(b == a for a, b in zip(elems, elems[1:])):
            raise RejectedInputError("frequencies must be distinct")
        if 0 in elems:
            raise RejectedInputError("frequency 0 is not allowed in a level set")
        if elems and max(abs(elems[0]), abs(elems[-1])) > self.window_n:
            raise RejectedInputError(
                f"frequencies must lie in [-{self.window_n}, {self.window_n}]")
        if self.separated and any(b - a <= self.sep_m for a, b in zip(elems, elems[1:])):
            raise RejectedInputError(f"set flagged separated is not {self.sep_m}-separated")
        object.__setattr__(self, "elements", elems)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def as_array(self) -> np.ndarray:
        return np.array(self.elements, dtype=np.int64)

    def to_json(self):
        return list(self.elements)


@dataclass(frozen=True)
class CoverReport:
    count: int
    centers: tuple
    radius: float

    def covers(self, values) -> bool:
        c = np.asarray(self.centers, dtype=float)
        if len(values) == 0:
            return True
        if c.size == 0:
            return False
        v = np.asarray(values, dtype=float)
        return bool(np.all(np.min(np.abs(v[:, None] - c[None, :]), axis=1) < self.radius))


def level_set(spec: Spectrum, delta: float, N: float, *, sep_m: float = 1.0) -> FrequencySet:
    """Nonzero a with |a| <= N and |coeff(a)| > delta (strict)."""
    if not delta > 0:
        raise RejectedInputError("delta must be positive", delta=delta)
    if N > spec.n_max:
        raise RejectedInputError(
            f"window {N} exceeds spectrum window {spec.n_max}", N=N, n_max=spec.n_max)
    n = spec.frequencies
    keep = (np.abs(n) <= N) & (n != 0) & (np.abs(spec.coeffs) > delta)
    return FrequencySet(N, sep_m, tuple(int(a) for a in n[keep]))


def level_set_of(mu, delta: float, N: float, *, sep_m: float = 1.0) -> FrequencySet:
    """Level set straight from a grid measure, for windows of any size."""
    Nf = int(math.floor(N))
    n = np.arange(-Nf, Nf + 1)
    c = np.abs(mu.fourier(n))
    keep = (n != 0) & (c > delta)
    return FrequencySet(N, sep_m, tuple(int(a) for a in n[keep]))


def cover_points(values, M: float) -> CoverReport:
    """Minimal cover of real numbers by open intervals of radius M.

    Left-to-right sweep: the ball opened at the leftmost uncovered x takes
    every point y with y - x < 2M; it is centred at the midpoint of the first
    and last point it takes.  Optimal in one dimension.
    """
    if not M > 0:
        raise RejectedInputError("radius M must be positive", M=M)
    v = np.sort(np.asarray(values, dtype=float))
    centers = []
    i = 0
    n = v.size
    while i < n:
        x = v[i]
        j = i
        while j + 1 < n and v[j + 1] - x < 2 * M:
            j += 1
        centers.append(0.5 * (x + v[j]))
        i = j + 1
    return CoverReport(len(centers), tuple(centers), float(M))


def covering_number(A, M: float) -> CoverReport:
    return cover_points(list(A), M)


def separated_subset(values, M: float) -> list:
    """Greedy maximum subset with consecutive gaps strictly greater than M."""
    if not M > 0:
        raise RejectedInputError("separation M must be positive", M=M)
    out = []
    for x in sorted(values):
        if not out or x - out[-1] > M:
            out.append(x)
    return out


def max_separated_subset(A: FrequencySet, M: float) -> FrequencySet:
    return FrequencySet(A.window_n, M, tuple(separated_subset(A.elements, M)), separated=True)


def neighborhood_union(A, M: float):
    """Merged open intervals (a - M, a + M) and their total length."""
    if not M > 0:
        raise RejectedInputError("radius M must be positive", M=M)
    intervals = []
    for a in sorted(A):
        lo, hi = a - M, a + M
        if intervals and lo < intervals[-1][1]:
            intervals[-1][1] = max(intervals[-1][1], hi)
        else:
            intervals.append([lo, hi])
    total = float(sum(hi - lo for lo, hi in intervals))
    return total, [tuple(iv) for iv in intervals]


def dimension_stat(spec: Spectrum, delta: float, N: float, M: float) -> float:
    """log N(F(mu, delta) n [-N, N]; M) / log(N/M), zero for an empty level set."""
    if not N > M > 0:
        raise RejectedInputError("need N > M > 0", N=N, M=M)
    count = covering_number(level_set(spec, delta, N), M).count
    if count == 0:
        return 0.0
    return math.log(count) / math.log(N / M)
