"""Multiplier sets S inside [L, 2L] and their interval regularity constant."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RejectedInputError


@dataclass(frozen=True)
class MultiplierSet:
    L: int
    elements: tuple

    def __post_init__(self):
        L = int(self.L)
        elems = tuple(int(e) for e in self.elements)
        if L < 1:
            raise RejectedInputError("scale L must be positive", L=L)
        if not elems:
            raise RejectedInputError("multiplier set is empty")
        if any(b <= a for a, b in zip(elems, elems[1:])):
            raise RejectedInputError("elements must be strictly increasing")
        if elems[0] < L or elems[-1] > 2 * L:
            raise RejectedInputError(
                f"elements must lie in [{L}, {2 * L}]", low=elems[0], high=elems[-1])
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "elements", elems)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def max(self) -> int:
        return self.elements[-1]

    def as_array(self) -> np.ndarray:
        return np.array(self.elements, dtype=np.int64)


def generate(kind: str, L: int, *, beta: float | None = None, seed: int | None = None,
             step: int | None = None) -> MultiplierSet:
    """Instance generator.

    ``random`` draws ceil(L**beta) distinct integers of [L, 2L] from
    ``numpy.random.default_rng(seed)``; ``full`` is the whole interval;
    ``progression`` is L, L+step, ...; ``dyadic_lacunary`` is L together with
    L + 2**j for 2**j <= L.
    """
    L = int(L)
    if L < 2:
        raise RejectedInputError("scale L must be at least 2", L=L)
    if kind == "full":
        return MultiplierSet(L, range(L, 2 * L + 1))
    if kind == "progression":
        if step is None or int(step) < 1:
            raise RejectedInputError("progression needs a positive step", step=step)
        return MultiplierSet(L, range(L, 2 * L + 1, int(step)))
    if kind == "dyadic_lacunary":
        elems = {L}
        j = 0
        while 2 ** j <= L:
            elems.add(L + 2 ** j)
            j += 1
        return MultiplierSet(L, sorted(elems))
    if kind == "random":
        if beta is None or not 0 < beta <= 1:
            raise RejectedInputError("random multipliers need 0 < beta <= 1", beta=beta)
        if seed is None:
            raise RejectedInputError("random multipliers need a seed")
        size = math.ceil(L ** beta - 1e-12)
        if size > L + 1:
            raise RejectedInputError(
                f"cannot draw {size} distinct elements from [{L}, {2 * L}]", size=size)
        rng = np.random.default_rng(seed)
        picks = rng.choice(L + 1, size=size, replace=False) + L
        return MultiplierSet(L, sorted(int(p) for p in picks))
    raise RejectedInputError(f"unknown multiplier kind {kind!r}", kind=kind)


@dataclass(frozen=True)
class RegularityCertificate:
    lam: float
    scale_r: float
    c_tilde: float
    witness: tuple  # (left endpoint, length)
    witness_count: int

    def as_dict(self):
        return {"lambda": self.lam, "scale_r": self.scale_r, "c_tilde": self.c_tilde,
                "witness": list(self.witness), "witness_count": self.witness_count}


def interval_count(S: MultiplierSet, left: float, length: float) -> int:
    """Number of elements in the closed interval [left, left + length]."""
    a = S.as_array()
    return int(np.count_nonzero((a >= left) & (a <= left + length)))


def regularity_constant(S: MultiplierSet, lam: float, scale_r: float = 1.0) -> RegularityCertificate:
    """Smallest C with |I n S| <= C (|I|/L)^lam |S| for intervals I in [L, 2L], |I| >= r.

    For an interval meeting the elements s_i..s_j only its length matters and
    it is at least max(s_j - s_i, r); so the supremum is the maximum over
    element pairs of (j-i+1)/|S| * (L / max(s_j - s_i, r))**lam.  An
    interval of that length placed at s_i (or flush right) realises it.
    Scales below 1 add nothing for integer sets beyond scale 1.
    """
    lam = float(lam)
    r = float(scale_r)
    L = S.L
    if not lam > 0:
        raise RejectedInputError("lambda must be positive", lam=lam)
    if not 1.0 <= r <= L:
        raise RejectedInputError(f"scale must lie in [1, {L}]", scale_r=r)
    a = S.as_array().astype(float)
    n = a.size
    i, j = np.triu_indices(n)
    length = np.maximum(a[j] - a[i], r)
    value = (j - i + 1) / n * (L / length) ** lam
    best = value.max()
    # lexicographically smallest (left endpoint, length) among the maximisers
    cand = np.flatnonzero(value >= best * (1 - 1e-12))
    lefts = np.minimum(a[i[cand]], 2 * L - length[cand])
    order = np.lexsort((length[cand], lefts))
    k = cand[order[0]]
    left = float(min(a[i[k]], 2 * L - length[k]))
    wlen = float(length[k])
    count = interval_count(S, left, wlen)
    c_tilde = count / n * (L / wlen) ** lam
    return RegularityCertificate(lam, r, float(max(c_tilde, best)), (left, wlen), count)


def is_regular(S: MultiplierSet, c_tilde: float, lam: float, scale_r: float = 1.0) -> bool:
    return c_tilde >= regularity_constant(S, lam, scale_r).c_tilde
