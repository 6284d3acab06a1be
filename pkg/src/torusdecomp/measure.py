"""Measures on the cyclic grid Z/Q standing in for the circle R/Z.

A point j of the grid is the point j/Q of the circle.  Multiplication by an
integer s maps the grid to itself (j -> s*j mod Q), so pushforwards and the
multiplier random walk are exact and every Fourier identity holds to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import RejectedInputError

MASS_TOL = 1e-12

# Direct summation is used while (window size) * (support size) stays below
# this multiple of Q log Q; beyond that a full FFT is cheaper.
_DIRECT_COST_FACTOR = 4.0


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Nonnegative (sub-)probability weights on Z/Q.

    Parameters
    ----------
    Q : int
        Grid size.
    weights : array_like
        ``Q`` nonnegative finite reals with sum at most ``1 + 1e-12``.
    """

    Q: int
    weights: np.ndarray

    def __post_init__(self):
        Q = int(self.Q)
        if Q < 2:
            raise RejectedInputError("grid size Q must be at least 2", Q=Q)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape != (Q,):
            raise RejectedInputError(
                f"expected {Q} weights, got {w.size}", Q=Q, size=int(w.size))
        if not np.all(np.isfinite(w)):
            raise RejectedInputError("weights must be finite")
        if np.any(w < 0):
            j = int(np.argmin(w))
            raise RejectedInputError(
                f"negative weight {w[j]!r} at index {j}", index=j)
        mass = float(w.sum())
        if mass > 1.0 + MASS_TOL:
            raise RejectedInputError(f"total mass {mass!r} exceeds 1", mass=mass)
        w.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "weights", w)

    @cached_property
    def mass(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights)

    @cached_property
    def _fft(self) -> np.ndarray:
        out = np.fft.fft(self.weights)
        out.setflags(write=False)
        return out

    def fourier(self, freqs) -> np.ndarray:
        """Fourier coefficients at arbitrary integer frequencies.

        The grid coefficients are Q-periodic, so ``freqs`` is reduced mod Q.
        """
        freqs = np.asarray(freqs, dtype=np.int64)
        return self._fft[np.mod(freqs, self.Q)]

    def normalized(self) -> "GridMeasure":
        """Rescale to a probability measure; the zero measure is returned as is."""
        m = self.mass
        if m == 0.0:
            return self
        return GridMeasure(self.Q, self.weights / m)

    def restrict(self, mask) -> "GridMeasure":
        mask = np.asarray(mask, dtype=bool)
        return GridMeasure(self.Q, np.where(mask, self.weights, 0.0))

    def __add__(self, other: "GridMeasure") -> "GridMeasure":
        if other.Q != self.Q:
            raise RejectedInputError("grid sizes differ", left=self.Q, right=other.Q)
        return GridMeasure(self.Q, self.weights + other.weights)

    def points(self) -> np.ndarray:
        """Grid positions j/Q in [0, 1)."""
        return np.arange(self.Q) / self.Q

    def __repr__(self):
        return f"GridMeasure(Q={self.Q}, mass={self.mass:.6g}, support={self.support.size})"


def zero_measure(Q: int) -> GridMeasure:
    return GridMeasure(Q, np.zeros(Q))


def make_measure(kind, Q: int, *, index: int | None = None, components=None,
                 weights=None) -> GridMeasure:
    """Build a measure from a short description.

    ``kind`` is one of ``"uniform"``, ``"dirac"`` (needs ``index``),
    ``"weights"`` (needs ``weights``) or ``"mixture"``; a mixture takes
    ``components``, a list of ``(coefficient, spec)`` pairs where ``spec`` is a
    dict accepted by this function, e.g.
    ``[(0.5, {"kind": "dirac", "index": 0}), (0.5, {"kind": "uniform"})]``.
    """
    Q = int(Q)
    if Q < 2:
        raise RejectedInputError("grid size Q must be at least 2", Q=Q)
    if kind == "uniform":
        return GridMeasure(Q, np.full(Q, 1.0 / Q))
    if kind == "dirac":
        if index is None or not 0 <= int(index) < Q:
            raise RejectedInputError(f"dirac index must lie in [0, {Q})", index=index)
        w = np.zeros(Q)
        w[int(index)] = 1.0
        return GridMeasure(Q, w)
    if kind == "weights":
        if weights is None:
            raise RejectedInputError("weights measure needs a weight list")
        return GridMeasure(Q, weights)
    if kind == "mixture":
        if not components:
            raise RejectedInputError("mixture needs at least one component")
        coeffs = np.array([float(c) for c, _ in components])
        if not np.all(np.isfinite(coeffs)) or np.any(coeffs < 0):
            raise RejectedInputError("mixture coefficients must be finite and nonnegative")
        if abs(coeffs.sum() - 1.0) > 1e-12:
            raise RejectedInputError(
                f"mixture coefficients sum to {coeffs.sum()!r}, not 1")
        total = np.zeros(Q)
        for c, spec in components:
            spec = dict(spec)
            sub = make_measure(spec.pop("kind"), Q, **spec)
            total += float(c) * sub.weights
        return GridMeasure(Q, total)
    raise RejectedInputError(f"unknown measure kind {kind!r}", kind=kind)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients of a measure on the window [-n_max, n_max]."""

    n_max: int
    coeffs: np.ndarray
    source_mass: float
    aliased: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def __call__(self, n):
        n = np.asarray(n)
        if np.any(np.abs(n) > self.n_max):
            raise RejectedInputError(
                f"frequency outside window [-{self.n_max}, {self.n_max}]")
        return self.coeffs[n + self.n_max]

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.coeffs)

    def check_invariants(self, tol: float = 1e-10) -> None:
        c = self.coeffs
        mid = self.n_max
        assert abs(c[mid] - self.source_mass) <= tol
        assert np.all(np.abs(c) <= self.source_mass + tol)
        assert np.allclose(c[::-1], np.conj(c), atol=tol, rtol=0)


def _direct_coeffs(mu: GridMeasure, n_max: int) -> np.ndarray:
    supp = mu.support
    w = mu.weights[supp]
    n = np.arange(n_max + 1)
    out = np.empty(n_max + 1, dtype=complex)
    chunk = max(1, 2_000_000 // max(1, supp.size))
    for start in range(0, n_max + 1, chunk):
        nn = n[start:start + chunk, None]
        # reduce the phase exactly in integers before scaling
        phase = np.mod(nn * supp[None, :], mu.Q) * (-2.0 * np.pi / mu.Q)
        out[start:start + chunk] = np.exp(1j * phase) @ w
    return out


def _fft_coeffs(mu: GridMeasure, n_max: int) -> np.ndarray:
    return mu.fourier(np.arange(n_max + 1))


def spectrum(mu: GridMeasure, n_max: int, method: str = "auto") -> Spectrum:
    """Coefficients sum_j w_j exp(-2 pi i n j / Q) for |n| <= n_max.

    ``method`` is ``"auto"``, ``"direct"`` or ``"fft"``; both paths agree to
    1e-10.  A window reaching Q is allowed but flagged as aliased.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise RejectedInputError("n_max must be at least 1", n_max=n_max)
    if method == "auto":
        cost = (n_max + 1) * max(1, mu.support.size)
        method = "direct" if cost < _DIRECT_COST_FACTOR * mu.Q * math.log2(mu.Q) else "fft"
    if method == "direct":
        half = _direct_coeffs(mu, n_max)
    elif method == "fft":
        half = _fft_coeffs(mu, n_max)
    else:
        raise RejectedInputError(f"unknown spectrum method {method!r}")
    half = np.array(half, dtype=complex)
    half[0] = mu.mass
    coeffs = np.concatenate([np.conj(half[:0:-1]), half])
    aliased = n_max >= mu.Q
    meta = {"method": method}
    if aliased:
        meta["warning"] = f"n_max={n_max} >= Q={mu.Q}: coefficients repeat with period Q"
    coeffs.setflags(write=False)
    return Spectrum(n_max, coeffs, mu.mass, aliased, meta)


def pushforward(mu: GridMeasure, s: int) -> GridMeasure:
    """Image of ``mu`` under x -> s x on the grid."""
    s = int(s)
    if s < 1:
        raise RejectedInputError("multiplier must be a positive integer", s=s)
    idx = (np.arange(mu.Q, dtype=np.int64) * s) % mu.Q
    return GridMeasure(mu.Q, np.bincount(idx, weights=mu.weights, minlength=mu.Q))


def _elements(S) -> list[int]:
    elems = getattr(S, "elements", S)
    return [int(s) for s in elems]


def walk_step(mu: GridMeasure, S) -> GridMeasure:
    """One step of the multiplier walk: the average of the pushforwards."""
    elems = _elements(S)
    if not elems:
        raise RejectedInputError("multiplier set is empty")
    Q = mu.Q
    j = np.arange(Q, dtype=np.int64)
    acc = np.zeros(Q)
    for s in elems:
        acc += np.bincount((j * s) % Q, weights=mu.weights, minlength=Q)
    return GridMeasure(Q, acc / len(elems))


def walk_power(mu: GridMeasure, S, n: int) -> GridMeasure:
    n = int(n)
    if n < 0:
        raise RejectedInputError("walk length must be nonnegative", n=n)
    out = mu
    for _ in range(n):
        out = walk_step(out, S)
    return out


def walk_sequence(mu: GridMeasure, S, n: int) -> list[GridMeasure]:
    """[mu_0, mu_1, ..., mu_n] with mu_k the k-step walk measure."""
    seq = [mu]
    for _ in range(int(n)):
        seq.append(walk_step(seq[-1], S))
    return seq


def split_by_union(mu: GridMeasure, region) -> tuple[GridMeasure, GridMeasure]:
    """Return (mu off the region, mu on the region); they sum to mu exactly."""
    mask = region_mask(mu.Q, region)
    inside = np.where(mask, mu.weights, 0.0)
    outside = np.where(mask, 0.0, mu.weights)
    return GridMeasure(mu.Q, outside), GridMeasure(mu.Q, inside)


def region_mask(Q: int, region) -> np.ndarray:
    """Boolean mask from a mask or an iterable of grid indices."""
    if isinstance(region, np.ndarray) and region.dtype == bool:
        if region.shape != (Q,):
            raise RejectedInputError("region mask has the wrong length")
        return region
    idx = np.fromiter((int(i) for i in region), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= Q):
        raise RejectedInputError(f"region indices must lie in [0, {Q})")
    mask = np.zeros(Q, dtype=bool)
    mask[idx] = True
    return mask


def torus_distance(x, y):
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


def ball_mask(Q: int, centers: Iterable[int], radius: float) -> np.ndarray:
    """Grid points at torus distance strictly less than ``radius`` from a center.

    Centers are grid indices; the strict inequality is decided on integer
    offsets so it is not blurred by rounding.
    """
    centers = [int(c) for c in centers]
    mask = np.zeros(Q, dtype=bool)
    kmax = _max_offset(Q, radius)
    if kmax < 0 or not centers:
        return mask
    if 2 * kmax + 1 >= Q:
        mask[:] = True
        return mask
    offsets = np.arange(-kmax, kmax + 1)
    for c in centers:
        mask[(c + offsets) % Q] = True
    return mask


def _max_offset(Q: int, radius: float) -> int:
    """Largest integer k with k/Q < radius (``-1`` if none)."""
    rq = radius * Q
    k = int(math.ceil(rq)) - 1
    # guard the rounding of radius * Q
    while k + 1 < rq and (k + 1) / Q < radius:
        k += 1
    while k >= 0 and not k / Q < radius:
        k -= 1
    return k


def interval_union_mass(mu: GridMeasure, centers: Sequence[int], radius: float) -> float:
    """Mass of the union of open balls, by merging index intervals.

    Written independently of :func:`ball_mask`: the intervals are cut at the
    wrap point and merged with a difference array, so overlapping balls are
    counted once.
    """
    Q = mu.Q
    kmax = _max_offset(Q, radius)
    if kmax < 0 or len(centers) == 0:
        return 0.0
    if 2 * kmax + 1 >= Q:
        return mu.mass
    diff = np.zeros(Q + 1, dtype=np.int64)
    for c in centers:
        lo, hi = int(c) - kmax, int(c) + kmax
        if lo < 0:
            diff[lo + Q] += 1
            diff[Q] -= 1
            lo = 0
        if hi >= Q:
            diff[0] += 1
            diff[hi - Q + 1] -= 1
            hi = Q - 1
        diff[lo] += 1
        diff[hi + 1] -= 1
    covered = np.cumsum(diff[:Q]) > 0
    return float(mu.weights[covered].sum())
