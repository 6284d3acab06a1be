"""Granule extraction: from many large Fourier coefficients to a separated
point family whose small balls carry a guaranteed share of the measure.

Everything lives on the grid Z/Q. The window bump F is a self-convolution of
a product of two boxes, so its coefficients are squares and never negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .addcomb import phase_bucket
from .errors import InternalAssertionError, RejectedInputError
from .measure import GridMeasure, ball_mask, interval_union_mass
from .spectral_sets import cover_points, separated_subset

EPS_WINDOW = 0.1
# 10 times the largest strictly 1-separated subset of [-1, 1], which has 2 points
C2 = 10 * 2
MASS_EXP = 16


def max_separated_in_interval(half_width: float = 1.0, sep: float = 1.0) -> int:
    """Largest number of points in [-w, w] with pairwise gaps > sep.

    Gaps strictly above ``sep`` fit k points iff (k - 1) sep < 2w.
    """
    k = 1
    while k * sep < 2 * half_width:
        k += 1
    return k


@dataclass(frozen=True, eq=False)
class WindowBump:
    n_window: float
    grid_q: int
    samples: np.ndarray
    spectrum: np.ndarray
    c1: float
    support: int  # radius in grid steps
    widths: tuple

    @property
    def width(self) -> int:
        return self.support

    def as_dict(self):
        return {"n_window": self.n_window, "grid_q": self.grid_q, "c1": self.c1,
                "support": self.support, "widths": list(self.widths),
                "min_spectrum": float(self.spectrum.min()),
                "min_window_spectrum": _window_min(self.spectrum, self.n_window)}


def _window_min(spec, N):
    Q = spec.size
    a = np.arange(-int(math.floor(N)), int(math.floor(N)) + 1)
    return float(spec[np.mod(a, Q)].min())


def _box_hat(k: int, Q: int) -> np.ndarray:
    """Coefficients of the normalized indicator of {-k, ..., k} on Z/Q."""
    box = np.zeros(Q)
    box[np.r_[0:k + 1, Q - k:Q] if k else [0]] = 1.0
    return np.real(np.fft.fft(box)) / (2 * k + 1)


def build_window_bump(N: float, Q: int, eps: float = EPS_WINDOW) -> WindowBump:
    """F = F2 * F2 with F2 the convolution of two boxes of half-widths
    about 0.7 eps Q/N and 0.3 eps Q/N grid steps; grid integral 1.

    Certifies nonnegativity of samples and coefficients, coefficients >= 1/2 on
    [-N, N], support inside the 1/N ball, and records C1 = max F / N.
    """
    Q = int(Q)
    if not N >= 1:
        raise RejectedInputError("window N must be at least 1", N=N)
    if not Q >= 16 * N:
        raise RejectedInputError("grid too coarse: need Q >= 16 N", Q=Q, N=N)
    k1 = int(math.floor(0.7 * eps * Q / N))
    k2 = int(math.floor(0.3 * eps * Q / N))
    f2_hat = _box_hat(k1, Q) * _box_hat(k2, Q)
    spec = f2_hat ** 2
    samples = np.real(np.fft.ifft(spec)) * Q
    support = 2 * (k1 + k2)
    offs = np.minimum(np.arange(Q), Q - np.arange(Q))
    samples[offs > support] = 0.0
    samples = np.maximum(samples, 0.0)
    samples = samples / (samples.sum() / Q)
    if support * N >= Q:
        raise InternalAssertionError("window bump leaves the 1/N ball", support=support)
    if spec.min() < 0:
        raise InternalAssertionError("negative window coefficient")
    a = np.arange(-int(math.floor(N)), int(math.floor(N)) + 1)
    low = spec[np.mod(a, Q)]
    if low.min() < 0.5:
        bad = int(a[int(np.argmin(low))])
        raise InternalAssertionError(
            f"window coefficient below 1/2 at frequency {bad}", frequency=bad,
            value=float(low.min()))
    c1 = float(samples.max() / N)
    return WindowBump(float(N), Q, samples, spec, c1, support, (k1, k2))


@dataclass
class GranulationTrace:
    cube_scale: float
    cubes: dict
    selected: list
    theta: float
    constants: dict
    info: dict = field(default_factory=dict)

    def as_dict(self):
        return {"cube_scale": self.cube_scale, "selected": self.selected,
                "theta": self.theta, "constants": self.constants, "info": self.info,
                "cubes": {k: np.asarray(v).tolist() for k, v in self.cubes.items()}}


@dataclass
class GranuleFamily:
    Q: int
    points: list
    sep: float
    radius: float
    captured_mass: float
    trace: GranulationTrace | None = None

    def to_json(self):
        return {"points": [int(p) for p in self.points], "sep": self.sep,
                "radius": self.radius, "mass": self.captured_mass, "Q": self.Q}

    def region(self) -> np.ndarray:
        return ball_mask(self.Q, self.points, self.radius)


def hypothesis_cover(mu: GridMeasure, N: float, M: float, t: float):
    """(covering number, frequencies) of {a in [-N, N] : |mu^(a)| > t}.

    The window is the full ball around 0, frequency 0 included.
    """
    Nf = int(math.floor(N))
    a = np.arange(-Nf, Nf + 1)
    big = a[np.abs(mu.fourier(a)) > t]
    return cover_points(big, M).count, big


def _ball_masses(mu: GridMeasure, M: int) -> np.ndarray:
    """mu(B(c_i, 1/M)) for the cube centers c_i = (i + 1/2)/M, open balls."""
    Q = mu.Q
    i = np.arange(M, dtype=np.int64)
    # j/Q in ((2i - 1)/(2M), (2i + 3)/(2M)) in exact integer arithmetic
    lo = (Q * (2 * i - 1)) // (2 * M) + 1
    hi = -((-Q * (2 * i + 3)) // (2 * M)) - 1
    cum = np.concatenate([[0.0], np.cumsum(np.tile(mu.weights, 3))])
    out = cum[hi + Q + 1] - cum[lo + Q]
    full = hi - lo + 1 >= Q
    out[full] = mu.mass
    return out


def granulate(mu: GridMeasure, N: float, M: int, t: float, s: float, *,
              bump: WindowBump | None = None) -> GranuleFamily:
    """A 1/M-separated family X with mu(union of B(x, 1/N)) > (ts)^3/(2^16 C3^3).

    Steps: M-separated large coefficients, phase alignment, the smoothed
    density g of mu * F, cube statistics G_i and H_i, selection of cubes with
    sqrt(H_i) > ts/(2^5 C3), the argmax of g in each, then the best of the
    alternating cube classes (three classes when M is odd, since cube M-1
    touches cube 0 on the torus).
    """
    Q = mu.Q
    if int(M) != M or M < 1:
        raise RejectedInputError("cube count M must be a positive integer", M=M)
    M = int(M)
    if not (t > 0 and s > 0):
        raise RejectedInputError("t and s must be positive", t=t, s=s)
    if N < M:
        raise RejectedInputError("need N >= M", N=N, M=M)
    bump = bump or build_window_bump(N, Q)
    if bump.grid_q != Q or bump.n_window != float(N):
        raise RejectedInputError("window bump built for another grid or window")
    # every point within the bump radius of cube i must lie in B(c_i, 1/M)
    if not Q / (2 * M) + bump.support < Q / M:
        raise RejectedInputError("bump too wide for the cube scale", N=N, M=M)
    cover, freqs = hypothesis_cover(mu, N, M, t)
    if not cover > s * N / M:
        raise RejectedInputError(
            f"hypothesis fails: covering number {cover} <= s N/M = {s * N / M}",
            cover=cover, bound=s * N / M)

    a_tilde = np.array(separated_subset(freqs.tolist(), M), dtype=np.int64)
    keep, theta = phase_bucket(mu.fourier(a_tilde))
    A = a_tilde[keep]

    g = np.real(np.fft.ifft(np.fft.fft(mu.weights) * bump.spectrum)) * Q
    g = np.maximum(g, 0.0)
    c3 = math.sqrt(bump.c1 * C2)
    level = t * s / (2 ** 5 * c3)

    cube_of = (np.arange(Q, dtype=np.int64) * M) // Q
    starts = np.searchsorted(cube_of, np.arange(M))
    G = np.maximum.reduceat(g, starts)
    arg = np.array([s0 + int(np.argmax(g[s0:e0]))
                    for s0, e0 in zip(starts, np.r_[starts[1:], Q])])
    ball = _ball_masses(mu, M)
    denom = bump.c1 * N * ball
    H = np.where(denom > 0, G / np.where(denom > 0, denom, 1.0), 0.0)
    if H.max(initial=0.0) > 1 + 1e-9:
        raise InternalAssertionError("density ratio above 1", worst=float(H.max()))
    selected = np.flatnonzero(np.sqrt(H) > level)

    if M % 2 == 0:
        cls = selected % 2
    else:
        cls = np.where(selected == M - 1, 2, selected % 2)
    radius = 1.0 / N
    best, best_pts, class_mass = -1.0, [], []
    for c in range(3):
        pts = arg[selected[cls == c]].tolist()
        m = interval_union_mass(mu, pts, radius) if pts else 0.0
        class_mass.append(m)
        if m > best:
            best, best_pts = m, pts
    bound = (t * s) ** 3 / (2 ** MASS_EXP * c3 ** 3)
    trace = GranulationTrace(
        1.0 / M,
        {"center": (np.arange(M) + 0.5) / M, "ball_mass": ball, "G": G, "H": H,
         "argmax": arg},
        selected.tolist(), theta,
        {"C1": bump.c1, "C2": C2, "C3": c3, "level": level, "bound": bound},
        {"cover": cover, "a_tilde": int(a_tilde.size), "a_aligned": int(A.size),
         "class_mass": class_mass, "t": t, "s": s, "N": float(N), "M": M,
         "bump": bump.as_dict()})
    fam = GranuleFamily(Q, sorted(best_pts), 1.0 / M, radius, float(best), trace)
    if not _separated(fam.points, Q, 1.0 / M):
        raise InternalAssertionError("granule family is not 1/M-separated")
    if not best > bound:
        raise InternalAssertionError("captured mass below the guaranteed bound",
                                     mass=best, bound=bound)
    return fam


def _separated(points, Q, sep) -> bool:
    p = np.sort(np.asarray(points, dtype=np.int64))
    if p.size < 2:
        return True
    gaps = np.diff(np.r_[p, p[0] + Q])
    return bool(gaps.min() / Q > sep)


def verify_family(fam: GranuleFamily, mu: GridMeasure) -> dict:
    """Recheck separation, union mass and the mass bound from raw data."""
    checks = {}
    p = np.asarray(fam.points, dtype=np.int64)
    if p.size > 1:
        d = np.abs(np.subtract.outer(p, p)) % fam.Q
        d = np.minimum(d, fam.Q - d) / fam.Q
        np.fill_diagonal(d, np.inf)
        checks["min_distance"] = float(d.min())
    else:
        checks["min_distance"] = math.inf
    checks["separated"] = checks["min_distance"] > fam.sep
    recount = float(mu.weights[ball_mask(fam.Q, fam.points, fam.radius)].sum())
    checks["mass_recount"] = recount
    checks["mass_matches"] = abs(recount - fam.captured_mass) <= 1e-12
    if fam.trace is not None:
        bound = fam.trace.constants["bound"]
        checks["bound"] = bound
        checks["bound_holds"] = recount > bound
    checks["ok"] = all(v for k, v in checks.items() if isinstance(v, bool))
    return checks
