"""Additive combinatorics on frequency sets.

Markov selection, the Ruzsa triangle inequality, a constructive
Balog-Szemeredi-Gowers style extraction certified by path counts, the
Fourier-side BSG pipeline, and extraction of regular subsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ExtractionFailed, HypothesisError, InternalAssertionError,
                     RejectedInputError)
from .measure import Spectrum
from .spectral_sets import (FrequencySet, cover_points, covering_number, level_set,
                            separated_subset)

# Constants of the Fourier BSG chain, kept symbolic so traces can report slack.
BSG_PATH_EXP = 12
BSG_COVER_EXP = 105
# |A1| >= C_SIZE |A0| delta^4: n/(16 K^2) with K <= 32/delta^2, |Abar| >= |A0|/4,
# and half of A' landing on floor cells.
C_SIZE = 2.0 ** -17


# ---------------------------------------------------------------------------
# Markov and Ruzsa


def markov_select(values, alpha: float) -> np.ndarray:
    """Indices i with values[i] >= alpha/2, given sum(values) >= alpha*n.

    The hypothesis is checked; the conclusion |result| >= (alpha/2) n is
    asserted.
    """
    v = np.asarray(values, dtype=float)
    if not 0.0 <= alpha <= 1.0:
        raise RejectedInputError("alpha must lie in [0, 1]", alpha=alpha)
    if v.size and (v.min() < 0.0 or v.max() > 1.0):
        raise RejectedInputError("values must lie in [0, 1]")
    n = v.size
    total = float(v.sum())
    if total < alpha * n - 1e-12 * max(n, 1):
        raise HypothesisError(
            f"sum of values {total} is below alpha*n = {alpha * n} "
            f"(deficit {alpha * n - total})", deficit=alpha * n - total)
    idx = np.flatnonzero(v >= alpha / 2)
    if idx.size < alpha / 2 * n - 1e-9:
        raise InternalAssertionError("Markov selection smaller than alpha n / 2",
                                     size=int(idx.size), bound=alpha / 2 * n)
    return idx


def difference_set(A, B) -> np.ndarray:
    a = np.asarray(sorted(A), dtype=np.int64)
    b = np.asarray(sorted(B), dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.subtract.outer(a, b).ravel())


def ruzsa_bound_check(A, B, C):
    """(|A-B|, |A-C||B-C|/|C|, lhs <= rhs)."""
    C = list(C)
    if not C:
        raise RejectedInputError("C must be non-empty")
    lhs = int(difference_set(A, B).size)
    rhs = difference_set(A, C).size * difference_set(B, C).size / len(C)
    return lhs, rhs, lhs <= rhs


# ---------------------------------------------------------------------------
# Bipartite graphs and BSG refinement


@dataclass(frozen=True)
class BipartiteGraph:
    part_a: tuple
    part_b: tuple
    edges: frozenset

    def __post_init__(self):
        pa, pb = tuple(self.part_a), tuple(self.part_b)
        if len(set(pa)) != len(pa) or len(set(pb)) != len(pb):
            raise RejectedInputError("vertex labels must be distinct within a part")
        edges = frozenset((a, b) for a, b in self.edges)
        sa, sb = set(pa), set(pb)
        for a, b in edges:
            if a not in sa or b not in sb:
                raise RejectedInputError(f"edge ({a}, {b}) leaves the vertex sets")
        object.__setattr__(self, "part_a", pa)
        object.__setattr__(self, "part_b", pb)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_adjacency(cls, adj, part_a=None, part_b=None):
        adj = np.asarray(adj, dtype=bool)
        pa = tuple(range(adj.shape[0])) if part_a is None else tuple(part_a)
        pb = tuple(range(adj.shape[1])) if part_b is None else tuple(part_b)
        rows, cols = np.nonzero(adj)
        return cls(pa, pb, frozenset((pa[i], pb[j]) for i, j in zip(rows, cols)))

    def adjacency(self) -> np.ndarray:
        ia = {a: i for i, a in enumerate(self.part_a)}
        ib = {b: j for j, b in enumerate(self.part_b)}
        adj = np.zeros((len(self.part_a), len(self.part_b)), dtype=bool)
        for a, b in self.edges:
            adj[ia[a], ib[b]] = True
        return adj


def path3_counts(adj) -> np.ndarray:
    """Number of paths a - b1 - a1 - b for every (a, b), i.e. G G^T G.

    Products run in float64, exact for counts below 2**53.
    """
    g = np.asarray(adj, dtype=float)
    return np.rint((g @ g.T) @ g).astype(np.int64)


@dataclass(frozen=True)
class Path3Certificate:
    n: int
    K: float
    size_a: int
    size_b: int
    edges_between: int
    min_paths: int
    path_threshold: float
    restart: int

    def as_dict(self):
        return dict(self.__dict__)


def _check_bsg(adj, paths, ra, rb, n, K, thr):
    """Conclusions of the BSG theorem for row mask ra and column mask rb."""
    sa, sb = int(ra.sum()), int(rb.sum())
    if sa < n / (16 * K * K) or sb < n / (4 * K) or sa == 0 or sb == 0:
        return None
    e = int(adj[np.ix_(ra, rb)].sum())
    if 4 * K * e < sa * sb * (1 - 1e-12):
        return None
    pmin = int(paths[np.ix_(ra, rb)].min())
    if pmin < thr:
        return None
    return sa, sb, e, pmin


def _repair(paths, ra, rb, thr):
    """Drop the vertex carrying the most under-threshold pairs until none remain."""
    ra, rb = ra.copy(), rb.copy()
    while ra.any() and rb.any():
        bad = paths[np.ix_(ra, rb)] < thr
        if not bad.any():
            break
        rows, cols = bad.sum(axis=1), bad.sum(axis=0)
        if rows.max() >= cols.max():
            ra[np.flatnonzero(ra)[int(rows.argmax())]] = False
        else:
            rb[np.flatnonzero(rb)[int(cols.argmax())]] = False
    return ra, rb


def bsg_refine(g: BipartiteGraph, K: float, *, seed: int = 0, restarts: int = 32):
    """Find A' in A, B' in B meeting the three conclusions of the BSG theorem.

    Start from the degree-pruned graph, then from seeded neighbourhoods of
    random B-vertices; each start is repaired by removing vertices until every
    pair carries n^2/(2^12 K^5) paths of length 3. The first start meeting all
    conclusions wins.

    Returns
    -------
    (a_prime, b_prime, Path3Certificate)
    """
    adj = g.adjacency()
    n = len(g.part_a)
    if len(g.part_b) > n:
        raise RejectedInputError("need |B| <= |A|", size_a=n, size_b=len(g.part_b))
    if not K > 0:
        raise RejectedInputError("K must be positive", K=K)
    n_edges = int(adj.sum())
    if n_edges * K < n * n * (1 - 1e-12):
        raise RejectedInputError(
            f"edge count {n_edges} is below n^2/K = {n * n / K}", edges=n_edges, K=K)
    paths = path3_counts(adj)
    thr = n * n / (2.0 ** BSG_PATH_EXP * K ** 5)
    deg_a, deg_b = adj.sum(axis=1), adj.sum(axis=0)
    rng = np.random.default_rng(seed)
    for attempt in range(restarts):
        if attempt == 0:
            ra = deg_a >= n_edges / (2 * n)
            rb = deg_b >= n_edges / (2 * n)
        else:
            weights = deg_b / deg_b.sum()
            b0 = int(rng.choice(len(g.part_b), p=weights))
            ra = adj[:, b0].copy()
            rb = adj[ra].sum(axis=0) >= ra.sum() / (2 * K)
        ra, rb = _repair(paths, ra, rb, thr)
        ok = _check_bsg(adj, paths, ra, rb, n, K, thr)
        if ok is None:
            continue
        sa, sb, e, pmin = ok
        cert = Path3Certificate(n, float(K), sa, sb, e, pmin, thr, attempt)
        a_prime = [g.part_a[i] for i in np.flatnonzero(ra)]
        b_prime = [g.part_b[j] for j in np.flatnonzero(rb)]
        return a_prime, b_prime, cert
    raise ExtractionFailed(f"BSG refinement found no valid pair after {restarts} starts",
                           n=n, K=float(K), edges=n_edges)


# ---------------------------------------------------------------------------
# Fourier BSG


@dataclass
class BsgExtraction:
    a1: FrequencySet
    theta: float
    intermediates: dict
    r_bound: float
    constants: dict = field(default_factory=dict)

    def as_dict(self):
        return {"a1": self.a1.to_json(), "theta": self.theta, "r_bound": self.r_bound,
                "intermediates": self.intermediates, "constants": self.constants}


def _floor_cells(values, M):
    return np.floor(np.asarray(values, dtype=float) / M).astype(np.int64)


def phase_bucket(coeffs):
    """Largest of four half-open phase quadrants and its rotation angle.

    Quadrant q holds arguments in [q pi/2, (q+1) pi/2); rotating by
    theta = -(q pi/2 + pi/4) brings it into [-pi/4, pi/4).
    """
    arg = np.mod(np.angle(coeffs), 2 * np.pi)
    q = np.minimum((arg // (np.pi / 2)).astype(int), 3)
    counts = np.bincount(q, minlength=4)
    best = int(np.argmax(counts))
    theta = -(best * np.pi / 2 + np.pi / 4)
    return q == best, float(np.mod(theta, 2 * np.pi))


def fourier_bsg(spec: Spectrum, a0: FrequencySet, N: float, M: float, delta: float,
                R: float, *, seed: int = 0) -> BsgExtraction:
    """Subset A1 of a0 with aligned coefficients and small difference set.

    The spectrum must cover [-2N, 2N]. Every intermediate inequality of the
    construction is checked and stored in ``intermediates``.
    """
    if not (M > 0 and N > 0 and delta > 0 and R > 0):
        raise RejectedInputError("N, M, delta, R must be positive")
    if spec.n_max < 2 * N:
        raise RejectedInputError("spectrum window must reach 2N", n_max=spec.n_max, N=N)
    if spec.source_mass > 1 + 1e-12:
        raise RejectedInputError("measure mass exceeds 1")
    elems = a0.as_array()
    if elems.size == 0:
        raise RejectedInputError("a0 is empty")
    if np.any(np.diff(elems) <= M):
        raise HypothesisError(f"a0 is not {M}-separated")
    big = set(level_set(spec, delta, N).elements)
    outside = [int(a) for a in elems if int(a) not in big]
    if outside:
        raise HypothesisError("a0 is not inside the level set", outside=outside[:10])

    small = level_set(spec, delta ** 2 / 8, 2 * N)
    cover = covering_number(small, M).count
    if cover > R * len(a0) * (1 + 1e-12):
        raise HypothesisError(
            f"covering number {cover} exceeds R |a0| = {R * len(a0)}",
            cover=cover, bound=R * len(a0))

    # phase alignment
    c0 = spec(elems)
    keep, theta = phase_bucket(c0)
    A = elems[keep]
    cA = c0[keep]
    rot = np.real(np.exp(1j * theta) * cA)
    if not (4 * A.size >= elems.size and np.all(rot > delta / 2)):
        raise InternalAssertionError("phase bucket lost its guarantees")

    # edges over A x A; the diagonal counts with coefficient mass
    diff = np.subtract.outer(A, A)
    E = np.real(spec(diff.ravel())).reshape(diff.shape) > delta ** 2 / 8
    n_e = int(E.sum())
    if n_e < delta ** 2 / 8 * A.size ** 2 * (1 - 1e-12):
        raise InternalAssertionError("edge density below delta^2/8", edges=n_e)

    # truncations, in units of M
    fa = _floor_cells(A, M)
    abar = np.union1d(fa, fa + 1)
    fh = _floor_cells(small.as_array(), M)
    hcells = np.union1d(np.union1d(fh, fh + 1), [0])
    if not A.size <= abar.size <= 2 * A.size:
        raise InternalAssertionError("truncated set size out of [|A|, 2|A|]")
    if hcells.size > 4 * cover + 1:
        raise InternalAssertionError("truncated level set too large", h=int(hcells.size))

    dcell = np.subtract.outer(abar, abar)
    ebar = np.isin(dcell, hcells)
    n_ebar = int(ebar.sum())
    if n_ebar < n_e:
        raise InternalAssertionError("truncated edge count dropped", ebar=n_ebar, e=n_e)

    nbar = abar.size
    K = nbar ** 2 / n_ebar
    graph = BipartiteGraph.from_adjacency(ebar, abar.tolist(), abar.tolist())
    a_prime, b_prime, cert = bsg_refine(graph, K, seed=seed)

    # path counting: each difference of A' - B' owns min_paths triples in H^3
    apb = difference_set(a_prime, b_prime)
    if apb.size * cert.min_paths > hcells.size ** 3:
        raise InternalAssertionError("path count bound violated",
                                     diffs=int(apb.size), paths=cert.min_paths)
    lhs, rhs, holds = ruzsa_bound_check(a_prime, a_prime, b_prime)
    if not holds:
        raise InternalAssertionError("Ruzsa inequality failed", lhs=lhs, rhs=rhs)

    cells = set(a_prime)
    a1 = np.array([a for a, c in zip(A, fa) if int(c) in cells], dtype=np.int64)
    if a1.size == 0:
        raise ExtractionFailed("pullback of the refined set is empty",
                               a_prime=len(a_prime))
    a1_set = FrequencySet(a0.window_n, M, tuple(a1.tolist()), separated=True)

    mean = complex(np.mean(spec(a1)))
    if abs(mean) < delta / 2:
        raise InternalAssertionError("alignment below delta/2", mean_abs=abs(mean))
    cover_bound = 2.0 ** BSG_COVER_EXP * R ** 6 * delta ** -8 * len(a0)
    cover_a1 = covering_number(difference_set(a1, a1).tolist(), M).count
    if not cover_a1 < cover_bound:
        raise InternalAssertionError("difference-set covering bound failed",
                                     cover=cover_a1, bound=cover_bound)
    size_bound = C_SIZE * len(a0) * delta ** 4
    if a1.size < size_bound:
        raise ExtractionFailed("refined set is smaller than the size guarantee",
                               size=int(a1.size), bound=size_bound)

    inter = {
        "size_a0": len(a0), "size_a": int(A.size), "size_abar": int(nbar),
        "size_h": int(hcells.size), "h_bound": 16 * R * nbar,
        "h_within_bound": bool(hcells.size <= 16 * R * nbar),
        "edges": n_e, "edges_bar": n_ebar, "K": K,
        "size_a_prime": len(a_prime), "size_b_prime": len(b_prime),
        "a_prime_minus_b_prime": int(apb.size),
        "a_prime_minus_a_prime": lhs, "ruzsa_rhs": rhs,
        "path_certificate": cert.as_dict(),
        "cover_small_level_set": cover, "cover_a1_diff": cover_a1,
        "alignment": abs(mean), "size_a1": int(a1.size),
        "abar_cells": abar.tolist(), "h_cells": hcells.tolist(),
        "a_prime_cells": [int(c) for c in a_prime],
        "b_prime_cells": [int(c) for c in b_prime],
    }
    constants = {
        "cover_bound": cover_bound, "size_bound": size_bound, "c_size": C_SIZE,
        "cover_exp": BSG_COVER_EXP, "path_exp": BSG_PATH_EXP,
        # the weaker delta^2 size claim, recorded for comparison only
        "size_claim_delta2": len(a0) * delta ** 2,
    }
    return BsgExtraction(a1_set, theta, inter, float(R), constants)


# ---------------------------------------------------------------------------
# Regular subsets


@dataclass
class RegularSubsetReport:
    n1: float
    subset: FrequencySet
    c_reg: float
    alpha_reg: float
    scale: float
    window_n: float = 0.0
    alpha_fit: float = float("nan")
    pruned: int = 0
    windows_tried: list = field(default_factory=list)

    def as_dict(self):
        return {"n1": self.n1, "subset": self.subset.to_json(), "c_reg": self.c_reg,
                "alpha_reg": self.alpha_reg, "scale": self.scale,
                "window_n": self.window_n, "alpha_fit": self.alpha_fit,
                "pruned": self.pruned, "windows_tried": self.windows_tried}


def regularity_sup(points, alpha: float, M: float):
    """Supremum over x in B, s >= M of rho(B(x, s)) (s/diam)^-alpha.

    rho is uniform on ``points`` and balls are open. The ball count jumps
    right after each distance d, so the supremum is the maximum over
    d in {M} and distances beyond M of #{|y - x| <= d}/|B| (diam/d)^alpha.

    Returns
    -------
    (sup, center, radius) of a maximiser.
    """
    p = np.sort(np.asarray(points, dtype=float))
    n = p.size
    if n < 2:
        raise RejectedInputError("regularity needs at least two points")
    diam = p[-1] - p[0]
    best, where = -1.0, (float(p[0]), float(M))
    for x in p:
        d = np.sort(np.abs(p - x))
        radii = np.maximum(d, M)
        counts = np.searchsorted(d, radii, side="right")
        vals = counts / n * (diam / radii) ** alpha
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, where = float(vals[k]), (float(x), float(radii[k]))
    return best, where[0], where[1]


def verify_regular(points, c: float, alpha: float, M: float, per_octave: int = 8):
    """Independent scan on a geometric radius grid and every center.

    Returns (ok, worst_center, worst_radius, worst_value).
    """
    p = np.sort(np.asarray(points, dtype=float))
    n = p.size
    diam = p[-1] - p[0]
    top = max(2 * diam, 2 * M)
    k = int(math.ceil(per_octave * math.log2(top / M))) + 1
    radii = M * 2.0 ** (np.arange(k) / per_octave)
    lo = np.searchsorted(p, p[:, None] - radii[None, :], side="right")
    hi = np.searchsorted(p, p[:, None] + radii[None, :], side="left")
    vals = (hi - lo) / n * (diam / radii[None, :]) ** alpha
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    worst = float(vals[i, j])
    return worst < c, float(p[i]), float(radii[j]), worst


def _prune_dyadic(points, lo, hi, M, alpha, c_prof=2.0):
    """Thin points so every dyadic cell of level j holds at most
    max(1, floor(c_prof |B0| 2^(-j alpha))) of them; keep evenly spaced ones."""
    pts = np.sort(np.asarray(points, dtype=float))
    n0 = pts.size
    width = hi - lo
    j = 0
    while width / 2 ** j >= M:
        cap = max(1, int(math.floor(c_prof * n0 * 2.0 ** (-j * alpha))))
        cell = np.minimum(((pts - lo) / (width / 2 ** j)).astype(np.int64), 2 ** j - 1)
        keep = np.ones(pts.size, dtype=bool)
        starts = np.flatnonzero(np.r_[True, cell[1:] != cell[:-1]])
        ends = np.r_[starts[1:], pts.size]
        for s, e in zip(starts, ends):
            if e - s > cap:
                chosen = np.unique(np.rint(np.linspace(s, e - 1, cap)).astype(int))
                mask = np.zeros(e - s, dtype=bool)
                mask[chosen - s] = True
                keep[s:e] = mask
        pts = pts[keep]
        j += 1
    return pts


def box_dimension_fit(points, M: float) -> float:
    """Slope of log covering count against log(1/scale) over dyadic scales >= M."""
    p = np.asarray(points, dtype=float)
    diam = float(p.max() - p.min()) if p.size > 1 else 0.0
    scales = []
    s = M
    while s < diam / 2:
        scales.append(s)
        s *= 2
    if len(scales) < 2:
        return float("nan")
    counts = [cover_points(p, r).count for r in scales]
    slope = np.polyfit(np.log(1.0 / np.array(scales)), np.log(counts), 1)[0]
    return float(slope)


def regular_subset_extract(a: FrequencySet, M: float, target_alpha: float, eps: float,
                           *, min_log_ratio: float | None = None,
                           c_cap: float | None = None) -> RegularSubsetReport:
    """Window N1 and an M-separated subset regular at exponent target - 10 eps.

    Windows N1 = N 2^(-i/2) are tried from the largest down, keeping those with
    log(N1/M) > ((1-a+e)/(1-a+8e)) log(N/M). Inside a window the points are
    thinned against a dyadic profile; a window losing more than half of its
    points is abandoned for the next. The constant is computed exactly and
    re-verified on a radius grid.
    """
    N = float(a.window_n)
    if not N > M > 0:
        raise RejectedInputError("need N > M > 0", N=N, M=M)
    if not 0 < eps < target_alpha / 10:
        raise RejectedInputError("need 0 < eps < target_alpha/10", eps=eps,
                                 target_alpha=target_alpha)
    cover = covering_number(a, M).count
    if cover < (N / M) ** target_alpha:
        raise HypothesisError(
            f"covering number {cover} is below (N/M)^alpha = {(N / M) ** target_alpha}",
            cover=cover)
    alpha_reg = target_alpha - 10 * eps
    ratio = (1 - target_alpha + eps) / (1 - target_alpha + 8 * eps)
    need = ratio * math.log(N / M)
    if min_log_ratio is not None:
        need = max(need, min_log_ratio * math.log(N / M))
    elems = a.as_array().astype(float)
    tried = []
    i = 0
    while True:
        n1 = N * 2.0 ** (-i / 2)
        i += 1
        if n1 <= M or math.log(n1 / M) <= need:
            break
        pts = np.array(separated_subset(elems[np.abs(elems) <= n1].tolist(), M))
        if pts.size < 2:
            tried.append({"n1": n1, "points": int(pts.size), "kept": 0})
            continue
        kept = _prune_dyadic(pts, -n1, n1, M, alpha_reg)
        tried.append({"n1": n1, "points": int(pts.size), "kept": int(kept.size)})
        if kept.size < 2 or 2 * kept.size < pts.size:
            continue
        sup, cx, cr = regularity_sup(kept, alpha_reg, M)
        c_reg = sup * (1 + 1e-9)
        if c_cap is not None and c_reg > c_cap:
            raise ExtractionFailed(
                f"regularity constant {c_reg} exceeds cap {c_cap}",
                center=cx, radius=cr, c_reg=c_reg)
        ok, wx, wr, wv = verify_regular(kept, c_reg, alpha_reg, M)
        if not ok:
            raise InternalAssertionError("second regularity scan disagrees",
                                         center=wx, radius=wr, value=wv)
        subset = FrequencySet(n1, M, tuple(int(x) for x in kept), separated=True)
        return RegularSubsetReport(n1, subset, c_reg, alpha_reg, float(M), N,
                                   box_dimension_fit(kept, M), int(pts.size - kept.size),
                                   tried)
    raise ExtractionFailed("no admissible window kept half of its points",
                           windows=tried)
