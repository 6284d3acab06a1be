"""The decomposition driver and instrumented bootstrap diagnostics.

The driver removes small balls around granule families from the measure until
the walk-convolved remainder has no large coefficient at low frequency. The
diagnostics run the measurable steps of the dimension-increment arguments on
one instance, asserting every inequality that is exact and recording the
ones whose constants are not realizable at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .addcomb import (fourier_bsg, markov_select, phase_bucket, regular_subset_extract)
from .errors import (ExtractionFailed, HypothesisError, InternalAssertionError,
                     RejectedInputError, TorusError)
from .granulation import build_window_bump, granulate, hypothesis_cover
from .measure import GridMeasure, spectrum, split_by_union, walk_power, zero_measure
from .multipliers import MultiplierSet, regularity_constant
from .projection import (DirectionMeasure, PlanarPointSet, directional_energy_check,
                         projected_density_norm, projection_probe)
from .spectral_sets import (FrequencySet, cover_points, covering_number, level_set_of,
                            neighborhood_union, separated_subset)

LOOP_CRITERIA = ("convolved", "plain")


@dataclass
class ParamSet:
    """Every global constant of the decomposition and its diagnostics.

    ``c_tilde_max`` defaults to L**tau0. ``rho_const`` is the leading constant
    of the rho threshold in the bootstrap diagnostic. ``max_iterations`` caps
    the loop budget and ``loop_criterion`` selects the walk-convolved or the
    plain remainder spectrum for the loop test.
    """

    L: int = 16
    beta: float = 0.5
    lam: float = 0.5
    c_tilde_max: float | None = None
    tau: float = 0.2
    tau0: float = 0.25
    k: int = 1
    kappa: float = 0.1
    c_growth: float = 40.0
    u_exp: float = 2.0
    alpha_ini: float = 0.5
    alpha_high: float = 0.9
    alpha_inc: float = 0.01
    alpha_delta: float = 0.1
    eps0: float | None = None
    c_star: float = 0.5
    c1: float = 1.0
    q_grid: int = 2 ** 16
    rho_const: float = 1024.0
    max_iterations: int = 10_000
    loop_criterion: str = "convolved"
    normalize_remainder: bool = True

    def __post_init__(self):
        self.L = int(self.L)
        self.k = int(self.k)
        self.q_grid = int(self.q_grid)
        self.max_iterations = int(self.max_iterations)
        if self.L < 2:
            raise RejectedInputError("L must be at least 2", L=self.L)
        if self.k < 1:
            raise RejectedInputError("walk length k must be at least 1", k=self.k)
        if not 0 < self.tau < self.tau0:
            raise RejectedInputError("need 0 < tau < tau0", tau=self.tau, tau0=self.tau0)
        if not 0 < self.alpha_ini < self.alpha_high < 1:
            raise RejectedInputError("need 0 < alpha_ini < alpha_high < 1",
                                     alpha_ini=self.alpha_ini, alpha_high=self.alpha_high)
        for name in ("beta", "lam", "kappa", "alpha_inc", "alpha_delta"):
            if not 0 < getattr(self, name) < 1:
                raise RejectedInputError(f"{name} must lie in (0, 1)", key=name)
        if self.c_tilde_max is None:
            self.c_tilde_max = float(self.L) ** self.tau0
        if self.eps0 is None:
            self.eps0 = self.lam / 60
        if self.loop_criterion not in LOOP_CRITERIA:
            raise RejectedInputError(f"loop_criterion must be one of {LOOP_CRITERIA}",
                                     key="loop_criterion")
        if self.max_iterations < 1 or self.q_grid < 2 or self.rho_const <= 0:
            raise RejectedInputError("max_iterations, q_grid, rho_const must be positive")

    @property
    def threshold(self) -> float:
        return float(self.L) ** (-self.tau)

    @property
    def freq_window(self) -> float:
        return float(self.L) ** self.tau

    def budget(self) -> int:
        expo = 34 * 2 ** self.k * self.tau * math.log(self.L)
        raw = math.inf if expo > 700 else math.ceil(math.exp(expo))
        return int(min(raw, self.max_iterations))

    def theorem_windows(self) -> dict:
        """N = L^U and M = N^(1-kappa) as stated in the theorem."""
        N = float(self.L) ** self.u_exp
        return {"N": N, "M": N ** (1 - self.kappa)}

    def schedule(self, a: int) -> tuple[float, float]:
        """(M, N) = (L^k |a|, L^(k + 8^-k) |a|)."""
        a = abs(int(a))
        return float(self.L) ** self.k * a, float(self.L) ** (self.k + 8.0 ** -self.k) * a

    def as_dict(self):
        return asdict(self)

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]


# ---------------------------------------------------------------------------
# bookkeeping for exact and recorded inequalities


class _Checks:
    """Collects inequality outcomes; exact ones raise on failure."""

    def __init__(self, context: str):
        self.context = context
        self.rows = []

    def exact(self, name, lhs, rhs, *, strict=False, tol=1e-12):
        lhs, rhs = float(lhs), float(rhs)
        slack = tol * max(1.0, abs(rhs))
        holds = lhs > rhs if strict else lhs >= rhs - slack
        self.rows.append({"name": name, "lhs": lhs, "rhs": rhs, "holds": bool(holds),
                          "exact": True})
        if not holds:
            raise InternalAssertionError(f"{self.context}: {name} failed ({lhs} vs {rhs})",
                                         check=name, lhs=lhs, rhs=rhs)
        return True

    def flag(self, name, lhs, rhs, *, strict=False):
        lhs, rhs = float(lhs), float(rhs)
        holds = lhs > rhs if strict else lhs >= rhs
        self.rows.append({"name": name, "lhs": lhs, "rhs": rhs, "holds": bool(holds),
                          "exact": False})
        return bool(holds)


def _walks(mu: GridMeasure, S, n: int):
    if int(n) < 1:
        raise RejectedInputError("walk index n must be at least 1", n=n)
    prev = walk_power(mu, S, int(n) - 1)
    return prev, walk_power(prev, S, 1)


def _separated_level(mu: GridMeasure, delta: float, window: float, sep: float) -> FrequencySet:
    lv = level_set_of(mu, delta, window)
    return FrequencySet(window, sep, tuple(separated_subset(lv.elements, sep)), separated=True)


def _cover(mu: GridMeasure, delta: float, window: float, M: float) -> int:
    return covering_number(level_set_of(mu, delta, window), M).count


# ---------------------------------------------------------------------------
# initial dimension


def initial_dimension_report(mu: GridMeasure, S: MultiplierSet, n: int, a: int,
                             delta0: float) -> dict:
    """Covering count of F(mu_{n-1}, delta0/2) at scale |a| from one large coefficient.

    The window is 2L|a| so that every s a with s in S lies inside it. The
    count of multipliers with a large coefficient at s a is asserted to be at
    least |S| delta0/2 (Markov); the covering claim |S| delta0/2 is recorded
    next to the bound that always holds, half the Markov count.
    """
    a = int(a)
    if a == 0:
        raise RejectedInputError("frequency a must be nonzero")
    if not 0 < delta0 < 1:
        raise RejectedInputError("delta0 must lie in (0, 1)", delta0=delta0)
    prev, cur = _walks(mu, S, n)
    top = abs(complex(cur.fourier([a])[0]))
    if not top > delta0:
        raise RejectedInputError(
            f"hypothesis fails: |mu_n^(a)| = {top} <= delta0 = {delta0}",
            coefficient=top, delta0=delta0)
    s = S.as_array()
    vals = np.minimum(np.abs(prev.fourier(s * a)), 1.0)
    checks = _Checks("initial dimension")
    checks.exact("average over S exceeds delta0", vals.mean(), delta0, strict=True)
    big = markov_select(vals, delta0)
    strict_big = int(np.count_nonzero(vals > delta0 / 2))
    window = 2 * S.L * abs(a)
    count = _cover(prev, delta0 / 2, window, abs(a))
    checks.exact("Markov count", strict_big, len(S) * delta0 / 2)
    checks.exact("cover at least half the Markov count", count, math.ceil(strict_big / 2))
    claim = len(S) * delta0 / 2
    return {
        "n": int(n), "a": a, "delta0": delta0, "coefficient": top,
        "window": window, "scale": abs(a), "count": count, "bound": claim,
        "holds": bool(count >= claim), "markov_count": strict_big,
        "markov_selected": int(big.size), "size_S": len(S),
        "dimension_bound": delta0 / 2 * (window / 2 / abs(a)) ** (math.log(len(S)) / math.log(S.L)),
        "checks": checks.rows,
    }


# ---------------------------------------------------------------------------
# bootstrap


@dataclass
class BootstrapTrace:
    n: int
    windows: dict
    thresholds: dict
    counts: dict
    dims: dict
    rho: float
    rho_threshold: float
    branch: str
    checks: list
    flags: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    increment_met: bool | None = None

    def as_dict(self):
        return asdict(self)

    @property
    def exact_ok(self) -> bool:
        return all(r["holds"] for r in self.checks if r["exact"])


def _merge(iv):
    iv = sorted(iv)
    out = []
    for lo, hi in iv:
        if out and lo < out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return out


def _length(iv) -> float:
    return float(sum(hi - lo for lo, hi in iv))


def _intersect(iv1, iv2):
    out, i, j = [], 0, 0
    while i < len(iv1) and j < len(iv2):
        lo = max(iv1[i][0], iv2[j][0])
        hi = min(iv1[i][1], iv2[j][1])
        if lo < hi:
            out.append([lo, hi])
        if iv1[i][1] < iv2[j][1]:
            i += 1
        else:
            j += 1
    return out


def _difference(iv1, iv2):
    """Intervals of X - Y for unions of open intervals X, Y."""
    a = np.asarray(iv1, dtype=float).reshape(-1, 2)
    b = np.asarray(iv2, dtype=float).reshape(-1, 2)
    if a.size == 0 or b.size == 0:
        return []
    lo = np.subtract.outer(a[:, 0], b[:, 1]).ravel()
    hi = np.subtract.outer(a[:, 1], b[:, 0]).ravel()
    return _merge(list(zip(lo.tolist(), hi.tolist())))


def _balls(centers, radius):
    return [list(t) for t in neighborhood_union(list(centers), radius)[1]]


def _bootstrap_guard(mu, S, n, N, M, delta, params, alpha):
    L = params.L
    if S.L != L:
        raise RejectedInputError("multiplier set scale differs from params.L", S_L=S.L, L=L)
    if not (L ** params.tau < N / M < L):
        raise RejectedInputError("window ratio must satisfy L^tau < N/M < L", ratio=N / M)
    if not (float(L) ** -params.c_star < delta < 1):
        raise RejectedInputError("need L^-C* < delta < 1", delta=delta)
    prev, cur = _walks(mu, S, n)
    cover = _cover(cur, delta, N, M)
    measured = math.log(cover) / math.log(N / M) if cover > 0 else -math.inf
    if alpha is None:
        alpha = min(measured, params.alpha_high)
    if not params.alpha_ini <= alpha <= params.alpha_high:
        raise RejectedInputError(
            f"hypothesis fails: alpha {alpha} outside [alpha_ini, alpha_high]",
            alpha=alpha, measured=measured)
    if cover < (N / M) ** alpha * (1 - 1e-12):
        raise RejectedInputError(
            f"hypothesis fails: covering number {cover} < (N/M)^alpha", cover=cover)
    return prev, cur, cover, measured, alpha


def bootstrap_diagnostic(mu: GridMeasure, S: MultiplierSet, n: int, N: float, M: float,
                         delta: float, params: ParamSet, *, alpha: float | None = None,
                         force_branch: str | None = None, seed: int = 0) -> BootstrapTrace:
    """Run the dimension-increment pipeline on mu_n and mu_{n-1}.

    ``alpha`` defaults to the measured dimension of the hypothesis set, capped
    at alpha_high. ``force_branch`` ("rho-large" or "bsg-projection") bypasses
    the rho threshold, which desk-scale instances rarely reach.
    """
    if force_branch not in (None, "rho-large", "bsg-projection"):
        raise RejectedInputError("unknown branch", force_branch=force_branch)
    prev, cur, cover0, measured, alpha = _bootstrap_guard(mu, S, n, N, M, delta, params, alpha)
    L = params.L
    s_arr = S.as_array()
    s_max = int(s_arr.max())
    checks = _Checks("bootstrap")
    flags = {}
    details = {}

    E0 = _separated_level(cur, delta, N, M)
    checks.exact("E0 size is the covering number order", len(E0), cover0)
    eps = min(params.alpha_delta / (640 * 20) * 0.99, alpha / 10 * 0.99)
    try:
        reg = regular_subset_extract(level_set_of(cur, delta, N), M, alpha, eps)
    except ExtractionFailed as exc:
        raise ExtractionFailed(f"bootstrap regular subset: {exc}", branch="regular-subset",
                               **exc.context) from exc
    E0p = reg.subset
    N1 = reg.n1
    checks.exact("window relation log(N1/M) > log(N/M)/8",
                 math.log(N1 / M), math.log(N / M) / 8, strict=True)
    c_const = reg.c_reg * delta ** 2
    E1 = _separated_level(cur, delta ** 4 / 32, 2 * N1, M)
    rho = len(E1) / len(E0p)
    rho_thr = params.rho_const * c_const * (N1 / M) ** (params.alpha_delta / 640) * delta ** -6
    branch = force_branch or ("rho-large" if rho >= rho_thr else "bsg-projection")
    counts = {"cover0": cover0, "E0": len(E0), "E0_prime": len(E0p), "E1": len(E1)}
    details["regular_subset"] = reg.as_dict()

    d4 = delta ** 4
    if branch == "rho-large":
        e1 = E1.as_array()
        c1 = cur.fourier(e1)
        keep, theta = phase_bucket(c1)
        E1p = e1[keep]
        checks.exact("phase subset keeps a quarter", 4 * E1p.size, e1.size)
        flags["phase_subset_strictly_above_quarter"] = bool(4 * E1p.size > e1.size)
        rot = np.real(np.exp(1j * theta) * c1[keep])
        checks.exact("aligned real parts exceed delta^4/128", rot.min(), d4 / 128, strict=True)
        checks.exact("aligned average", abs(c1[keep].mean()), d4 / 128)
        avg = np.array([np.abs(prev.fourier(s * E1p)).mean() for s in s_arr])
        s0 = int(s_arr[int(np.argmax(avg))])
        checks.exact("pivot average", avg.max(), d4 / 128)
        vals = np.minimum(np.abs(prev.fourier(s0 * E1p)), 1.0)
        sel = markov_select(vals, d4 / 128)
        n_strict = int(np.count_nonzero(vals > d4 / 256))
        N0 = 2 * N1
        E2 = _separated_level(prev, d4 / 256, s_max * N0, L * M)
        checks.exact("E2 dominates the pivot count", len(E2), n_strict)
        checks.exact("pivot count (Markov)", sel.size, d4 / 256 * E1p.size)
        checks.exact("E2 against rho |E0'|", len(E2), rho * d4 / 1024 * len(E0p))
        counts.update({"E1_prime": int(E1p.size), "E2": len(E2), "pivot_count": n_strict})
        details.update({"s0": s0, "theta": theta})
    else:
        N0 = N1
        dp = delta ** 2 / 4
        spec = spectrum(cur, int(math.ceil(2 * N1)))
        small = covering_number(level_set_of(cur, dp ** 2 / 8, 2 * N1), M).count
        R = small / len(E0p)
        try:
            bsg = fourier_bsg(spec, E0p, N1, M, dp, R, seed=seed)
        except ExtractionFailed as exc:
            raise ExtractionFailed(f"bootstrap BSG step: {exc}", branch="bsg-projection",
                                   **exc.context) from exc
        E = bsg.a1.as_array()
        details["bsg"] = {k: v for k, v in bsg.intermediates.items()
                          if not k.endswith("cells")}
        checks.exact("E aligned average", abs(cur.fourier(E).mean()), dp / 2)
        # pairs (s, e) with a large coefficient on mu_{n-1}
        pair_vals = np.minimum(np.abs(prev.fourier(np.outer(s_arr, E))), 1.0)
        sel = markov_select(pair_vals.ravel(), dp / 2)
        checks.exact("pair Markov count", sel.size, dp / 4 * pair_vals.size)
        Mp = L * M
        Np = L * N1
        E3 = _separated_level(prev, dp / 4, s_max * N1, Mp)
        cover_assume = _cover(prev, dp / 4, Np, Mp)
        assumption = cover_assume < (N1 / M) ** (alpha + params.alpha_inc)
        flags["contradiction_assumption_holds"] = bool(assumption)
        e3_balls = _balls(E3.elements, Mp)
        sE = [_balls((s * E).tolist(), Mp) for s in s_arr]
        meet = [_length(_intersect(b, e3_balls)) for b in sE]
        big_pairs = pair_vals >= dp / 4
        checks.exact("ball overlap from pair count",
                     2 / Mp * sum(meet), int(big_pairs.sum()))
        m = np.array([[_length(_intersect(b1, b2)) for b2 in sE] for b1 in sE])
        e3n = max(len(E3), 1)
        rhs_pairs = dp ** 2 * Mp * len(S) ** 2 * E.size ** 2 / (128 * e3n)
        checks.exact("pair overlap sum", m.sum(), rhs_pairs)
        vals = m / (Mp * E.size)
        avg_thr = dp ** 2 * E.size / (128 * e3n)
        chosen = markov_select(np.minimum(vals.ravel() / 2, 1.0), min(avg_thr, 1.0))
        row_counts = np.bincount(chosen // len(S), minlength=len(S))
        checks.exact("pair Markov over S x S", chosen.size, avg_thr / 4 * len(S) ** 2)
        flags["pair_markov_half_rate"] = bool(chosen.size >= avg_thr / 2 * len(S) ** 2)
        i1 = int(np.argmax(row_counts))
        s1 = int(s_arr[i1])
        b_idx = np.flatnonzero(vals[i1] >= avg_thr / 2)
        B = s_arr[b_idx]
        checks.exact("pigeonhole size of B", B.size, dp ** 2 * E.size / (512 * e3n) * len(S))
        c_tilde = regularity_constant(S, params.lam).c_tilde
        c_tilde_b = regularity_constant(MultiplierSet(L, B.tolist()), params.lam).c_tilde
        details["B"] = {"s1": s1, "elements": B.tolist(), "c_tilde": c_tilde,
                        "c_tilde_B": c_tilde_b,
                        "c_tilde_B_formula": float(L) ** (10 * params.c_star)
                        * (N1 / M) ** (params.alpha_inc + 10 * eps) * c_tilde}
        # Ruzsa sandwich on the M'-neighbourhoods
        ee = np.unique(np.subtract.outer(E, E).ravel())
        n_ee = cover_points(ee, M).count
        x1 = sE[i1]
        ruzsa = []
        for j in b_idx:
            x2 = sE[j]
            cap = _intersect(x1, x2)
            cm = _length(cap)
            if cm == 0:
                continue
            lhs = _length(_difference(x1, x2))
            mid = _length(_difference(x1, cap)) * _length(_difference(x2, cap)) / cm
            upper = _length(_difference(x1, x1)) * _length(_difference(x2, x2)) / cm
            cov_bound = 64 * n_ee ** 2 * Mp ** 2 / cm
            checks.exact(f"Ruzsa s2={int(s_arr[j])}", mid, lhs)
            checks.exact(f"Ruzsa self-difference s2={int(s_arr[j])}", upper, mid)
            checks.exact(f"self-difference covering s2={int(s_arr[j])}", cov_bound, upper)
            ruzsa.append({"s2": int(s_arr[j]), "difference": lhs, "ruzsa": mid,
                          "self": upper, "cover_bound_64": cov_bound,
                          "cover_bound_25": 25 * n_ee ** 2 * Mp ** 2 / cm,
                          "within_25": bool(upper <= 25 * n_ee ** 2 * Mp ** 2 / cm)})
        details["ruzsa"] = ruzsa
        # projection probe on E x E scaled into the unit square
        pts = PlanarPointSet.product(E / N1, E / N1)
        angles = np.arctan2(B.astype(float), -float(s1))
        eta = DirectionMeasure(angles, np.full(B.size, 1.0 / B.size))
        r = M / N1
        probe = projection_probe(pts, eta, r, max(2 * alpha - 21 * eps, 1e-6),
                                 params.alpha_delta, params.eps0, kappa=params.lam / 10)
        details["probe"] = probe.as_dict()
        target = (N1 / M) ** (alpha + params.alpha_delta / 2)
        diffs = [{"s2": int(s2), "cover": cover_points(
            np.unique(np.subtract.outer(s2 * E, s1 * E).ravel()), Mp).count}
            for s2 in B]
        for d in diffs:
            d["meets_target"] = bool(d["cover"] >= target)
        details["difference_covers"] = {"target": target, "rows": diffs}
        counts.update({"E": int(E.size), "E3": len(E3), "B": int(B.size),
                       "cover_assumption": cover_assume})
        details.update({"R": R, "s1": s1})

    Np_out = L * N0
    Mp_out = L * M
    out_cover = _cover(prev, d4 / 256, Np_out, Mp_out)
    claim = (Np_out / Mp_out) ** (alpha + params.alpha_inc)
    met = bool(out_cover >= claim)
    counts["output_cover"] = out_cover
    counts["output_cover_wide"] = _cover(prev, d4 / 256, s_max * N0, Mp_out)
    flags["increment_met"] = met
    dims = {"alpha": alpha, "measured": measured, "eps": eps,
            "alpha_reg": reg.alpha_reg, "alpha_fit": reg.alpha_fit,
            "output": math.log(out_cover) / math.log(Np_out / Mp_out) if out_cover else 0.0,
            "target": alpha + params.alpha_inc}
    windows = {"N": N, "M": M, "N0": N0, "N1": N1, "N_prime": Np_out, "M_prime": Mp_out}
    thresholds = {"delta": delta, "delta_prime": delta ** 2 / 4, "delta4_256": d4 / 256,
                  "output_claim": claim}
    return BootstrapTrace(int(n), windows, thresholds, counts, dims, rho, rho_thr, branch,
                          checks.rows, flags, details, met)


def final_bootstrap_diagnostic(mu: GridMeasure, S: MultiplierSet, n: int, N: float,
                               M: float, delta: float, params: ParamSet | None = None,
                               *, check_density: bool = True) -> dict:
    """Near-full spectrum of mu_n to positive-density covering for mu_{n-1}.

    Runs the regular subset, the triple Markov selection, the pivot s2, the
    set S', the direction measure on {-s2} x S', the directional energy check
    and the per-direction density bounds, then records the conclusion count.
    """
    params = params or ParamSet(L=S.L)
    lam = params.lam
    eps0 = lam / 60
    L = S.L
    if not N <= L * M:
        raise RejectedInputError("need N <= L M", N=N, M=M)
    if not N > M > 0:
        raise RejectedInputError("need N > M > 0", N=N, M=M)
    if not 0 < delta < 1:
        raise RejectedInputError("delta must lie in (0, 1)", delta=delta)
    prev, cur = _walks(mu, S, n)
    cover0 = _cover(cur, delta, N, M)
    need = (N / M) ** (1 - eps0)
    if not cover0 > need:
        raise RejectedInputError(
            f"hypothesis fails: covering number {cover0} <= (N/M)^(1-eps0) = {need}",
            cover=cover0, bound=need)
    checks = _Checks("final bootstrap")
    flags = {"delta_above_L^-C*": bool(delta > float(L) ** -params.c_star)}
    dp = delta ** 2 / 4
    target = 1 - eps0
    eps = min(lam / 6, target / 20)
    try:
        reg = regular_subset_extract(level_set_of(cur, dp, N), M, target, eps,
                                     min_log_ratio=0.5)
    except ExtractionFailed as exc:
        raise ExtractionFailed(f"final bootstrap regular subset: {exc}",
                               branch="regular-subset", **exc.context) from exc
    N1 = reg.n1
    checks.exact("window relation log(N1/M) > log(N/M)/2",
                 math.log(N1 / M), math.log(N / M) / 2, strict=True)
    full = reg.subset.as_array()
    c0 = cur.fourier(full)
    keep, theta = phase_bucket(c0)
    E = full[keep]
    checks.exact("phase subset keeps a quarter", 4 * E.size, full.size)
    checks.exact("aligned average", abs(c0[keep].mean()), dp / 2)

    s_arr = S.as_array()
    ns, ne = s_arr.size, E.size
    # D[s2] = sum over s1, xi1, xi2 of mu_{n-1}^(s1 xi1 - s2 xi2)
    a = np.outer(s_arr, E)  # s1 xi1
    D = np.empty(ns, dtype=complex)
    absvals = np.empty((ns, ns, ne, ne))
    for j, s2 in enumerate(s_arr):
        f = prev.fourier(a[:, :, None] - s2 * E[None, None, :])
        D[j] = f.sum()
        absvals[j] = np.abs(f)
    total = D.sum() / (ns ** 2 * ne ** 2)
    checks.exact("quadratic form is real", -abs(total.imag), -1e-9)
    checks.exact("quadratic form bound", total.real, dp ** 2 / 4)
    j2 = int(np.argmax(D.real))
    s2 = int(s_arr[j2])
    row = D[j2].real / (ns * ne ** 2)
    checks.exact("pivot row bound", row, dp ** 2 / 4)
    vals = np.minimum(absvals[j2], 1.0)  # indexed (s1, xi1, xi2)
    qsel = markov_select(vals.ravel(), dp ** 2 / 4)
    checks.exact("triple Markov count", qsel.size, dp ** 2 / 8 * ns * ne ** 2)
    in_q = vals >= dp ** 2 / 8
    frac = in_q.reshape(ns, -1).mean(axis=1)
    s_sel = markov_select(frac, dp ** 2 / 8)
    Sp = s_arr[frac >= dp ** 2 / 16]
    checks.exact("size of S'", Sp.size, dp ** 2 / 16 * ns)
    del s_sel

    r = M / N1
    pts = PlanarPointSet.product(E / N1, E / N1)
    angles = np.arctan2(Sp.astype(float), -float(s2))
    eta = DirectionMeasure(angles, np.full(Sp.size, 1.0 / Sp.size))
    alpha_e = 1 - 5 * lam / 6
    out = {"n": int(n), "windows": {"N": N, "M": M, "N1": N1, "r": r},
           "thresholds": {"delta": delta, "delta_prime": dp, "conclusion": delta ** 4 / 128},
           "counts": {"cover0": cover0, "E_regular": int(full.size), "E": int(ne),
                      "Q": int(in_q.sum()), "S_prime": int(Sp.size), "S": int(ns)},
           "s2": s2, "theta": theta, "regular_subset": reg.as_dict()}
    if check_density:
        dirc = directional_energy_check(pts, eta, alpha_e, lam, 5 * lam / 6, r)
        out["directional"] = dirc.as_dict()
        rows = []
        for s1, th in zip(Sp.tolist(), eta.angles.tolist()):
            l2, bound = projected_density_norm(pts, th, r)
            proj = pts.points @ np.array([math.cos(th), math.sin(th)])
            true = cover_points(proj, r).count
            rows.append({"s1": s1, "theta": th, "l2": l2, "bound": bound, "cover": true,
                         "sound": bool(bound <= true)})
        out["directions"] = rows
        flags["density_bounds_sound"] = all(rw["sound"] for rw in rows)

    c_tilde = regularity_constant(S, lam).c_tilde
    concl = _cover(prev, delta ** 4 / 128, N1, M)
    wide = _cover(prev, delta ** 4 / 128, 2 * L * N1, L * M)
    bound = delta ** 10 / c_tilde * N1 / M
    out["conclusion"] = {"cover": concl, "bound": bound, "met": bool(concl > bound),
                         "margin": concl - bound, "c_tilde": c_tilde,
                         "cover_scaled": wide, "met_scaled": bool(wide > bound)}
    out["checks"] = checks.rows
    out["flags"] = flags
    return out


# ---------------------------------------------------------------------------
# granule extraction and the decomposition loop


def walk_coefficients(mu: GridMeasure, S, k: int, freqs) -> np.ndarray:
    """Coefficients of nu_S^{*k} * mu at the given frequencies."""
    return walk_power(mu, S, k).fourier(freqs)


def _search_order(j_max: int):
    yield 0
    for j in range(1, j_max + 1):
        yield -j
        yield j


def extract_granules_for_coefficient(mu: GridMeasure, S: MultiplierSet, k: int, a: int,
                                     t: float, params: ParamSet):
    """Granule family for mu from one large walk-convolved coefficient at a.

    Scans integer cube counts M near L^k |a| and windows N near
    L^(k + 8^-k) |a| by powers of two, with thresholds t, t/2, t/4, and
    returns the first family granulate accepts. s is the largest value with
    the covering hypothesis holding.
    """
    a = int(a)
    if a == 0:
        raise RejectedInputError("frequency a must be nonzero")
    Q = mu.Q
    coef = abs(complex(walk_coefficients(mu, S, k, [a])[0]))
    if not coef > t:
        raise HypothesisError(
            f"hypothesis fails: walk coefficient {coef} at a={a} is not above t={t}",
            a=a, coefficient=coef, t=t)
    if not t > float(params.L) ** -params.c1:
        raise RejectedInputError("need t > L^-C1", t=t)
    M0, N0 = params.schedule(a)
    tried = []
    for tp in (t, t / 2, t / 4):
        for i in _search_order(6):
            M = int(round(M0 * 2.0 ** i))
            if M < 1 or 2 * M > Q:
                continue
            for j in _search_order(6):
                N = N0 * 2.0 ** j
                if not (N > M and 16 * N <= Q):
                    continue
                row = {"t": tp, "M": M, "N": N}
                tried.append(row)
                bump = build_window_bump(N, Q)
                if not Q / (2 * M) + bump.support < Q / M:
                    row["skip"] = "bump geometry"
                    continue
                cover, _ = hypothesis_cover(mu, N, M, tp)
                row["cover"] = cover
                if cover < 1:
                    row["skip"] = "no large coefficient"
                    continue
                s = cover * M / N * (1 - 1e-12)
                fam = granulate(mu, N, M, tp, s, bump=bump)
                fam.trace.info.update({
                    "a": a, "walk_coefficient": coef, "schedule": {"M": M0, "N": N0},
                    "kappa_realized": 1 - math.log(M) / math.log(N) if N > 1 else None,
                    "reference_mass": t ** (33 * 2 ** k), "searched": len(tried)})
                return fam
    raise ExtractionFailed("no admissible (N, M, t') found", a=a, searched=tried[:64])


@dataclass
class DecompositionResult:
    mu1: GridMeasure
    mu2: GridMeasure
    families: list
    ell: int
    params: ParamSet
    status: str
    final_spectrum_check: float
    budget: int = 0
    log: list = field(default_factory=list)
    error: dict | None = None

    def to_json(self, inline_measures: bool = True) -> dict:
        out = {"ell": self.ell, "status": self.status, "budget": self.budget,
               "final_spectrum_check": self.final_spectrum_check,
               "threshold": self.params.threshold, "params": self.params.as_dict(),
               "families": [f.to_json() for f in self.families],
               "mass_mu1": self.mu1.mass, "mass_mu2": self.mu2.mass, "log": self.log,
               "error": self.error}
        if inline_measures:
            out["mu1"] = _sparse(self.mu1)
            out["mu2"] = _sparse(self.mu2)
        return out


def _sparse(mu: GridMeasure) -> dict:
    idx = mu.support
    return {"Q": mu.Q, "weights": {"sparse": [[int(i), float(mu.weights[i])] for i in idx]}}


def _loop_coefficients(mu1: GridMeasure, S, params: ParamSet, freqs):
    m = mu1.normalized() if params.normalize_remainder else mu1
    if params.loop_criterion == "plain":
        return np.abs(m.fourier(freqs))
    return np.abs(walk_coefficients(m, S, params.k, freqs))


def final_spectrum_check(mu1: GridMeasure, S, params: ParamSet) -> float:
    """max over 0 < |n| < L^tau of |(nu_S^{*k} * mu1)^(n)|, zero if no such n."""
    n = _low_freqs(params)
    if n.size == 0:
        return 0.0
    return float(np.abs(walk_coefficients(mu1, S, params.k, n)).max())


def _low_freqs(params: ParamSet) -> np.ndarray:
    w = params.freq_window
    top = int(math.ceil(w)) - 1
    pos = np.arange(1, top + 1)
    pos = pos[pos < w]
    # order by |a|, positive first
    return np.stack([pos, -pos], axis=1).ravel()


def _check_preconditions(mu: GridMeasure, S: MultiplierSet, params: ParamSet):
    if S.L != params.L:
        raise RejectedInputError("multiplier set scale differs from params.L",
                                 S_L=S.L, L=params.L)
    if not len(S) > float(params.L) ** params.beta:
        raise RejectedInputError(f"need |S| > L^beta = {params.L ** params.beta}",
                                 size=len(S))
    cert = regularity_constant(S, params.lam)
    if not cert.c_tilde < params.c_tilde_max:
        raise RejectedInputError(
            f"S is not regular enough: C~ = {cert.c_tilde} >= {params.c_tilde_max}",
            certificate=cert.as_dict())
    reach = params.freq_window * (2 * params.L) ** params.k
    if not reach < mu.Q / 2:
        raise RejectedInputError("grid too coarse for the walk at the frequency window",
                                 Q=mu.Q, reach=reach)
    if mu.mass > 1 + 1e-12:
        raise RejectedInputError("input mass exceeds 1")
    return cert


def decompose(mu: GridMeasure, S: MultiplierSet, params: ParamSet) -> DecompositionResult:
    """Split mu = mu1 + mu2 with mu2 on small balls around granule families.

    Each iteration picks the smallest |a| (positive first) in 0 < |a| < L^tau
    whose loop coefficient exceeds L^-tau, extracts a granule family from the
    normalized remainder and moves the mass of its balls to mu2.
    """
    _check_preconditions(mu, S, params)
    thr = params.threshold
    freqs = _low_freqs(params)
    budget = params.budget()
    region = np.zeros(mu.Q, dtype=bool)
    mu1, mu2 = mu, zero_measure(mu.Q)
    families, log = [], []
    status, error = "converged", None
    ell = 0
    while True:
        if freqs.size == 0:
            break
        coeffs = _loop_coefficients(mu1, S, params, freqs)
        over = np.flatnonzero(coeffs > thr)
        if over.size == 0:
            break
        if ell >= budget:
            status = "budget_exhausted"
            break
        a = int(freqs[over[0]])
        target = mu1.normalized()
        try:
            fam = extract_granules_for_coefficient(target, S, params.k, a, thr, params)
        except (ExtractionFailed, HypothesisError) as exc:
            status = "extraction_failed"
            error = exc.to_dict()
            break
        region |= fam.region()
        new1, new2 = split_by_union(mu, region)
        if not np.array_equal(new1.weights + new2.weights, mu.weights):
            raise InternalAssertionError("decomposition is not exact")
        if new1.mass > mu1.mass:
            raise InternalAssertionError("remainder mass increased")
        if new1.mass == mu1.mass:
            status, error = "extraction_failed", {"message": "family captured no new mass",
                                                  "a": a}
            break
        mu1, mu2 = new1, new2
        ell += 1
        families.append(fam)
        log.append({"ell": ell, "a": a, "t": fam.trace.info["t"],
                    "family_size": len(fam.points), "captured_mass": fam.captured_mass,
                    "remaining_mass": mu1.mass, "max_coeff": float(coeffs.max())})
    check = final_spectrum_check(mu1, S, params)
    if mu2.mass > 0 and np.any(mu1.weights[region] != 0):
        raise InternalAssertionError("remainder meets the reported balls")
    if status == "converged" and not check <= thr:
        raise InternalAssertionError("converged but the spectrum check fails",
                                     check=check, threshold=thr)
    return DecompositionResult(mu1, mu2, families, ell, params, status, check, budget,
                               log, error)


def iteration_log_rows(result: DecompositionResult) -> list:
    cols = ("ell", "a", "t", "family_size", "captured_mass", "remaining_mass", "max_coeff")
    return [cols] + [tuple(row[c] for c in cols) for row in result.log]


__all__ = [
    "ParamSet", "BootstrapTrace", "DecompositionResult", "initial_dimension_report",
    "bootstrap_diagnostic", "final_bootstrap_diagnostic", "extract_granules_for_coefficient",
    "decompose", "final_spectrum_check", "walk_coefficients", "iteration_log_rows",
    "TorusError",
]
