"""Smoothing kernels, alpha-energies and projections of planar point sets.

The smoothing bump is Phi(x) = c_d (1 - |x|^2)^4 on the unit ball of R^d
(d = 1, 2); Psi is the one-dimensional marginal of the planar bump.  Energies
are computed two ways: a spatial double sum of |x - y|^-alpha against the
smoothed measure, and a spectral pair sum whose kernel is the inverse
transform of |Phi_r^(xi)|^2 (1 + |xi|)^(alpha - d).  Both go through the
binned autocorrelation of the measure, so their cost is one FFT each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import RejectedInputError
from .measure import GridMeasure
from .spectral_sets import cover_points

BUMP_POWER = 4
# integral of (1 - |x|^2)^4 over the unit ball
BUMP_MASS = {1: 256.0 / 315.0, 2: math.pi / 5.0}


# ---------------------------------------------------------------------------
# kernels


def phi(x, d: int = 1):
    """Normalized bump; ``x`` holds radii (or |x|) for d = 2."""
    x = np.abs(np.asarray(x, dtype=float))
    return np.where(x < 1, (1 - np.minimum(x, 1) ** 2) ** BUMP_POWER, 0.0) / BUMP_MASS[d]


def psi(x):
    """Coordinate marginal of the planar bump: (5/pi)(256/315)(1 - x^2)^(9/2)."""
    x = np.abs(np.asarray(x, dtype=float))
    core = (1 - np.minimum(x, 1) ** 2) ** (BUMP_POWER + 0.5)
    return np.where(x < 1, core, 0.0) * BUMP_MASS[1] / BUMP_MASS[2]


def phi_hat(xi, d: int = 1):
    """Fourier transform of the normalized bump, radial in d = 2; value 1 at 0.

    The transform of (1 - |x|^2)^n on the ball is
    Gamma(n+1) pi^-n |xi|^-(n+d/2) J_(n+d/2)(2 pi |xi|).
    """
    n = BUMP_POWER
    nu = n + d / 2
    xi = np.abs(np.asarray(xi, dtype=float))
    out = np.ones_like(xi)
    nz = xi > 1e-8
    z = xi[nz]
    out[nz] = (special.gamma(n + 1) * math.pi ** (-n) * z ** (-nu)
               * special.jv(nu, 2 * math.pi * z) / BUMP_MASS[d])
    return out


def psi_hat(t):
    """Transform of Psi: the planar transform restricted to a line."""
    return phi_hat(t, d=2)


def fejer(u, n: int):
    """Period-1 Fejer kernel (1/n)(sin(pi n u)/sin(pi u))^2, equal to n at integers."""
    u = np.asarray(u, dtype=float)
    s = np.sin(np.pi * u)
    near = np.abs(s) < 1e-12
    safe = np.where(near, 1.0, s)
    val = (np.sin(np.pi * n * u) / safe) ** 2 / n
    return np.where(near, float(n), val)


def fejer_hat(k, n: int):
    """Fourier coefficients (1 - |k|/n)_+."""
    return np.maximum(0.0, 1 - np.abs(np.asarray(k, dtype=float)) / n)


@dataclass(frozen=True, eq=False)
class KernelProfile:
    """A kernel sampled on the grid Z/Q, index j standing for j/Q (mod 1).

    ``spectrum[k]`` is the Fourier coefficient at k mod Q, i.e.
    (1/Q) sum_j samples[j] exp(-2 pi i k j / Q).
    """

    kind: str
    scale_r: float
    samples: np.ndarray
    spectrum: np.ndarray
    param: int | None = None

    @property
    def grid_q(self) -> int:
        return self.samples.size

    @property
    def integral(self) -> float:
        return float(self.samples.sum() / self.samples.size)

    def coefficient(self, k):
        return self.spectrum[np.mod(np.asarray(k), self.grid_q)]


def _grid_offsets(Q: int) -> np.ndarray:
    """Signed positions of the grid points, in [-1/2, 1/2)."""
    j = np.arange(Q)
    return np.where(j < (Q + 1) // 2, j, j - Q) / Q


def build_kernel(kind: str, scale_r: float, grid_q: int, *, n: int | None = None) -> KernelProfile:
    """Sample ``bump_phi``, ``marginal_psi``, ``fejer`` (needs n) or
    ``window_bump`` (needs n = N) on Z/grid_q.

    Bumps are rescaled so their grid integral is exactly 1.
    """
    Q = int(grid_q)
    if kind == "fejer":
        if n is None or int(n) < 1:
            raise RejectedInputError("fejer kernel needs n >= 1", n=n)
        n = int(n)
        if Q < 2 * n:
            raise RejectedInputError("grid too coarse for the Fejer kernel", grid_q=Q, n=n)
        samples = fejer(np.arange(Q) / Q, n)
        spec = np.real(np.fft.fft(samples)) / Q
        return KernelProfile("fejer", 1.0 / n, samples, spec, n)
    if kind == "window_bump":
        from .granulation import build_window_bump
        bump = build_window_bump(int(n), Q)
        return KernelProfile("window_bump", bump.width / Q, bump.samples, bump.spectrum, int(n))
    if kind not in ("bump_phi", "marginal_psi"):
        raise RejectedInputError(f"unknown kernel kind {kind!r}", kind=kind)
    if not 0 < scale_r < 1:
        raise RejectedInputError("kernel scale must lie in (0, 1)", scale_r=scale_r)
    if Q * scale_r < 16:
        raise RejectedInputError("grid does not resolve the kernel scale",
                                 grid_q=Q, scale_r=scale_r)
    x = _grid_offsets(Q) / scale_r
    prof = phi(x) if kind == "bump_phi" else psi(x)
    samples = prof / (prof.sum() / Q)
    spec = np.real(np.fft.fft(samples)) / Q
    return KernelProfile(kind, float(scale_r), samples, spec)


# ---------------------------------------------------------------------------
# point sets and direction measures


@dataclass(frozen=True, eq=False)
class PlanarPointSet:
    points: np.ndarray
    sep: float = 0.0
    separated: bool = False

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(p)):
            raise RejectedInputError("planar points must be finite")
        if p.size and np.abs(p).max() > 1 + 1e-12:
            raise RejectedInputError("planar points must lie in [-1, 1]^2")
        if self.separated and p.shape[0] > 1:
            if min_pair_distance(p) <= self.sep:
                raise RejectedInputError(f"points are not {self.sep}-separated")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def product(cls, xs, ys, sep: float = 0.0):
        xx, yy = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
        return cls(np.column_stack([xx.ravel(), yy.ravel()]), sep)


def min_pair_distance(points) -> float:
    from scipy.spatial import cKDTree
    p = np.asarray(points, dtype=float)
    if p.shape[0] < 2:
        return math.inf
    d, _ = cKDTree(p).query(p, k=2)
    return float(d[:, 1].min())


@dataclass(frozen=True, eq=False)
class DirectionMeasure:
    angles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.mod(np.asarray(self.angles, dtype=float).ravel(), np.pi)
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.size != w.size or a.size == 0:
            raise RejectedInputError("direction measure needs matching non-empty atoms")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise RejectedInputError("direction weights must be finite and nonnegative")
        if abs(w.sum() - 1) > 1e-12:
            raise RejectedInputError(f"direction weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, k: int, offset: float = 0.0):
        return cls(offset + np.pi * np.arange(k) / k, np.full(k, 1.0 / k))

    @classmethod
    def point(cls, theta: float):
        return cls([theta], [1.0])

    @property
    def atoms(self):
        return list(zip(self.angles.tolist(), self.weights.tolist()))


def project(e, theta: float) -> np.ndarray:
    """Coordinates <p, (cos theta, sin theta)>."""
    p = e.points if isinstance(e, PlanarPointSet) else np.asarray(e, dtype=float).reshape(-1, 2)
    return p @ np.array([math.cos(theta), math.sin(theta)])


def direction_nbhd_mass(eta: DirectionMeasure, ybar: float, rho: float) -> float:
    """eta-mass of directions x with |<x, y>| / (|x||y|) < rho.

    The criterion is applied literally; it selects directions close to the
    line orthogonal to ``ybar``.
    """
    if not 0 < rho < 1:
        raise RejectedInputError("rho must lie in (0, 1)", rho=rho)
    c = np.abs(np.cos(eta.angles - ybar))
    return float(eta.weights[c < rho].sum())


def direction_regularity(eta: DirectionMeasure, beta: float, r: float):
    """Smallest c with eta(B(theta, eps)) <= c eps^beta for all eps > r.

    Balls use the distance on P^1 (angles mod pi). An open arc holding the
    atoms i..j (cyclically) needs eps > span/2, so the supremum is the maximum
    over such runs of mass / max(span/2, r)^beta.

    Returns (c, theta, eps) of a maximiser.
    """
    a = eta.angles
    order = np.argsort(a)
    a, w = a[order], eta.weights[order]
    n = a.size
    aa = np.concatenate([a, a + np.pi])
    ww = np.concatenate([w, w])
    cum = np.concatenate([[0.0], np.cumsum(ww)])
    best, where = -1.0, (0.0, r)
    for i in range(n):
        j = np.arange(i, i + n)
        span = aa[j] - aa[i]
        ok = span < np.pi
        eps = np.maximum(span[ok] / 2, r)
        val = (cum[j[ok] + 1] - cum[i]) / eps ** beta
        k = int(np.argmax(val))
        if val[k] > best:
            best = float(val[k])
            where = (float(np.mod(aa[i] + span[ok][k] / 2, np.pi)), float(eps[k]))
    return best, where[0], where[1]


# ---------------------------------------------------------------------------
# weighted point data and binning


def _weighted(rho):
    """(coords of shape (n, d), weights) for the supported measure inputs."""
    if isinstance(rho, GridMeasure):
        idx = rho.support
        return (idx / rho.Q)[:, None], rho.weights[idx].astype(float)
    if isinstance(rho, PlanarPointSet):
        n = len(rho)
        return rho.points, np.full(n, 1.0 / n)
    if isinstance(rho, tuple) and len(rho) == 2:
        x = np.asarray(rho[0], dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        return x, np.asarray(rho[1], dtype=float)
    x = np.asarray(rho, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    return x, np.full(x.shape[0], 1.0 / x.shape[0])


def _deposit(coords, weights, h, pad):
    """Linear (cloud-in-cell) deposit on a grid of spacing h; returns masses, origin."""
    d = coords.shape[1]
    lo = coords.min(axis=0) - pad
    hi = coords.max(axis=0) + pad
    shape = tuple(int(math.ceil((hi[k] - lo[k]) / h)) + 2 for k in range(d))
    grid = np.zeros(shape)
    t = (coords - lo) / h
    base = np.floor(t).astype(np.int64)
    frac = t - base
    for corner in range(2 ** d):
        off = np.array([(corner >> k) & 1 for k in range(d)])
        wt = weights.copy()
        for k in range(d):
            wt = wt * (frac[:, k] if off[k] else 1 - frac[:, k])
        np.add.at(grid, tuple((base + off)[:, k] for k in range(d)), wt)
    return grid, lo


def _autocorrelation(grid):
    """C[lag] = sum_i w_i w_(i+lag) for all lags, lags centered in the output."""
    shape = tuple(2 * s - 1 for s in grid.shape)
    fshape = tuple(int(2 ** math.ceil(math.log2(s))) for s in shape)
    axes = list(range(grid.ndim))
    f = np.fft.rfftn(grid, fshape, axes=axes)
    c = np.fft.irfftn(f * np.conj(f), fshape, axes=axes)
    # move zero lag to the middle and crop to valid lags
    idx = tuple(np.r_[np.arange(fs - (s - 1), fs), np.arange(0, s)]
                for fs, s in zip(fshape, grid.shape))
    return c[np.ix_(*idx)]


def _lag_distances(shape, h):
    axes = [np.arange(-(s // 2), s // 2 + 1) * h for s in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(m ** 2 for m in mesh))


def _smoothing_stencil(h, r, d):
    m = int(math.ceil(r / h))
    ax = np.arange(-m, m + 1) * h
    if d == 1:
        k = phi(ax / r, 1)
    else:
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        k = phi(np.hypot(xx, yy) / r, 2)
    return k / k.sum()


def _smoothed_masses(coords, weights, r, h):
    from scipy.signal import fftconvolve
    d = coords.shape[1]
    grid, lo = _deposit(coords, weights, h, r + 2 * h)
    out = fftconvolve(grid, _smoothing_stencil(h, r, d), mode="same")
    return np.maximum(out, 0.0), lo


# ---------------------------------------------------------------------------
# energies


def _self_cell_average(alpha, h, d):
    if d == 1:
        return (h / 2) ** (-alpha) / (1 - alpha)
    half = h / 2
    val, _ = integrate.quad(lambda t: (half / math.cos(t)) ** (2 - alpha), 0, math.pi / 4)
    return 8 * val / (2 - alpha) / h ** 2


def _spatial_kernel(dist, alpha, h, d):
    if d == 1:
        k = np.rint(dist / h)
        # exact average of |x - y|^-alpha over two cells k apart
        p = 2 - alpha
        g = ((k + 1) ** p - 2 * k ** p + np.abs(k - 1) ** p) / ((1 - alpha) * p)
        return g * h ** (-alpha)
    out = np.empty_like(dist)
    nz = dist > 0
    out[nz] = dist[nz] ** (-alpha)
    out[~nz] = _self_cell_average(alpha, h, d)
    return out


def riesz_constant(d: int, alpha: float) -> float:
    """c with int int |x-y|^-alpha = c int |rho^|^2 |xi|^(alpha-d)."""
    return (math.pi ** (alpha - d / 2) * special.gamma((d - alpha) / 2)
            / special.gamma(alpha / 2))


def spectral_kernel(z, r: float, exponent: float, d: int, transform=None, u_cut: float = 30.0):
    """Inverse transform of |T(r xi)|^2 (1 + |xi|)^exponent at radii z.

    ``T`` defaults to the bump transform in dimension d. Evaluated by
    the trapezoid rule on [0, u_cut/r] with a step resolving the largest z.
    """
    transform = transform or (lambda x: phi_hat(x, d))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    zmax = max(float(z.max()), r)
    umax = u_cut / r
    du = min(1.0 / (24 * zmax), 1.0 / (8 * r))
    u = np.arange(0.0, umax + du, du)
    base = transform(r * u) ** 2 * (1 + u) ** exponent
    wts = np.full(u.size, du)
    wts[0] = wts[-1] = du / 2
    out = np.empty(z.size)
    step = max(1, int(4e6 // u.size))
    for s in range(0, z.size, step):
        zz = z[s:s + step, None]
        if d == 1:
            vals = 2 * np.cos(2 * np.pi * u[None, :] * zz)
        else:
            vals = 2 * np.pi * special.j0(2 * np.pi * u[None, :] * zz) * u[None, :]
        out[s:s + step] = vals @ (base * wts)
    return out


def _table_interp(dist, r, exponent, d, transform=None):
    """Evaluate the spectral kernel on a radial table and interpolate."""
    zmax = float(dist.max()) if dist.size else r
    nodes = np.linspace(0.0, zmax, max(64, int(math.ceil(zmax / (r / 8))) + 1))
    table = spectral_kernel(nodes, r, exponent, d, transform)
    return np.interp(dist, nodes, table)


@dataclass
class EnergyReport:
    spatial: float
    spectral: float
    alpha: float
    smooth_r: float
    dim: int
    grid_h: float
    meta: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.spatial / self.spectral

    def as_dict(self):
        return {"spatial": self.spatial, "spectral": self.spectral, "ratio": self.ratio,
                "alpha": self.alpha, "smooth_r": self.smooth_r, "dim": self.dim,
                "grid_h": self.grid_h, **self.meta}


def _energy_spatial(coords, weights, alpha, r):
    d = coords.shape[1]
    h = r / 16 if d == 1 else r / 8
    masses, _ = _smoothed_masses(coords, weights, r, h)
    c = _autocorrelation(masses)
    dist = _lag_distances(c.shape, h)
    return float(np.sum(c * _spatial_kernel(dist, alpha, h, d))), h


def _energy_spectral(coords, weights, alpha, r):
    d = coords.shape[1]
    h = r / 16 if d == 1 else r / 8
    grid, _ = _deposit(coords, weights, h, 2 * h)
    c = _autocorrelation(grid)
    dist = _lag_distances(c.shape, h)
    keep = np.abs(c) > 0
    k = _table_interp(dist[keep], r, alpha - d, d)
    return float(riesz_constant(d, alpha) * np.sum(c[keep] * k))


def alpha_energy_report(rho, alpha: float, smooth_r: float) -> EnergyReport:
    coords, weights = _weighted(rho)
    d = coords.shape[1]
    if not 0 < alpha < d:
        raise RejectedInputError(f"alpha must lie in (0, {d})", alpha=alpha)
    if not smooth_r > 0:
        raise RejectedInputError("smoothing scale must be positive", smooth_r=smooth_r)
    spatial, h = _energy_spatial(coords, weights, alpha, smooth_r)
    spectral = _energy_spectral(coords, weights, alpha, smooth_r)
    return EnergyReport(spatial, spectral, float(alpha), float(smooth_r), d, h)


def alpha_energy(rho, alpha: float, smooth_r: float) -> float:
    """Double-sum alpha-energy of rho * Phi_r.

    ``rho`` is a GridMeasure (points j/Q on the line), a PlanarPointSet taken
    with uniform weights, or a ``(coords, weights)`` pair.
    """
    coords, weights = _weighted(rho)
    d = coords.shape[1]
    if not 0 < alpha < d:
        raise RejectedInputError(f"alpha must lie in (0, {d})", alpha=alpha)
    if not smooth_r > 0:
        raise RejectedInputError("smoothing scale must be positive", smooth_r=smooth_r)
    return _energy_spatial(coords, weights, alpha, smooth_r)[0]


# ---------------------------------------------------------------------------
# projected densities


_PSI_AUTO = {}


def _psi_autocorrelation():
    """(t grid, A(t) = int Psi(x) Psi(x + t) dx) for t in [0, 2]."""
    if "table" not in _PSI_AUTO:
        h = 1e-3
        x = np.arange(-1.0, 1.0 + h / 2, h)
        p = psi(x)
        full = np.correlate(p, p, mode="full") * h
        mid = p.size - 1
        _PSI_AUTO["table"] = (np.arange(p.size) * h, full[mid:])
    return _PSI_AUTO["table"]


def _density_l2sq(z, w, r):
    """|| d((sum w delta_z) * Psi_r)/dx ||_2^2 through the pair sum of Psi_r autocorrelation."""
    order = np.argsort(z)
    z, w = z[order], w[order]
    zu, inv = np.unique(z, return_inverse=True)
    wu = np.bincount(inv, weights=w)
    t, A = _psi_autocorrelation()
    hi = np.searchsorted(zu, zu + 2 * r, side="right")
    span = hi - np.arange(zu.size)
    total = 0.0
    if span.sum() <= 5e7:
        i = np.repeat(np.arange(zu.size), span)
        j = i + (np.arange(i.size) - np.repeat(np.cumsum(span) - span, span))
        vals = np.interp((zu[j] - zu[i]) / r, t, A, right=0.0)
        pair = wu[i] * wu[j] * vals
        total = 2 * pair.sum() - np.sum(wu ** 2) * A[0]
        return float(total / r)
    # dense fallback: sample the density on a fine grid
    h = r / 64
    grid, lo = _deposit(zu[:, None], wu, h, r + 2 * h)
    ax = np.arange(-64, 65) * h
    from scipy.signal import fftconvolve
    dens = fftconvolve(grid, psi(ax / r) / r, mode="same")
    return float(np.sum(dens ** 2) * h)


def projected_density_norm(rho, theta: float | None, r: float, *, r1: float | None = None,
                           subset=None):
    """(||phi||_2^2, covering lower bound) for phi the density of rho_theta * Psi_r.

    ``theta`` is ignored for one-dimensional input. The bound is
    (4 r1 ||phi||^2)^-1, or rho(X)^2/(4 r1 ||phi||^2) when a boolean ``subset``
    mask picks X.
    """
    if not 0 < r < 1:
        raise RejectedInputError("r must lie in (0, 1)", r=r)
    r1 = r if r1 is None else float(r1)
    if r1 < r:
        raise RejectedInputError("need r1 >= r", r=r, r1=r1)
    coords, weights = _weighted(rho)
    if coords.shape[1] == 2:
        z = coords @ np.array([math.cos(theta), math.sin(theta)])
    else:
        z = coords[:, 0]
    l2 = _density_l2sq(z, weights, r)
    mass = weights.sum() if subset is None else weights[np.asarray(subset, bool)].sum()
    return l2, float(mass ** 2 / (4 * r1 * l2))


# ---------------------------------------------------------------------------
# directional energy and the projection probe


@dataclass
class DirectionalCheck:
    lhs: float
    rhs: float
    holds: bool
    c_eta: float
    c_dim: float
    additive: float
    rhs_integral: float
    slack: float

    def as_dict(self):
        return dict(self.__dict__)


def directional_energy_check(rho, eta: DirectionMeasure, alpha: float, beta: float,
                             beta_prime: float, r: float, *, c_eta: float | None = None,
                             c_dim: float = 1.0) -> DirectionalCheck:
    """Both sides of the directional energy inequality for a planar measure.

    lhs = sum over directions of eta(theta) int |rho_theta^(t)|^2 |Psi_r^(t)|^2
    (1+|t|)^(beta'+alpha-2) dt;  rhs = c_eta c_dim int |rho^|^2 |Phi_r^|^2
    (1+|x|)^(alpha-2) dx + additive. The additive term is the trivial bound
    2 int_0^1 (1+t)^(beta'+alpha-2) dt on the |t| <= 1 part; ``slack`` is
    rhs - lhs.
    """
    coords, weights = _weighted(rho)
    if coords.shape[1] != 2:
        raise RejectedInputError("directional energy needs a planar measure")
    if not beta_prime < beta:
        raise RejectedInputError("need beta' < beta", beta=beta, beta_prime=beta_prime)
    if not 0 < alpha < 2 or not 0 < r < 1:
        raise RejectedInputError("need 0 < alpha < 2 and 0 < r < 1")
    c_meas, th, ep = direction_regularity(eta, beta, r)
    if c_eta is None:
        c_eta = c_meas
    elif c_meas > c_eta:
        raise RejectedInputError(
            f"direction measure violates eta(B(theta, eps)) <= {c_eta} eps^{beta}",
            theta=th, eps=ep, measured=c_meas)
    gamma = beta_prime + alpha - 2
    h = r / 16
    # one kernel table serves every direction: projected spreads are <= 2 max|p| + pad
    zmax = 2 * float(np.hypot(coords[:, 0], coords[:, 1]).max()) + 6 * h
    nodes = np.linspace(0.0, zmax, max(64, int(math.ceil(zmax / (r / 8))) + 1))
    table = spectral_kernel(nodes, r, gamma, 1, transform=psi_hat)
    lhs = 0.0
    for theta, w in eta.atoms:
        if w == 0:
            continue
        z = coords @ np.array([math.cos(theta), math.sin(theta)])
        grid, _ = _deposit(z[:, None], weights, h, 2 * h)
        c = _autocorrelation(grid)
        dist = _lag_distances(c.shape, h)
        lhs += w * float(np.sum(c * np.interp(dist, nodes, table)))
    h2 = r / 8
    grid, _ = _deposit(coords, weights, h2, 2 * h2)
    c = _autocorrelation(grid)
    dist = _lag_distances(c.shape, h2)
    keep = np.abs(c) > 0
    integral = float(np.sum(c[keep] * _table_interp(dist[keep], r, alpha - 2, 2)))
    additive = 2 * integrate.quad(lambda t: (1 + t) ** gamma, 0, 1)[0]
    rhs = c_eta * c_dim * integral + additive
    return DirectionalCheck(lhs, rhs, lhs <= rhs, float(c_eta), c_dim, additive,
                            integral, rhs - lhs)


@dataclass
class ProbeReport:
    declined: bool
    hypotheses: dict
    threshold: float
    directions: list = field(default_factory=list)
    good_mass: float = float("nan")
    exceptional_mass: float = float("nan")
    target_good_mass: float = float("nan")
    notes: list = field(default_factory=list)

    def as_dict(self):
        return dict(self.__dict__)


def concentration_max(points, radius: float) -> int:
    """max over x in the set of the number of points in the open ball B(x, radius)."""
    from scipy.spatial import cKDTree
    p = np.asarray(points, dtype=float)
    tree = cKDTree(p)
    counts = tree.query_ball_point(p, np.nextafter(radius, 0), return_length=True)
    return int(np.max(counts))


def projection_probe(e: PlanarPointSet, eta: DirectionMeasure, r: float, alpha: float,
                     alpha_delta: float, eps0: float, *, kappa: float | None = None,
                     tau0: float = 0.5, n_rho: int = 8) -> ProbeReport:
    """Empirical version of the projection theorem on one instance.

    Records every hypothesis; when |e| <= r^-alpha the probe declines. Otherwise
    each direction atom gets N(pi_theta(e); r), compared with
    r^-((alpha + alpha_delta)/2).
    """
    n = len(e)
    thr = r ** (-(alpha + alpha_delta) / 2)
    hyp = {"size": n, "size_needed": r ** (-alpha), "size_ok": n > r ** (-alpha)}
    hyp["min_distance"] = min_pair_distance(e.points) if n > 1 else math.inf
    hyp["separated_ok"] = hyp["min_distance"] > r
    if kappa is not None and n > 1:
        rhos = np.geomspace(r, r ** tau0, n_rho + 2)[1:-1]
        worst_set, worst_dir = [], []
        for rho_ in rhos:
            worst_set.append(concentration_max(e.points, rho_) / (rho_ ** kappa * n))
            if rho_ < 1:
                worst_dir.append(max(direction_nbhd_mass(eta, y, rho_) / rho_ ** kappa
                                     for y in np.linspace(0, np.pi, 181)[:-1]))
        hyp["set_concentration_ratio"] = float(max(worst_set))
        hyp["set_concentration_ok"] = bool(max(worst_set) < 1)
        hyp["direction_ratio"] = float(max(worst_dir)) if worst_dir else 0.0
        hyp["direction_ok"] = bool(not worst_dir or max(worst_dir) < 1)
    report = ProbeReport(not hyp["size_ok"], hyp, thr)
    if report.declined:
        report.notes.append("size hypothesis fails; no claim made")
        return report
    good = 0.0
    for theta, w in eta.atoms:
        cov = cover_points(project(e, theta), r).count
        ok = cov > thr
        good += w if ok else 0.0
        report.directions.append({"theta": theta, "weight": w, "cover": cov, "ok": ok})
    report.good_mass = good
    report.exceptional_mass = 1 - good
    report.target_good_mass = 1 - r ** eps0
    return report
