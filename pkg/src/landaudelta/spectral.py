"""Discrete eigenvalues of the delta-interaction Hamiltonian between Landau levels.

lam is an eigenvalue iff -1 is an eigenvalue of alpha M(lam).  Near a level
Lambda_q the Weyl matrix splits as ``-P_q / delta + R_q`` (delta = lam - Lambda_q)
with the pole-free remainder R_q, and with ``P_q = sum_m psi_m psi_m^*``
restricted to the support this becomes a small Hermitian problem in the mode
space: lam is an eigenvalue iff delta is an eigenvalue of

    H(lam) = A^* (J + |alpha|^1/2 R_q |alpha|^1/2)^-1 A,   A = |alpha|^1/2 W^1/2 Psi_q,

with J = sign(alpha).  Writing A = U S V^* the matrix H is unitarily similar to
``S Ht(lam) S`` where ``Ht = U^* (J + A_R)^-1 U`` is well scaled and smooth in
lam, so Ht is interpolated in lam and the tiny eigenvalues near the level keep
their relative accuracy.  Eigenvalues are then the jumps of the counting
function ``N(d) = #{j : sigma nu_j(Lambda_q + sigma d) > d}``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import bie, landau, specfun, toeplitz
from .errors import (
    NoEigenvaluesFound,
    OnLandauLevel,
    TooFewEigenvalues,
    TruncationMismatch,
)

RELIABLE_GAP = 1e-11
SIDES = ("above", "below")


# ---------------------------------------------------------------- strength function

@dataclass(frozen=True)
class StrengthFunction:
    """Real coupling alpha sampled at the nodes of its support (an Arc or a Curve)."""

    nodes: object
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v) and np.any(v.imag != 0):
            raise ValueError("coupling must be real")
        v = np.array(v.real if np.iscomplexobj(v) else v, dtype=float)
        if v.shape != (self.nodes.n,):
            raise ValueError(f"expected {self.nodes.n} node values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, nodes, c):
        return cls(nodes, np.full(nodes.n, float(c)))

    @classmethod
    def from_function(cls, nodes, f):
        """alpha(x_j) = f(points, s) evaluated at every node."""
        return cls(nodes, np.asarray(f(nodes.points, nodes.s), dtype=float))

    @property
    def support_mask(self):
        return self.values != 0

    @property
    def sup_norm(self):
        return float(np.abs(self.values).max(initial=0.0))

    @property
    def is_zero(self):
        return not np.any(self.values)

    @property
    def sign(self):
        """+1 for alpha >= 0, -1 for alpha <= 0, 0 for sign-changing (or zero) alpha."""
        if self.is_zero:
            return 0
        if np.all(self.values >= 0):
            return 1
        if np.all(self.values <= 0):
            return -1
        return 0


def as_strength(curve, alpha):
    if isinstance(alpha, StrengthFunction):
        return alpha
    return StrengthFunction.constant(curve, float(alpha))


# ---------------------------------------------------------------- Birman-Schwinger curves

def bs_matrix(alpha, lam, B=1.0, weyl=None):
    """K(lam) = sign(alpha)|alpha|^1/2 M(lam) |alpha|^1/2 in the symmetrised Nyström form."""
    nodes = alpha.nodes
    Mb = weyl if weyl is not None else bie.assemble_weyl(nodes, lam, B)
    Mh = Mb.hermitian() if np.imag(lam) == 0 else Mb.symmetrized()
    a2 = np.sqrt(np.abs(alpha.values))
    return (np.sign(alpha.values) * a2)[:, None] * Mh * a2[None, :]


def bs_eigencurves(curve, alpha, lam_grid, B=1.0):
    """Eigenvalues of K(lam) along a grid, matched across the grid by nearest neighbour.

    Returns an array of shape (len(lam_grid), n) whose columns are eigencurves.
    """
    alpha = as_strength(curve, alpha)
    lam_grid = np.asarray(lam_grid, dtype=float)
    for lam in lam_grid:
        q = landau.nearest_level(lam, B)
        if abs(lam - landau.landau_level(q, B)) < 1e-6 * B:
            raise OnLandauLevel(f"grid point {lam} within 1e-6 B of a level")
    out = []
    prev = None
    for lam in lam_grid:
        K = bs_matrix(alpha, lam, B)
        if alpha.sign >= 0:
            mu = np.linalg.eigvalsh(K).astype(complex)
        else:
            mu = np.linalg.eigvals(K)
        mu = mu[np.argsort(mu.real)]
        if prev is not None:
            cost = np.abs(prev[:, None] - mu[None, :])
            _, col = linear_sum_assignment(cost)
            mu = mu[col]
        out.append(mu)
        prev = mu
    out = np.array(out)
    return out.real if np.all(out.imag == 0) else out


# ---------------------------------------------------------------- reduced near-level problem

class _ChebInterp:
    """Barycentric interpolation of a matrix-valued function at first-kind Chebyshev points."""

    def __init__(self, f, lo, hi, n):
        j = np.arange(n)
        theta = (2 * j + 1) * np.pi / (2 * n)
        self.lo, self.hi = lo, hi
        self.x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(theta)
        self.w = (-1.0) ** j * np.sin(theta)
        self.F = np.array([f(x) for x in self.x])

    def __call__(self, lam):
        d = lam - self.x
        hit = np.flatnonzero(d == 0)
        if hit.size:
            return self.F[hit[0]]
        c = self.w / d
        return np.tensordot(c, self.F, axes=1) / c.sum()


class LevelReduction:
    """Mode-space reduction of the Birman-Schwinger problem near Lambda_q."""

    def __init__(self, alpha, q, B=1.0, ms=None):
        self.alpha = alpha
        self.q = int(q)
        self.B = float(B)
        nodes = alpha.nodes
        self.idx = np.flatnonzero(alpha.support_mask)
        if self.idx.size == 0:
            raise NoEigenvaluesFound("coupling vanishes identically")
        w = nodes.weights[self.idx]
        pts = nodes.points[self.idx]
        self.center = tuple(np.average(pts, axis=0, weights=w))
        r_max = float(np.hypot(*(pts - np.array(self.center)).T).max())
        self.ms = landau.mode_window(B, r_max, q) if ms is None else np.asarray(ms)
        psi = landau.mode_values(q, self.ms, pts, B, self.center)
        self.abs_sqrt = np.sqrt(np.abs(alpha.values[self.idx]))
        self.J = np.sign(alpha.values[self.idx])
        A = (self.abs_sqrt * np.sqrt(w))[:, None] * psi
        self.U, self.S, _ = np.linalg.svd(A, full_matrices=False)
        self.level = landau.landau_level(q, B)
        self.evaluations = 0

    def remainder(self, lam):
        R = bie.assemble_weyl(self.alpha.nodes, lam, self.B, pole=self.q).hermitian()
        return R[np.ix_(self.idx, self.idx)]

    def htilde(self, lam):
        self.evaluations += 1
        AR = self.abs_sqrt[:, None] * self.remainder(lam) * self.abs_sqrt[None, :]
        K = np.diag(self.J) + AR
        X = bie.solve_checked(K, self.U, f"reduced Birman-Schwinger matrix at lam={lam}")
        H = self.U.conj().T @ X
        return 0.5 * (H + H.conj().T)

    def nu(self, Ht):
        """Eigenvalues of S Ht S, with relative accuracy when Ht is sign definite."""
        for sgn in (1.0, -1.0):
            try:
                L = np.linalg.cholesky(sgn * Ht)
            except np.linalg.LinAlgError:
                continue
            sv = np.linalg.svd(self.S[:, None] * L, compute_uv=False)
            return sgn * sv**2
        return np.linalg.eigvalsh(self.S[:, None] * Ht * self.S[None, :])


@dataclass
class ClusterReport:
    q: int
    side: str
    B: float
    eigenvalues: np.ndarray
    gaps: np.ndarray
    multiplicities: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def level(self):
        return landau.landau_level(self.q, self.B)

    @property
    def reliable(self):
        return self.gaps >= RELIABLE_GAP * self.B

    @property
    def a_k(self):
        return asymptotic_ratios(self.gaps)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q", "side", "k", "lambda", "gap", "a_k", "reliable_flag"])
        a = self.a_k
        for k, (lam, g) in enumerate(zip(self.eigenvalues, self.gaps)):
            w.writerow([self.q, self.side, k, f"{lam:.17g}", f"{g:.17g}",
                        "" if k == 0 else f"{a[k]:.17g}", int(self.reliable[k])])
        return buf.getvalue()


def asymptotic_ratios(gaps):
    """a_k = (k! gap_k)^(1/k) in log space, k counted from 0 (a_0 is undefined, NaN)."""
    g = np.asarray(gaps, dtype=float)
    k = np.arange(len(g))
    out = np.full(len(g), np.nan)
    pos = k >= 1
    out[pos] = np.exp((specfun.log_factorial(k[pos]) + np.log(g[pos])) / k[pos])
    return out


def _build_interp(red, lo, hi, tol, n0=17, n_max=81):
    n = n0
    while True:
        interp = _ChebInterp(red.htilde, lo, hi, n)
        xs = interp.x
        probes = [0.5 * (xs[0] + xs[1]), 0.5 * (xs[n // 2] + xs[n // 2 + 1]), 0.5 * (xs[-1] + xs[-2])]
        scale = max(np.abs(F).max() for F in interp.F)
        err = max(np.abs(interp(p) - red.htilde(p)).max() for p in probes) / scale
        if err < tol or n >= n_max:
            interp.error = err
            return interp
        n = 2 * n + 1


def find_cluster_eigenvalues(curve, alpha, q, side, k_max=10, B=1.0, scan_points=400,
                             floor=1e-6, interp_tol=1e-11, reduction=None):
    """Eigenvalues of the delta-interaction operator in the cluster at Lambda_q on one side.

    The scan covers gaps ``floor*B < |lam - Lambda_q| <= B`` (for q = 0 below, as deep as
    needed), on a geometric grid of at least ``scan_points`` points, followed by
    bisection of every bracket where the counting function jumps; the jump size
    is the multiplicity.  ``floor`` may be lowered to follow the cluster into the
    factorial regime; gaps below 1e-11 B are flagged unreliable.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    alpha = as_strength(curve, alpha)
    if alpha.is_zero:
        raise NoEigenvaluesFound("alpha vanishes identically")
    red = reduction if reduction is not None else LevelReduction(alpha, q, B)
    sigma = 1.0 if side == "above" else -1.0
    lev = red.level
    depth = B
    if q == 0 and side == "below":
        depth = B + 4.0 * alpha.sup_norm**2
    noise = (1e3 * np.finfo(float).eps * red.S.max()) ** 2
    d_lo = max(floor * B, noise)
    for _ in range(6):
        lo, hi = (lev, lev + depth) if sigma > 0 else (lev - depth, lev)
        interp = _build_interp(red, lo, hi, interp_tol)

        def count(d):
            return int(np.sum(sigma * red.nu(interp(lev + sigma * d)) > d))

        top = count(depth)
        if not (q == 0 and side == "below") or top == 0:
            break
        depth *= 2.0
    n_pts = max(scan_points, int(20 * np.log10(depth / d_lo)) + 1)
    grid = np.geomspace(depth, d_lo, n_pts)
    counts = [top]
    found = []
    for a, b in zip(grid[:-1], grid[1:]):
        cb = count(b)
        if cb != counts[-1]:
            found.extend(_refine(count, b, a, cb, counts[-1]))
        counts.append(cb)
        if cb - top >= k_max:
            break
    if not found:
        raise NoEigenvaluesFound(f"no eigenvalues {side} Lambda_{q} with gap in ({d_lo:.3g}, {depth:.3g}]")
    found.sort(key=lambda t: -t[0])
    gaps, mult = [], []
    for d, m in found:
        gaps.extend([d] * m)
        mult.append(m)
    gaps = np.array(gaps[:k_max])
    lams = lev + sigma * gaps
    diag = {"interp_error": interp.error, "interp_nodes": len(interp.x), "modes": len(red.ms),
            "support_nodes": len(red.idx), "scan_points": len(counts), "floor": d_lo,
            "depth": depth, "evaluations": red.evaluations}
    return ClusterReport(q, side, B, lams, gaps, mult, diag)


def _refine(count, lo, hi, c_lo, c_hi, rtol=1e-13):
    """Split [lo, hi] (gaps, lo < hi) until each jump of the counting function is isolated."""
    if c_lo == c_hi:
        return []
    if hi - lo <= rtol * hi:
        return [(np.sqrt(lo * hi), c_lo - c_hi)]
    mid = np.sqrt(lo * hi)
    cm = count(mid)
    return _refine(count, lo, mid, c_lo, cm, rtol) + _refine(count, mid, hi, cm, c_hi, rtol)


# ---------------------------------------------------------------- asymptotics and summaries

def cluster_asymptotics(report, k_range=None):
    """Sequence a_k and the tail estimate (median of the last three available a_k).

    ``k_range`` is a pair (k_lo, k_hi) or any iterable of k; its extremes bound the window.
    """
    gaps = report.gaps if isinstance(report, ClusterReport) else np.asarray(report, dtype=float)
    if len(gaps) < 3:
        raise TooFewEigenvalues(f"need at least 3 eigenvalues, got {len(gaps)}")
    a = asymptotic_ratios(gaps)
    ks = np.arange(len(gaps))
    sel = ks >= 1
    if k_range is not None:
        lo, hi = min(k_range), max(k_range)
        sel &= (ks >= lo) & (ks <= hi)
    avail = a[sel]
    if len(avail) < 1:
        raise TooFewEigenvalues("no a_k in the requested range")
    return a, float(np.median(avail[-3:]))


def _sides_for(alpha):
    if alpha.sign > 0:
        return ("above",)
    if alpha.sign < 0:
        return ("below",)
    return SIDES


@dataclass
class SummabilityReport:
    inner: dict
    partial: list
    total: float


def summability_report(curve, alpha, B=1.0, q_max=2, k_max=12, floor=1e-30):
    """Weighted sums sum_q (2q+1)^-2 sum_k |lam_k(q) - Lambda_q| over the computed clusters."""
    if q_max > 4 or k_max > 40:
        raise ValueError("desk-scale limits: q_max <= 4, k_max <= 40")
    alpha = as_strength(curve, alpha)
    inner = {}
    partial = []
    total = 0.0
    for q in range(q_max + 1):
        s = 0.0
        if not alpha.is_zero:
            red = LevelReduction(alpha, q, B)
            for side in _sides_for(alpha):
                try:
                    rep = find_cluster_eigenvalues(curve, alpha, q, side, k_max, B, floor=floor, reduction=red)
                    s += float(np.sum(rep.gaps))
                except NoEigenvaluesFound:
                    pass
        inner[q] = s
        total += s / (2 * q + 1) ** 2
        partial.append(total)
    return SummabilityReport(inner, partial, total)


@dataclass
class SandwichReport:
    ratios: np.ndarray
    max_ratio: float
    min_ratio: float | None
    median: float


def sandwich_check(curve, alpha, q, B=1.0, lam0=None, ms=None, toeplitz_ms=None, k_max=15):
    """Compare s_k(P_q |W| P_q) with s_k(T_q^Gamma) on the same mode window."""
    alpha = as_strength(curve, alpha)
    if ms is not None and toeplitz_ms is not None and not np.array_equal(ms, toeplitz_ms):
        raise TruncationMismatch("the two sides use different mode sets")
    if alpha.is_zero:
        z = np.zeros(k_max)
        return SandwichReport(z, 0.0, None, 0.0)
    nodes = alpha.nodes
    idx = np.flatnonzero(alpha.support_mask)
    w = nodes.weights[idx]
    pts = nodes.points[idx]
    center = tuple(np.average(pts, axis=0, weights=w))
    if ms is None:
        r_max = float(np.hypot(*(pts - np.array(center)).T).max())
        ms = landau.mode_window(B, r_max, q)
    if lam0 is None:
        lam0 = -B - 4.0 * alpha.sup_norm**2
    Psi = np.sqrt(w)[:, None] * landau.mode_values(q, ms, pts, B, center)
    # gamma(conj lam0)^* psi_m is the trace of psi_m divided by (Lambda_q - lam0)
    Mh = bie.assemble_weyl(nodes, lam0, B).hermitian()[np.ix_(idx, idx)]
    a2 = np.sqrt(np.abs(alpha.values[idx]))
    J = np.sign(alpha.values[idx])
    K = np.diag(J) + a2[:, None] * Mh * a2[None, :]
    fac = 1.0 / (landau.landau_level(q, B) - lam0) ** 2
    Y = a2[:, None] * Psi
    if alpha.sign != 0:
        L = np.linalg.cholesky(J[0] * K)
        Z = np.linalg.solve(L, Y)
        sw = np.sort(fac * np.linalg.svd(Z, compute_uv=False) ** 2)[::-1]
    else:
        Hw = Y.conj().T @ np.linalg.solve(K, Y)
        sw = np.sort(fac * np.abs(np.linalg.eigvalsh(0.5 * (Hw + Hw.conj().T))))[::-1]
    st = toeplitz.singular_values_of_factor(Psi)
    k = min(k_max, len(sw), len(st))
    ratios = sw[:k] / st[:k]
    return SandwichReport(ratios, float(ratios.max()),
                          float(ratios.min()) if alpha.sign != 0 else None, float(np.median(ratios)))
