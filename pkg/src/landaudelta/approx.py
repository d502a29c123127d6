"""Squeezed tube potentials and their delta limit in a truncated Landau basis.

A potential V supported in the tube |t| <= beta around a curve is squeezed to

    V_eps(x + t nu) = (beta / eps) V(x + (beta / eps) t nu),   |t| < eps,

which keeps every normal integral and tends to a delta interaction of
strength alpha = int V dt.  Both Hamiltonians are projected onto a finite set
of Landau modes and the resolvent differences are compared as eps -> 0.

Profiles live on a tensor grid: curve nodes times Gauss-Legendre points in t.
Squeezing maps the t-grid on [-beta, beta] linearly onto [-eps, eps], so the
squeezed potential is again exactly a tensor-grid object.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from . import landau
from .errors import BadEpsilon, BasisTooSmall
from .geometry import TubularMap, gauss_legendre
from .spectral import StrengthFunction

T_ORDER = 8
GUARD_GROWTH = 1.25
GUARD_TOL = 0.10


@dataclass(frozen=True)
class TransversalProfile:
    """V(s, t) on the nodes of ``curve`` times Gauss points in t, half width ``beta``."""

    curve: object
    beta: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            raise ValueError("potential must be real")
        v = np.array(v, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.curve.n:
            raise ValueError("values must have shape (curve nodes, transversal points)")
        if not self.beta > 0:
            raise BadEpsilon("tube half width must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def order(self):
        return self.values.shape[1]

    @property
    def t_nodes(self):
        return self.beta * gauss_legendre(self.order)[0]

    @property
    def t_weights(self):
        return self.beta * gauss_legendre(self.order)[1]

    @property
    def half_width(self):
        return self.beta

    @property
    def sup_norm(self):
        return float(np.abs(self.values).max(initial=0.0))

    def normal_integral(self):
        return self.values @ self.t_weights

    @classmethod
    def from_function(cls, curve, f, beta=None, order=T_ORDER):
        """Sample V = f(points, s, t) with points, s of shape (n, 1) and t of shape (1, order)."""
        if beta is None:
            beta = TubularMap(curve).beta
        t = beta * gauss_legendre(order)[0]
        vals = f(curve.points[:, None, :], curve.s[:, None], t[None, :])
        return cls(curve, float(beta), np.broadcast_to(np.asarray(vals, dtype=float), (curve.n, order)))

    @classmethod
    def from_alpha(cls, alpha, beta=None, order=T_ORDER):
        """The tube profile V = alpha / (2 beta) whose normal integral is alpha."""
        curve = alpha.nodes
        if beta is None:
            beta = TubularMap(curve).beta
        vals = np.repeat(alpha.values[:, None] / (2.0 * beta), order, axis=1)
        return cls(curve, float(beta), vals)

    @classmethod
    def zero(cls, curve, beta=None, order=T_ORDER):
        if beta is None:
            beta = TubularMap(curve).beta
        return cls(curve, float(beta), np.zeros((curve.n, order)))


@dataclass(frozen=True)
class SqueezedPotential:
    profile: TransversalProfile
    eps: float

    @property
    def curve(self):
        return self.profile.curve

    @property
    def half_width(self):
        return self.eps

    @property
    def t_nodes(self):
        return self.profile.t_nodes * (self.eps / self.profile.beta)

    @property
    def t_weights(self):
        return self.profile.t_weights * (self.eps / self.profile.beta)

    @property
    def values(self):
        return self.profile.values * (self.profile.beta / self.eps)

    def normal_integral(self):
        return self.values @ self.t_weights


def squeeze(profile, eps):
    """V_eps = (beta/eps) V(., (beta/eps) t) on |t| < eps."""
    eps = float(eps)
    if not 0.0 < eps <= profile.beta * (1 + 1e-14):
        raise BadEpsilon(f"eps must lie in (0, {profile.beta}], got {eps}")
    return SqueezedPotential(profile, eps)


def alpha_from_profile(profile):
    """alpha(x) = int_{-beta}^{beta} V(x + t nu) dt on the curve nodes."""
    return StrengthFunction(profile.curve, profile.normal_integral())


# ---------------------------------------------------------------- Galerkin truncation

@dataclass(frozen=True)
class GalerkinTruncation:
    qs: np.ndarray
    ms: np.ndarray
    B: float
    center: tuple
    H_free: np.ndarray
    V_mat: np.ndarray
    delta_mat: np.ndarray

    @property
    def basis(self):
        return [landau.LandauMode(int(q), int(m), self.B) for q, m in zip(self.qs, self.ms)]

    @property
    def size(self):
        return len(self.qs)

    def block(self, mat, q):
        idx = np.flatnonzero(self.qs == q)
        return mat[np.ix_(idx, idx)]


def landau_basis(B, r_max, q_max=2, growth=1.0):
    """Mode indices (q, m) with q <= q_max and m in -q..M, M from the mode window (scaled)."""
    n_levels = int(np.ceil((q_max + 1) * growth - 1e-12))
    qs, ms = [], []
    for q in range(n_levels):
        M = int(np.ceil(landau.mode_window(B, r_max, q)[-1] * growth - 1e-12))
        m = np.arange(-q, M + 1)
        qs.append(np.full(len(m), q))
        ms.append(m)
    return np.concatenate(qs), np.concatenate(ms)


def _mode_matrix(qs, ms, points, B, center):
    out = np.empty(points.shape[:-1] + (len(qs),), dtype=complex)
    for q in np.unique(qs):
        idx = np.flatnonzero(qs == q)
        out[..., idx] = landau.mode_values(int(q), ms[idx], points, B, center)
    return out


def _hermitian(a):
    return 0.5 * (a + a.conj().T)


def assemble_galerkin(curve, B=1.0, basis=None, potential=None, alpha=None, center=(0.0, 0.0)):
    """Free, potential and delta matrices in the Landau basis ``basis = (qs, ms)``.

    ``potential`` is a TransversalProfile or SqueezedPotential on ``curve``;
    ``alpha`` (StrengthFunction, number or None) defaults to the normal
    integral of the potential.
    """
    if basis is None:
        r_max = float(np.hypot(*(curve.points - np.array(center)).T).max())
        beta = potential.half_width if potential is not None else 0.0
        basis = landau_basis(B, r_max + beta)
    qs, ms = (np.asarray(b, dtype=int) for b in basis)
    if len(qs) == 0:
        raise ValueError("basis is empty")
    n = len(qs)
    H0 = B * (2 * qs + 1).astype(float)
    if potential is not None:
        if potential.curve is not curve:
            raise ValueError("potential lives on a different curve")
        t = potential.t_nodes
        tw = potential.t_weights
        pts = curve.points[:, None, :] + t[None, :, None] * curve.normals[:, None, :]
        jac = 1.0 - t[None, :] * curve.curvature[:, None]
        wts = curve.weights[:, None] * tw[None, :] * jac * potential.values
        F = _mode_matrix(qs, ms, pts.reshape(-1, 2), B, center)
        V = _hermitian(F.conj().T @ (wts.reshape(-1)[:, None] * F))
    else:
        V = np.zeros((n, n), dtype=complex)
    if alpha is None:
        a_vals = potential.normal_integral() if potential is not None else np.zeros(curve.n)
    elif isinstance(alpha, StrengthFunction):
        if alpha.nodes is not curve:
            raise ValueError("coupling lives on a different node set")
        a_vals = alpha.values
    else:
        a_vals = np.full(curve.n, float(alpha))
    F0 = _mode_matrix(qs, ms, curve.points, B, center)
    D = _hermitian(F0.conj().T @ ((curve.weights * a_vals)[:, None] * F0))
    for arr in (H0, V, D):
        arr.setflags(write=False)
    return GalerkinTruncation(qs, ms, float(B), tuple(center), H0, V, D)


def _resolvent(H0, P, lam):
    A = np.diag(H0 - lam) + P
    return np.linalg.inv(A)


@dataclass(frozen=True)
class GapReport:
    eps: np.ndarray
    gaps: np.ndarray
    p: float
    p_stderr: float
    guard_change: float
    basis_size: int

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "gap"])
        for e, g in zip(self.eps, self.gaps):
            w.writerow([f"{e:.17g}", f"{g:.17g}"])
        w.writerow(["p", f"{self.p:.17g}", "stderr", f"{self.p_stderr:.17g}"])
        return buf.getvalue()


def _gaps(curve, profile, B, basis, lam, eps_list, center):
    out = []
    alpha = alpha_from_profile(profile)
    ref = None
    for eps in eps_list:
        gt = assemble_galerkin(curve, B, basis, squeeze(profile, eps), alpha, center)
        if ref is None:
            ref = _resolvent(gt.H_free, gt.delta_mat, lam)
        out.append(np.linalg.norm(_resolvent(gt.H_free, gt.V_mat, lam) - ref, 2))
    return np.array(out)


def resolvent_gap(curve, profile, B=1.0, basis=None, lam=None, eps_list=None, center=(0.0, 0.0),
                  guard=True):
    """Operator-norm gaps g(eps) between the squeezed and delta resolvents, with p fitted."""
    lam = 1j * B if lam is None else complex(lam)
    if lam.imag == 0:
        raise ValueError("spectral parameter must be nonreal")
    beta = profile.beta
    eps = np.asarray(beta * 0.5 ** np.arange(1, 6) if eps_list is None else eps_list, dtype=float)
    if np.any(eps <= 0) or np.any(eps > beta * (1 + 1e-14)):
        raise BadEpsilon(f"eps must lie in (0, {beta}]")
    r_max = float(np.hypot(*(curve.points - np.array(center)).T).max()) + beta
    base = landau_basis(B, r_max) if basis is None else basis
    g = _gaps(curve, profile, B, base, lam, eps, center)
    change = 0.0
    if guard:
        if basis is None:
            big = landau_basis(B, r_max, growth=GUARD_GROWTH)
        else:
            big = _grow(basis, B, GUARD_GROWTH)
        g2 = _gaps(curve, profile, B, big, lam, eps, center)
        scale = np.maximum(np.abs(g), 1e-300)
        change = float(np.max(np.abs(g2 - g) / scale)) if np.any(g > 0) else 0.0
        if change > GUARD_TOL:
            raise BasisTooSmall(f"enlarging the basis by 25% changes a gap by {change:.1%}")
    if np.all(g > 0) and len(g) >= 3:
        fit = linregress(np.log(eps), np.log(g))
        p, se = float(fit.slope), float(fit.stderr)
    else:
        p, se = float("nan"), float("nan")
    return GapReport(eps, g, p, se, change, len(base[0]))


def _grow(basis, B, factor):
    qs, ms = (np.asarray(b, dtype=int) for b in basis)
    q_max = int(qs.max())
    n_levels = int(np.ceil((q_max + 1) * factor - 1e-12))
    out_q, out_m = [], []
    for q in range(n_levels):
        cur = ms[qs == q]
        M = int(np.ceil((cur.max() if cur.size else ms.max()) * factor))
        m = np.arange(-q, M + 1)
        out_q.append(np.full(len(m), q))
        out_m.append(m)
    return np.concatenate(out_q), np.concatenate(out_m)
