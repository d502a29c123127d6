"""Nyström discretisation of boundary integral operators on panel node sets.

Every kernel handled here has the form ``K(x, y) = -c(x, y) ln|x - y| + s(x, y)``
with smooth ``c`` and ``s``.  Far from the diagonal a matrix entry is the
plain panel rule ``A[i, j] = K(x_i, x_j) w_j``.  Blocks coupling a panel with
itself or a neighbour are Galerkin integrals in the Lagrange basis of the
Gauss nodes: the inner integral uses product (log-weighted) Gauss weights, the
outer one a rule graded toward the panel ends.  Because that basis has the
exact mass matrix diag(w), ``W^1/2 A W^-1/2`` is the natural symmetric form,
and all spectral statements are made for it.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.special as sps

from . import landau, specfun
from .errors import SingularBS, TargetTooClose
from .geometry import ORDER, gauss_legendre

COND_LIMIT = 1e12
_BLOCK = 256
_threads = 1


def set_threads(n):
    """Number of worker threads used for row-block assembly."""
    global _threads
    _threads = max(1, int(n))


# ---------------------------------------------------------------- log-weighted quadrature

def _log_moments(z, order):
    """int_{-1}^{1} t^k ln|z - t| dt for k < order and real z (vectorised over z)."""
    z = np.asarray(z, dtype=float)
    q = np.empty(z.shape + (order + 1,))
    q[..., 0] = np.log(np.abs((z + 1.0) / (z - 1.0)))
    for k in range(1, order + 1):
        q[..., k] = z * q[..., k - 1] - (1.0 - (-1.0) ** k) / k
    lm, lp = np.log(np.abs(z - 1.0)), np.log(np.abs(z + 1.0))
    p = np.empty(z.shape + (order,))
    for k in range(order):
        p[..., k] = (lm - (-1.0) ** (k + 1) * lp + q[..., k + 1]) / (k + 1)
    return p


def log_weights(z, order):
    """Product weights w_j(z) with sum_j w_j g(t_j) = int g(t) ln|z - t| dt for polynomial g."""
    t, _ = gauss_legendre(order)
    vt = np.vander(t, order, increasing=True).T  # vt[k, j] = t_j^k
    p = _log_moments(z, order)
    return np.linalg.solve(vt, p.reshape(-1, order).T).T.reshape(p.shape)


def _graded_rule(levels=14, order=ORDER):
    """Composite Gauss rule on [-1, 1] refined dyadically toward both endpoints."""
    t, w = gauss_legendre(order)
    edges = 1.0 - 2.0 ** -np.arange(1, levels + 1)
    br = np.concatenate([[-1.0], -edges[::-1], edges, [1.0]])
    br = np.unique(br)
    a, b = br[:-1], br[1:]
    x = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * t[None, :]
    return x.ravel(), (0.5 * (b - a)[:, None] * w[None, :]).ravel()


def _lagrange_basis(t, x):
    """Values l_i(x) of the Lagrange basis on nodes t, shape (len(x), len(t))."""
    out = np.ones((len(x), len(t)))
    for i in range(len(t)):
        for k in range(len(t)):
            if k != i:
                out[:, i] *= (x - t[k]) / (t[i] - t[k])
    return out


@dataclass(frozen=True)
class NearField:
    """Geometry-only data for the near-field Galerkin blocks.

    For each ordered panel pair (P, Q) with Q equal or adjacent to P the block
    ``G[i, j] = int_P int_Q l_i(x) K(x, y) l_j(y)`` is computed with a graded
    outer rule on P (points ``xo``, weights ``ow`` times basis ``basis``) and a
    product rule on Q whose log weights are ``logw``.
    """

    pairs: np.ndarray      # (npairs, 2) panel indices (P, Q)
    xo: np.ndarray         # (npairs, nx, 2) outer points on P
    logw: np.ndarray       # (npairs, nx, order) product log weights on Q
    owb: np.ndarray        # (npairs, nx, order) outer weight times Lagrange basis of P


_near_cache = weakref.WeakKeyDictionary()


def near_field(nodes):
    nf = _near_cache.get(nodes)
    if nf is not None:
        return nf
    order = nodes.order
    t, _ = gauss_legendre(order)
    xr, wr = _graded_rule(order=order)
    basis = _lagrange_basis(t, xr)
    period = getattr(nodes.shape, "period", None)
    mid = 0.5 * (nodes.breaks[:-1] + nodes.breaks[1:])
    half = nodes.panel_half
    pairs, XO, LW, OWB = [], [], [], []
    for P in range(nodes.n_panels):
        u_out = mid[P] + half[P] * xr
        p_out, d1, _ = nodes.shape.eval(u_out)
        sp_out = np.hypot(d1[:, 0], d1[:, 1])
        owb = (wr * half[P] * sp_out)[:, None] * basis
        for Q in [P] + nodes.neighbours(P):
            src = np.arange(Q * order, (Q + 1) * order)
            u = u_out
            if nodes.closed and period is not None:
                u = mid[Q] + (u - mid[Q] + 0.5 * period) % period - 0.5 * period
            z = (u - mid[Q]) / half[Q]
            om = log_weights(z, order)
            r = np.hypot(*(p_out[:, None, :] - nodes.points[src][None, :, :]).transpose(2, 0, 1))
            dt = np.abs(z[:, None] - t[None, :])
            lw = nodes.speed[src][None, :] * half[Q] * om + nodes.weights[src][None, :] * np.log(r / dt)
            pairs.append((P, Q))
            XO.append(p_out)
            LW.append(lw)
            OWB.append(owb)
    nf = NearField(np.array(pairs), np.array(XO), np.array(LW), np.array(OWB))
    _near_cache[nodes] = nf
    return nf


def _assemble(nodes, far_kernel, near_parts, hermitian=False):
    """Log-corrected matrix A with A[i, j] ~ K(x_i, x_j) w_j away from the diagonal.

    far_kernel(rows) -> K(x_i, x_j) for the given rows and all columns (the
    diagonal value is ignored); near_parts(x, y) -> (c, s) with
    K = -c ln|x - y| + s for x != y.  Blocks that touch or neighbour the
    diagonal are Galerkin integrals in the Lagrange basis, whose mass matrix is
    exactly diag(w) on Gauss nodes.
    """
    n = nodes.n
    order = nodes.order
    w = nodes.weights
    A = np.empty((n, n), dtype=complex)

    def block(lo):
        hi = min(n, lo + _BLOCK)
        A[lo:hi] = far_kernel(np.arange(lo, hi)) * w[None, :]

    starts = range(0, n, _BLOCK)
    if _threads > 1:
        with ThreadPoolExecutor(_threads) as ex:
            list(ex.map(block, starts))
    else:
        for lo in starts:
            block(lo)
    nf = near_field(nodes)
    npairs, nx, _ = nf.logw.shape
    Q = nf.pairs[:, 1]
    src = (Q[:, None] * order + np.arange(order)[None, :])  # (npairs, order)
    y = nodes.points[src]  # (npairs, order, 2)
    xo = np.broadcast_to(nf.xo[:, :, None, :], (npairs, nx, order, 2)).reshape(-1, 2)
    yy = np.broadcast_to(y[:, None, :, :], (npairs, nx, order, 2)).reshape(-1, 2)
    c, s = near_parts(xo, yy)
    c = c.reshape(npairs, nx, order)
    s = s.reshape(npairs, nx, order)
    T = s * w[src][:, None, :] - c * nf.logw
    G = np.einsum("pxi,pxj->pij", nf.owb, T)
    if hermitian:
        index = {tuple(pq): k for k, pq in enumerate(nf.pairs.tolist())}
        mirror = np.array([index[(q, p)] for p, q in nf.pairs.tolist()])
        G = 0.5 * (G + np.conj(np.swapaxes(G[mirror], 1, 2)))
    P = nf.pairs[:, 0]
    rows = (P[:, None] * order + np.arange(order)[None, :])
    A[rows[:, :, None], src[:, None, :]] = G / w[rows][:, :, None]
    return A


def _pair_geometry(pts, rows):
    d = pts[rows][:, None, :] - pts[None, :, :]
    d2 = d[..., 0] ** 2 + d[..., 1] ** 2
    return d2


# ---------------------------------------------------------------- matrices

@dataclass(frozen=True)
class BoundaryMatrix:
    kind: str
    lam: complex | None
    nodes: object
    entries: np.ndarray
    B: float | None = None
    pole: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def n(self):
        return self.entries.shape[0]

    def symmetrized(self):
        sw = np.sqrt(self.nodes.weights)
        return sw[:, None] * self.entries / sw[None, :]

    def hermitian(self):
        """Hermitian part of the symmetrised matrix (the operator for real lam)."""
        S = self.symmetrized()
        return 0.5 * (S + S.conj().T)

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.hermitian())

    def norm(self):
        return float(np.linalg.norm(self.symmetrized(), 2))

    def cache_key(self):
        d = {"kind": self.kind, "lam": None if self.lam is None else [self.lam.real, self.lam.imag],
             "B": self.B, "pole": self.pole, "curve": self.nodes.content_hash, "n": self.n}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:24], d


def _landau_parts(nodes, lam, B, pole):
    a = landau.spectral_a(lam, B)
    pts = nodes.points
    lnB2 = np.log(0.5 * B)

    def far(rows):
        d2 = _pair_geometry(pts, rows)
        rho = 0.5 * B * d2
        rho[rho == 0] = 1.0
        F = specfun.gamma_u(a, rho.ravel(), pole=pole).reshape(rho.shape)
        ph = landau.phase_factor(pts[rows][:, None, :], pts[None, :, :], B)
        return ph * F / (4 * np.pi)

    def near(x, y):
        rho = 0.5 * B * np.sum((x - y) ** 2, axis=1)
        C, E = specfun.gamma_u_parts(a, rho, pole=pole)
        ph = landau.phase_factor(x, y, B)
        return ph * C / (2 * np.pi), ph * (E - lnB2 * C) / (4 * np.pi)

    return far, near


def assemble_weyl(curve, lam, B=1.0, pole=None):
    """Nyström matrix of M(lam); with ``pole=q`` the level-q term P_q/(Lambda_q - lam) is removed."""
    lam = complex(lam)
    if pole is None:
        landau.check_off_levels(lam, B)
    far, near = _landau_parts(curve, lam, B, pole)
    A = _assemble(curve, far, near, hermitian=lam.imag == 0)
    kind = "Weyl" if pole is None else "WeylRegular"
    return BoundaryMatrix(kind, lam, curve, A, float(B), pole)


def _k0_smooth(r):
    """K0(r) + I0(r) ln r, smooth at r = 0."""
    r = np.asarray(r, dtype=float)
    x = 0.25 * r * r
    term = np.ones_like(r)
    harm = 0.0
    out = (np.log(2.0) - specfun.EULER_GAMMA) * sps.i0(r)
    for k in range(1, 40):
        term = term * x / (k * k)
        harm += 1.0 / k
        out = out + term * harm
        if np.all(term * harm < 1e-17 * np.abs(out)):
            break
    big = r > 4.0
    if np.any(big):
        out[big] = sps.k0(r[big]) + sps.i0(r[big]) * np.log(r[big])
    return out


def assemble_single_layer(curve):
    """Nyström matrix of the operator with kernel K0(|x - y|) / (2 pi)."""
    pts = curve.points

    def far(rows):
        r = np.sqrt(_pair_geometry(pts, rows))
        r[r == 0] = 1.0
        return sps.k0(r) / (2 * np.pi)

    def near(x, y):
        r = np.hypot(*(x - y).T)
        return sps.i0(r) / (2 * np.pi), _k0_smooth(r) / (2 * np.pi)

    A = _assemble(curve, far, near, hermitian=True).real.astype(complex)
    return BoundaryMatrix("SingleLayer", None, curve, A)


# ---------------------------------------------------------------- gamma field and Krein term

def _check_targets(nodes, targets):
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    h = float(nodes.panel_lengths.max())
    d = np.sqrt(((targets[:, None, :] - nodes.points[None, :, :]) ** 2).sum(-1)).min(axis=1)
    if np.any(d < h):
        raise TargetTooClose(f"target within {d.min():.3g} of the boundary (panel length {h:.3g})")
    return targets


def gamma_field_matrix(nodes, lam, B, targets, check=True):
    """Matrix Gamma[a, j] = G_lam(x_a, y_j) sqrt(w_j) (acts on symmetrised densities)."""
    targets = _check_targets(nodes, targets) if check else np.atleast_2d(targets)
    a = landau.spectral_a(lam, B)
    d2 = ((targets[:, None, :] - nodes.points[None, :, :]) ** 2).sum(-1)
    F = specfun.gamma_u(a, (0.5 * B * d2).ravel()).reshape(d2.shape)
    K = landau.phase_factor(targets[:, None, :], nodes.points[None, :, :], B) * F / (4 * np.pi)
    return K * np.sqrt(nodes.weights)[None, :]


def gamma_apply(curve, lam, B, density, targets):
    """Single-layer potential with the Landau kernel at off-curve targets."""
    lam = complex(lam)
    landau.check_off_levels(lam, B)
    density = np.asarray(density, dtype=complex)
    if not np.any(density):
        return np.zeros(len(np.atleast_2d(targets)), dtype=complex)
    G = gamma_field_matrix(curve, lam, B, targets)
    return G @ (np.sqrt(curve.weights) * density)


def _alpha_values(alpha, n):
    vals = np.asarray(getattr(alpha, "values", alpha), dtype=float)
    if vals.ndim == 0:
        vals = np.full(n, float(vals))
    return vals


def assemble_perturbation(curve, alpha, lam, B, grid, factorized=True, weyl=None):
    """Kernel of W_lam = -gamma(lam)(1 + alpha M(lam))^-1 alpha gamma(conj lam)^* on grid x grid."""
    lam = complex(lam)
    landau.check_off_levels(lam, B)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    al = _alpha_values(alpha, curve.n)
    if not np.any(al):
        return np.zeros((len(grid), len(grid)), dtype=complex)
    Mb = weyl if weyl is not None else assemble_weyl(curve, lam, B)
    Mh = Mb.symmetrized()
    if abs(lam.imag) == 0:
        Mh = 0.5 * (Mh + Mh.conj().T)
    G = gamma_field_matrix(curve, lam, B, grid, check=False)
    Gs = gamma_field_matrix(curve, np.conj(lam), B, grid, check=False).conj().T  # gamma(conj lam)^*
    n = curve.n
    if factorized:
        a2 = np.sqrt(np.abs(al))
        a1 = np.sign(al) * a2
        K = np.eye(n) + a1[:, None] * Mh * a2[None, :]
        X = solve_checked(K, a1[:, None] * Gs)
        return -(G * a2[None, :]) @ X
    K = np.eye(n) + al[:, None] * Mh
    X = solve_checked(K, al[:, None] * Gs)
    return -G @ X


def solve_checked(K, rhs, what="Birman-Schwinger matrix"):
    """Solve K X = rhs, raising SingularBS when the estimated condition number exceeds 1e12."""
    lu, piv = scipy.linalg.lu_factor(K, check_finite=False)
    anorm = np.abs(K).sum(axis=0).max()
    gecon = scipy.linalg.lapack.get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, anorm, norm="1")
    if not rcond > 1.0 / COND_LIMIT:
        raise SingularBS(f"{what} is numerically singular (condition ~{1.0 / max(rcond, 1e-300):.3g})")
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


# ---------------------------------------------------------------- on-disk cache

def save_matrix(directory, bm):
    """Write entries as raw little-endian complex128 plus a JSON sidecar; returns the key."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    key, meta = bm.cache_key()
    payload = np.ascontiguousarray(bm.entries, dtype="<c16").tobytes()
    _atomic_write(directory / f"{key}.bin", payload)
    _atomic_write(directory / f"{key}.json", json.dumps(meta, sort_keys=True).encode())
    return key


def load_matrix(directory, key, nodes):
    directory = Path(directory)
    binp, metap = directory / f"{key}.bin", directory / f"{key}.json"
    if not (binp.exists() and metap.exists()):
        return None
    meta = json.loads(metap.read_text())
    if meta["curve"] != nodes.content_hash:
        return None
    A = np.frombuffer(binp.read_bytes(), dtype="<c16").reshape(meta["n"], meta["n"]).astype(complex)
    lam = None if meta["lam"] is None else complex(*meta["lam"])
    return BoundaryMatrix(meta["kind"], lam, nodes, A, meta["B"], meta["pole"])


def cached_weyl(directory, curve, lam, B=1.0, pole=None):
    """assemble_weyl with a content-addressed disk cache (directory None disables it)."""
    if directory is None:
        return assemble_weyl(curve, lam, B, pole)
    probe = BoundaryMatrix("Weyl" if pole is None else "WeylRegular", complex(lam), curve,
                           np.zeros((curve.n, curve.n), dtype=complex), float(B), pole)
    key, _ = probe.cache_key()
    bm = load_matrix(directory, key, curve)
    if bm is None:
        bm = assemble_weyl(curve, lam, B, pole)
        save_matrix(directory, bm)
    return bm


def _atomic_write(path, data):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
