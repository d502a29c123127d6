"""Logarithmic energy, equilibrium measures and capacity of curves and arcs.

Measures are discretised as piecewise-constant densities on panels, so the
unknowns are panel masses ``w`` and the energy is ``w^T E w`` with

    E[P, Q] = (1 / (h_P h_Q)) int_P int_Q ln(1 / |x - y|) ds(x) ds(y).

Well separated panel pairs use the Gauss double sum.  For a panel with itself
and for touching neighbours the logarithm is split as
``ln|s - s'| + ln(|x - y| / |s - s'|)``: the first term is integrated exactly
(flat-panel formulas in arc length) and the second one is smooth.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve

from .errors import PointMassDiagonal, SolverStalled
from .geometry import PanelSet, gauss_legendre, panel_local_s

MAX_ITER = 500


@dataclass
class _Panels:
    x: np.ndarray        # (P, k, 2) quadrature points
    w: np.ndarray        # (P, k) arc-length weights
    t: np.ndarray        # (P, k) arc length from the panel start
    h: np.ndarray        # (P,) panel lengths
    adj: np.ndarray      # (A, 2) pairs (P, Q) with the end of P equal to the start of Q

    @property
    def centers(self):
        return np.einsum("pk,pkd->pd", self.w, self.x) / self.h[:, None]


def _from_panelset(nodes):
    k = nodes.order
    P = nodes.n_panels
    x = nodes.points.reshape(P, k, 2)
    w = nodes.weights.reshape(P, k)
    t = panel_local_s(nodes).reshape(P, k)
    h = w.sum(axis=1)
    adj = [(i, i + 1) for i in range(P - 1)]
    if nodes.closed:
        adj.append((P - 1, 0))
    return _Panels(x, w, t, h, np.array(adj, dtype=int).reshape(-1, 2))


def _from_segments(ends, order=8):
    ends = np.asarray(ends, dtype=float)
    a, b = ends[:, 0, :], ends[:, 1, :]
    h = np.hypot(*(b - a).T)
    g, gw = gauss_legendre(order)
    frac = 0.5 * (g + 1.0)
    x = a[:, None, :] + frac[None, :, None] * (b - a)[:, None, :]
    w = 0.5 * h[:, None] * gw[None, :]
    t = h[:, None] * frac[None, :]
    adj = [(i, j) for i in range(len(a)) for j in range(len(a))
           if i != j and np.array_equal(b[i], a[j])]
    return _Panels(x, w, t, h, np.array(adj, dtype=int).reshape(-1, 2))


def _concat(parts):
    offs = np.cumsum([0] + [len(p.h) for p in parts])
    k = max(p.x.shape[1] for p in parts)
    if any(p.x.shape[1] != k for p in parts):
        raise ValueError("all pieces of a union need the same quadrature order")
    return _Panels(
        np.concatenate([p.x for p in parts]),
        np.concatenate([p.w for p in parts]),
        np.concatenate([p.t for p in parts]),
        np.concatenate([p.h for p in parts]),
        np.concatenate([p.adj + o for p, o in zip(parts, offs[:-1])]),
    )


def panels_of(obj):
    """Panel data for a node set, a union (list) of node sets, or flat segments (P, 2, 2)."""
    if isinstance(obj, _Panels):
        return obj
    if isinstance(obj, PanelSet):
        return _from_panelset(obj)
    if isinstance(obj, (list, tuple)) and obj and all(isinstance(o, PanelSet) for o in obj):
        return _concat([_from_panelset(o) for o in obj])
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 3 and arr.shape[1:] == (2, 2):
        return _from_segments(arr)
    raise TypeError("expected a node set, a list of node sets or an array of segments")


def _flat_log(x):
    # Phi with Phi'' = ln x and Phi(0) = 0
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, 0.5 * x**2 * np.log(np.where(x > 0, x, 1.0)) - 0.75 * x**2, 0.0)


def _pair_log(xa, xb):
    d = xa[:, None, :] - xb[None, :, :]
    return np.log(np.hypot(d[..., 0], d[..., 1]))


def energy_matrix(panels):
    """Symmetric matrix E of panel-averaged logarithmic interactions."""
    pn = panels_of(panels)
    if np.any(pn.h <= 0):
        raise PointMassDiagonal("a panel of zero length carries a point mass")
    P, k = pn.w.shape
    X = pn.x.reshape(-1, 2)
    W = pn.w.reshape(-1)
    L = np.empty((P * k, P * k))
    # row blocks keep the temporary small
    step = max(1, 4096 // k) * k
    for r0 in range(0, P * k, step):
        with np.errstate(divide="ignore"):
            L[r0:r0 + step] = _pair_log(X[r0:r0 + step], X)
    S = (W[:, None] * L * W[None, :]).reshape(P, k, P, k).sum(axis=(1, 3))
    for p in range(P):
        x, w, t, h = pn.x[p], pn.w[p], pn.t[p], pn.h[p]
        dt = np.abs(t[:, None] - t[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = _pair_log(x, x) - np.log(dt)
        np.fill_diagonal(corr, 0.0)
        S[p, p] = h * h * np.log(h) - 1.5 * h * h + w @ corr @ w
    for p, q in pn.adj:
        hp, hq = pn.h[p], pn.h[q]
        exact = _flat_log(hp + hq) - _flat_log(hp) - _flat_log(hq)
        gap = (hp - pn.t[p])[:, None] + pn.t[q][None, :]
        corr = _pair_log(pn.x[p], pn.x[q]) - np.log(gap)
        val = exact + pn.w[p] @ corr @ pn.w[q]
        S[p, q] = S[q, p] = val
    E = -S / np.outer(pn.h, pn.h)
    return 0.5 * (E + E.T)


def energy(panels, weights):
    """Logarithmic energy I(mu) of the panel-lumped measure with masses ``weights``."""
    E = energy_matrix(panels)
    w = np.asarray(weights, dtype=float)
    return float(w @ E @ w)


@dataclass(frozen=True)
class EquilibriumMeasure:
    nodes: np.ndarray
    weights: np.ndarray
    robin: float
    capacity: float
    panels: object = None
    matrix: np.ndarray = None
    iterations: int = 0

    def potential(self):
        """Panel-averaged potential sum_Q E[P, Q] w_Q of the measure."""
        return self.matrix @ self.weights

    def potential_at(self, points):
        """Pointwise potential int ln(1/|x - y|) dmu(y) at points away from the panel nodes."""
        pn = self.panels
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        dens = (self.weights / pn.h)[:, None] * pn.w
        return -(_pair_log(pts, pn.x.reshape(-1, 2)) @ dens.reshape(-1))

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y", "weight"])
        for (x, y), w in zip(self.nodes, self.weights):
            wr.writerow([f"{x:.17g}", f"{y:.17g}", f"{w:.17g}"])
        return buf.getvalue()

    def summary(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["robin", "capacity", "panels"])
        wr.writerow([f"{self.robin:.17g}", f"{self.capacity:.17g}", len(self.weights)])
        return buf.getvalue()


def _kkt(E, support):
    n = len(support)
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = E[np.ix_(support, support)]
    K[:n, n] = -1.0
    K[n, :n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    sol = solve(K, rhs)
    return sol[:n], sol[n]


def equilibrium(obj, max_iter=MAX_ITER, tol=1e-13):
    """Equilibrium measure by an active-set method on the simplex.

    On the current support S the optimality system ``E_SS w = rho 1,
    sum w = 1`` is solved; panels with negative mass leave S and panels
    with potential below rho rejoin it.
    """
    pn = panels_of(obj)
    if pn.h.sum() <= 0:
        raise PointMassDiagonal("set has zero length")
    E = energy_matrix(pn)
    P = len(pn.h)
    support = np.arange(P)
    for it in range(1, max_iter + 1):
        w_s, rho = _kkt(E, support)
        neg = w_s < 0
        if neg.any():
            # drop the most negative panel(s); one at a time keeps the iteration monotone
            drop = support[np.argmin(w_s)]
            support = support[support != drop]
            continue
        w = np.zeros(P)
        w[support] = w_s
        pot = E @ w
        off = np.setdiff1d(np.arange(P), support)
        if off.size:
            viol = pot[off] - rho
            j = np.argmin(viol)
            if viol[j] < -tol * max(1.0, abs(rho)):
                support = np.sort(np.append(support, off[j]))
                continue
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        robin = float(w @ E @ w)
        return EquilibriumMeasure(pn.centers, w, robin, float(np.exp(-robin)), pn, E, it)
    raise SolverStalled(f"active-set iteration did not settle in {max_iter} steps")


def capacity_of(obj):
    """Logarithmic capacity exp(-I(mu*)) of a node set or union of node sets."""
    return equilibrium(obj).capacity
