"""Closed curves, sub-arcs and tubular coordinates with panel Gauss-Legendre quadrature.

Sign conventions: curves are traversed counterclockwise, the normal points
out of the enclosed domain, and the signed curvature is
``kappa = t2 * a1 - t1 * a2`` for the unit tangent ``t`` and the acceleration
``a`` (both arc-length derivatives).  With this
convention a counterclockwise circle of radius r has kappa = -1/r, and the
area element of the tube map ``x + t*nu`` is ``1 - t*kappa``.
"""

from __future__ import annotations

import hashlib
import json
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    ArcVanishes,
    BadPanelCount,
    EmptyWindow,
    NonPositiveRadius,
    OutsideTube,
    SelfIntersecting,
)

ORDER = 8
TWO_PI = 2.0 * np.pi


def gauss_legendre(order=ORDER):
    return np.polynomial.legendre.leggauss(order)


# ---------------------------------------------------------------- parametrisations

class CircleShape:
    period = TWO_PI

    def __init__(self, center, radius):
        self.center = (float(center[0]), float(center[1]))
        self.radius = float(radius)

    def eval(self, u):
        u = np.asarray(u, dtype=float)
        c, s = np.cos(u), np.sin(u)
        r = self.radius
        p = np.stack([self.center[0] + r * c, self.center[1] + r * s], axis=-1)
        d1 = np.stack([-r * s, r * c], axis=-1)
        d2 = np.stack([-r * c, -r * s], axis=-1)
        return p, d1, d2

    def to_dict(self):
        return {"type": "circle", "center": list(self.center), "radius": self.radius}


class FourierShape:
    """Star-shaped curve r(u) = sum a_n cos(n u) + b_n sin(n u) around a center."""

    period = TWO_PI

    def __init__(self, cos_coeffs, sin_coeffs=(), center=(0.0, 0.0)):
        self.cos_coeffs = tuple(float(c) for c in cos_coeffs)
        self.sin_coeffs = tuple(float(c) for c in sin_coeffs)
        self.center = (float(center[0]), float(center[1]))

    def radius(self, u, deriv=0):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for n, a in enumerate(self.cos_coeffs):
            out += a * _trig_deriv(np.cos, n, u, deriv)
        for n, b in enumerate(self.sin_coeffs):
            out += b * _trig_deriv(np.sin, n, u, deriv)
        return out

    def eval(self, u):
        u = np.asarray(u, dtype=float)
        r, r1, r2 = self.radius(u), self.radius(u, 1), self.radius(u, 2)
        c, s = np.cos(u), np.sin(u)
        p = np.stack([self.center[0] + r * c, self.center[1] + r * s], axis=-1)
        d1 = np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)
        d2 = np.stack([r2 * c - 2 * r1 * s - r * c, r2 * s + 2 * r1 * c - r * s], axis=-1)
        return p, d1, d2

    def to_dict(self):
        return {
            "type": "fourier",
            "cos": list(self.cos_coeffs),
            "sin": list(self.sin_coeffs),
            "center": list(self.center),
        }


def _trig_deriv(fn, n, u, deriv):
    # d^k/du^k of cos(n u) or sin(n u)
    phase = deriv * np.pi / 2
    if fn is np.cos:
        return n**deriv * np.cos(n * u + phase)
    return n**deriv * np.sin(n * u + phase)


class LineShape:
    """Straight segment p0 + u (p1 - p0), u in [0, 1]."""

    period = 1.0

    def __init__(self, p0, p1):
        self.p0 = (float(p0[0]), float(p0[1]))
        self.p1 = (float(p1[0]), float(p1[1]))

    def eval(self, u):
        u = np.asarray(u, dtype=float)
        a, b = np.array(self.p0), np.array(self.p1)
        p = a + u[..., None] * (b - a)
        d1 = np.broadcast_to(b - a, p.shape).copy()
        return p, d1, np.zeros_like(p)

    def to_dict(self):
        return {"type": "line", "p0": list(self.p0), "p1": list(self.p1)}


class AffineShape:
    """Image of another shape under x -> shift + scale * R(angle) x."""

    def __init__(self, base, scale=1.0, angle=0.0, shift=(0.0, 0.0)):
        if not scale > 0:
            raise NonPositiveRadius("scale must be positive")
        self.base = base
        self.scale = float(scale)
        self.angle = float(angle)
        self.shift = (float(shift[0]), float(shift[1]))
        self.period = base.period

    def eval(self, u):
        p, d1, d2 = self.base.eval(u)
        c, s = np.cos(self.angle), np.sin(self.angle)
        R = self.scale * np.array([[c, -s], [s, c]])
        return p @ R.T + np.array(self.shift), d1 @ R.T, d2 @ R.T

    def to_dict(self):
        return {"type": "affine", "base": self.base.to_dict(), "scale": self.scale,
                "angle": self.angle, "shift": list(self.shift)}


def shape_from_dict(d):
    if d["type"] == "line":
        return LineShape(d["p0"], d["p1"])
    if d["type"] == "affine":
        return AffineShape(shape_from_dict(d["base"]), d["scale"], d.get("angle", 0.0),
                           d.get("shift", (0.0, 0.0)))
    if d["type"] == "circle":
        return CircleShape(d["center"], d["radius"])
    if d["type"] == "fourier":
        return FourierShape(d["cos"], d.get("sin", ()), d.get("center", (0.0, 0.0)))
    raise ValueError(f"unknown shape type {d['type']!r}")


# ---------------------------------------------------------------- arc length

class _ArcLength:
    """Arc length s(u) of a periodic parametrisation and its inverse."""

    def __init__(self, shape, n=128):
        self.shape = shape
        self.breaks = np.linspace(0.0, shape.period, n + 1)
        x, w = gauss_legendre(20)
        self._x, self._w = x, w
        seg = np.array([self._integrate(a, b) for a, b in zip(self.breaks[:-1], self.breaks[1:])])
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = self.cum[-1]

    def _speed(self, u):
        _, d1, _ = self.shape.eval(u)
        return np.hypot(d1[..., 0], d1[..., 1])

    def _integrate(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        u = mid[..., None] + half[..., None] * self._x
        return half * (self._speed(u) @ self._w)

    def s_of_u(self, u):
        u = np.asarray(u, dtype=float)
        per = self.shape.period
        wraps = np.floor(u / per)
        ur = u - wraps * per
        i = np.clip(np.searchsorted(self.breaks, ur, side="right") - 1, 0, len(self.breaks) - 2)
        return wraps * self.length + self.cum[i] + self._integrate(self.breaks[i], ur)

    def u_of_s(self, s):
        s = np.asarray(s, dtype=float)
        wraps = np.floor(s / self.length)
        sr = s - wraps * self.length
        u = np.interp(sr, self.cum, self.breaks) + wraps * self.shape.period
        for _ in range(30):
            f = self.s_of_u(u) - s
            du = f / self._speed(u)
            u = u - du
            if np.all(np.abs(du) < 1e-15 * (1 + np.abs(u))):
                break
        return u


# ---------------------------------------------------------------- node sets

class PanelSet:
    """Panel Gauss-Legendre discretisation of a piece of a parametrised curve.

    ``breaks`` are panel endpoints in the curve parameter ``u`` (increasing).
    All node arrays are read-only.
    """

    closed = False

    def __init__(self, shape, breaks, order=ORDER, arclength=None):
        self.shape = shape
        self.order = int(order)
        self.breaks = np.asarray(breaks, dtype=float)
        self.breaks.setflags(write=False)
        self._al = arclength
        x, w = gauss_legendre(self.order)
        a, b = self.breaks[:-1], self.breaks[1:]
        half = 0.5 * (b - a)
        u = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
        p, d1, d2 = shape.eval(u.ravel())
        speed = np.hypot(d1[:, 0], d1[:, 1])
        tang = d1 / speed[:, None]
        kappa = (d1[:, 1] * d2[:, 0] - d1[:, 0] * d2[:, 1]) / speed**3
        normal = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
        weights = (half[:, None] * w[None, :]).ravel() * speed
        self.u = u.ravel()
        self.points = p
        self.tangents = tang
        self.normals = normal
        self.curvature = kappa
        self.speed = speed
        self.weights = weights
        self.panel_index = np.repeat(np.arange(len(a)), self.order)
        self.panel_half = half
        for arr in (self.u, self.points, self.tangents, self.normals, self.curvature,
                    self.speed, self.weights, self.panel_index, self.panel_half):
            arr.setflags(write=False)

    @property
    def n_panels(self):
        return len(self.breaks) - 1

    @property
    def n(self):
        return len(self.u)

    @property
    def total_length(self):
        return float(self.weights.sum())

    @property
    def arclength(self):
        if self._al is None:
            self._al = _ArcLength(self.shape)
        return self._al

    @cached_property
    def s(self):
        """Arc-length coordinate of every node (parent-curve convention)."""
        return self.arclength.s_of_u(self.u)

    @cached_property
    def panel_lengths(self):
        return np.bincount(self.panel_index, weights=self.weights, minlength=self.n_panels)

    def neighbours(self, panel):
        """Indices of the panels adjacent to ``panel`` (wrapping on closed curves)."""
        out = []
        m = self.n_panels
        for p in (panel - 1, panel + 1):
            if self.closed:
                out.append(p % m)
            elif 0 <= p < m:
                out.append(p)
        return sorted(set(out) - {panel})

    def eval_param(self, u):
        return self.shape.eval(u)

    def to_dict(self):
        return {
            "panels": self.n_panels,
            "order": self.order,
            "closed": self.closed,
            "shape": self.shape.to_dict(),
            "breaks": self.breaks.tolist(),
            "nodes": self.points.tolist(),
            "normals": self.normals.tolist(),
            "curvature": self.curvature.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @cached_property
    def content_hash(self):
        d = {k: v for k, v in self.to_dict().items() if k in ("order", "closed", "shape", "breaks")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


class Curve(PanelSet):
    """Closed curve; the parameter window is one full period."""

    closed = True
    parent = None

    @property
    def window(self):
        return 0.0, self.total_length

    def point_at(self, s):
        """Point, unit tangent, outward normal and curvature at arc length s."""
        u = self.arclength.u_of_s(s)
        p, d1, d2 = self.shape.eval(u)
        speed = np.hypot(d1[..., 0], d1[..., 1])
        t = d1 / speed[..., None]
        nu = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        kappa = (d1[..., 1] * d2[..., 0] - d1[..., 0] * d2[..., 1]) / speed**3
        return p, t, nu, kappa

    @classmethod
    def from_dict(cls, d):
        return cls(shape_from_dict(d["shape"]), d["breaks"], d.get("order", ORDER))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


class Arc(PanelSet):
    """Sub-arc of a closed curve between arc-length coordinates s_a < s_b."""

    closed = False

    def __init__(self, parent, s_a, s_b, breaks):
        super().__init__(parent.shape, breaks, parent.order, arclength=parent.arclength)
        self.parent = parent
        self.s_a = float(s_a)
        self.s_b = float(s_b)

    @property
    def window(self):
        return self.s_a, self.s_b

    @property
    def endpoints(self):
        p, _, _ = self.shape.eval(np.array([self.breaks[0], self.breaks[-1]]))
        return p


class Segment(PanelSet):
    """Open straight segment (or any open parametrised piece without a parent curve)."""

    closed = False
    parent = None

    @property
    def window(self):
        return 0.0, self.total_length

    @property
    def endpoints(self):
        p, _, _ = self.shape.eval(np.array([self.breaks[0], self.breaks[-1]]))
        return p


def panel_local_s(nodes):
    """Arc length of every node measured from the start of its own panel."""
    x, w = gauss_legendre(16)
    a = nodes.breaks[:-1][nodes.panel_index]
    half = 0.5 * (nodes.u - a)
    u = (0.5 * (nodes.u + a))[:, None] + half[:, None] * x[None, :]
    _, d1, _ = nodes.shape.eval(u)
    return half * (np.hypot(d1[..., 0], d1[..., 1]) @ w)


def transformed(nodes, scale=1.0, angle=0.0, shift=(0.0, 0.0)):
    """Copy of a node set moved by x -> shift + scale * R(angle) x (same panels)."""
    if isinstance(nodes, Arc):
        parent = transformed(nodes.parent, scale, angle, shift)
        return Arc(parent, nodes.s_a * scale, nodes.s_b * scale, nodes.breaks)
    shape = AffineShape(nodes.shape, scale, angle, shift)
    return type(nodes)(shape, nodes.breaks, nodes.order)


# ---------------------------------------------------------------- constructors

def build_segment(p0, p1, n_panels=32):
    """Straight segment from p0 to p1 with uniform panels."""
    if int(n_panels) != n_panels or n_panels < 1:
        raise BadPanelCount(f"need at least one panel, got {n_panels}")
    if np.hypot(p1[0] - p0[0], p1[1] - p0[1]) == 0:
        raise EmptyWindow("segment has zero length")
    return Segment(LineShape(p0, p1), np.linspace(0.0, 1.0, int(n_panels) + 1))


def build_circle(center=(0.0, 0.0), radius=1.0, n_panels=32):
    if int(n_panels) != n_panels or n_panels < 8:
        raise BadPanelCount(f"need at least 8 panels, got {n_panels}")
    if not radius > 0:
        raise NonPositiveRadius("radius must be positive")
    shape = CircleShape(center, radius)
    return Curve(shape, np.linspace(0.0, TWO_PI, int(n_panels) + 1))


def build_fourier_curve(cos_coeffs, sin_coeffs=(), n_panels=32, center=(0.0, 0.0)):
    """Star-shaped curve with radius r(u) = sum_n a_n cos(nu) + b_n sin(nu).

    ``cos_coeffs[0]`` is the base radius.
    """
    if int(n_panels) != n_panels or n_panels < 8:
        raise BadPanelCount(f"need at least 8 panels, got {n_panels}")
    shape = FourierShape(cos_coeffs, sin_coeffs, center)
    grid = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
    if np.min(shape.radius(grid)) <= 0:
        raise NonPositiveRadius("radius function is not positive")
    curve = Curve(shape, np.linspace(0.0, TWO_PI, int(n_panels) + 1))
    if _polyline_self_intersects(curve.points):
        raise SelfIntersecting("curve intersects itself")
    return curve


def _polyline_self_intersects(pts):
    p = np.asarray(pts)
    q = np.roll(p, -1, axis=0)
    n = len(p)
    a, b = p[:, None, :], q[:, None, :]
    c, d = p[None, :, :], q[None, :, :]

    def orient(x, y, z):
        return (y[..., 0] - x[..., 0]) * (z[..., 1] - x[..., 1]) - (y[..., 1] - x[..., 1]) * (z[..., 0] - x[..., 0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    cross = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.indices((n, n))
    gap = np.abs(i - j)
    local = (gap <= 1) | (gap >= n - 1)
    return bool(np.any(cross & ~local))


def _uniform_breaks(u_a, u_b, n, grading):
    base = np.linspace(u_a, u_b, n + 1)
    if grading <= 0 or n < 2:
        return base
    h = base[1] - base[0]
    left = u_a + h * 0.5 ** np.arange(1, grading + 1)[::-1]
    right = u_b - h * 0.5 ** np.arange(1, grading + 1)
    return np.unique(np.concatenate([base, left, right]))


def sub_arc(curve, s_a, s_b, n_panels=None, grading=0):
    """Re-panelled sub-arc of ``curve`` between arc-length coordinates s_a < s_b.

    ``grading`` adds dyadically refined panels towards both endpoints.
    """
    L = curve.total_length
    if not (0.0 <= s_a < s_b <= L * (1 + 1e-14)) or s_b - s_a <= 1e-14 * L:
        raise EmptyWindow(f"empty or invalid window [{s_a}, {s_b}]")
    al = curve.arclength
    u_a, u_b = al.u_of_s(np.array([s_a, s_b]))
    if n_panels is None:
        n_panels = max(2, int(np.ceil(curve.n_panels * (s_b - s_a) / L)))
    breaks = _uniform_breaks(u_a, u_b, int(n_panels), grading)
    return Arc(curve, s_a, s_b, breaks)


def _distance_to_complement(arc, s, s_lo, s_hi):
    """Distance from gamma(s) to the parent curve outside [s_lo, s_hi]."""
    parent = arc.parent
    L = parent.total_length
    comp_len = L - (s_hi - s_lo)
    p0, _, _, _ = parent.point_at(np.array([s]))
    p0 = p0[0]
    if comp_len <= 0:
        return np.inf
    grid = s_hi + comp_len * np.linspace(0.0, 1.0, 801)
    pts, _, _, _ = parent.point_at(grid % L)
    dist = np.hypot(pts[:, 0] - p0[0], pts[:, 1] - p0[1])
    k = int(np.argmin(dist))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]

    def f(t):
        q, _, _, _ = parent.point_at(np.array([t % L]))
        return float(np.hypot(*(q[0] - p0)))

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    return min(float(res.fun), float(dist.min()))


def truncated_arc(arc, eps):
    """Points of the arc whose eps-ball meets the curve only inside the arc."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    s_lo, s_hi = arc.window
    if arc.parent is None:
        raise ValueError("truncated_arc needs an Arc")
    L = arc.parent.total_length
    if s_hi - s_lo >= L * (1 - 1e-12):
        return arc

    def g(s):
        return _distance_to_complement(arc, s, s_lo, s_hi) - eps

    mid = 0.5 * (s_lo + s_hi)
    if g(mid) < 0:
        raise ArcVanishes(f"truncation by {eps} removes the whole arc")

    def root(a, b):
        # g(a) < 0 <= g(b)
        for _ in range(80):
            m = 0.5 * (a + b)
            if g(m) < 0:
                a = m
            else:
                b = m
            if abs(b - a) < 1e-14 * L:
                break
        return b

    new_a = root(s_lo, mid)
    new_b = root(s_hi, mid)
    return sub_arc(arc.parent, new_a, new_b,
                   n_panels=max(2, int(np.ceil(arc.n_panels * (new_b - new_a) / (s_hi - s_lo)))))


# ---------------------------------------------------------------- tube

def injectivity_radius(curve):
    """Half the smallest distance between nodes that are far apart along the curve."""
    rho = 1.0 / max(np.max(np.abs(curve.curvature)), 1e-300)
    s = curve.s
    L = curve.total_length
    ds = np.abs(s[:, None] - s[None, :])
    ds = np.minimum(ds, L - ds)
    far = ds >= np.pi * rho * (1 - 1e-9)
    if not far.any():
        return rho
    diff = curve.points[:, None, :] - curve.points[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return 0.5 * float(dist[far].min())


class TubularMap:
    """The map (s, t) -> gamma(s) + t*nu(s) on |t| <= beta."""

    def __init__(self, curve, beta=None):
        self.curve = curve
        kmax = float(np.max(np.abs(curve.curvature)))
        default = min(0.5 / kmax if kmax > 0 else np.inf, 0.25 * injectivity_radius(curve))
        self.beta = float(default if beta is None else beta)
        if beta is not None and kmax * beta >= 1.0:
            raise ValueError("half width too large for the curvature")

    def __call__(self, s, t):
        return tubular_point(self, s, t)


def tubular_point(tmap, s, t):
    """Point gamma(s) + t*nu(s) and the area Jacobian 1 - t*kappa(s)."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > tmap.beta * (1 + 1e-12)):
        raise OutsideTube(f"|t| exceeds the tube half width {tmap.beta}")
    p, _, nu, kappa = tmap.curve.point_at(np.asarray(s, dtype=float))
    x = p + t[..., None] * nu
    jac = 1.0 - t * kappa
    return x, jac
