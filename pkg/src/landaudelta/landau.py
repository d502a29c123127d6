"""Free Landau Hamiltonian (i grad + A)^2 with A = (B/2)(-x2, x1).

Levels are ``B(2q+1)``.  The resolvent kernel is

    G(x, y) = Phi(x, y) * Gamma(a) U(a, 1; B|x-y|^2/2) / (4 pi),   a = (B - lam) / (2B),

with ``Phi(x, y) = exp(-(iB/2)(x1 y2 - x2 y1) - (B/4)|x-y|^2)``, and the level
projections have kernels ``(B/2pi) Phi(x, y) L_q(B|x-y|^2/2)``.

Symmetric-gauge eigenfunctions (z = x1 + i x2, rho = B|z|^2/2):

    m >= 0:  c (sqrt(B/2) z)^m       L_q^(m)(rho)         exp(-rho/2)
    m <  0:  c (sqrt(B/2) conj z)^|m| L_(q+m)^(|m|)(rho)  exp(-rho/2)

with ``c^2 = (B/2pi) n! / (n+|m|)!`` and ``n = min(q, q+m)``.  Modes can be
centred at any point by a magnetic translation, which leaves every level
projection unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import BadIndex, CoincidentPoints, OnLandauLevel

LEVEL_TOL = 1e-9


@dataclass(frozen=True)
class FieldConfig:
    B: float = 1.0

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("field strength must be positive")


@dataclass(frozen=True)
class LandauMode:
    q: int
    m: int
    B: float = 1.0

    def __post_init__(self):
        if self.q < 0 or self.m < -self.q:
            raise BadIndex(f"invalid mode (q={self.q}, m={self.m})")


def landau_level(q, B=1.0):
    if q < 0:
        raise ValueError("level index must be nonnegative")
    return B * (2 * q + 1)


def nearest_level(lam, B=1.0):
    """Index of the Landau level closest to lam (real part)."""
    return max(0, int(round((np.real(lam) / B - 1.0) / 2.0)))


def check_off_levels(lam, B=1.0):
    q = nearest_level(lam, B)
    if abs(lam - landau_level(q, B)) < LEVEL_TOL * B:
        raise OnLandauLevel(f"spectral parameter {lam} sits on the level {landau_level(q, B)}")


def spectral_a(lam, B=1.0):
    return (B - lam) / (2.0 * B)


def _split_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x[..., 0], x[..., 1], y[..., 0], y[..., 1]


def phase_factor(x, y, B=1.0):
    x1, x2, y1, y2 = _split_xy(x, y)
    cross = x1 * y2 - x2 * y1
    d2 = (x1 - y1) ** 2 + (x2 - y2) ** 2
    return np.exp(-0.5j * B * cross - 0.25 * B * d2)


def green_kernel(x, y, lam, B=1.0, pole=None):
    """Vectorised resolvent kernel; with ``pole=q`` the q-th level term is removed.

    Coincident points are not allowed here (the kernel is log-singular).
    """
    x1, x2, y1, y2 = _split_xy(x, y)
    d2 = (x1 - y1) ** 2 + (x2 - y2) ** 2
    a = spectral_a(lam, B)
    f = specfun.gamma_u(a, 0.5 * B * d2, pole=pole)
    return phase_factor(x, y, B) * f / (4 * np.pi)


def green_function(x, y, lam, B=1.0):
    """Resolvent kernel of the Landau Hamiltonian at (x, y) for lam off the levels."""
    check_off_levels(lam, B)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.hypot(*(x - y).T) == 0):
        raise CoincidentPoints("the kernel is singular on the diagonal")
    out = green_kernel(x, y, complex(lam), B)
    return complex(out) if np.ndim(out) == 0 else out


def projection_kernel(q, x, y, B=1.0):
    x1, x2, y1, y2 = _split_xy(x, y)
    rho = 0.5 * B * ((x1 - y1) ** 2 + (x2 - y2) ** 2)
    out = B / (2 * np.pi) * phase_factor(x, y, B) * specfun.laguerre(q, rho)
    return complex(out) if np.ndim(out) == 0 else out


def magnetic_phase(points, center, B=1.0):
    """Phase of the magnetic translation by ``center`` evaluated at ``points``."""
    p = np.asarray(points, dtype=float)
    return np.exp(0.5j * B * (center[0] * p[..., 1] - center[1] * p[..., 0]))


def mode_values(q, ms, points, B=1.0, center=(0.0, 0.0)):
    """Matrix of psi_{q,m}(points) for m in ``ms`` (shape ``points.shape[:-1] + (len(ms),)``)."""
    p = np.asarray(points, dtype=float)
    ms = np.asarray(ms, dtype=int)
    if np.any(ms < -q):
        raise BadIndex(f"angular index below -{q}")
    zx = p[..., 0] - center[0]
    zy = p[..., 1] - center[1]
    r2 = zx**2 + zy**2
    rho = 0.5 * B * r2
    theta = np.arctan2(zy, zx)
    with np.errstate(divide="ignore"):
        log_sr = 0.5 * np.log(rho)  # log(sqrt(B/2) |z|)
    out = np.empty(p.shape[:-1] + (len(ms),), dtype=complex)
    for k, m in enumerate(ms):
        am = abs(int(m))
        n = q if m >= 0 else q + m
        log_c = 0.5 * (np.log(B / (2 * np.pi)) + specfun.log_factorial(n) - specfun.log_factorial(n + am))
        lag = specfun.assoc_laguerre(n, am, rho)
        if am == 0:
            mag = np.exp(log_c - 0.5 * rho)
        else:
            mag = np.exp(log_c + am * log_sr - 0.5 * rho)
        out[..., k] = mag * lag * np.exp(1j * m * theta)
    if center[0] != 0.0 or center[1] != 0.0:
        out *= magnetic_phase(p, center, B)[..., None]
    return out


def mode_eval(mode, z, center=(0.0, 0.0)):
    """Value of the orthonormal symmetric-gauge eigenfunction ``mode`` at point z."""
    if mode.m < -mode.q:
        raise BadIndex(f"invalid mode (q={mode.q}, m={mode.m})")
    z = np.asarray(z, dtype=float)
    val = mode_values(mode.q, [mode.m], z, mode.B, center)[..., 0]
    return complex(val) if np.ndim(val) == 0 else val


def mode_window(B, r_max, q=0):
    """Angular indices -q..M covering all modes with non-negligible mass inside radius r_max."""
    M = int(np.ceil(B * r_max**2 * np.e**2 / 2.0 + 40))
    return np.arange(-q, M + 1)
