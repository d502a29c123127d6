"""Special functions: gamma, Tricomi U(a, 1; x), K0, Laguerre polynomials.

The central object for the Landau Green function is the product
``F_a(x) = Gamma(a) * U(a, 1; x)``, which is finite for every ``a`` except the
nonpositive integers.  It is evaluated by

* the logarithmic small-x expansion
  ``F_a(x) = -ln(x) * 1F1(a; 1; x) - sum_k (a)_k x^k / (k!)^2 [psi(a+k) - 2 psi(k+1)]``
  for ``x`` below ``switch_x`` (or whenever the expansion does not cancel badly),
* the Laplace integral ``int_0^inf exp(-x t) t^(a-1) (1+t)^(-a) dt`` after the
  substitution ``t = exp(s)``, integrated by the trapezoidal rule on a window
  adapted to the peak of the integrand, for ``Re a > 0``,
* the contiguous relation ``(a-1) F_{a-1} + (1-2a-x) F_a + a F_{a+1} = 0``
  run downwards from the integral when ``Re a`` is small and ``x`` is large.

``gamma_u(a, x, pole=q)`` returns the pole-free remainder
``F_a(x) - L_q(x) / (a + q)`` with the pole removed analytically, which is what
the spectral solver needs near a Landau level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as sps

from .errors import NoConvergence, NonPositiveArgument, PoleAtNonpositiveInteger

EULER_GAMMA = float(np.euler_gamma)


@dataclass(frozen=True)
class AccuracyPolicy:
    rel_tol: float = 1e-10
    max_terms: int = 256
    switch_x: float = 8.0

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise ValueError("rel_tol must lie in (0, 1e-6]")
        if self.max_terms < 64:
            raise ValueError("max_terms must be at least 64")
        if not self.switch_x > 0:
            raise ValueError("switch_x must be positive")


DEFAULT_POLICY = AccuracyPolicy()


def _near_pole(z, tol=1e-13):
    z = np.asarray(z, dtype=complex)
    r = np.round(z.real)
    return (r <= 0) & (np.abs(z - r) <= tol * np.maximum(1.0, np.abs(r)))


# ---------------------------------------------------------------- gamma family

def gamma_fn(z):
    """Euler gamma for complex (or real) argument."""
    if np.any(_near_pole(z)):
        raise PoleAtNonpositiveInteger(f"gamma has a pole at {z}")
    out = sps.gamma(np.asarray(z, dtype=complex))
    return complex(out) if np.ndim(out) == 0 else out


def rgamma(z):
    """1/Gamma(z); entire, zero at the poles of Gamma."""
    out = sps.rgamma(np.asarray(z, dtype=complex))
    return complex(out) if np.ndim(out) == 0 else out


def log_gamma(z):
    """Principal branch of log Gamma(z)."""
    if np.any(_near_pole(z)):
        raise PoleAtNonpositiveInteger(f"log-gamma has a pole at {z}")
    if np.isrealobj(z) and np.all(np.asarray(z) > 0):
        return sps.gammaln(z)
    return sps.loggamma(np.asarray(z, dtype=complex))


def log_factorial(k):
    """ln(k!) for nonnegative integers (array friendly)."""
    return sps.gammaln(np.asarray(k, dtype=float) + 1.0)


def digamma(z):
    if np.any(_near_pole(z)):
        raise PoleAtNonpositiveInteger(f"digamma has a pole at {z}")
    if np.isrealobj(z):
        return sps.psi(z)
    return sps.psi(np.asarray(z, dtype=complex))


# ---------------------------------------------------------------- K0

def bessel_k0(x):
    """Modified Bessel function K0 for x > 0."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise NonPositiveArgument("bessel_k0 needs x > 0")
    out = sps.k0(xa)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- Laguerre

def laguerre(q, x):
    """Laguerre polynomial L_q(x) by the three-term recurrence."""
    return assoc_laguerre(q, 0, x)


def assoc_laguerre(n, alpha, x):
    """Associated Laguerre polynomial L_n^(alpha)(x), integer n >= 0."""
    n = int(n)
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if np.ndim(cur) else float(cur)


def laguerre_table(qmax, x):
    """Rows L_0(x), ..., L_qmax(x) stacked along a new leading axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((qmax + 1,) + x.shape)
    out[0] = 1.0
    if qmax >= 1:
        out[1] = 1.0 - x
    for k in range(1, qmax):
        out[k + 1] = ((2 * k + 1 - x) * out[k] - k * out[k - 1]) / (k + 1)
    return out


# ---------------------------------------------------------------- series branch

def _series_coefficients(a, x_max, pole, policy):
    """Coefficients c_k, d_k with F_a(x) = -ln(x) sum c_k x^k - sum d_k x^k.

    With ``pole = q`` the d_k are modified so that the sum represents
    F_a(x) - L_q(x)/(a+q).
    """
    a = complex(a)
    n = policy.max_terms
    k = np.arange(n)
    c = np.empty(n, dtype=complex)
    c[0] = 1.0
    for j in range(1, n):
        c[j] = c[j - 1] * (a + j - 1) / (j * j)
    psi_int = sps.psi(k + 1.0)
    d = np.empty(n, dtype=complex)
    regular = np.ones(n, dtype=bool)
    if pole is not None:
        q = int(pole)
        regular[: q + 1] = False
        psi_top = complex(sps.psi(a + q + 1))
        b = -q
        log_fact = sps.gammaln(k + 1.0)
        for kk in range(q + 1):
            psi_reg = psi_top - sum(1.0 / (a + kk + j) for j in range(q - kk))
            # divided difference ((a)_k - (b)_k) / (a - b)
            dd = 0.0j
            for i in range(kk):
                left = np.prod([a + j for j in range(i)]) if i else 1.0
                right = np.prod([b + j for j in range(i + 1, kk)]) if i + 1 < kk else 1.0
                dd += left * right
            d[kk] = c[kk] * (psi_reg - 2 * psi_int[kk]) - dd * np.exp(-2 * log_fact[kk])
    elif np.any(_near_pole(a + k)):
        raise PoleAtNonpositiveInteger(f"Gamma(a)U(a,1;x) has a pole at a={a}")
    d[regular] = c[regular] * (sps.psi(a + k[regular]) - 2 * psi_int[regular])

    xm = max(float(x_max), 1e-300)
    with np.errstate(divide="ignore"):
        logmag = np.log(np.abs(c) * (1 + abs(np.log(xm))) + np.abs(d)) + k * np.log(xm)
    small = logmag <= np.log(1e-18) + max(logmag.max(), 0.0)
    # truncate after the terms have become (and stay) negligible
    tail_start = None
    for j in range(n - 1, -1, -1):
        if not small[j]:
            tail_start = j + 1
            break
    if tail_start is None:
        tail_start = 1
    if tail_start >= n - 4:
        raise NoConvergence("logarithmic series of U(a,1;x) did not converge")
    m = tail_start + 2
    return c[:m], d[:m]


def _horner(coef, x):
    out = np.full(x.shape, coef[-1], dtype=complex)
    for cc in coef[-2::-1]:
        out = out * x + cc
    return out


def _series_eval(a, x, pole, policy):
    c, d = _series_coefficients(a, x.max(initial=0.0), pole, policy)
    C = _horner(c, x)
    D = _horner(d, x)
    return C, D


# ---------------------------------------------------------------- integral branch

def _softplus(s):
    return np.maximum(s, 0.0) + np.log1p(np.exp(-np.abs(s)))


def _laplace_integral(a, x):
    """F_a(x) for Re a > 0 by the trapezoidal rule in s = ln t."""
    a = complex(a)
    A = a.real
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    if x.size == 0:
        return out
    # peak of the real envelope -x e^s - A softplus(-s)
    u = 0.5 * (-1.0 + np.sqrt(1.0 + 4.0 * A / x))
    s_peak = np.log(u)

    def env(s):
        return -x * np.exp(s) - A * _softplus(-s)

    e_peak = env(s_peak)
    drop = 46.0 + abs(a.imag) * 0.0

    def bracket(direction, span):
        lo = s_peak.copy()
        hi = s_peak + direction * span
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            inside = env(mid) > e_peak - drop
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return hi

    s_left = bracket(-1.0, 60.0 + drop / A)
    s_right = bracket(1.0, 60.0)
    curv = x * u + A * u / (1.0 + u) ** 2
    width = 1.0 / np.sqrt(curv)
    h_max = 2 * np.pi / (40.0 + abs(a.imag))
    h = np.minimum(h_max, width / 2.5)
    npts = np.ceil((s_right - s_left) / h).astype(int) + 1
    order = np.argsort(npts)
    # evaluate in groups with a common number of nodes
    start = 0
    flat_out = out.reshape(-1)
    xs = x.reshape(-1)
    sl, sr, np_ = s_left.reshape(-1), s_right.reshape(-1), npts.reshape(-1)
    order = np.argsort(np_)
    chunk = 4096
    while start < order.size:
        idx = order[start:start + chunk]
        m = int(np_[idx].max())
        tau = np.linspace(0.0, 1.0, m)
        s = sl[idx, None] + (sr[idx] - sl[idx])[:, None] * tau[None, :]
        step = (sr[idx] - sl[idx]) / (m - 1)
        sp = _softplus(-s)
        expo = -xs[idx, None] * np.exp(s) - A * sp
        vals = np.exp(expo)
        if a.imag != 0:
            vals = vals * np.exp(-1j * a.imag * sp)
        total = vals.sum(axis=1) - 0.5 * (vals[:, 0] + vals[:, -1])
        flat_out[idx] = total * step
        start += chunk
    return out


def _recurrence_down(a, x):
    """F_a(x) from F at a+n, a+n+1 (Re(a+n) >= 0.5) via the contiguous relation."""
    a = complex(a)
    n = int(np.ceil(0.5 - a.real))
    n = max(n, 1)
    top = a + n
    f_hi = _laplace_integral(top + 1, x)
    f = _laplace_integral(top, x)
    b = top
    # (b-1) F_{b-1} = (2b - 1 + x) F_b - b F_{b+1}
    for _ in range(n):
        f_new = ((2 * b - 1 + x) * f - b * f_hi) / (b - 1)
        f_hi, f = f, f_new
        b = b - 1
    return f


# ---------------------------------------------------------------- public U-family

def _regime_masks(a, x, pole, policy):
    a = complex(a)
    if pole is not None and abs(a + pole) < 1e-6:
        # close to the removed pole the series is the only cancellation-free route
        ser = np.ones(x.shape, dtype=bool)
        return ser, ~ser, ~ser
    ser = (x < policy.switch_x) & ((a.real < 0.25) | (abs(a) * x < 4.0))
    if a.real >= 0.25:
        integ = ~ser
        rec = np.zeros(x.shape, dtype=bool)
    else:
        integ = np.zeros(x.shape, dtype=bool)
        rec = ~ser
    return ser, integ, rec


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise NonPositiveArgument("U(a,1;x) needs x > 0")
    return x


def gamma_u(a, x, pole=None, policy=DEFAULT_POLICY):
    """Gamma(a) U(a, 1; x), optionally minus L_pole(x)/(a+pole)."""
    x = _check_x(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    a = complex(a)
    if pole is None and _near_pole(a):
        raise PoleAtNonpositiveInteger(f"Gamma(a)U(a,1;x) has a pole at a={a}")
    out = np.empty(x.shape, dtype=complex)
    ser, integ, rec = _regime_masks(a, x, pole, policy)
    if ser.any():
        C, D = _series_eval(a, x[ser], pole, policy)
        out[ser] = -np.log(x[ser]) * C - D
    if integ.any():
        out[integ] = _laplace_integral(a, x[integ])
    if rec.any():
        out[rec] = _recurrence_down(a, x[rec])
    if pole is not None:
        far = integ | rec
        if far.any():
            out[far] -= laguerre(pole, x[far]) / (a + pole)
    return complex(out[0]) if scalar else out


def gamma_u_parts(a, x, pole=None, policy=DEFAULT_POLICY):
    """Split Gamma(a)U(a,1;x) (or its pole-free remainder) as -ln(x)*C + E.

    C = 1F1(a; 1; x) is entire; E is smooth at x = 0.  Used for the
    log-singular quadrature on and next to the diagonal.
    """
    x = _check_x(x)
    a = complex(a)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    c, d = _series_coefficients(a, x.max(initial=0.0), pole, policy)
    C = _horner(c, x)
    ser, integ, rec = _regime_masks(a, x, pole, policy)
    E = np.empty(x.shape, dtype=complex)
    if ser.any():
        E[ser] = -_horner(d, x[ser])
    other = ~ser
    if other.any():
        E[other] = gamma_u(a, x[other], pole=pole, policy=policy) + np.log(x[other]) * C[other]
    if scalar:
        return complex(C[0]), complex(E[0])
    return C, E


def gamma_u_diagonal(a, pole=None):
    """The smooth part E of the split at x = 0, i.e. -psi(a) - 2*gamma_E (regularised)."""
    a = complex(a)
    if pole is None:
        if _near_pole(a):
            raise PoleAtNonpositiveInteger(f"pole at a={a}")
        return -complex(sps.psi(a)) - 2 * EULER_GAMMA
    q = int(pole)
    psi_reg = complex(sps.psi(a + q + 1)) - sum(1.0 / (a + j) for j in range(q))
    return -psi_reg - 2 * EULER_GAMMA


def kummer_u(a, x, policy=DEFAULT_POLICY):
    """Tricomi confluent hypergeometric U(a, 1; x) for x > 0."""
    x = _check_x(x)
    a = complex(a)
    if _near_pole(a):
        q = int(round(-a.real))
        val = (-1) ** q * np.exp(log_factorial(q)) * laguerre(q, x)
        return complex(val) if np.ndim(val) == 0 else val.astype(complex)
    return gamma_u(a, x, policy=policy) * rgamma(a)
