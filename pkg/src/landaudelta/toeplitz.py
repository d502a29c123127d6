"""Toeplitz-type operators T_q^Gamma as Gram matrices of Landau modes on Gamma.

``G[m, m'] = int_Gamma conj(psi_{q,m}) psi_{q,m'} dsigma``.  The Gram matrix is
kept together with its factor ``F = W^1/2 Psi`` (G = F^* F), and singular
values are taken as squared singular values of F.  The columns of F are
strongly graded (mode masses fall off like 1/m!), and a one-sided Jacobi SVD
(LAPACK gejsv on the real embedding of F) keeps the small ones relatively
accurate far below the square root of machine precision.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from . import landau, specfun
from .errors import TooFewValues

FLOOR = 1e-13


@dataclass(frozen=True)
class ToeplitzMatrix:
    q: int
    gamma: object
    B: float
    ms: np.ndarray
    center: tuple
    factor: np.ndarray
    entries: np.ndarray

    @property
    def diagonal(self):
        """Diagonal entries, computed directly from the factor (relatively accurate)."""
        return np.sum(np.abs(self.factor) ** 2, axis=0)


def _centroid(gamma):
    return tuple(np.average(gamma.points, axis=0, weights=gamma.weights))


def assemble_toeplitz(q, gamma, B=1.0, m_range=None, center=None):
    """Gram matrix of the level-q modes on the node set ``gamma`` (None or empty gives zero)."""
    empty = gamma is None or gamma.n == 0 or gamma.total_length == 0
    if m_range is None:
        if empty:
            ms = np.arange(-q, 41)
        else:
            c = _centroid(gamma) if center is None else center
            r_max = float(np.hypot(*(gamma.points - np.array(c)).T).max())
            ms = landau.mode_window(B, r_max, q)
    else:
        ms = np.arange(m_range[0], m_range[1] + 1) if len(m_range) == 2 else np.asarray(m_range)
    ms = np.asarray(ms, dtype=int)
    if empty:
        z = np.zeros((len(ms), len(ms)), dtype=complex)
        return ToeplitzMatrix(q, gamma, B, ms, (0.0, 0.0), np.zeros((0, len(ms)), dtype=complex), z)
    if center is None:
        center = _centroid(gamma)
    F = np.sqrt(gamma.weights)[:, None] * landau.mode_values(q, ms, gamma.points, B, center)
    G = F.conj().T @ F
    G = 0.5 * (G + G.conj().T)
    G.setflags(write=False)
    F.setflags(write=False)
    return ToeplitzMatrix(q, gamma, B, ms, tuple(center), F, G)


def singular_values_of_factor(F):
    """Squared singular values of F, nonincreasing."""
    F = np.asarray(F)
    if F.shape[0] == 0:
        return np.zeros(F.shape[1])
    if F.shape[0] < F.shape[1]:
        return np.linalg.svd(F, compute_uv=False) ** 2
    R = np.block([[F.real, -F.imag], [F.imag, F.real]])
    # joba 'C', no vectors, no range restriction, no perturbation
    sva, _, _, work, _, info = lapack.dgejsv(R, joba=0, jobu=3, jobv=3, jobr=0, jobt=0, jobp=0)
    if info != 0 or work[0] == 0:
        return np.linalg.svd(F, compute_uv=False) ** 2
    s = np.sort(sva * (work[1] / work[0]))[::-1]
    # the real embedding doubles every singular value
    return s[::2] ** 2


def toeplitz_singular_values(matrix, floor=FLOOR):
    """Nonincreasing singular values (= eigenvalues) of the Gram matrix above ``floor``.

    ``floor`` is absolute; None keeps every positive value (the Jacobi SVD is
    relatively accurate for column-graded factors such as the circle's).
    """
    s = singular_values_of_factor(matrix.factor)
    if floor is None:
        floor = 0.0
    return s[s > floor] if s.max(initial=0.0) > 0 else s


def asymptotic_ratios(s):
    """b_k = (k! s_k)^(1/k) in log space, k counted from 0 (b_0 is NaN)."""
    s = np.asarray(s, dtype=float)
    k = np.arange(len(s))
    out = np.full(len(s), np.nan)
    pos = k >= 1
    out[pos] = np.exp((specfun.log_factorial(k[pos]) + np.log(s[pos])) / k[pos])
    return out


def toeplitz_asymptotics(s, B=1.0, gamma=None, target=None):
    """Return (b_k, tail estimate, target (B/2) Cap(Gamma)^2)."""
    s = np.asarray(s, dtype=float)
    if len(s) < 5:
        raise TooFewValues(f"need at least 5 reliable singular values, got {len(s)}")
    b = asymptotic_ratios(s)
    tail = float(np.median(b[-3:]))
    if target is None and gamma is not None:
        from .capacity import capacity_of

        target = 0.5 * B * capacity_of(gamma) ** 2
    return b, tail, target


def to_csv(q, s, b, target):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "k", "s_k", "b_k", "target"])
    for k, (sk, bk) in enumerate(zip(s, b)):
        w.writerow([q, k, f"{sk:.17g}", "" if np.isnan(bk) else f"{bk:.17g}",
                    "" if target is None else f"{target:.17g}"])
    return buf.getvalue()
