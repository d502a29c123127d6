"""Acceptance criteria, one test each.

Every test prints a ``[PASS]``/``[FAIL] criterion n`` line (collected again in
the terminal summary) and then asserts the criterion at its stated tolerance.
Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline.
"""

import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from landaudelta import approx, bie, capacity, geometry, invariants, landau, spectral, toeplitz
from landaudelta.errors import NoEigenvaluesFound

from conftest import load_json

RESULTS = {}

pytestmark = pytest.mark.acceptance


def _record(n, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def test_c01_green_vs_projection_expansion():
    rng = np.random.default_rng(101)
    B, lam = 1.0, -1.0
    errs = []
    for _ in range(20):
        x = rng.uniform(-1, 1, 2)
        r, th = rng.uniform(0.5, 2.0), rng.uniform(0, 2 * np.pi)
        y = x + r * np.array([np.cos(th), np.sin(th)])
        G = landau.green_function(x, y, lam, B)
        S = sum(landau.projection_kernel(q, x, y, B) / (landau.landau_level(q, B) - lam)
                for q in range(401))
        errs.append(abs(S - G) / abs(G))
    worst = max(errs)
    _record(1, "Green function vs sum over q <= 400", worst <= 1e-8,
            f"max rel error {worst:.3e} (median {np.median(errs):.3e}), tolerance 1e-8")


def test_c02_kernel_symmetry():
    rng = np.random.default_rng(102)
    x = rng.uniform(-2, 2, (100, 2))
    y = rng.uniform(-2, 2, (100, 2))
    lam = rng.uniform(-5, 8, 100) + 1j * rng.uniform(-3, 3, 100)
    lam[:10] = lam[:10].real  # a few real parameters too
    worst = 0.0
    for a, b, l in zip(x, y, lam):
        g1 = landau.green_function(a, b, l)
        g2 = landau.green_function(b, a, np.conj(l))
        worst = max(worst, abs(np.conj(g2) - g1))
    _record(2, "kernel symmetry", worst <= 1e-12, f"max deviation {worst:.3e}, tolerance 1e-12")


def test_c03_residue_and_projection():
    rng = np.random.default_rng(103)
    B = 1.0
    worst_lim, rates = 0.0, []
    for q in range(3):
        L = landau.landau_level(q, B)
        for _ in range(4):
            x, y = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
            P = landau.projection_kernel(q, x, y, B)
            ds = 1e-3 * 0.5 ** np.arange(5)
            f = np.array([-d * landau.green_function(x, y, L + d, B) for d in ds])
            e = np.abs(f - P)
            rates.extend(e[:-1] / e[1:])
            rich = 2 * f[1:] - f[:-1]
            worst_lim = max(worst_lim, float(np.abs(rich[-1] - P)))
    rates = np.array(rates)
    linear = bool(np.all((rates > 1.8) & (rates < 2.2)))
    ok = linear and worst_lim <= 1e-6
    _record(3, "residue equals projection", ok,
            f"error ratio per halving in [{rates.min():.3f}, {rates.max():.3f}], "
            f"Richardson limit error {worst_lim:.3e} (tolerance 1e-6)")


def test_c04_circle_birman_schwinger_oracle():
    ref = load_json("circle_secular.json")
    c = geometry.build_circle(n_panels=256)
    alpha = spectral.StrengthFunction.constant(c, 1.0)
    worst, details = 0.0, []
    for q in (0, 1):
        r = spectral.find_cluster_eigenvalues(c, alpha, q, "above", 10, 1.0, floor=1e-30)
        want = np.array([float(v["lambda"]) for v in ref["levels"][f"q{q}"]])[:10]
        got = np.sort(r.eigenvalues)[::-1]
        if len(got) < 10:
            worst = np.inf
            details.append(f"q={q}: only {len(got)} eigenvalues")
            continue
        err = float(np.abs(got[:10] - want).max())
        worst = max(worst, err)
        details.append(f"q={q}: {err:.2e}")
    _record(4, "circle eigenvalues vs Fourier secular equation", worst <= 1e-6,
            f"max abs error {worst:.3e} ({', '.join(details)}), tolerance 1e-6")


def _count(curve, alpha, q, side, k_max=10):
    try:
        return len(spectral.find_cluster_eigenvalues(curve, alpha, q, side, k_max, 1.0).eigenvalues)
    except NoEigenvaluesFound:
        return 0


def test_c05_side_rules():
    c = geometry.build_circle(n_panels=32)
    pos = spectral.StrengthFunction.constant(c, 1.0)
    neg = spectral.StrengthFunction.constant(c, -1.0)
    wrong_pos = [_count(c, pos, q, "below") for q in range(3)]
    wrong_neg = [_count(c, neg, q, "above") for q in range(3)]
    right_pos = [_count(c, pos, q, "above") for q in range(3)]
    right_neg = [_count(c, neg, q, "below") for q in range(3)]
    quarter = geometry.sub_arc(geometry.build_circle(n_panels=64), 0.0, np.pi / 2, n_panels=16)
    n_quarter = _count(quarter, spectral.StrengthFunction.constant(quarter, 1.0), 0, "above", 5)
    ok = (not any(wrong_pos) and not any(wrong_neg) and all(right_pos) and all(right_neg)
          and n_quarter > 0)
    _record(5, "side rules", ok,
            f"alpha=+1 below: {wrong_pos}, alpha=-1 above: {wrong_neg}, "
            f"correct sides: {right_pos}/{right_neg}, quarter arc above Lambda_0: {n_quarter}")


def test_c06_toeplitz_closed_form():
    B, r = 1.0, 2.0
    c = geometry.build_circle(radius=r, n_panels=64)
    T = toeplitz.assemble_toeplitz(0, c, B, m_range=(0, 45), center=(0.0, 0.0))
    m = T.ms
    log_t = (np.log(B * r) + m * np.log(B * r * r / 2) - B * r * r / 2
             - np.array([np.sum(np.log(np.arange(1, k + 1))) for k in m]))
    sel = m <= 30
    diag_err = float(np.max(np.abs(np.log(T.diagonal[sel]) - log_t[sel])))
    s = toeplitz.toeplitz_singular_values(T, floor=None)
    b = toeplitz.asymptotic_ratios(s)
    target = B * r * r / 2
    ratio_err = float(np.max(np.abs(b[35:41] / target - 1)))
    ok = diag_err <= 1e-8 and ratio_err <= 0.02
    _record(6, "Toeplitz closed form on the circle r=2", ok,
            f"diagonal max |log d_m - log t_m| {diag_err:.3e} (tolerance 1e-8); "
            f"b_m for m=35..40 in [{b[35:41].min():.4f}, {b[35:41].max():.4f}], "
            f"max deviation {ratio_err:.2%} from {target} (tolerance 2%)")


def test_c07_capacity_oracles():
    r = 1.7
    cap_circle = capacity.capacity_of(geometry.build_circle(radius=r, n_panels=32))
    e1 = abs(cap_circle - r)
    L = 2.0
    cap_seg = capacity.capacity_of(geometry.build_segment((0.0, 0.0), (L, 0.0), 400))
    e2 = abs(cap_seg - L / 4)
    arc = geometry.sub_arc(geometry.build_fourier_curve([1.0, 0.1, 0.15], n_panels=24), 0.5, 3.0,
                           n_panels=16, grading=6)
    c0 = capacity.capacity_of(arc)
    e3 = abs(capacity.capacity_of(geometry.transformed(arc, scale=2.5)) - 2.5 * c0) / (2.5 * c0)
    e4 = abs(capacity.capacity_of(geometry.transformed(arc, shift=(3.0, -1.5))) - c0)
    eq = capacity.equilibrium(arc)
    pot = eq.potential()[eq.weights > 0]
    e5 = float(np.ptp(pot))
    ok = e1 <= 1e-6 and e2 <= 1e-3 and e3 <= 1e-6 and e4 <= 1e-6 and e5 <= 1e-4
    _record(7, "capacity oracles", ok,
            f"circle {e1:.1e}, segment {e2:.1e}, scaling {e3:.1e}, translation {e4:.1e}, "
            f"equalization spread {e5:.1e}")


def test_c08_cluster_asymptotics_semicircle():
    unit = geometry.build_circle(n_panels=128)
    semi = geometry.sub_arc(unit, 0.0, np.pi, n_panels=48)
    alpha = spectral.StrengthFunction.constant(semi, 1.0)
    rep = spectral.find_cluster_eigenvalues(semi, alpha, 0, "above", 11, 1.0, floor=1e-40)
    a, tail = spectral.cluster_asymptotics(rep, (6, 10))
    cap = capacity.capacity_of(geometry.sub_arc(unit, 0.0, np.pi, n_panels=64, grading=10))
    target = 0.5 * cap**2
    trend = a[6:11]
    monotone = bool(np.all(np.diff(trend) > 0) and np.all(trend < target))
    rel = abs(tail / target - 1)
    ok = rel <= 0.15 and monotone
    _record(8, "cluster asymptotics on the semicircle", ok,
            f"tail {tail:.5f} vs (B/2)Cap^2 = {target:.5f} ({rel:.1%}, tolerance 15%), "
            f"a_6..a_10 = {np.round(trend, 5).tolist()} monotone approach: {monotone}")


def test_c09_resolvent_difference_decay():
    c = geometry.build_circle(n_panels=32)
    pts, wts = invariants._polar_grid(r_max=10.0, n_r=60, n_theta=48)
    W = bie.assemble_perturbation(c, 1.0, -1.0, 1.0, pts)
    sw = np.sqrt(wts)
    s = np.linalg.svd(sw[:, None] * W * sw[None, :], compute_uv=False)
    k = np.arange(5, 31)
    slope = _slope(k, s[k])
    _record(9, "singular values of the resolvent difference", slope <= -2.5,
            f"fitted slope {slope:.3f} over k=5..30 (threshold -2.5)")


def test_c10_weyl_decay():
    c = geometry.build_circle(n_panels=64)
    lams = (-10.0, -100.0, -1000.0)
    norms = [bie.assemble_weyl(c, l).norm() for l in lams]
    ex = -_slope(-np.array(lams), np.array(norms))
    _record(10, "Weyl function norm decay", 0.25 <= ex <= 0.55,
            f"norms {np.round(norms, 6).tolist()}, exponent {ex:.3f} (range [0.25, 0.55])")


def test_c11_norm_resolvent_rate():
    c = geometry.build_circle(n_panels=64)
    alpha = spectral.StrengthFunction.constant(c, 1.0)
    prof = approx.TransversalProfile.from_alpha(alpha)
    rep = approx.resolvent_gap(c, prof)
    decreasing = bool(np.all(np.diff(rep.gaps) < 0))
    guard = rep.guard_change <= approx.GUARD_TOL
    ok = decreasing and guard and 0.45 <= rep.p <= 1.2
    _record(11, "squeezed-potential resolvent gap", ok,
            f"gaps {np.array2string(rep.gaps, precision=3)}, decreasing {decreasing}, "
            f"guard change {rep.guard_change:.2%}, p = {rep.p:.3f} +- {rep.p_stderr:.3f} "
            f"(range [0.45, 1.2])")


def test_c12_summability():
    c = geometry.build_circle(n_panels=32)
    s1 = spectral.summability_report(c, 1.0, 1.0, 2, 12)
    s2 = spectral.summability_report(c, 1.0, 1.0, 2, 24)
    p1, p2 = np.array(s1.partial), np.array(s2.partial)
    change = float(np.max(np.abs(p2 - p1) / p1))
    _record(12, "weighted cluster sums", change < 0.05,
            f"partial sums {np.round(p1, 8).tolist()}, change on doubling k_max {change:.3e} "
            f"(tolerance 5%)")


def test_c13_selftest(tmp_path):
    exe = shutil.which("landaudelta")
    cmd = [exe] if exe else [sys.executable, "-m", "landaudelta.cli"]
    t0 = time.time()
    proc = subprocess.run(cmd + ["selftest", "--out", str(tmp_path)], capture_output=True,
                          text=True, timeout=1200)
    dt = time.time() - t0
    n_fail = sum(line.startswith("FAIL") for line in proc.stdout.splitlines())
    ok = proc.returncode == 0 and dt <= 1200
    _record(13, "invariant suite", ok,
            f"exit code {proc.returncode}, {n_fail} failing checks, {dt:.0f} s (limit 1200 s)"
            + ("" if ok else f"; stderr: {proc.stderr.strip()[-300:]}"))
