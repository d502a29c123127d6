"""Desk-scale invariant checks for every module, run by ``landaudelta selftest``.

Each check returns ``(ok, detail)``; ``run_all`` collects them in registration
order.  Sizes are kept small so the whole battery runs in a few minutes.
"""

from __future__ import annotations

import tempfile
import time
from pathlib import Path

import numpy as np

from . import approx, bie, capacity, geometry, landau, specfun, spectral, toeplitz

CHECKS = []


def check(module, name):
    def deco(fn):
        CHECKS.append((module, name, fn))
        return fn
    return deco


def _polar_grid(r_max=9.0, n_r=120, n_theta=64):
    edges = np.linspace(0.0, r_max, 7)
    x, w = geometry.gauss_legendre(n_r // 6)
    rs = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * x for a, b in zip(edges[:-1], edges[1:])])
    rw = np.concatenate([0.5 * (b - a) * w for a, b in zip(edges[:-1], edges[1:])])
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    R, T = np.meshgrid(rs, th, indexing="ij")
    pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    wts = (rw[:, None] * rs[:, None] * np.full(n_theta, 2 * np.pi / n_theta)[None, :]).reshape(-1)
    return pts, wts


# ---------------------------------------------------------------- specfun

@check("specfun", "Kummer/Laguerre bridge")
def _kummer_bridge(rng):
    x = np.linspace(0.1, 10.0, 25)
    worst = 0.0
    for q in range(9):
        lag = specfun.laguerre(q, x)
        fq = np.exp(specfun.log_factorial(q))
        err = np.abs(specfun.kummer_u(-q, x) - (-1) ** q * fq * lag) / (1 + fq * np.abs(lag))
        worst = max(worst, float(err.max()))
    return worst <= 1e-9, f"max scaled error {worst:.2e}"


@check("specfun", "Bessel K0 ODE residual")
def _bessel_ode(rng):
    h = 2e-4
    worst = 0.0
    for x in (0.5, 1.0, 2.0, 5.0):
        k = specfun.bessel_k0(np.array([x - h, x, x + h]))
        d1 = (k[2] - k[0]) / (2 * h)
        d2 = (k[2] - 2 * k[1] + k[0]) / h**2
        worst = max(worst, abs(x * d2 + d1 - x * k[1]))
    return worst <= 1e-6, f"max residual {worst:.2e}"


@check("specfun", "gamma recurrence")
def _gamma_rec(rng):
    re, im = np.meshgrid(np.linspace(-4.7, 5.3, 21), np.linspace(-3, 3, 13))
    z = (re + 1j * im).ravel()
    g1 = specfun.gamma_fn(z + 1)
    err = np.abs(g1 - z * specfun.gamma_fn(z)) / np.abs(g1)
    return float(err.max()) <= 1e-10, f"max relative error {err.max():.2e}"


@check("specfun", "Laguerre three-term recurrence")
def _laguerre_rec(rng):
    x = np.linspace(0.0, 30.0, 61)
    worst = 0.0
    for q in range(1, 40):
        lhs = (q + 1) * specfun.laguerre(q + 1, x)
        a = (2 * q + 1 - x) * specfun.laguerre(q, x)
        b = q * specfun.laguerre(q - 1, x)
        scale = np.abs(lhs) + np.abs(a) + np.abs(b)
        worst = max(worst, float((np.abs(lhs - a + b) / scale).max()))
    return worst <= 1e-10, f"max relative residual {worst:.2e}"


# ---------------------------------------------------------------- geometry

@check("geometry", "trigonometric quadrature exactness")
def _quad_exact(rng):
    c = geometry.build_circle(radius=1.5, n_panels=16)
    u = np.arctan2(c.points[:, 1], c.points[:, 0])
    worst = 0.0
    for k in range(0, c.order + 1):
        for f, exact in ((np.cos, 2 * np.pi * 1.5 if k == 0 else 0.0), (np.sin, 0.0)):
            worst = max(worst, abs(c.weights @ f(k * u) - exact))
    return worst <= 1e-12, f"max error {worst:.2e}"


@check("geometry", "tubular injectivity proxy")
def _tube_inject(rng):
    c = geometry.build_fourier_curve([1.0, 0.0, 0.15, 0.05], n_panels=32)
    tm = geometry.TubularMap(c)
    L = c.total_length
    s1, s2 = rng.uniform(0, L, 300), rng.uniform(0, L, 300)
    t1, t2 = rng.uniform(-tm.beta, tm.beta, 300), rng.uniform(-tm.beta, tm.beta, 300)
    ds = np.abs(s1 - s2)
    ds = np.minimum(ds, L - ds)
    keep = np.hypot(ds, t1 - t2) >= 1e-4
    x1, _ = tm(s1, t1)
    x2, _ = tm(s2, t2)
    d = np.hypot(*(x1 - x2).T)[keep]
    return float(d.min()) >= 1e-8, f"min distance {d.min():.2e}"


@check("geometry", "arc additivity")
def _arc_add(rng):
    c = geometry.build_fourier_curve([1.0, 0.1, 0.0, 0.05], n_panels=32)
    a, b, d = 0.3, 1.7, 4.1
    err = abs(geometry.sub_arc(c, a, b).total_length + geometry.sub_arc(c, b, d).total_length
              - geometry.sub_arc(c, a, d).total_length)
    return err <= 1e-12, f"error {err:.2e}"


# ---------------------------------------------------------------- landau

@check("landau", "Green symmetry")
def _green_sym(rng):
    x = rng.uniform(-2, 2, (100, 2))
    y = rng.uniform(-2, 2, (100, 2))
    lam = rng.uniform(-5, 8, 100) + 1j * rng.uniform(-2, 2, 100)
    worst = 0.0
    for i in range(100):
        g1 = landau.green_function(x[i], y[i], lam[i])
        g2 = landau.green_function(y[i], x[i], np.conj(lam[i]))
        worst = max(worst, abs(np.conj(g2) - g1))
    return worst <= 1e-12, f"max deviation {worst:.2e}"


@check("landau", "projection idempotence on modes")
def _proj_idem(rng):
    pts, wts = _polar_grid()
    x = rng.uniform(-1, 1, (4, 2))
    worst = 0.0
    for q in range(3):
        K = landau.projection_kernel(q, x[:, None, :], pts[None, :, :])
        for qq in range(3):
            for m in (-qq, 0, 2):
                psi = landau.mode_values(qq, [m], pts)[:, 0]
                got = K @ (wts * psi)
                want = landau.mode_values(qq, [m], x)[:, 0] if qq == q else 0.0
                worst = max(worst, float(np.abs(got - want).max()))
    return worst <= 1e-6, f"max deviation {worst:.2e}"


@check("landau", "level orthonormality")
def _orth(rng):
    pts, wts = _polar_grid(r_max=12.0, n_r=240, n_theta=48)
    cols = [(q, m) for q in range(4) for m in range(-q, 11)]
    Psi = np.concatenate([landau.mode_values(q, [m], pts) for q, m in cols], axis=1)
    G = Psi.conj().T @ (wts[:, None] * Psi)
    err = float(np.abs(G - np.eye(len(cols))).max())
    return err <= 1e-8, f"max deviation {err:.2e}"


# ---------------------------------------------------------------- bie

@check("bie", "Weyl decay exponent")
def _weyl_decay(rng):
    c = geometry.build_circle(n_panels=32)
    norms = [bie.assemble_weyl(c, -(10.0**i)).norm() for i in range(4)]
    ex = [np.log(norms[i] / norms[i + 1]) / np.log(10.0) for i in (1, 2)]
    ok = all(a > b for a, b in zip(norms, norms[1:])) and all(0.25 <= e <= 0.55 for e in ex)
    return ok, f"norms {np.round(norms, 5).tolist()}, exponents {np.round(ex, 3).tolist()}"


@check("bie", "Nystrom convergence")
def _nystrom(rng):
    ev = []
    for n in (16, 32):
        e = bie.assemble_weyl(geometry.build_circle(n_panels=n), -1.0).eigenvalues()
        ev.append(np.sort(e.real)[::-1][:12])
    err = float(np.max(np.abs(ev[0] - ev[1]) / np.abs(ev[1])))
    return err <= 1e-6, f"max relative change {err:.2e}"


@check("bie", "factorized Krein formula")
def _factorized(rng):
    c = geometry.build_circle(n_panels=16)
    alpha = 0.5 + np.cos(np.arctan2(c.points[:, 1], c.points[:, 0]))
    grid = rng.uniform(-2.5, 2.5, (60, 2))
    w1 = bie.assemble_perturbation(c, alpha, -1.0 + 0.5j, 1.0, grid, factorized=True)
    w2 = bie.assemble_perturbation(c, alpha, -1.0 + 0.5j, 1.0, grid, factorized=False)
    err = float(np.abs(w1 - w2).max() / np.abs(w2).max())
    return err <= 1e-9, f"relative difference {err:.2e}"


# ---------------------------------------------------------------- spectral

def _cluster(curve, c, q, side, k_max=8, **kw):
    al = spectral.StrengthFunction.constant(curve, c)
    return spectral.find_cluster_eigenvalues(curve, al, q, side, k_max, 1.0, **kw)


@check("spectral", "side rule")
def _side(rng):
    c = geometry.build_circle(n_panels=16)
    ok = True
    for q in (0, 1):
        up = _cluster(c, 1.0, q, "above").eigenvalues
        down = _cluster(c, -1.0, q, "below").eigenvalues
        ok &= bool(np.all(up > landau.landau_level(q)) and np.all(down < landau.landau_level(q)))
    return ok, "alpha=+1 above, alpha=-1 below"


@check("spectral", "gap confinement")
def _confine(rng):
    c = geometry.build_circle(n_panels=16)
    ev = np.concatenate([_cluster(c, s, q, side).eigenvalues
                         for q in (0, 1) for s, side in ((1.0, "above"), (-1.0, "below"))])
    levels = np.array([landau.landau_level(q) for q in range(4)])
    d = float(np.abs(ev[:, None] - levels[None, :]).min())
    return d > 1e-6, f"closest approach to a level {d:.2e}"


@check("spectral", "discretization stability")
def _disc(rng):
    worst = 0.0
    for q in (0, 1):
        a = _cluster(geometry.build_circle(n_panels=32), 1.0, q, "above").eigenvalues
        b = _cluster(geometry.build_circle(n_panels=64), 1.0, q, "above").eigenvalues
        n = min(len(a), len(b), 9)
        worst = max(worst, float(np.abs(a[:n] - b[:n]).max()))
    return worst <= 1e-6, f"max shift {worst:.2e}"


@check("spectral", "monotone in coupling")
def _mono(rng):
    c = geometry.build_circle(n_panels=16)
    evs = [_cluster(c, s, 0, "above", k_max=6).eigenvalues for s in (0.5, 1.0, 2.0)]
    n = min(len(e) for e in evs)
    ok = bool(np.all(evs[0][:n] <= evs[1][:n]) and np.all(evs[1][:n] <= evs[2][:n]))
    return ok, f"compared {n} eigenvalues"


# ---------------------------------------------------------------- toeplitz

@check("toeplitz", "arc monotonicity")
def _t_mono(rng):
    parent = geometry.build_circle(n_panels=64)
    big = geometry.sub_arc(parent, 0.0, np.pi, n_panels=32)
    small = geometry.sub_arc(parent, 0.5, 2.0, n_panels=24)
    ms = (0, 50)
    s1 = toeplitz.toeplitz_singular_values(toeplitz.assemble_toeplitz(0, small, 1.0, ms, (0.0, 0.0)))
    s2 = toeplitz.toeplitz_singular_values(toeplitz.assemble_toeplitz(0, big, 1.0, ms, (0.0, 0.0)))
    n = min(len(s1), len(s2))
    ok = bool(np.all(s1[:n] <= s2[:n] * (1 + 1e-10)))
    return ok, f"{n} values compared"


@check("toeplitz", "upper bound consistency")
def _t_upper(rng):
    c = geometry.build_circle(n_panels=32)
    s = toeplitz.toeplitz_singular_values(toeplitz.assemble_toeplitz(0, c, 1.0))
    b, tail, target = toeplitz.toeplitz_asymptotics(s, 1.0, c)
    worst = float(np.nanmax(b[-5:]))
    return worst <= 1.1 * target, f"tail max {worst:.4f}, bound {1.1 * target:.4f}"


@check("toeplitz", "truncation stability")
def _t_trunc(rng):
    a = geometry.sub_arc(geometry.build_circle(n_panels=64), 0.0, np.pi, n_panels=32)
    s1 = toeplitz.toeplitz_singular_values(toeplitz.assemble_toeplitz(0, a, 1.0))
    M = int(toeplitz.assemble_toeplitz(0, a, 1.0).ms[-1])
    s2 = toeplitz.toeplitz_singular_values(toeplitz.assemble_toeplitz(0, a, 1.0, (0, 2 * M)))
    err = float(np.abs(s1[:10] - s2[:10]).max())
    return err <= 1e-10, f"max change {err:.2e}"


# ---------------------------------------------------------------- capacity

@check("capacity", "scaling law")
def _c_scale(rng):
    a = geometry.sub_arc(geometry.build_circle(n_panels=64), 0.0, 2.0, n_panels=24)
    c0 = capacity.capacity_of(a)
    c1 = capacity.capacity_of(geometry.transformed(a, scale=2.5))
    err = abs(c1 / (2.5 * c0) - 1)
    return err <= 1e-6, f"relative error {err:.2e}"


@check("capacity", "rigid-motion invariance")
def _c_rigid(rng):
    s = geometry.build_segment((0.0, 0.0), (1.0, 0.3), 40)
    c0 = capacity.capacity_of(s)
    c1 = capacity.capacity_of(geometry.transformed(s, 1.0, 1.1, (3.0, -2.0)))
    return abs(c1 - c0) <= 1e-10, f"difference {abs(c1 - c0):.2e}"


@check("capacity", "potential equalization")
def _c_frost(rng):
    a = geometry.sub_arc(geometry.build_circle(n_panels=64), 0.0, np.pi, n_panels=48)
    m = capacity.equilibrium(a)
    pot = m.potential()[m.weights > 0]
    return float(np.ptp(pot)) <= 1e-4, f"potential spread {np.ptp(pot):.2e}"


@check("capacity", "maximality")
def _c_max(rng):
    s = geometry.build_segment((0.0, 0.0), (1.0, 0.0), 40)
    m = capacity.equilibrium(s)
    E = m.matrix
    worst = np.inf
    for _ in range(200):
        w = np.clip(m.weights + rng.normal(0, 1e-3, len(m.weights)), 0, None)
        w /= w.sum()
        worst = min(worst, w @ E @ w - m.robin)
    return worst >= -1e-10, f"min energy increase {worst:.2e}"


# ---------------------------------------------------------------- approx

def _approx_setup():
    c = geometry.build_circle(n_panels=32)
    al = spectral.StrengthFunction.constant(c, 1.0)
    return c, al, approx.TransversalProfile.from_alpha(al)


@check("approx", "Hermitian matrices")
def _a_herm(rng):
    c = geometry.build_fourier_curve([1.0, 0.0, 0.1], n_panels=32)
    prof = approx.TransversalProfile.from_function(c, lambda p, s, t: 1.0 + 0.3 * np.cos(s) + t)
    gt = approx.assemble_galerkin(c, 1.0, None, approx.squeeze(prof, 0.05))
    err = max(float(np.abs(m - m.conj().T).max()) for m in (gt.V_mat, gt.delta_mat))
    return err <= 1e-10, f"max asymmetry {err:.2e}"


@check("approx", "normal-integral conservation")
def _a_norm(rng):
    c = geometry.build_circle(n_panels=16)
    prof = approx.TransversalProfile.from_function(c, lambda p, s, t: np.exp(-t**2 * 20) * (1 + 0.2 * np.sin(s)))
    ref = prof.normal_integral()
    err = max(float(np.abs(approx.squeeze(prof, e).normal_integral() - ref).max())
              for e in prof.beta * 0.5 ** np.arange(6))
    return err <= 1e-10, f"max change {err:.2e}"


@check("approx", "truncation robustness")
def _a_trunc(rng):
    c, al, prof = _approx_setup()
    r_max = 1.0 + prof.beta
    base = approx.landau_basis(1.0, r_max, q_max=1)
    qs, ms = base
    wq, wm = [], []
    for q in (0, 1):
        M = int(ms[qs == q].max())
        m = np.arange(-q, 2 * M + 1)
        wq.append(np.full(len(m), q))
        wm.append(m)
    wide = (np.concatenate(wq), np.concatenate(wm))
    g1 = approx.resolvent_gap(c, prof, 1.0, base, guard=False).gaps
    g2 = approx.resolvent_gap(c, prof, 1.0, wide, guard=False).gaps
    ch = float(np.max(np.abs(g2 - g1) / g1))
    return ch <= 0.10, f"max relative change {ch:.2%}"


@check("approx", "delta/Toeplitz consistency")
def _a_toep(rng):
    arc = geometry.sub_arc(geometry.build_circle(n_panels=64), 0.2, 2.2, n_panels=24)
    al = spectral.StrengthFunction.constant(arc, 1.0)
    basis = approx.landau_basis(1.0, 1.0, q_max=1)
    gt = approx.assemble_galerkin(arc, 1.0, basis, None, al, center=(0.0, 0.0))
    worst = 0.0
    for q in (0, 1):
        T = toeplitz.assemble_toeplitz(q, arc, 1.0, gt.ms[gt.qs == q], (0.0, 0.0))
        worst = max(worst, float(np.abs(gt.block(gt.delta_mat, q) - T.entries).max()))
    return worst <= 1e-10, f"max deviation {worst:.2e}"


# ---------------------------------------------------------------- cli

@check("cli", "idempotent CSV output")
def _cli_idem(rng):
    from . import cli

    cfg = {"experiment": "capacity", "geometry": {"type": "circle", "radius": 1.0, "n_panels": 16}}
    with tempfile.TemporaryDirectory() as d:
        outs = []
        for k in range(2):
            out = Path(d) / f"run{k}"
            cli.run(cfg, out, use_cache=False)
            outs.append({p.name: [ln for ln in p.read_text().splitlines() if not ln.startswith("#")]
                         for p in sorted(out.glob("*.csv"))})
        return outs[0] == outs[1] and bool(outs[0]), f"{len(outs[0])} files compared"


@check("cli", "cache soundness")
def _cli_cache(rng):
    c = geometry.build_circle(n_panels=16)
    fresh = bie.assemble_weyl(c, -2.0 + 0.5j)
    with tempfile.TemporaryDirectory() as d:
        bie.cached_weyl(d, c, -2.0 + 0.5j)
        hit = bie.cached_weyl(d, c, -2.0 + 0.5j)
    same = fresh.entries.tobytes() == np.ascontiguousarray(hit.entries).tobytes()
    return same, "bitwise identical" if same else "cached matrix differs"


def run_all(seed=0, modules=None, report=print):
    """Run every registered check; returns the list of (module, name, ok, detail, seconds)."""
    results = []
    for module, name, fn in CHECKS:
        if modules and module not in modules:
            continue
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash counts as a failed invariant
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        results.append((module, name, bool(ok), detail, dt))
        if report is not None:
            report(f"{'PASS' if ok else 'FAIL'}  {module:9s} {name}: {detail} ({dt:.1f}s)")
    return results
