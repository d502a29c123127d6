import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from landaudelta import bie, geometry, landau
from landaudelta.errors import OnLandauLevel, SingularBS, TargetTooClose


@pytest.fixture(scope="module")
def circle():
    return geometry.build_circle(n_panels=32)


@pytest.fixture(scope="module")
def weyl_m1(circle):
    return bie.assemble_weyl(circle, -1.0, 1.0)


def _fourier_basis(nodes, n_max):
    th = np.arctan2(nodes.points[:, 1], nodes.points[:, 0])
    n = np.arange(-n_max, n_max + 1)
    return np.sqrt(nodes.weights)[:, None] * np.exp(1j * th[:, None] * n[None, :]) / np.sqrt(2 * np.pi)


def test_constant_density_gives_constant_potential(circle, weyl_m1):
    v = weyl_m1.entries @ np.ones(circle.n)
    assert np.ptp(v.real) < 1e-8 and np.ptp(v.imag) < 1e-8


def test_fourier_diagonalisation(circle, weyl_m1):
    F = _fourier_basis(circle, 20)
    D = F.conj().T @ weyl_m1.symmetrized() @ F
    off = D - np.diag(np.diag(D))
    assert np.abs(off).max() < 1e-8
    # the diagonal is the spectrum of the Hermitian matrix
    ev = np.sort(weyl_m1.eigenvalues())[::-1][:5]
    assert np.allclose(np.sort(np.diag(D).real)[::-1][:5], ev, atol=1e-9)


def test_norm_ordering(circle):
    n = [bie.assemble_weyl(circle, lam).norm() for lam in (-1.0, -10.0, -100.0)]
    assert n[2] < n[1] < n[0]


def test_weyl_hermitian_for_real_lambda(weyl_m1):
    S = weyl_m1.symmetrized()
    assert np.abs(S - S.conj().T).max() < 1e-12 * np.abs(S).max()


def test_weyl_conjugate_symmetry(circle):
    # M(lam)^* = M(conj lam): exact entrywise off the near field, and on smooth
    # densities for the near-field Galerkin blocks
    lam = -0.5 + 0.7j
    A = bie.assemble_weyl(circle, lam).symmetrized()
    Ac = bie.assemble_weyl(circle, np.conj(lam)).symmetrized()
    P = circle.panel_index
    gap = np.abs(P[:, None] - P[None, :])
    far = np.minimum(gap, circle.n_panels - gap) >= 2
    assert np.abs(A - Ac.conj().T)[far].max() < 1e-15
    F = _fourier_basis(circle, 20)
    D, Dc = F.conj().T @ A @ F, F.conj().T @ Ac @ F
    assert np.abs(D - Dc.conj().T).max() < 1e-10 * np.abs(D).max()


def test_on_level_rejected(circle):
    with pytest.raises(OnLandauLevel):
        bie.assemble_weyl(circle, 3.0, 1.0)


def test_pole_removed_matrix(circle):
    # M(lam) = P_q / (Lambda_q - lam) + regular part, on the boundary
    lam = 1.0 + 1e-3
    reg = bie.assemble_weyl(circle, lam, 1.0, pole=0)
    full = bie.assemble_weyl(circle, lam, 1.0)
    X, Y = circle.points[:, None, :], circle.points[None, :, :]
    P = landau.projection_kernel(0, X, Y) * circle.weights[None, :]
    assert np.abs(full.entries - reg.entries - P / (1.0 - lam)).max() < 1e-9 * np.abs(full.entries).max()


def test_single_layer_properties(circle):
    S = bie.assemble_single_layer(circle)
    ev = np.sort(S.eigenvalues())[::-1]
    assert ev.min() >= -1e-8
    k = np.arange(8, circle.n // 2)
    # k counted from 1 in the fit
    slope = np.polyfit(np.log(k + 1), np.log(ev[k]), 1)[0]
    assert slope <= -0.9
    # kernel values K(x_j, x_k) away from the Galerkin near field (recovered
    # from A = K w up to one rounding)
    E = S.entries / circle.weights[None, :]
    P = circle.panel_index
    gap = np.abs(P[:, None] - P[None, :])
    far = np.minimum(gap, circle.n_panels - gap) >= 2
    assert np.all(np.abs(E - E.T)[far] <= 4 * np.finfo(float).eps * np.abs(E)[far])


def test_single_layer_on_circle_matches_bessel_product():
    # on a circle of radius r the n-th eigenvalue is r I_n(r) K_n(r)
    from scipy.special import iv, kv

    r = 0.8
    c = geometry.build_circle(radius=r, n_panels=32)
    ev = np.sort(bie.assemble_single_layer(c).eigenvalues())[::-1]
    n = np.arange(0, 11)
    exact = np.sort(np.concatenate([[r * iv(0, r) * kv(0, r)], np.repeat(r * iv(n[1:], r) * kv(n[1:], r), 2)]))[::-1]
    assert np.allclose(ev[:21], exact[:21], rtol=1e-10)


def test_gamma_apply(circle, rng):
    targets = np.array([[0.0, 0.1], [2.0, 0.5], [-1.7, -0.9]])
    assert np.all(bie.gamma_apply(circle, -1 + 0.3j, 1.0, np.zeros(circle.n), targets) == 0)
    with pytest.raises(TargetTooClose):
        bie.gamma_apply(circle, -1.0, 1.0, np.ones(circle.n), [[1.001, 0.0]])


def _magnetic_laplacian(f, x, h, B=1.0):
    # 5-point stencil for (i grad + A)^2 with Peierls phases on the links
    out = 4 * f(x[None])[0]
    for e in ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)):
        e = np.array(e)
        mid = x + 0.5 * h * e
        ph = np.exp(-1j * h * 0.5 * B * (-mid[1] * e[0] + mid[0] * e[1]))
        out -= ph * f((x + h * e)[None])[0]
    return out / h**2


def test_gamma_field_solves_the_equation(circle, rng):
    lam = -1.0 + 0.3j
    dens = rng.standard_normal(circle.n) + 1j * rng.standard_normal(circle.n)
    for x in ([0.3, 0.2], [1.6, -0.4], [0.0, -0.45], [-1.2, 1.1]):
        x = np.array(x)
        f = lambda p: bie.gamma_apply(circle, lam, 1.0, dens, p)  # noqa: E731
        res = _magnetic_laplacian(f, x, 1.25e-3) - lam * f(x[None])[0]
        assert abs(res) <= 1e-4 * abs(f(x[None])[0])


def test_perturbation_trivial_and_sign(circle, rng):
    grid = rng.uniform(-2, 2, (40, 2))
    assert np.all(bie.assemble_perturbation(circle, 0.0, -1.0, 1.0, grid) == 0)
    c = geometry.build_circle(n_panels=16)
    pts = rng.uniform(-2.5, 2.5, (120, 2))
    W = bie.assemble_perturbation(c, 1.0, -1.0, 1.0, pts)
    H = 0.5 * (W + W.conj().T)
    assert np.linalg.eigvalsh(H).max() <= 1e-8 * np.abs(H).max()
    assert np.abs(W - W.conj().T).max() < 1e-10 * np.abs(W).max()


@given(seed=st.integers(0, 2**31))
def test_factorized_matches_unfactorized(seed):
    r = np.random.default_rng(seed)
    c = geometry.build_circle(n_panels=8)
    alpha = r.uniform(-1.5, 1.5, c.n)
    grid = r.uniform(-2, 2, (20, 2))
    lam = complex(r.uniform(-4, 0), r.uniform(0.2, 1.0))
    w1 = bie.assemble_perturbation(c, alpha, lam, 1.0, grid, factorized=True)
    w2 = bie.assemble_perturbation(c, alpha, lam, 1.0, grid, factorized=False)
    assert np.abs(w1 - w2).max() <= 1e-9 * np.abs(w2).max()


def test_singular_at_an_eigenvalue(circle_secular):
    c = geometry.build_circle(n_panels=64)
    lam = float(circle_secular["levels"]["q0"][0]["lambda"])
    with pytest.raises(SingularBS):
        bie.assemble_perturbation(c, 1.0, lam, 1.0, np.array([[0.0, 0.0]]))
    bie.assemble_perturbation(c, 1.0, lam - 1e-3, 1.0, np.array([[0.0, 0.0]]))


def test_cache_roundtrip(tmp_path, circle):
    bm = bie.cached_weyl(tmp_path, circle, -2.0)
    again = bie.cached_weyl(tmp_path, circle, -2.0)
    assert again.entries.tobytes() == bm.entries.tobytes()
    files = sorted(p.suffix for p in tmp_path.iterdir())
    assert files == [".bin", ".json"]
    other = geometry.build_circle(n_panels=16)
    assert bie.load_matrix(tmp_path, bm.cache_key()[0], other) is None
