import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from landaudelta import approx, geometry, toeplitz
from landaudelta.errors import BadEpsilon, BasisTooSmall
from landaudelta.spectral import StrengthFunction


@pytest.fixture(scope="module")
def circle():
    return geometry.build_circle(n_panels=16)


@pytest.fixture(scope="module")
def small_basis():
    return approx.landau_basis(1.0, 1.3, q_max=1)


def test_squeeze_identity_and_bounds(circle):
    prof = approx.TransversalProfile.from_function(circle, lambda p, s, t: 1 + t + np.cos(s))
    same = approx.squeeze(prof, prof.beta)
    assert np.allclose(same.values, prof.values, rtol=1e-14) and np.allclose(same.t_nodes, prof.t_nodes)
    for bad in (2 * prof.beta, 0.0, -0.1):
        with pytest.raises(BadEpsilon):
            approx.squeeze(prof, bad)


def test_profile_validation(circle):
    with pytest.raises(ValueError):
        approx.TransversalProfile(circle, 0.2, np.ones((circle.n, 8)) * 1j)
    with pytest.raises(ValueError):
        approx.TransversalProfile(circle, 0.2, np.ones((3, 8)))
    with pytest.raises(BadEpsilon):
        approx.TransversalProfile(circle, 0.0, np.ones((circle.n, 8)))


def test_alpha_from_constant_and_odd_profiles(circle):
    c = 1.7
    prof = approx.TransversalProfile.from_function(circle, lambda p, s, t: c + 0 * t, beta=0.2)
    assert np.allclose(approx.alpha_from_profile(prof).values, 2 * 0.2 * c, rtol=1e-14)
    odd = approx.TransversalProfile.from_function(circle, lambda p, s, t: t**3 * (2 + np.sin(s)))
    assert np.abs(approx.alpha_from_profile(odd).values).max() < 1e-15
    al = StrengthFunction.from_function(circle, lambda p, s: 1 + 0.5 * np.cos(s))
    back = approx.alpha_from_profile(approx.TransversalProfile.from_alpha(al))
    assert np.allclose(back.values, al.values, rtol=1e-14)


@given(eps_frac=st.floats(1e-3, 1.0))
def test_normal_integral_conserved(eps_frac):
    c = geometry.build_circle(n_panels=8)
    prof = approx.TransversalProfile.from_function(c, lambda p, s, t: np.exp(-20 * t**2) * (1 + 0.2 * np.sin(s)))
    sq = approx.squeeze(prof, eps_frac * prof.beta)
    assert np.abs(sq.normal_integral() - prof.normal_integral()).max() < 1e-10
    assert np.all(np.abs(sq.t_nodes) < sq.half_width)


def test_zero_profile(circle, small_basis):
    prof = approx.TransversalProfile.zero(circle)
    gt = approx.assemble_galerkin(circle, 1.0, small_basis, approx.squeeze(prof, 0.1))
    assert not np.any(gt.V_mat) and not np.any(gt.delta_mat)
    r = approx.resolvent_gap(circle, prof, 1.0, small_basis)
    assert np.all(r.gaps == 0) and np.isnan(r.p)


def test_matrices_hermitian():
    c = geometry.build_fourier_curve([1.0, 0.0, 0.1], n_panels=16)
    prof = approx.TransversalProfile.from_function(c, lambda p, s, t: 1.0 + 0.3 * np.cos(s) + t)
    gt = approx.assemble_galerkin(c, 1.0, approx.landau_basis(1.0, 1.5, q_max=1), approx.squeeze(prof, 0.05))
    for m in (gt.V_mat, gt.delta_mat):
        assert np.abs(m - m.conj().T).max() <= 1e-10
    assert np.array_equal(gt.H_free, 2 * gt.qs + 1.0)


def test_constant_potential_on_annulus_matches_area_integral():
    # V = 1 on the tube around the unit circle: <psi, V psi> is the mode mass in the annulus
    c = geometry.build_circle(n_panels=32)
    prof = approx.TransversalProfile.from_function(c, lambda p, s, t: 1.0 + 0 * t, beta=0.2)
    gt = approx.assemble_galerkin(c, 1.0, (np.array([0]), np.array([0])), prof)
    exact = np.exp(-0.8**2 / 2) - np.exp(-1.2**2 / 2)
    assert abs(gt.V_mat[0, 0].real - exact) < 1e-12


def test_delta_block_matches_toeplitz():
    arc = geometry.sub_arc(geometry.build_circle(n_panels=64), 0.2, 2.2, n_panels=24)
    basis = approx.landau_basis(1.0, 1.0, q_max=1)
    gt = approx.assemble_galerkin(arc, 1.0, basis, None, StrengthFunction.constant(arc, 1.0))
    for q in (0, 1):
        T = toeplitz.assemble_toeplitz(q, arc, 1.0, gt.ms[gt.qs == q], (0.0, 0.0))
        assert np.abs(gt.block(gt.delta_mat, q) - T.entries).max() <= 1e-10


def test_coupling_must_share_the_curve(circle, small_basis):
    other = geometry.build_circle(n_panels=16)
    with pytest.raises(ValueError):
        approx.assemble_galerkin(circle, 1.0, small_basis, None, StrengthFunction.constant(other, 1.0))


def test_gap_report_and_guard(circle, small_basis):
    al = StrengthFunction.constant(circle, 1.0)
    prof = approx.TransversalProfile.from_alpha(al)
    with pytest.raises(ValueError):
        approx.resolvent_gap(circle, prof, 1.0, small_basis, lam=2.0)
    with pytest.raises(BadEpsilon):
        approx.resolvent_gap(circle, prof, 1.0, small_basis, eps_list=[2 * prof.beta])
    r = approx.resolvent_gap(circle, prof, 1.0, guard=False)
    assert np.all(np.diff(r.gaps) < 0)
    lines = r.to_csv().splitlines()
    assert lines[0] == "epsilon,gap" and lines[-1].startswith("p,")
    assert float(lines[1].split(",")[1]) == r.gaps[0]
    # a basis that misses most of the modes on the curve fails the guard
    tiny = (np.zeros(2, dtype=int), np.arange(2))
    with pytest.raises(BasisTooSmall):
        approx.resolvent_gap(circle, prof, 1.0, tiny)
