import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnchar.boundary import BoundaryFunction, GridSpec, derivative
from dnchar.errors import NotRealOperator, OnBoundaryCurve, RankAmbiguous, WindingIllConditioned
from dnchar.operators import (BoundaryOperator, TolPolicy, build_upsilon, build_upsilon_eta_z,
                              calibrate_orientation, handle_operator, kernel_basis, numerical_rank,
                              restricted_rank, upsilon_by_parts, winding_number)
from dnchar.solvers import dn_disk

G8 = GridSpec(8)
G16 = GridSpec(16)


def m(n, g=G16):
    return BoundaryFunction.mode(n, g)


def test_upsilon_examples(disk16):
    ups = build_upsilon(disk16)
    assert ups.apply(m(2)).norm() < 1e-14
    assert ups.apply(m(-2)).allclose(m(-2) * 4)
    assert ups.apply(BoundaryFunction.constant(1, G16)).norm() < 1e-14


def test_upsilon_requires_real():
    op = BoundaryOperator(G8, np.diag(np.arange(17.0)).astype(complex))
    assert not op.real_flag
    with pytest.raises(NotRealOperator):
        build_upsilon(op)
    with pytest.raises(NotRealOperator):
        handle_operator(op)


def test_upsilon_forms_agree_on_random_real_pairs(disk16):
    rng = np.random.default_rng(7)
    # a non-diagonal real operator so the test is not vacuous
    a = rng.standard_normal((33, 33)) + 1j * rng.standard_normal((33, 33))
    lam = BoundaryOperator(G16, disk16.matrix + 0.1 * a)
    lam = lam.with_matrix(0.5 * (lam.matrix + np.flip(lam.matrix).conj()))
    assert lam.real_flag
    ups = build_upsilon(lam)
    for _ in range(100):
        x = rng.standard_normal(33) + 1j * rng.standard_normal(33)
        zeta = BoundaryFunction(G16, x)
        a1 = ups.apply(zeta)
        a2 = upsilon_by_parts(lam, zeta)
        assert np.linalg.norm(a1.coeffs - a2.coeffs) <= 1e-12 * max(1.0, np.linalg.norm(a1.coeffs))


def test_upsilon_eta_z_examples(disk16):
    eta = m(1)
    u0 = build_upsilon_eta_z(disk16, eta, 0j)
    assert u0.apply(m(1)).norm() < 1e-13
    assert u0.apply(BoundaryFunction.constant(1, G16)).allclose(m(-1) * 2, atol=1e-13)
    u2 = build_upsilon_eta_z(disk16, eta, 2 + 0j)
    # 1/(w - 2) is holomorphic in the disk; truncation tail is 2^-33
    assert u2.apply(BoundaryFunction.constant(1, G16)).norm() < 1e-9
    with pytest.raises(OnBoundaryCurve):
        build_upsilon_eta_z(disk16, eta, 1 + 0j)


def test_handle_operator_vanishes_on_disk(disk16):
    h = handle_operator(disk16)
    assert np.linalg.norm(h.matrix, 2) <= 1e-10
    assert h.apply(m(3)).norm() < 1e-12
    assert h.meta["projection_residual"] == 0


def test_handle_operator_reports_projection_residual():
    mat = np.diag(np.abs(G8.wavenumbers).astype(complex))
    mat[8, 8] = 0.5          # constant not annihilated: not a DN map
    h = handle_operator(BoundaryOperator(G8, mat))
    assert h.meta["projection_residual"] == pytest.approx(0.5)


def test_kernel_dims():
    lam = dn_disk(G8)
    kb = kernel_basis(build_upsilon(lam))
    assert kb.dim == 9
    # single modes n = 0..8, smoothest first
    for k, v in enumerate(kb.vectors):
        assert abs(abs(v.coeffs[8 + k]) - 1) < 1e-12
    gram = kb.matrix.conj().T @ kb.matrix
    assert np.allclose(gram, np.eye(9), atol=1e-10)
    ups = build_upsilon(lam)
    for v in kb.vectors:
        assert ups.apply(v).norm() <= kb.tol * ups.norm() + 1e-15


def test_kernel_dim_drops_under_diagonal_perturbation():
    lam = dn_disk(G8)
    mat = lam.matrix.copy()
    mat[8 + 3, 8 + 3] += 0.1
    mat[8 - 3, 8 - 3] += 0.1
    assert kernel_basis(build_upsilon(lam.with_matrix(mat))).dim == 8
    ups = build_upsilon(lam).matrix.copy()
    ups[8 + 3, 8 + 3] = 0.1
    assert kernel_basis(BoundaryOperator(G8, ups)).dim == 8


def test_kernel_of_zero_matrix_is_everything():
    assert kernel_basis(BoundaryOperator(G8, np.zeros((17, 17), complex))).dim == 17


def test_rank_ambiguous_reports_candidates():
    sv = np.array([1.0, 0.5, 0.2, 0.1, 0.05, 0.02])
    op = BoundaryOperator(GridSpec(4), np.diag(np.concatenate([sv, [0.01, 0.005, 0.001]])).astype(complex))
    with pytest.raises(RankAmbiguous) as info:
        numerical_rank(op, TolPolicy(mode="gap", gap_factor=1e3))
    assert len(info.value.candidates) == 2


def test_winding_examples():
    assert winding_number(m(1), 0j)[0] == 1
    assert winding_number(m(2), 0j)[0] == 2
    assert winding_number(m(1) + m(2) * 0.3, 3 + 0j)[0] == 0
    assert winding_number(m(1), 0j, orientation=-1)[0] == -1
    with pytest.raises(OnBoundaryCurve):
        winding_number(m(1), 1 + 0j)
    with pytest.raises(WindingIllConditioned):
        winding_number(m(1), 0j, defect_tol=-1.0)


def test_condition_v_identity_on_disk(disk16):
    kb = kernel_basis(build_upsilon(disk16))
    ups = build_upsilon(disk16)
    for eta, zs in [(m(1), [0, 0.5j, 1.5]), (m(2), [0.1, 2j])]:
        for z in zs:
            k, _ = winding_number(eta, complex(z))
            r = restricted_rank(build_upsilon_eta_z(disk16, eta, complex(z), ups), kb).rank
            assert r == k


def test_kernel_nesting(disk16):
    from dnchar.characterization import _embed, subspace_angle
    small = kernel_basis(build_upsilon(disk16))
    big = kernel_basis(build_upsilon(dn_disk(GridSpec(24))))
    assert big.dim == small.dim + 8
    assert subspace_angle(_embed(small, 24), big.matrix) <= 1e-6


def test_realness_and_rotation_invariance(disk16):
    assert disk16.real_flag
    phase = np.exp(1j * 0.7 * G16.wavenumbers)
    rot = disk16.with_matrix(np.diag(phase) @ disk16.matrix @ np.diag(phase.conj()))
    s1 = np.linalg.svd(build_upsilon(disk16).matrix, compute_uv=False)
    s2 = np.linalg.svd(build_upsilon(rot).matrix, compute_uv=False)
    assert np.allclose(s1, s2, atol=1e-12)


def test_calibrate_orientation_flips(disk16):
    wrong = disk16.flipped()
    assert wrong.orientation == -1
    fixed = calibrate_orientation(wrong)
    assert calibrate_orientation(disk16).orientation == 1
    # either orientation's kernel is the Hardy space of its own direction; calibration
    # restores a positive winding of the smoothest coordinate
    kb = kernel_basis(build_upsilon(fixed))
    assert winding_number(kb.vectors[1], 0j, fixed.orientation)[0] > 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_apply_is_linear(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((17, 17)) + 1j * rng.standard_normal((17, 17))
    op = BoundaryOperator(G8, a)
    f = BoundaryFunction(G8, rng.standard_normal(17) + 1j * rng.standard_normal(17))
    g = BoundaryFunction(G8, rng.standard_normal(17) + 1j * rng.standard_normal(17))
    c = complex(*rng.standard_normal(2))
    lhs = op.apply(f + g * c)
    rhs = op.apply(f) + op.apply(g) * c
    assert np.linalg.norm(lhs.coeffs - rhs.coeffs) <= 1e-12 * (op.norm() * (f.norm() + abs(c) * g.norm()))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_derivative_matches_tangential_operator(seed):
    from dnchar.operators import derivative_matrix
    rng = np.random.default_rng(seed)
    f = BoundaryFunction(G8, rng.standard_normal(17) + 1j * rng.standard_normal(17))
    d = BoundaryOperator(G8, derivative_matrix(G8))
    assert d.apply(f).allclose(derivative(f), atol=1e-12)
