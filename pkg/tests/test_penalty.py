import warnings

import numpy as np
import pytest

from conftest import random_interior
from dspline.bspline import basis_from_interior, design_matrix, make_basis
from dspline.penalty import (
    PenaltySpec,
    assemble_W,
    build_penalty,
    local_quadrature,
    oracle_S,
    quadrature_points,
)

ORDERS = [(m1, m2) for m1 in range(6) for m2 in range(m1 + 1)]


def test_spec_validation():
    assert PenaltySpec(3, 2).p == 1
    with pytest.raises(ValueError, match="m2 <= m1"):
        PenaltySpec(2, 3)


def test_quadrature_points():
    two = basis_from_interior([0.0, 1.0], 3)
    np.testing.assert_array_equal(quadrature_points(two, PenaltySpec(3, 3)), [0.5])
    np.testing.assert_array_equal(quadrature_points(two, PenaltySpec(3, 2)), [0.0, 1.0])
    three = basis_from_interior([0.0, 1.0, 2.0], 3)
    np.testing.assert_array_equal(quadrature_points(three, PenaltySpec(3, 1)), [0.0, 0.5, 1.0, 1.5, 2.0])


@pytest.mark.parametrize("m1,m2", ORDERS)
def test_quadrature_point_count(rng, m1, m2):
    basis = basis_from_interior(random_interior(rng, 7), m1)
    x = quadrature_points(basis, PenaltySpec(m1, m2))
    p = m1 - m2
    n_int = basis.k - m1
    assert x.size == (n_int * p + 1 if p else n_int)
    assert np.all(np.diff(x) > 0)


def test_local_quadrature_p1():
    np.testing.assert_allclose(local_quadrature(1).Wtilde, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], rtol=1e-14)


def test_local_quadrature_p2():
    lq = local_quadrature(2)
    np.testing.assert_allclose(lq.Wtilde, np.array([[4, 2, -1], [2, 16, 2], [-1, 2, 4]]) / 15, rtol=1e-13)
    np.testing.assert_allclose(lq.H, [[2, 0, 2 / 3], [0, 2 / 3, 0], [2 / 3, 0, 2 / 5]], rtol=1e-15)
    np.testing.assert_array_equal(lq.P, [[1, -1, 1], [1, 0, 0], [1, 1, 1]])


@pytest.mark.parametrize("p", range(1, 16))
def test_local_quadrature_structure(p):
    lq = local_quadrature(p)
    np.testing.assert_array_equal(lq.Wtilde, lq.Wtilde.T)
    assert np.all(np.linalg.eigvalsh(lq.Wtilde) > 0)
    i, j = np.indices(lq.H.shape)
    assert np.all(lq.H[(i + j) % 2 == 1] == 0.0)


def test_local_quadrature_conditioning_claim():
    # nodal Vandermonde matrix stays below 2e4 in condition number up to p = 10
    assert max(np.linalg.cond(local_quadrature(p).P) for p in range(1, 11)) < 2e4


def test_local_quadrature_limits():
    with pytest.raises(ValueError, match="p >= 1"):
        local_quadrature(0)
    with pytest.raises(ValueError, match="breaks down"):
        local_quadrature(31)
    with pytest.warns(RuntimeWarning, match="ill conditioned"):
        local_quadrature(20)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        local_quadrature(19)


def test_W_diag_for_p0(rng):
    basis = basis_from_interior(random_interior(rng, 6), 2)
    W = assemble_W(basis, PenaltySpec(2, 2))
    np.testing.assert_array_equal(W.to_dense(), np.diag(basis.h))


def test_W_two_unit_intervals_p1():
    basis = basis_from_interior([0.0, 1.0, 2.0], 3)
    W = assemble_W(basis, PenaltySpec(3, 2)).to_dense()
    expected = np.array([[1 / 3, 1 / 6, 0], [1 / 6, 2 / 3, 1 / 6], [0, 1 / 6, 1 / 3]])
    np.testing.assert_allclose(W, expected, rtol=1e-14)


def test_W_single_interval_is_Wtilde():
    basis = basis_from_interior([0.0, 2.0], 4)
    W = assemble_W(basis, PenaltySpec(4, 2))
    np.testing.assert_allclose(W.to_dense(), local_quadrature(2).Wtilde, rtol=1e-15)


@pytest.mark.parametrize("p", range(0, 7))
def test_W_band_count(rng, p):
    basis = basis_from_interior(random_interior(rng, 6), p + 1)
    W = assemble_W(basis, PenaltySpec(p + 1, 1))
    assert W.bandwidth == p
    assert W.nonzero_diagonals() == 2 * p + 1


def test_order_zero_gram_is_diag_h(rng):
    basis = basis_from_interior(random_interior(rng, 8), 0)
    pen = build_penalty(basis, PenaltySpec(0, 0))
    np.testing.assert_allclose(pen.S.to_dense(), np.diag(basis.h), rtol=1e-15)
    np.testing.assert_allclose(oracle_S(basis, PenaltySpec(0, 0)), np.diag(basis.h), rtol=1e-14)


@pytest.mark.parametrize("m1,m2", ORDERS)
def test_matches_quadrature_oracle(rng, m1, m2):
    spec = PenaltySpec(m1, m2)
    for _ in range(5):
        k = int(rng.integers(m1 + 2, 25))
        basis = basis_from_interior(random_interior(rng, k - m1 + 1), m1)
        pen = build_penalty(basis, spec)
        ref = oracle_S(basis, spec)
        np.testing.assert_array_equal(ref, ref.T)
        scale = np.abs(ref).max()
        assert np.abs(pen.S.to_dense() - ref).max() <= 1e-10 * scale
        assert np.abs((pen.D.T @ pen.D).toarray() - pen.S.to_dense()).max() <= 1e-10 * scale


@pytest.mark.parametrize("m1,m2", ORDERS)
def test_psd_band_and_rank(rng, m1, m2):
    k = m1 + 6
    basis = basis_from_interior(random_interior(rng, k - m1 + 1), m1)
    pen = build_penalty(basis, PenaltySpec(m1, m2))
    S = pen.S.to_dense()
    i, j = np.indices(S.shape)
    assert np.all(S[np.abs(i - j) > m1] == 0.0)
    assert pen.S.nonzero_diagonals() <= 2 * m1 + 1
    ev = np.linalg.eigvalsh(S)
    assert ev.min() >= -1e-10 * ev.max()
    assert int(np.sum(ev <= 1e-9 * ev.max())) == m2


@pytest.mark.parametrize("m2", [1, 2, 3])
def test_null_space(m2):
    basis = make_basis(12, 3, 0.0, 1.0)
    S = build_penalty(basis, m2=m2).S.to_dense()
    grid = np.linspace(0, 1, 500)
    X = design_matrix(basis, grid).toarray()
    for deg in range(m2):
        beta = np.linalg.lstsq(X, grid ** deg, rcond=None)[0]
        assert beta @ S @ beta <= 1e-10 * np.abs(S).max() * beta @ beta


def test_line_has_zero_curvature_penalty():
    basis = make_basis(9, 3, 0.0, 2.0)
    S = build_penalty(basis, m2=2).S.to_dense()
    # Greville abscissae reproduce a straight line exactly for cubic splines
    grev = np.convolve(basis.knots[1:-1], np.ones(3) / 3, mode="valid")
    beta = 0.5 + 3.0 * grev
    assert abs(beta @ S @ beta) <= 1e-10 * np.linalg.norm(S, 2) * beta @ beta


def test_known_integral():
    # f(x) = x^2 on [0, 1]: int f''^2 = 4, int f'^2 = 4/3, int f^2 = 1/5
    basis = make_basis(8, 3, 0.0, 1.0)
    grid = np.linspace(0, 1, 300)
    beta = np.linalg.lstsq(design_matrix(basis, grid).toarray(), grid ** 2, rcond=None)[0]
    for m2, value in [(0, 1 / 5), (1, 4 / 3), (2, 4.0), (3, 0.0)]:
        S = build_penalty(basis, m2=m2).S.to_dense()
        assert beta @ S @ beta == pytest.approx(value, abs=1e-10)


@pytest.mark.parametrize("m1,m2", [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (3, 0)])
def test_scaling(rng, m1, m2):
    inner = random_interior(rng, 9)
    S1 = build_penalty(basis_from_interior(inner, m1), m2=m2).S.to_dense()
    S2 = build_penalty(basis_from_interior(2 * inner, m1), m2=m2).S.to_dense()
    np.testing.assert_allclose(S2, 2.0 ** (1 - 2 * m2) * S1, rtol=0, atol=1e-10 * np.abs(S2).max())


def test_mismatched_orders():
    with pytest.raises(ValueError, match="does not match"):
        build_penalty(make_basis(8, 3, 0, 1), PenaltySpec(2, 1))
