import numpy as np
import pytest
from scipy.interpolate import BSpline

from conftest import random_interior
from dspline.bspline import (
    BSplineBasis,
    basis_from_interior,
    design_matrix,
    eval_basis,
    make_basis,
    support_window,
)


def test_make_basis_minimal_cubic():
    basis = make_basis(4, 3, 0.0, 1.0)
    np.testing.assert_array_equal(basis.interior_knots, [0.0, 1.0])
    assert basis.knots.size == 8
    assert (basis.a, basis.b, basis.k) == (0.0, 1.0, 4)


def test_make_basis_even_spacing():
    basis = make_basis(10, 3, 0.0, 1.0)
    np.testing.assert_allclose(basis.interior_knots, np.arange(8) / 7, rtol=0, atol=1e-15)
    # exterior knots continue the end spacing
    np.testing.assert_allclose(basis.knots[:3], -np.arange(3, 0, -1) / 7, atol=1e-15)
    np.testing.assert_allclose(basis.knots[-3:], 1 + np.arange(1, 4) / 7, atol=1e-15)


def test_make_basis_order_zero():
    basis = make_basis(5, 0, 0.0, 1.0)
    assert basis.knots.size == 6
    np.testing.assert_array_equal(basis.knots, basis.interior_knots)


@pytest.mark.parametrize(
    "args,msg",
    [((3, 3, 0, 1), "too small"), ((5, 3, 1, 1), "a < b"), ((5, 3, 2, 1), "a < b")],
)
def test_make_basis_errors(args, msg):
    with pytest.raises(ValueError, match=msg):
        make_basis(*args)


def test_quantile_placement(rng):
    data = rng.beta(2, 5, 500)
    basis = make_basis(12, 3, 0.0, 1.0, placement="quantile", data=data)
    inner = basis.interior_knots
    assert inner.size == 10 and inner[0] == 0.0 and inner[-1] == 1.0
    np.testing.assert_allclose(inner[1:-1], np.quantile(data, np.linspace(0, 1, 10))[1:-1])
    with pytest.raises(ValueError, match="distinct"):
        make_basis(12, 3, 0.0, 1.0, placement="quantile", data=[0.1, 0.2, 0.2, 0.5])


def test_repeated_knots_rejected():
    with pytest.raises(ValueError, match="strictly ascending"):
        BSplineBasis(np.array([0, 1, 2, 2, 3, 4, 5, 6.0]), 3)


def test_indicator_basis():
    basis = make_basis(5, 0, 0.0, 1.0)
    row = eval_basis(basis, 0.5)
    assert row.start == 2
    np.testing.assert_array_equal(row.values, [1.0])
    mids = (np.arange(5) + 0.5) / 5
    np.testing.assert_array_equal(design_matrix(basis, mids).toarray(), np.eye(5))


def test_cubic_at_knot():
    # uniform cubic B-splines at a knot: 1/6, 2/3, 1/6 (and a zero for the function starting there)
    basis = make_basis(10, 3, 0.0, 7.0)
    row = eval_basis(basis, 3.0)
    np.testing.assert_allclose(row.values, [1 / 6, 2 / 3, 1 / 6, 0.0], rtol=1e-14, atol=1e-16)
    assert row.start == 3


def test_right_endpoint_uses_last_interval():
    for m1 in range(4):
        basis = make_basis(m1 + 3, m1, 0.0, 1.0)
        X = design_matrix(basis, [1.0]).toarray()
        assert X.sum() == pytest.approx(1.0, abs=1e-14)
        assert X[0, -1] == (1.0 if m1 == 0 else X[0, -1])
        assert np.any(X != 0)


def test_domain_and_order_errors():
    basis = make_basis(6, 3, 0.0, 1.0)
    with pytest.raises(ValueError, match="outside"):
        eval_basis(basis, 1.01)
    with pytest.raises(ValueError, match="derivative order"):
        eval_basis(basis, 0.5, deriv=4)
    with pytest.raises(ValueError, match=r"x\[2\]"):
        design_matrix(basis, [0.1, 0.2, -0.5])


@pytest.mark.parametrize("m1", range(6))
def test_partition_of_unity(rng, m1):
    basis = basis_from_interior(random_interior(rng, 9), m1)
    x = rng.uniform(basis.a, basis.b, 1000)
    X = design_matrix(basis, np.append(x, [basis.a, basis.b]))
    np.testing.assert_allclose(np.asarray(X.sum(axis=1)).ravel(), 1.0, rtol=0, atol=1e-12)
    assert X.getnnz(axis=1).max() <= m1 + 1


@pytest.mark.parametrize("m1", range(6))
def test_matches_scipy(rng, m1):
    basis = basis_from_interior(random_interior(rng, 7), m1)
    x = rng.uniform(basis.a, basis.b, 200)
    for deriv in range(m1 + 1):
        ref = BSpline(basis.knots, np.eye(basis.k), m1)
        ref = ref.derivative(deriv) if deriv else ref
        np.testing.assert_allclose(
            design_matrix(basis, x, deriv).toarray(), ref(x), rtol=1e-10, atol=1e-10
        )


@pytest.mark.parametrize("m1", range(6))
def test_compact_support(rng, m1):
    basis = basis_from_interior(random_interior(rng, 8), m1)
    x = rng.uniform(basis.a, basis.b, 300)
    X = design_matrix(basis, x).toarray()
    for i in range(basis.k):
        lo, hi = basis.support(i)
        outside = (x < lo) | (x > hi)
        assert np.all(X[outside, i] == 0.0)


@pytest.mark.parametrize("m1", [2, 3, 4, 5])
@pytest.mark.parametrize("m2", [1, 2])
def test_derivative_matches_finite_differences(rng, m1, m2):
    if m2 > m1:
        pytest.skip("derivative order above degree")
    basis = basis_from_interior(random_interior(rng, 8), m1)
    # keep clear of knots so the stencil stays inside one polynomial piece
    x = []
    knots = basis.interior_knots
    for lo, hi in zip(knots[:-1], knots[1:]):
        x.extend(rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), 5))
    x = np.array(x)
    step = 1e-6
    fd = (design_matrix(basis, x + step, m2 - 1) - design_matrix(basis, x - step, m2 - 1)).toarray() / (2 * step)
    exact = design_matrix(basis, x, m2).toarray()
    scale = np.abs(exact).max()
    assert np.abs(fd - exact).max() <= 1e-5 * scale


@pytest.mark.parametrize("m1", range(6))
def test_polynomial_reproduction(rng, m1):
    basis = basis_from_interior(random_interior(rng, 6), m1)
    grid = np.linspace(basis.a, basis.b, 400)
    X = design_matrix(basis, grid).toarray()
    u = (grid - basis.a) / (basis.b - basis.a)
    for deg in range(m1 + 1):
        target = u ** deg
        beta = np.linalg.lstsq(X, target, rcond=None)[0]
        assert np.abs(X @ beta - target).max() <= 1e-10


def test_support_window_is_exact(rng):
    for m1 in range(5):
        basis = basis_from_interior(random_interior(rng, 7), m1)
        x = np.concatenate([rng.uniform(basis.a, basis.b, 200), basis.interior_knots])
        lo, hi = support_window(basis, x)
        X = design_matrix(basis, x).toarray()
        for r in range(x.size):
            nz = np.flatnonzero(X[r])
            assert nz.min() == lo[r] and nz.max() == hi[r]
            assert np.all(X[r, lo[r] : hi[r] + 1] > 0)
