"""B-spline bases, their derivatives and row-sparse design matrices.

Throughout, ``m1`` is the polynomial degree of the basis (``m1 = 3`` is a cubic
spline). A ``k`` dimensional basis uses ``k + m1 + 1`` strictly ascending knots
``t[0] < ... < t[k + m1]`` (0-based), basis function ``i`` is supported on
``[t[i], t[i + m1 + 1]]`` and the basis is evaluated on ``[a, b] = [t[m1], t[k]]``.
The ``k - m1 + 1`` knots in ``[a, b]`` are the interior knots.

Derivatives use the classical relation between a degree ``d`` basis function
and two degree ``d - 1`` ones,

    B'_{d,i}(x) = d * (B_{d-1,i}(x) / (t[i+d] - t[i]) - B_{d-1,i+1}(x) / (t[i+d+1] - t[i+1])),

applied ``m2`` times. The leading constant is the degree ``d`` (checked against
finite differences in the test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class BSplineBasis:
    """Knot vector plus degree; the function space spanned by ``k`` B-splines."""

    knots: np.ndarray
    m1: int

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        m1 = int(self.m1)
        if m1 < 0:
            raise ValueError(f"spline order m1 must be >= 0, got {m1}")
        if knots.ndim != 1 or knots.size < 2 * m1 + 2:
            raise ValueError(
                f"need at least {2 * m1 + 2} knots for order {m1}, got {knots.size}"
            )
        if not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly ascending (repeated knots are not supported)")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "m1", m1)

    @property
    def k(self) -> int:
        return self.knots.size - self.m1 - 1

    @property
    def a(self) -> float:
        return float(self.knots[self.m1])

    @property
    def b(self) -> float:
        return float(self.knots[self.k])

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.m1 : self.k + 1]

    @property
    def h(self) -> np.ndarray:
        """Inter-knot distances over ``[a, b]``."""
        return np.diff(self.interior_knots)

    def support(self, i: int) -> tuple[float, float]:
        return float(self.knots[i]), float(self.knots[i + self.m1 + 1])


@dataclass(frozen=True)
class SparseRow:
    """Nonzero window of one design-matrix row: columns ``start .. start + len(values) - 1``."""

    start: int
    values: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.values.size)

    def to_dense(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        out[self.start : self.start + self.values.size] = self.values
        return out


def basis_from_interior(interior, m1: int) -> BSplineBasis:
    """Basis whose interior knots are given; exterior knots continue the end spacings."""
    interior = np.asarray(interior, dtype=float)
    if interior.ndim != 1 or interior.size < 2:
        raise ValueError("need at least two interior knots")
    if np.any(np.diff(interior) <= 0):
        raise ValueError("interior knots must be strictly ascending")
    h_lo = interior[1] - interior[0]
    h_hi = interior[-1] - interior[-2]
    steps = np.arange(1, m1 + 1)
    left = interior[0] - h_lo * steps[::-1]
    right = interior[-1] + h_hi * steps
    return BSplineBasis(np.concatenate([left, interior, right]), m1)


def make_basis(k: int, m1: int, a: float, b: float, placement: str = "even", data=None) -> BSplineBasis:
    """Construct a ``k`` dimensional B-spline basis of degree ``m1`` over ``[a, b]``.

    Parameters
    ----------
    k : int
        Basis dimension, at least ``m1 + 1``.
    m1 : int
        Degree (3 for cubic).
    a, b : float
        Evaluation interval.
    placement : {"even", "quantile"}
        Evenly spaced interior knots, or knots at quantiles of ``data`` with the
        end knots pinned to ``a`` and ``b``.
    data : array_like, optional
        Covariate values for quantile placement.
    """
    k, m1 = int(k), int(m1)
    if m1 < 0:
        raise ValueError(f"m1 must be >= 0, got {m1}")
    if k < m1 + 1:
        raise ValueError(f"basis dimension k={k} too small for order m1={m1}; need k >= {m1 + 1}")
    a, b = float(a), float(b)
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    n_int = k - m1 + 1
    if placement == "even":
        interior = np.linspace(a, b, n_int)
    elif placement == "quantile":
        if data is None:
            raise ValueError("quantile placement needs data")
        data = np.asarray(data, dtype=float).ravel()
        data = data[(data >= a) & (data <= b)]
        if np.unique(data).size < n_int:
            raise ValueError(
                f"quantile placement needs at least {n_int} distinct data values in [a, b], "
                f"got {np.unique(data).size}"
            )
        interior = np.quantile(data, np.linspace(0.0, 1.0, n_int))
        interior[0], interior[-1] = a, b
        if np.any(np.diff(interior) <= 0):
            raise ValueError("quantile knots are not distinct; use fewer knots or even placement")
    else:
        raise ValueError(f"unknown knot placement {placement!r}")
    return basis_from_interior(interior, m1)


def interval_index(basis: BSplineBasis, x) -> np.ndarray:
    """Index ``l`` of the knot interval ``[t[l], t[l+1])`` holding each x; ``x == b`` maps to the last one."""
    x = np.asarray(x, dtype=float)
    t = basis.knots
    ell = np.searchsorted(t, x, side="right") - 1
    return np.clip(ell, basis.m1, basis.k - 1)


def _check_domain(basis: BSplineBasis, x: np.ndarray) -> None:
    bad = np.flatnonzero(~((x >= basis.a) & (x <= basis.b)))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"x[{i}] = {x[i]!r} lies outside the basis interval [{basis.a}, {basis.b}]"
        )


def _local_values(t: np.ndarray, ell: np.ndarray, x: np.ndarray, degree: int) -> np.ndarray:
    """Cox-de Boor values of the ``degree + 1`` functions ``ell - degree .. ell`` at x."""
    N = np.ones((x.size, 1))
    for d in range(1, degree + 1):
        i = ell[:, None] - d + np.arange(d + 1)
        left = np.zeros((x.size, d + 1))
        right = np.zeros((x.size, d + 1))
        left[:, 1:] = N
        right[:, :-1] = N
        xc = x[:, None]
        N = (xc - t[i]) / (t[i + d] - t[i]) * left + (t[i + d + 1] - xc) / (t[i + d + 1] - t[i + 1]) * right
    return N


def _raise_derivative(t: np.ndarray, ell: np.ndarray, V: np.ndarray, d: int) -> np.ndarray:
    """Map derivative values of degree ``d - 1`` functions to one more derivative of degree ``d`` ones."""
    i = ell[:, None] - d + np.arange(d + 1)
    left = np.zeros((ell.size, d + 1))
    right = np.zeros((ell.size, d + 1))
    left[:, 1:] = V
    right[:, :-1] = V
    return d * (left / (t[i + d] - t[i]) - right / (t[i + d + 1] - t[i + 1]))


def eval_local(basis: BSplineBasis, x, deriv: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized basis evaluation.

    Returns
    -------
    starts : numpy.ndarray of int, shape (n,)
        First column of each row's nonzero window.
    values : numpy.ndarray, shape (n, m1 + 1)
        ``deriv``-th derivative of basis functions ``starts[r] .. starts[r] + m1``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    deriv = int(deriv)
    if deriv < 0 or deriv > basis.m1:
        raise ValueError(f"derivative order {deriv} must lie in [0, m1={basis.m1}]")
    _check_domain(basis, x)
    ell = interval_index(basis, x)
    t = basis.knots
    p = basis.m1 - deriv
    V = _local_values(t, ell, x, p)
    for d in range(p + 1, basis.m1 + 1):
        V = _raise_derivative(t, ell, V, d)
    return ell - basis.m1, V


def eval_basis(basis: BSplineBasis, x: float, deriv: int = 0) -> SparseRow:
    """The ``deriv``-th derivative of every basis function whose support holds ``x``.

    At ``x == b`` the limit from the left is returned.
    """
    starts, values = eval_local(basis, [x], deriv)
    return SparseRow(int(starts[0]), values[0])


def design_matrix(basis: BSplineBasis, xs, deriv: int = 0) -> sp.csr_matrix:
    """Row-sparse ``len(xs) x k`` matrix whose row r is ``eval_basis(basis, xs[r], deriv)``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    starts, values = eval_local(basis, xs, deriv)
    w = basis.m1 + 1
    cols = starts[:, None] + np.arange(w)
    indptr = np.arange(0, xs.size * w + 1, w)
    return sp.csr_matrix((values.ravel(), cols.ravel(), indptr), shape=(xs.size, basis.k))


def support_window(basis: BSplineBasis, x) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive range ``lo .. hi`` of basis functions that are nonzero at each x.

    Exact, from the knots alone: inside its support a B-spline is strictly
    positive, so for degree >= 1 the only zeros in the evaluation window are
    the function whose support starts exactly at ``x`` and, at ``x == b``, the
    one whose support ends there.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_domain(basis, x)
    ell = interval_index(basis, x)
    lo = ell - basis.m1
    hi = ell.copy()
    if basis.m1 >= 1:
        hi = np.where(x == basis.knots[ell], ell - 1, ell)
        lo = np.where(x == basis.knots[ell + 1], lo + 1, lo)
    return lo, hi
