"""Exact derivative penalties for B-spline bases.

For ``f(x) = sum_j beta_j B_j(x)`` of degree ``m1`` the penalty
``J = int_a^b f^(m2)(x)^2 dx`` equals ``beta' S beta``. On each inter-knot
interval the ``m2``-th derivative is a polynomial of degree ``p = m1 - m2``, so
it is fixed by its values at ``p + 1`` evenly spaced points, and the integral
of a product of two such polynomials is a quadratic form in those values. That
gives ``S = G' W G`` with ``G`` the derivative design matrix at the evaluation
points and ``W`` banded (bandwidth ``p``) and positive definite, so that
``W = R'R`` and ``D = R G`` is a banded square root, ``S = D'D``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import BSpline

from .banded import BandedMatrix, banded_cholesky
from .bspline import BSplineBasis, design_matrix

MAX_LOCAL_ORDER = 30
ILL_CONDITIONED_ORDER = 20


@dataclass(frozen=True)
class PenaltySpec:
    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 < 0 or self.m2 < 0:
            raise ValueError("orders must be non-negative")
        if self.m2 > self.m1:
            raise ValueError(
                f"penalty derivative order must satisfy m2 <= m1, got m2={self.m2} > m1={self.m1}"
            )

    @property
    def p(self) -> int:
        """Degree of the piecewise polynomial ``f^(m2)``."""
        return self.m1 - self.m2


@dataclass(frozen=True)
class LocalQuadrature:
    """Per-interval quadratic form on ``[-1, 1]`` for degree ``p`` polynomials.

    ``P[i, j] = node_i ** j`` at nodes ``-1 + 2 i / p`` maps monomial
    coefficients to nodal values, ``H[i, j] = int_{-1}^{1} x^(i+j) dx`` and
    ``Wtilde = P^-T H P^-1`` so that ``int g_a g_d = g_a' Wtilde g_d`` for
    nodal value vectors ``g_a``, ``g_d``.
    """

    P: np.ndarray
    H: np.ndarray
    Wtilde: np.ndarray

    @property
    def p(self) -> int:
        return self.P.shape[0] - 1


@dataclass(frozen=True)
class PenaltyFactor:
    """Penalty ``S`` (banded, ``k x k``) and its banded square root ``D`` with ``D'D = S``."""

    S: BandedMatrix
    D: sp.csr_matrix
    spec: PenaltySpec
    points: np.ndarray
    W: BandedMatrix

    @property
    def null_space_dim(self) -> int:
        return min(self.spec.m2, self.S.n)


def quadrature_points(basis: BSplineBasis, spec: PenaltySpec) -> np.ndarray:
    """Evaluation points for the penalty: interval midpoints when ``p == 0``,
    otherwise ``p + 1`` evenly spaced points per interval with shared end points
    kept once."""
    knots = basis.interior_knots
    h = np.diff(knots)
    p = spec.p
    if p == 0:
        return knots[:-1] + h / 2
    frac = np.arange(p) / p
    inner = (knots[:-1, None] + frac[None, :] * h[:, None]).ravel()
    # j = 0 reproduces each left knot exactly, so no tolerance-based dedup is needed
    return np.append(inner, knots[-1])


def local_quadrature(p: int) -> LocalQuadrature:
    """The ``(p + 1) x (p + 1)`` matrices ``P``, ``H`` and ``Wtilde`` for ``1 <= p <= 30``."""
    p = int(p)
    if p < 1:
        raise ValueError("local_quadrature needs p >= 1; p = 0 uses W = diag(h) directly")
    if p > MAX_LOCAL_ORDER:
        raise ValueError(f"p={p} exceeds {MAX_LOCAL_ORDER}: the nodal Vandermonde matrix breaks down")
    if p >= ILL_CONDITIONED_ORDER:
        warnings.warn(f"p={p}: the nodal Vandermonde matrix is ill conditioned", RuntimeWarning, stacklevel=2)
    return _local_quadrature(p)


@lru_cache(maxsize=None)
def _local_quadrature(p: int) -> LocalQuadrature:
    nodes = -1.0 + 2.0 * np.arange(p + 1) / p
    powers = np.arange(p + 1)
    P = nodes[:, None] ** powers[None, :]
    s = powers[:, None] + powers[None, :]
    H = (1.0 + (-1.0) ** s) / (s + 1.0)
    Pinv = np.linalg.inv(P)
    Wt = Pinv.T @ H @ Pinv
    Wt = 0.5 * (Wt + Wt.T)
    for arr in (P, H, Wt):
        arr.setflags(write=False)
    return LocalQuadrature(P, H, Wt)


def assemble_W(basis: BSplineBasis, spec: PenaltySpec) -> BandedMatrix:
    """Banded weight matrix: ``diag(h)`` for ``p == 0``, else overlapping
    ``h_q / 2 * Wtilde`` blocks summed where consecutive intervals share a point."""
    h = basis.h
    p = spec.p
    if p == 0:
        return BandedMatrix(h[None, :])
    Wt = local_quadrature(p).Wtilde
    nq = h.size
    npts = nq * p + 1
    data = np.zeros((p + 1, npts))
    # block q occupies rows/cols q*p .. q*p + p; written straight into band storage
    for u in range(p + 1):
        band = np.zeros(npts - u)
        for i in range(p + 1 - u):
            rows = np.arange(nq) * p + i
            np.add.at(band, rows, h * Wt[i, i + u] / 2)
        data[p - u, u:] = band
    return BandedMatrix(data)


def _band_of(M: sp.spmatrix, bandwidth: int) -> BandedMatrix:
    M = sp.dia_matrix(M)
    n = M.shape[0]
    data = np.zeros((bandwidth + 1, n))
    for off, row in zip(M.offsets, M.data):
        if 0 <= off <= bandwidth:
            data[bandwidth - off, off:] = row[off:n]
        elif off > bandwidth and np.any(row[off:n] != 0):
            raise AssertionError(f"penalty has a nonzero beyond bandwidth {bandwidth}")
    return BandedMatrix(data)


def build_penalty(basis: BSplineBasis, spec: PenaltySpec | None = None, m2: int | None = None) -> PenaltyFactor:
    """Banded penalty ``S`` and square root ``D`` for ``int_a^b f^(m2)(x)^2 dx``.

    Either pass a ``PenaltySpec`` or just ``m2`` (the degree is taken from the basis).
    """
    if spec is None:
        if m2 is None:
            raise TypeError("give either spec or m2")
        spec = PenaltySpec(basis.m1, m2)
    if spec.m1 != basis.m1:
        raise ValueError(f"penalty order m1={spec.m1} does not match basis order {basis.m1}")
    x = quadrature_points(basis, spec)
    G = design_matrix(basis, x, spec.m2)
    W = assemble_W(basis, spec)
    S = (G.T @ W.to_sparse() @ G).tocsr()
    S = 0.5 * (S + S.T)
    R = banded_cholesky(W)
    D = (R.to_sparse() @ G).tocsr()
    D.eliminate_zeros()
    return PenaltyFactor(S=_band_of(S, min(basis.m1, basis.k - 1)), D=D, spec=spec, points=x, W=W)


def oracle_S(basis: BSplineBasis, spec: PenaltySpec) -> np.ndarray:
    """Dense ``S`` by Gauss-Legendre quadrature of basis-derivative products.

    Independent of the banded construction: basis derivatives come from
    ``scipy.interpolate.BSpline`` and each interval uses ``p + 2`` nodes, exact
    for the degree ``2p`` integrand.
    """
    k, m1 = basis.k, basis.m1
    nodes, weights = np.polynomial.legendre.leggauss(spec.p + 2)
    knots = basis.interior_knots
    lo, hi = knots[:-1], knots[1:]
    x = ((hi - lo)[:, None] * (nodes[None, :] + 1) / 2 + lo[:, None]).ravel()
    w = ((hi - lo)[:, None] / 2 * weights[None, :]).ravel()
    spl = BSpline(basis.knots, np.eye(k), m1, extrapolate=False)
    if spec.m2:
        spl = spl.derivative(spec.m2)
    B = spl(x)
    S = B.T @ (w[:, None] * B)
    return 0.5 * (S + S.T)
