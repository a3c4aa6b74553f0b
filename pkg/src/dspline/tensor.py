"""Tensor-product smooths built from B-spline marginals, with basis reduction.

Coefficients are linearized with the LAST marginal index varying fastest, so
the square-root penalty for margin ``j`` is

    Dt_j = I_{k_1} x ... x D_j x ... x I_{k_d}      (Kronecker products)

Basis reduction removes coefficients whose tensor basis function vanishes at
every observation. Rather than zeroing those coefficients inside the penalty,
every row of each ``Dt_j`` that touches a removed coefficient is deleted, so
the penalty only loses the components that depend on removed coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import reduce as _fold

import numpy as np
import scipy.sparse as sp

from .bspline import BSplineBasis, eval_local, support_window
from .penalty import PenaltyFactor, PenaltySpec, build_penalty


@dataclass(frozen=True)
class TensorSmooth:
    bases: tuple[BSplineBasis, ...]
    penalties: tuple[PenaltyFactor, ...]
    retained: np.ndarray
    penalty_sqrts: tuple[sp.csr_matrix, ...]
    _lookup: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        lookup = np.full(self.n_full, -1, dtype=np.int64)
        lookup[self.retained] = np.arange(self.retained.size)
        object.__setattr__(self, "_lookup", lookup)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.k for b in self.bases)

    @property
    def d(self) -> int:
        return len(self.bases)

    @property
    def n_full(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_coef(self) -> int:
        return int(self.retained.size)

    @property
    def is_reduced(self) -> bool:
        return self.n_coef < self.n_full

    def multi_index(self, flat) -> np.ndarray:
        """``(n, d)`` marginal indices of full linear coefficient indices."""
        return np.column_stack(np.unravel_index(np.asarray(flat), self.dims))

    def penalty_matrices(self) -> list[sp.csr_matrix]:
        """``S_j = Dt_j' Dt_j`` over the retained coefficients."""
        return [(D.T @ D).tocsr() for D in self.penalty_sqrts]


def kron_sqrt(sqrts, j: int) -> sp.csr_matrix:
    """``I x ... x D_j x ... x I`` for margin j (last index fastest).

    ``sqrts`` holds the marginal square roots ``D_i``; identity sizes are their
    column counts.
    """
    factors = [
        sp.csr_matrix(D) if i == j else sp.identity(D.shape[1], format="csr")
        for i, D in enumerate(sqrts)
    ]
    return _fold(lambda A, B: sp.kron(A, B, format="csr"), factors)


def tensor_smooth(bases, m2=2, penalties=None) -> TensorSmooth:
    """Unreduced tensor smooth of the given marginal bases.

    Parameters
    ----------
    bases : sequence of BSplineBasis
    m2 : int or sequence of int
        Penalty derivative order per margin (ignored when ``penalties`` given).
    penalties : sequence of PenaltyFactor, optional
        Prebuilt marginal penalties.
    """
    bases = tuple(bases)
    if not bases:
        raise ValueError("need at least one marginal basis")
    if penalties is None:
        m2s = [m2] * len(bases) if np.ndim(m2) == 0 else list(m2)
        if len(m2s) != len(bases):
            raise ValueError("one penalty order per margin is required")
        penalties = [build_penalty(b, PenaltySpec(b.m1, int(q))) for b, q in zip(bases, m2s)]
    penalties = tuple(penalties)
    sqrts = tuple(kron_sqrt([pen.D for pen in penalties], j) for j in range(len(bases)))
    n_full = int(np.prod([b.k for b in bases]))
    return TensorSmooth(bases, penalties, np.arange(n_full), sqrts)


def _check_points(smooth: TensorSmooth, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[None, :] if smooth.d > 1 or z.size == 1 else z[:, None]
    if z.ndim != 2 or z.shape[1] != smooth.d:
        raise ValueError(f"points must have {smooth.d} coordinates")
    for j, basis in enumerate(smooth.bases):
        col = z[:, j]
        bad = np.flatnonzero(~((col >= basis.a) & (col <= basis.b)))
        if bad.size:
            raise ValueError(
                f"dimension {j}: coordinate {col[bad[0]]!r} of point {int(bad[0])} "
                f"outside [{basis.a}, {basis.b}]"
            )
    return z


def _full_rows(smooth: TensorSmooth, z: np.ndarray, derivs=None):
    """Flat full indices and values of every tensor row, shape (n, prod(m1_j + 1))."""
    derivs = derivs or [0] * smooth.d
    n = z.shape[0]
    idx = np.zeros((n, 1), dtype=np.int64)
    val = np.ones((n, 1))
    for j, basis in enumerate(smooth.bases):
        starts, v = eval_local(basis, z[:, j], derivs[j])
        cols = starts[:, None] + np.arange(basis.m1 + 1)
        idx = (idx[:, :, None] * basis.k + cols[:, None, :]).reshape(n, -1)
        val = (val[:, :, None] * v[:, None, :]).reshape(n, -1)
    return idx, val


def tensor_design(smooth: TensorSmooth, z, derivs=None) -> sp.csr_matrix:
    """Row-sparse design matrix over the retained coefficients."""
    z = _check_points(smooth, z)
    idx, val = _full_rows(smooth, z, derivs)
    pos = smooth._lookup[idx]
    keep = pos >= 0
    rows = np.broadcast_to(np.arange(z.shape[0])[:, None], idx.shape)
    X = sp.csr_matrix(
        (val[keep], (rows[keep], pos[keep])), shape=(z.shape[0], smooth.n_coef)
    )
    return X


def tensor_row(smooth: TensorSmooth, z, derivs=None) -> tuple[np.ndarray, np.ndarray]:
    """Retained-coefficient positions and values of the tensor basis at one point."""
    z = _check_points(smooth, np.asarray(z, dtype=float).reshape(1, -1))
    idx, val = _full_rows(smooth, z, derivs)
    pos = smooth._lookup[idx[0]]
    keep = pos >= 0
    order = np.argsort(pos[keep])
    return pos[keep][order], val[0][keep][order]


def support_mask(smooth: TensorSmooth, z) -> np.ndarray:
    """Boolean array over the full coefficient grid: True where some point hits the support."""
    z = _check_points(smooth, z)
    mask = np.zeros(smooth.dims, dtype=bool)
    windows = [support_window(b, z[:, j]) for j, b in enumerate(smooth.bases)]
    widths = [b.m1 + 1 for b in smooth.bases]
    for offset in np.ndindex(*widths):
        ok = np.ones(z.shape[0], dtype=bool)
        index = []
        for (lo, hi), o in zip(windows, offset):
            i = lo + o
            ok &= i <= hi
            index.append(i)
        mask[tuple(i[ok] for i in index)] = True
    return mask


def reduce(smooth: TensorSmooth, data) -> TensorSmooth:
    """Drop coefficients whose basis function is zero at every data point.

    Every penalty row with a nonzero in a dropped column is removed; the
    remaining rows are restricted to the retained columns.
    """
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise ValueError("reduction needs at least one data point")
    mask = support_mask(smooth, data).ravel()
    keep = np.flatnonzero(mask[smooth.retained])
    if keep.size == 0:
        raise ValueError("no coefficients retained: no data inside the smooth's domain")
    dropped = np.ones(smooth.n_coef, dtype=bool)
    dropped[keep] = False
    sqrts = []
    for D in smooth.penalty_sqrts:
        touches = (abs(D) @ dropped.astype(float)) > 0
        sqrts.append(D[~touches][:, keep].tocsr())
    return replace(smooth, retained=smooth.retained[keep], penalty_sqrts=tuple(sqrts))


def dense_kron_sqrt(sqrts, j: int) -> np.ndarray:
    """Dense Kronecker square root, for validating ``kron_sqrt`` on small cases."""
    mats = [
        (D.toarray() if sp.issparse(D) else np.asarray(D, dtype=float)) if i == j else np.eye(D.shape[1])
        for i, D in enumerate(sqrts)
    ]
    return _fold(np.kron, mats)


def retained_table(smooth: TensorSmooth) -> np.ndarray:
    """``(n_coef, 1 + d)`` integer table: flat index then marginal indices."""
    return np.column_stack([smooth.retained, smooth.multi_index(smooth.retained)])
