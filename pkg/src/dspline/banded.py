"""Banded symmetric / upper-triangular matrices and their Cholesky factors.

Storage layout
--------------
Only the main diagonal and the ``bandwidth`` super-diagonals are stored, in a
``(bandwidth + 1, n)`` array using the LAPACK "upper" convention::

    data[bandwidth + i - j, j] = A[i, j]      for max(0, j - bandwidth) <= i <= j

so row ``bandwidth`` of ``data`` is the main diagonal, row ``bandwidth - 1`` the
first super-diagonal (its first entry is padding), and so on. A symmetric matrix
is recovered by mirroring the upper triangle; an upper-triangular matrix (the
Cholesky factor) uses the same layout with ``symmetric=False``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not safely positive."""

    def __init__(self, row: int, pivot: float):
        self.row = row
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite: pivot {pivot:.3e} at row {row}"
        )


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class BandedMatrix:
    """Square banded matrix in packed upper-band storage.

    Parameters
    ----------
    data : numpy.ndarray, shape (bandwidth + 1, n)
        Packed diagonals, see the module docstring for the layout.
    symmetric : bool
        If True the matrix is symmetric and the lower triangle mirrors the
        stored upper bands. If False the matrix is upper triangular.
    """

    data: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("band data must be a 2-D array with at least one row")
        n = data.shape[1]
        b = data.shape[0] - 1
        if n > 0 and b >= n:
            raise ValueError(f"bandwidth {b} must be smaller than dimension {n}")
        # zero the padding in the top-left corner so it can never leak
        for u in range(b):
            data[u, : b - u] = 0.0
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.data.shape[0] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def diagonal(self, offset: int = 0) -> np.ndarray:
        """Super-diagonal ``offset`` (0 is the main diagonal)."""
        b = self.bandwidth
        if offset < 0:
            if not self.symmetric:
                return np.zeros(self.n + offset)
            offset = -offset
        if offset > b:
            return np.zeros(max(self.n - offset, 0))
        return self.data[b - offset, offset:].copy()

    def nonzero_diagonals(self) -> int:
        """Count of diagonals (upper, lower and main) holding any nonzero."""
        count = 0
        for u in range(self.bandwidth + 1):
            if np.any(self.diagonal(u) != 0.0):
                count += 1 if (u == 0 or not self.symmetric) else 2
        return count

    @classmethod
    def from_dense(cls, A, bandwidth: int | None = None, symmetric: bool = True):
        """Pack the upper bands of a dense square matrix.

        Entries outside the band (or below the diagonal) are discarded without
        checking; pass ``bandwidth=None`` to use the smallest band that holds
        every nonzero of the upper triangle.
        """
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("expected a square matrix")
        n = A.shape[0]
        if bandwidth is None:
            i, j = np.nonzero(np.triu(A))
            bandwidth = int(np.max(j - i)) if i.size else 0
        data = np.zeros((bandwidth + 1, n))
        for u in range(bandwidth + 1):
            data[bandwidth - u, u:] = np.diagonal(A, u)
        return cls(data, symmetric=symmetric)

    @classmethod
    def from_diagonals(cls, diagonals, symmetric: bool = True):
        """Build from a list ``[main, super1, super2, ...]`` of diagonals."""
        diagonals = [np.asarray(d, dtype=float) for d in diagonals]
        n = diagonals[0].size
        b = len(diagonals) - 1
        data = np.zeros((b + 1, n))
        for u, d in enumerate(diagonals):
            if d.size != n - u:
                raise ValueError(f"diagonal {u} has length {d.size}, expected {n - u}")
            data[b - u, u:] = d
        return cls(data, symmetric=symmetric)

    def to_dense(self) -> np.ndarray:
        n, b = self.n, self.bandwidth
        A = np.zeros((n, n))
        for u in range(b + 1):
            d = self.data[b - u, u:]
            A[np.arange(n - u), np.arange(u, n)] = d
            if self.symmetric and u > 0:
                A[np.arange(u, n), np.arange(n - u)] = d
        return A

    def to_sparse(self) -> sp.csr_matrix:
        n, b = self.n, self.bandwidth
        diags, offsets = [], []
        for u in range(b + 1):
            diags.append(self.data[b - u, u:])
            offsets.append(u)
            if self.symmetric and u > 0:
                diags.append(self.data[b - u, u:])
                offsets.append(-u)
        return sp.diags(diags, offsets, shape=(n, n), format="csr")

    def to_csv(self, path) -> None:
        np.savetxt(Path(path), self.to_dense(), delimiter=",", fmt="%.17g")

    @classmethod
    def read_csv(cls, path, symmetric: bool = True):
        A = np.loadtxt(Path(path), delimiter=",", ndmin=2)
        return cls.from_dense(A, symmetric=symmetric)


def band_matvec(A: BandedMatrix, x) -> np.ndarray:
    """Product ``A @ x`` computed band by band.

    ``x`` may be a vector or a 2-D array whose rows index the matrix columns.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.n:
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has {x.shape[0]}")
    n, b = A.n, A.bandwidth
    out = np.zeros_like(x)
    col = (slice(None),) + (None,) * (x.ndim - 1)
    for u in range(b + 1):
        d = A.data[b - u, u:][col]
        out[: n - u] += d * x[u:]
        if A.symmetric and u > 0:
            out[u:] += d * x[: n - u]
    return out


def banded_cholesky(A: BandedMatrix, method: str = "banded") -> BandedMatrix:
    """Upper-triangular banded ``R`` with ``R.T @ R == A``.

    The factor is built one row at a time, left to right::

        R[i, i] = sqrt(A[i, i] - sum_k R[k, i]**2)
        R[i, j] = (A[i, j] - sum_k R[k, i] * R[k, j]) / R[i, i],   i < j <= i + b

    with ``k`` running over the ``b`` rows above ``i``. ``R`` keeps the
    bandwidth ``b`` of ``A``.

    Parameters
    ----------
    A : BandedMatrix
        Symmetric positive definite.
    method : {"banded", "dense"}
        ``"dense"`` factors the densified matrix with numpy; meant for small
        test problems only.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot falls to ``n * eps * max|A_ii|`` or below.
    """
    if not A.symmetric:
        raise ValueError("Cholesky factorization needs a symmetric matrix")
    n, b = A.n, A.bandwidth
    diag = A.diagonal(0)
    tol = n * np.finfo(float).eps * (np.max(np.abs(diag)) if n else 0.0)

    if method == "dense":
        dense = A.to_dense()
        try:
            L = np.linalg.cholesky(dense)
        except np.linalg.LinAlgError:
            L = None
        if L is None or np.any(np.diag(L) ** 2 <= tol):
            # rerun the banded recursion to name the failing row
            return banded_cholesky(A, method="banded")
        return BandedMatrix.from_dense(L.T, bandwidth=b, symmetric=False)
    if method != "banded":
        raise ValueError(f"unknown method {method!r}")

    # rows[i, c] holds R[i, i + c]
    rows = np.zeros((n, b + 1))
    for i in range(n):
        k = np.arange(max(0, i - b), i)
        up = rows[k, i - k]  # R[k, i] for the rows above
        pivot = diag[i] - np.dot(up, up)
        if not pivot > tol:
            raise NotPositiveDefiniteError(i, pivot)
        rii = np.sqrt(pivot)
        rows[i, 0] = rii
        for c in range(1, min(b, n - 1 - i) + 1):
            j = i + c
            kk = k[k >= j - b]
            s = np.dot(rows[kk, i - kk], rows[kk, j - kk]) if kk.size else 0.0
            rows[i, c] = (A.data[b - c, j] - s) / rii

    data = np.zeros((b + 1, n))
    for c in range(b + 1):
        data[b - c, c:] = rows[: n - c, c]
    return BandedMatrix(data, symmetric=False)


def banded_solve(R: BandedMatrix, y) -> np.ndarray:
    """Solve ``R.T @ R @ x = y`` given the upper banded Cholesky factor ``R``.

    ``y`` may be a vector or a 2-D array of right-hand sides (one per column).
    """
    if R.symmetric:
        raise ValueError("banded_solve expects a triangular factor from banded_cholesky")
    y = np.asarray(y, dtype=float)
    n, b = R.n, R.bandwidth
    if y.shape[0] != n:
        raise ValueError(f"dimension mismatch: factor is {n}x{n}, right-hand side has {y.shape[0]}")
    d = R.diagonal(0)
    if np.any(d == 0.0):
        raise SingularMatrixError(f"zero diagonal in factor at row {int(np.flatnonzero(d == 0.0)[0])}")

    # R[i, j] for j in (i, i+b] lives at data[b - (j - i), j]
    z = np.array(y, dtype=float, copy=True)
    for i in range(n):  # R.T z = y, forward
        lo = max(0, i - b)
        k = np.arange(lo, i)
        if k.size:
            z[i] -= np.tensordot(R.data[b - (i - k), i], z[k], axes=(0, 0))
        z[i] /= d[i]
    x = z
    for i in range(n - 1, -1, -1):  # R x = z, backward
        j = np.arange(i + 1, min(n, i + b + 1))
        if j.size:
            x[i] -= np.tensordot(R.data[b - (j - i), j], x[j], axes=(0, 0))
        x[i] /= d[i]
    return x


def triangular_matmul(R: BandedMatrix, M) -> sp.csr_matrix:
    """Sparse product ``R @ M`` for an upper-triangular banded ``R``."""
    return (R.to_sparse() @ sp.csr_matrix(M)).tocsr()
