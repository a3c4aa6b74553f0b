"""Penalized least squares with several quadratic penalties and smoothing
parameter selection by GCV (default) or a Gaussian REML score.

The fit minimizes ``||y - X beta||^2 + sum_j lambda_j beta' S_j beta``. Linear
algebra is dense in the coefficient dimension, which is fine up to a couple of
thousand coefficients; the banded/sparse structure of ``X`` and ``S_j`` is only
exploited when forming ``X'X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .banded import BandedMatrix
from .bspline import BSplineBasis, design_matrix
from .penalty import PenaltySpec, build_penalty
from .tensor import TensorSmooth, tensor_design

LOG10_LAMBDA_RANGE = (-8.0, 8.0)
LOCAL_HALF_WIDTH = 1.0
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class IdentifiabilityError(np.linalg.LinAlgError):
    """Penalized normal equations are singular."""


class DegenerateFitError(ValueError):
    """The fit interpolates the data, so the GCV denominator vanishes."""


@dataclass(frozen=True)
class SqrtPenalty:
    """A penalty given by its square root: ``S = D'D``."""

    D: sp.spmatrix


def _penalty_dense(P, q: int) -> np.ndarray:
    if isinstance(P, SqrtPenalty):
        D = P.D
        S = (D.T @ D).toarray() if sp.issparse(D) else np.asarray(D).T @ np.asarray(D)
    elif isinstance(P, BandedMatrix):
        S = P.to_dense()
    elif sp.issparse(P):
        S = P.toarray()
    else:
        S = np.asarray(P, dtype=float)
    if S.shape != (q, q):
        raise ValueError(f"penalty has shape {S.shape}, expected {(q, q)}")
    return S


@dataclass
class FitProblem:
    """Design, response and penalties; ``lambdas`` entries are floats or ``"auto"``."""

    X: sp.spmatrix | np.ndarray
    y: np.ndarray
    penalties: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        X = self.X if sp.issparse(self.X) else np.atleast_2d(np.asarray(self.X, dtype=float))
        self.X = sp.csr_matrix(X) if sp.issparse(X) else X
        n, q = self.X.shape
        if n < 1:
            raise ValueError("need at least one observation")
        if self.y.size != n:
            raise ValueError(f"response has {self.y.size} values but design has {n} rows")
        if not self.lambdas:
            self.lambdas = ["auto"] * len(self.penalties)
        if len(self.lambdas) != len(self.penalties):
            raise ValueError("one smoothing parameter per penalty is required")
        for lam in self.lambdas:
            if lam != "auto" and not float(lam) >= 0:
                raise ValueError(f"smoothing parameters must be >= 0 or 'auto', got {lam!r}")
        self._S = [_penalty_dense(P, q) for P in self.penalties]
        XtX = self.X.T @ self.X
        self._XtX = XtX.toarray() if sp.issparse(XtX) else np.asarray(XtX)
        self._Xty = np.asarray(self.X.T @ self.y).ravel()
        # X'X = L L' so that tr((X'X + S)^-1 X'X) = ||R^-T L||_F^2 needs one triangular solve
        ev, V = np.linalg.eigh(self._XtX)
        self._XtX_root = V * np.sqrt(np.clip(ev, 0.0, None))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def q(self) -> int:
        return self.X.shape[1]

    @property
    def auto(self) -> list[int]:
        return [j for j, lam in enumerate(self.lambdas) if lam == "auto"]


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    fitted: np.ndarray
    lambdas: tuple[float, ...]
    edf: float
    score: float
    rss: float
    criterion: str = "gcv"


def _penalized_hessian(problem: FitProblem, lambdas) -> np.ndarray:
    M = problem._XtX.copy()
    for lam, S in zip(lambdas, problem._S):
        if lam:
            M += lam * S
    return M


def _factor(M: np.ndarray):
    try:
        c = la.cho_factor(M, lower=False, check_finite=False)
    except la.LinAlgError:
        c = None
    # cho_factor only fails on exactly non-positive pivots; treat numerically zero ones alike
    if c is None or np.min(np.abs(np.diag(c[0]))) ** 2 <= M.shape[0] * np.finfo(float).eps * np.max(np.abs(np.diag(M))):
        raise IdentifiabilityError(
            "penalized normal equations are singular: increase the smoothing "
            "parameters or reduce the basis"
        )
    return c


def _fixed_lambdas(problem: FitProblem, lambdas) -> list[float]:
    if lambdas is None:
        lambdas = problem.lambdas
    out = [float(lam) for lam in lambdas]
    if len(out) != len(problem.penalties):
        raise ValueError("one smoothing parameter per penalty is required")
    if any(lam < 0 for lam in out):
        raise ValueError("smoothing parameters must be non-negative")
    return out


def _solve(problem: FitProblem, lambdas):
    M = _penalized_hessian(problem, lambdas)
    c = _factor(M)
    beta = la.cho_solve(c, problem._Xty, check_finite=False)
    fitted = np.asarray(problem.X @ beta).ravel()
    resid = problem.y - fitted
    rss = float(resid @ resid)
    T = la.solve_triangular(c[0], problem._XtX_root, trans="T", lower=False, check_finite=False)
    edf = float(np.einsum("ij,ij->", T, T))
    return M, c, beta, fitted, rss, edf


def _gcv(n: int, rss: float, edf: float) -> float:
    if n - edf <= 1e-8 * n:
        raise DegenerateFitError(f"edf {edf:.6g} reaches the number of observations {n}; GCV undefined")
    return n * rss / (n - edf) ** 2


def _logdet_plus(S: np.ndarray, rank: int) -> float:
    ev = np.linalg.eigvalsh(S)[::-1][:rank]
    if rank and ev[-1] <= 0:
        return -np.inf
    return float(np.sum(np.log(ev)))


def _penalty_rank(problem: FitProblem) -> int:
    if not problem._S:
        return 0
    total = sum(S / max(np.abs(S).max(), 1e-300) for S in problem._S)
    ev = np.linalg.eigvalsh(total)
    return int(np.sum(ev > ev.max() * 1e-9)) if ev.size else 0


def _reml(problem: FitProblem, lambdas, M, c, beta, rss) -> float:
    """Negative Gaussian restricted log likelihood with the scale profiled out (up to a constant)."""
    rank = _penalty_rank(problem)
    n_eff = problem.n - (problem.q - rank)
    if n_eff <= 0:
        raise DegenerateFitError("more unpenalized coefficients than observations")
    Sl = sum(lam * S for lam, S in zip(lambdas, problem._S)) if problem._S else np.zeros_like(M)
    pen = rss + float(beta @ Sl @ beta)
    logdet_M = 2.0 * float(np.sum(np.log(np.abs(np.diag(c[0])))))
    return 0.5 * (n_eff * math.log(pen / n_eff) + logdet_M - _logdet_plus(Sl, rank))


def pls_fit(problem: FitProblem, lambdas=None, criterion: str = "gcv") -> FitResult:
    """Penalized least-squares fit at fixed smoothing parameters.

    The returned ``score`` is the selection criterion at these parameters, or
    ``nan`` if GCV is undefined (the fit interpolates).
    """
    lambdas = _fixed_lambdas(problem, lambdas)
    M, c, beta, fitted, rss, edf = _solve(problem, lambdas)
    try:
        if criterion == "gcv":
            score = _gcv(problem.n, rss, edf)
        elif criterion == "reml":
            score = _reml(problem, lambdas, M, c, beta, rss)
        else:
            raise ValueError(f"unknown criterion {criterion!r}")
    except DegenerateFitError:
        score = float("nan")
    return FitResult(beta, fitted, tuple(lambdas), edf, score, rss, criterion)


def gcv_score(problem: FitProblem, lambdas=None) -> float:
    """``n * rss / (n - tr(A))^2`` with influence matrix ``A = X (X'X + sum lambda_j S_j)^-1 X'``."""
    lambdas = _fixed_lambdas(problem, lambdas)
    _, _, _, _, rss, edf = _solve(problem, lambdas)
    return _gcv(problem.n, rss, edf)


def reml_score(problem: FitProblem, lambdas=None) -> float:
    lambdas = _fixed_lambdas(problem, lambdas)
    M, c, beta, _, rss, _ = _solve(problem, lambdas)
    return _reml(problem, lambdas, M, c, beta, rss)


def _golden_min(f, lo: float, hi: float, tol: float, ends: bool = True):
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    cands = [(f1, x1), (f2, x2)]
    if ends:
        # a monotone score should be able to reach the bracket limits
        cands += [(f(lo), lo), (f(hi), hi)]
    best = min(cands)
    return best[1], best[0]


def _scan_then_golden(f, lo: float, hi: float, tol: float):
    """Golden section inside the best cell of a one-decade scan.

    Scores can have several local minima in log-lambda; the scan picks the
    basin before golden section refines it.
    """
    grid = np.arange(lo, hi + 0.5)
    vals = [f(v) for v in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    v, s = _golden_min(f, a, b, tol, ends=False)
    if vals[i] <= s:
        return float(grid[i]), vals[i]
    return v, s


def select_lambda(
    problem: FitProblem,
    criterion: str = "gcv",
    tol: float = 1e-3,
    rel_tol: float = 1e-6,
    max_cycles: int = 50,
) -> FitResult:
    """Minimize the criterion over the ``"auto"`` smoothing parameters.

    Coordinate-wise golden-section search on ``log10(lambda)`` in ``[-8, 8]``,
    cycling over the free parameters until a full cycle improves the score by
    less than ``rel_tol`` (relative) or ``max_cycles`` is reached. The first
    cycle scans the whole range a decade at a time and refines the best
    cell; later cycles refine within one decade of
    the current value and fall back to the whole range when the optimum lands
    on the local bracket edge. Probe points where the fit fails score ``inf``.
    """
    if criterion not in ("gcv", "reml"):
        raise ValueError(f"unknown criterion {criterion!r}")
    free = problem.auto
    if not free:
        raise ValueError("no smoothing parameter is marked 'auto'")
    rho = np.array([0.0 if lam == "auto" else np.nan for lam in problem.lambdas])
    fixed = [None if lam == "auto" else float(lam) for lam in problem.lambdas]
    score_fn = gcv_score if criterion == "gcv" else reml_score
    cache: dict[tuple, float] = {}

    def lambdas_at(r):
        return [10.0 ** r[j] if fixed[j] is None else fixed[j] for j in range(len(fixed))]

    def score(r) -> float:
        key = tuple(np.round(r[free], 12))
        if key not in cache:
            try:
                cache[key] = score_fn(problem, lambdas_at(r))
            except (np.linalg.LinAlgError, DegenerateFitError, FloatingPointError):
                cache[key] = math.inf
        return cache[key]

    lo, hi = LOG10_LAMBDA_RANGE
    best = score(rho)
    for cycle in range(max_cycles):
        start = best
        for j in free:
            def along(v, j=j):
                r = rho.copy()
                r[j] = v
                return score(r)

            if cycle == 0:
                v, s = _scan_then_golden(along, lo, hi, tol)
            else:
                # refine locally; widen back to the full range if the optimum sits on the edge
                a, b = max(lo, rho[j] - LOCAL_HALF_WIDTH), min(hi, rho[j] + LOCAL_HALF_WIDTH)
                v, s = _golden_min(along, a, b, tol, ends=False)
                if min(v - a, b - v) < 2 * tol and (a > lo or b < hi):
                    v, s = _scan_then_golden(along, lo, hi, tol)
            if s < best:
                rho[j], best = v, s
        if not math.isfinite(best):
            raise IdentifiabilityError("every smoothing-parameter probe failed")
        if start - best <= rel_tol * abs(best):
            break
    return pls_fit(problem, lambdas_at(rho), criterion=criterion)


def fit(problem: FitProblem, criterion: str = "gcv") -> FitResult:
    """Select any ``"auto"`` smoothing parameters, otherwise fit at the given ones."""
    if problem.auto:
        return select_lambda(problem, criterion=criterion)
    return pls_fit(problem, criterion=criterion)


def design_for(smooth, points) -> sp.csr_matrix:
    if isinstance(smooth, TensorSmooth):
        return tensor_design(smooth, points)
    if isinstance(smooth, BSplineBasis):
        return design_matrix(smooth, np.asarray(points, dtype=float).ravel())
    raise TypeError(f"cannot build a design matrix for {type(smooth).__name__}")


def penalties_for(smooth, m2: int = 2) -> list:
    if isinstance(smooth, TensorSmooth):
        return [SqrtPenalty(D) for D in smooth.penalty_sqrts]
    if isinstance(smooth, BSplineBasis):
        return [build_penalty(smooth, PenaltySpec(smooth.m1, m2)).S]
    raise TypeError(f"cannot build penalties for {type(smooth).__name__}")


def fit_smooth(smooth, points, y, lambdas="auto", m2: int = 2, criterion: str = "gcv") -> FitResult:
    """Fit a 1-D basis or tensor smooth to ``(points, y)``.

    ``m2`` is only used for a plain 1-D basis; tensor smooths carry their own
    penalties.
    """
    X = design_for(smooth, points)
    pens = penalties_for(smooth, m2)
    if isinstance(lambdas, str) or np.ndim(lambdas) == 0:
        lambdas = [lambdas] * len(pens)
    return fit(FitProblem(X, y, pens, list(lambdas)), criterion=criterion)


def predict(result: FitResult, smooth, points) -> np.ndarray:
    """Evaluate the fitted smooth at new points; out-of-domain points raise."""
    X = design_for(smooth, points)
    if X.shape[1] != result.beta.size:
        raise ValueError("smooth does not match the fitted coefficient vector")
    return np.asarray(X @ result.beta).ravel()
