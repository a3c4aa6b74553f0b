"""Command line front end.

Subcommands: ``basis`` (design matrix of a basis), ``penalty`` (S and D as
CSV), ``simulate`` (scattered test data) and ``fit`` (1-D or tensor smooth of
CSV data). Exit status is 0 on success, 2 for usage or validation errors and
3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bspline import basis_from_interior, design_matrix, make_basis
from .fitting import DegenerateFitError, FitProblem, SqrtPenalty, fit
from .penalty import PenaltySpec, build_penalty
from .simulate import NOISE_SD, simulate
from .tensor import reduce, retained_table, tensor_design, tensor_smooth

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows, header=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _matrix_csv(A) -> str:
    return _csv_text(np.asarray(A, dtype=float).tolist())


def _triplet_csv(A) -> str:
    A = np.asarray(A, dtype=float)
    i, j = np.nonzero(A)
    return _csv_text(zip(i.tolist(), j.tolist(), A[i, j].tolist()), header=["row", "col", "value"])


def _int_list(text: str, name: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated integers, got {text!r}") from None


def _float_list(text: str, name: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _per_dim(values: list, d: int, name: str) -> list:
    if len(values) == 1:
        return values * d
    if len(values) != d:
        raise UsageError(f"--{name} needs 1 or {d} values, got {len(values)}")
    return values


def _read_values_file(path) -> np.ndarray:
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise UsageError(f"{path}:{lineno}: not a number: {line!r}") from None
    return np.array(vals)


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Numeric CSV with a header row; errors name the offending line."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: empty file, a header row is required") from None
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise UsageError(
                    f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise UsageError(f"{path}:{reader.line_num}: non-numeric value in {row!r}") from None
    if not rows:
        raise UsageError(f"{path}: no data rows")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(data), axis=1))[0])
        raise UsageError(f"{path}: non-finite value in data row {bad + 1}")
    return header, data


# -- subcommands -------------------------------------------------------------

def _basis_from_args(args):
    if args.knots_file:
        interior = _read_values_file(args.knots_file)
        basis = basis_from_interior(interior, args.m1)
        if args.k is not None and args.k != basis.k:
            raise UsageError(
                f"--k {args.k} disagrees with {interior.size} interior knots "
                f"(k = knots + m1 - 1 = {basis.k})"
            )
        return basis
    if args.k is None:
        raise UsageError("--k is required unless --knots-file is given")
    return make_basis(args.k, args.m1, args.a, args.b)


def cmd_basis(args) -> int:
    basis = _basis_from_args(args)
    if args.points_file:
        xs = _read_values_file(args.points_file)
    else:
        xs = np.linspace(basis.a, basis.b, args.n_points)
    B = design_matrix(basis, xs, args.deriv).toarray()
    header = ["x"] + [f"B{j}" for j in range(basis.k)]
    _atomic_write(args.out, _csv_text(np.column_stack([xs, B]).tolist(), header=header))
    print(f"k: {basis.k}")
    print(f"knots: {' '.join(repr(float(t)) for t in basis.knots)}")
    return 0


def cmd_penalty(args) -> int:
    if args.m2 > args.m1:
        raise UsageError(f"invalid orders: penalty order must satisfy m2 <= m1 (got m1={args.m1}, m2={args.m2})")
    basis = _basis_from_args(args)
    pen = build_penalty(basis, PenaltySpec(args.m1, args.m2))
    S = pen.S.to_dense()
    D = pen.D.toarray()
    out = Path(args.out_dir)
    _atomic_write(out / "S.csv", _matrix_csv(S))
    _atomic_write(out / "D.csv", _matrix_csv(D))
    if args.triplets:
        _atomic_write(out / "S_triplets.csv", _triplet_csv(S))
        _atomic_write(out / "D_triplets.csv", _triplet_csv(D))
    print(f"k: {basis.k}")
    print(f"bands: {pen.S.nonzero_diagonals()}")
    print(f"null_space_dim: {pen.null_space_dim}")
    print(f"D_rows: {D.shape[0]}")
    return 0


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if args.sd < 0:
        raise UsageError("--sd must be >= 0")
    x, z, y = simulate(args.n, seed=args.seed, sd=args.sd)
    _atomic_write(args.out, _csv_text(np.column_stack([x, z, y]).tolist(), header=["x", "z", "y"]))
    return 0


def _parse_lambdas(text: str, n: int) -> list:
    if text == "auto":
        return ["auto"] * n
    vals = _float_list(text, "lambda")
    vals = _per_dim(vals, n, "lambda")
    if any(v < 0 for v in vals):
        raise UsageError("--lambda values must be >= 0")
    return vals


def cmd_fit(args) -> int:
    header, data = read_table(args.input)
    d = args.dims
    if d < 1:
        raise UsageError("--dims must be >= 1")
    if data.shape[1] < d + 1:
        raise UsageError(f"{args.input}: need {d} covariate columns and a response, found {data.shape[1]} columns")
    Z, y = data[:, :d], data[:, d]
    ks = _per_dim(_int_list(args.k, "k"), d, "k")
    m1s = _per_dim(_int_list(args.m1, "m1"), d, "m1")
    m2s = _per_dim(_int_list(args.m2, "m2"), d, "m2")
    for m1, m2 in zip(m1s, m2s):
        if m2 > m1:
            raise UsageError(f"invalid orders: penalty order must satisfy m2 <= m1 (got m1={m1}, m2={m2})")
    lower = _per_dim(_float_list(args.lower, "lower"), d, "lower") if args.lower else Z.min(axis=0).tolist()
    upper = _per_dim(_float_list(args.upper, "upper"), d, "upper") if args.upper else Z.max(axis=0).tolist()
    lambdas = _parse_lambdas(args.lam, d)

    t0 = time.perf_counter()
    bases = [make_basis(k, m1, a, b) for k, m1, a, b in zip(ks, m1s, lower, upper)]
    smooth = tensor_smooth(bases, m2=m2s)
    n_full = smooth.n_full
    if args.reduce == "on":
        smooth = reduce(smooth, Z)
    X = tensor_design(smooth, Z)
    pens = [SqrtPenalty(D) for D in smooth.penalty_sqrts]
    result = fit(FitProblem(X, y, pens, lambdas), criterion=args.criterion)
    elapsed = time.perf_counter() - t0

    out = Path(args.out)
    cols = header[: d + 1] + ["fitted"]
    _atomic_write(out / "fitted.csv", _csv_text(np.column_stack([Z, y, result.fitted]).tolist(), header=cols))
    if args.reduce == "on":
        table = retained_table(smooth)
        _atomic_write(
            out / "retained.csv",
            _csv_text(table.tolist(), header=["index"] + [f"i{j + 1}" for j in range(d)]),
        )
    summary = {
        "n": int(y.size),
        "dims": d,
        "k": ks,
        "m1": m1s,
        "m2": m2s,
        "domain": [[float(a), float(b)] for a, b in zip(lower, upper)],
        "reduce": args.reduce == "on",
        "coef_full": n_full,
        "coef_retained": smooth.n_coef,
        "criterion": args.criterion,
        "lambdas": [float(v) for v in result.lambdas],
        "edf": result.edf,
        "score": None if not np.isfinite(result.score) else result.score,
        "rss": result.rss,
        "fit_seconds": elapsed,
    }
    _atomic_write(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    print(f"coefficients: {smooth.n_coef} of {n_full}")
    print(f"edf: {result.edf:.4f}  {args.criterion}: {result.score:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dspline", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def basis_args(p, m2=False):
        p.add_argument("--k", type=int, help="basis dimension")
        p.add_argument("--m1", type=int, default=3, help="spline order, 3 = cubic (default 3)")
        if m2:
            p.add_argument("--m2", type=int, default=2, help="penalized derivative order (default 2)")
        p.add_argument("--a", type=float, default=0.0, help="interval start (default 0)")
        p.add_argument("--b", type=float, default=1.0, help="interval end (default 1)")
        p.add_argument("--knots-file", help="explicit interior knots, one ascending value per line")

    p = sub.add_parser("basis", help="evaluate a B-spline basis (or a derivative) to CSV")
    basis_args(p)
    p.add_argument("--deriv", type=int, default=0)
    p.add_argument("--points-file", help="evaluation points, one per line")
    p.add_argument("--n-points", type=int, default=101, help="grid size when no points file is given")
    p.add_argument("--out", default="basis.csv")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("penalty", help="write derivative penalty S and its square root D as CSV")
    basis_args(p, m2=True)
    p.add_argument("--out-dir", default=".", help="directory for S.csv and D.csv")
    p.add_argument("--triplets", action="store_true", help="also write (row, col, value) files")
    p.set_defaults(func=cmd_penalty)

    p = sub.add_parser("simulate", help="simulate scattered test data (columns x, z, y)")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sd", type=float, default=NOISE_SD, help=f"noise standard deviation (default {NOISE_SD})")
    p.add_argument("--out", default="sim.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a 1-D or tensor-product smooth to CSV data")
    p.add_argument("--input", required=True, help="CSV: covariate columns then response, header row")
    p.add_argument("--dims", type=int, default=1)
    p.add_argument("--k", default="10", help="basis dimension per margin, e.g. 25,25")
    p.add_argument("--m1", default="3")
    p.add_argument("--m2", default="2")
    p.add_argument("--lower", help="domain lower bounds per margin (default: data minimum)")
    p.add_argument("--upper", help="domain upper bounds per margin (default: data maximum)")
    p.add_argument("--reduce", choices=["on", "off"], default="off")
    p.add_argument("--lambda", dest="lam", default="auto", help="'auto' or one value per penalty")
    p.add_argument("--criterion", choices=["gcv", "reml"], default="gcv")
    p.add_argument("--out", default="fit_out", help="output directory")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    # LinAlgError subclasses ValueError, so it must be caught first
    except (DegenerateFitError, np.linalg.LinAlgError) as exc:
        print(f"dspline {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError) as exc:
        print(f"dspline {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"dspline {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
