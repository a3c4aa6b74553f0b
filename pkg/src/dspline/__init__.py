"""B-spline smoothers with exact, banded derivative penalties.

Build a basis with :func:`make_basis`, its penalty with :func:`build_penalty`
(``S`` and the banded square root ``D``), combine margins with
:func:`tensor_smooth`, drop unsupported coefficients with :func:`reduce`, and
fit with :func:`fit_smooth`.
"""

__version__ = "0.1.0"

from .banded import (
    BandedMatrix,
    NotPositiveDefiniteError,
    SingularMatrixError,
    band_matvec,
    banded_cholesky,
    banded_solve,
)
from .bspline import (
    BSplineBasis,
    SparseRow,
    basis_from_interior,
    design_matrix,
    eval_basis,
    make_basis,
)
from .fitting import (
    DegenerateFitError,
    FitProblem,
    FitResult,
    IdentifiabilityError,
    SqrtPenalty,
    fit_smooth,
    gcv_score,
    pls_fit,
    predict,
    reml_score,
    select_lambda,
)
from .penalty import (
    LocalQuadrature,
    PenaltyFactor,
    PenaltySpec,
    assemble_W,
    build_penalty,
    local_quadrature,
    oracle_S,
    quadrature_points,
)
from .tensor import TensorSmooth, kron_sqrt, reduce, tensor_design, tensor_row, tensor_smooth
