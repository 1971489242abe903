"""Damped inexact Newton solver for convex piecewise-quadratic minimization.

Applications: projecting a point onto the nonnegative solutions of an
underdetermined linear system (matrix-free, PCG inner solver with a
cost-based stopping rule) and computing the distance between convex
polyhedra (dense Cholesky inner solver).
"""

from .sparse_linalg import (
    LogisticSequence,
    MatrixMarketError,
    MatvecCounter,
    SparseMatrix,
    load_matrix_market,
    logistic_next,
    logistic_values,
    matvec,
    matvec_transpose,
    parse_matrix_market,
    row_sq_norms,
    serialize_matrix_market,
)
from .objective import (
    ActiveSet,
    ProjectionProblem,
    active_set,
    active_set_from_x,
    apply_hessian,
    eval_gradient,
    eval_phi,
    hessian_diag,
    is_locally_quadratic,
    positive_part,
)
from .pcg import (
    JacobiPreconditioner,
    LinearOperator,
    PcgError,
    PcgOutcome,
    direction_quality,
    solve_fused,
    solve_standard,
)
from .newton import (
    BacktrackStagnation,
    DirectionResult,
    NewtonReport,
    ProjectionOracle,
    SolverConfig,
    backtrack,
    minimize,
    solve_projection,
)
from .polydist import (
    DistanceReport,
    PenalizedProblem,
    PolyhedraOracle,
    PolyhedraPair,
    build_penalized,
    cholesky_solve,
    eval_poly_hessian,
    eval_poly_objective,
    generate_polyhedra,
    solve_distance,
)

__version__ = "0.1.0"
