"""Piecewise-quadratic projection objective and its matrix-free Hessian.

For a sparse A (m x n), right-hand side b and anchor point xhat, the dual
objective of projecting xhat onto {x >= 0 : A x = b} is

    phi(p) = 0.5 * ||(xhat + A.T p)_+||**2 - b.T p,

a convex, differentiable, piecewise-quadratic function of p. Its gradient
is g(p) = A (xhat + A.T p)_+ - b, and on each quadratic piece the second
derivative is A Diag(ind) A.T with ind the 0/1 activity indicator of
xhat + A.T p. The Newton systems use the regularized operator

    M = A Diag(ind) A.T + delta * Diag(AA.T),

applied matrix-free (two kernel calls per application).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse_linalg import MatvecCounter, SparseMatrix, matvec, matvec_transpose, row_sq_norms


class ProjectionProblem:
    """Problem data (A, b, xhat) with cached squared row norms."""

    __slots__ = ("A", "b", "xhat", "rowsq")

    def __init__(self, A: SparseMatrix, b, xhat):
        self.A = A
        self.b = np.ascontiguousarray(b, dtype=np.float64)
        self.xhat = np.ascontiguousarray(xhat, dtype=np.float64)
        if self.b.shape != (A.m,):
            raise ValueError(f"b must have length {A.m}")
        if self.xhat.shape != (A.n,):
            raise ValueError(f"xhat must have length {A.n}")
        self.rowsq = row_sq_norms(A)
        for arr in (self.b, self.xhat, self.rowsq):
            arr.flags.writeable = False

    @property
    def m(self) -> int:
        return self.A.m

    @property
    def n(self) -> int:
        return self.A.n


@dataclass(frozen=True)
class ActiveSet:
    """0/1 activity indicator of xhat + A.T p, and the p it was taken at.

    Entry j is 1 exactly when (xhat + A.T p)_j > 0; a component sitting
    exactly at zero counts as inactive.
    """

    indicator: np.ndarray
    p: np.ndarray


def positive_part(v) -> np.ndarray:
    """Componentwise max(0, v)."""
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def eval_phi(prob: ProjectionProblem, p, counter: MatvecCounter | None = None):
    """Objective value at p, plus x = (xhat + A.T p)_+ for reuse downstream."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (prob.m,):
        raise ValueError(f"p must have length {prob.m}")
    u = prob.xhat + matvec_transpose(prob.A, p, counter)
    x = positive_part(u)
    phi = 0.5 * float(x @ x) - float(prob.b @ p)
    if not np.isfinite(phi):
        raise FloatingPointError("objective overflow")
    return phi, x


def eval_gradient(prob: ProjectionProblem, x, counter: MatvecCounter | None = None) -> np.ndarray:
    """Gradient A x - b for an already-computed x = (xhat + A.T p)_+."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (prob.n,):
        raise ValueError(f"x must have length {prob.n}")
    return matvec(prob.A, x, counter) - prob.b


def active_set(prob: ProjectionProblem, p, counter: MatvecCounter | None = None) -> ActiveSet:
    """Activity indicator at p (ties at exactly zero give 0)."""
    p = np.asarray(p, dtype=np.float64)
    u = prob.xhat + matvec_transpose(prob.A, p, counter)
    return ActiveSet(indicator=(u > 0.0).astype(np.float64), p=p.copy())


def active_set_from_x(x, p) -> ActiveSet:
    """Indicator recovered from x = (xhat + A.T p)_+ at no kernel cost."""
    x = np.asarray(x, dtype=np.float64)
    return ActiveSet(indicator=(x > 0.0).astype(np.float64),
                     p=np.asarray(p, dtype=np.float64).copy())


def apply_hessian(prob: ProjectionProblem, act: ActiveSet, delta: float, v,
                  counter: MatvecCounter | None = None) -> np.ndarray:
    """Regularized Hessian product M v = A (ind * (A.T v)) + delta * rowsq * v.

    Consumes exactly two kernel calls. With delta > 0 the operator is
    positive definite wherever A has no null row.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (prob.m,):
        raise ValueError(f"v must have length {prob.m}")
    w = matvec_transpose(prob.A, v, counter)
    out = matvec(prob.A, act.indicator * w, counter)
    if delta > 0:
        out += delta * (prob.rowsq * v)
    return out


def hessian_diag(prob: ProjectionProblem, act: ActiveSet, delta: float) -> np.ndarray:
    """Diagonal of the regularized Hessian, in O(nz(A)) time.

    Entry i sums A[i,j]**2 over active columns j, plus delta * rowsq[i].
    Null rows with no active column yield exactly zero; the Jacobi
    preconditioner substitutes a unit diagonal there.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    ind = act.indicator.tolist()
    out = [0.0] * prob.m
    A = prob.A
    for i in range(A.m):
        s = 0.0
        vals = A._row_vals[i]
        cols = A._row_cols[i]
        for k in range(len(vals)):
            if ind[cols[k]]:
                s += vals[k] * vals[k]
        out[i] = s
    diag = np.array(out)
    if delta > 0:
        diag += delta * prob.rowsq
    return diag


def is_locally_quadratic(prob: ProjectionProblem, p, q,
                         counter: MatvecCounter | None = None) -> bool:
    """Sufficient test that phi is exactly quadratic on the segment p..p+q.

    True when every component of A.T q that opposes the sign of
    xhat + A.T p is no larger than it in magnitude, so no component of
    the argument crosses zero along the step. Diagnostic only; the solve
    path never calls this.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    y = prob.xhat + matvec_transpose(prob.A, p, counter)
    z = matvec_transpose(prob.A, q, counter)
    opposing = (z * y) < 0.0
    return bool(np.all(np.abs(z[opposing]) <= np.abs(y[opposing])))
