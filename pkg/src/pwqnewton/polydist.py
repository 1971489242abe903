"""Distance between two convex polyhedra in face representation.

Each polyhedron is {x : Ak.T x <= bk} with Ak an s x nk matrix of face
normals. The squared distance problem

    min 0.5 * ||x1 - x2||**2   over  x1 in X1, x2 in X2

is replaced by an unconstrained penalized surrogate in x = [x1; x2]:

    min  (eps/2)||x||**2 + 0.5 x.T B x + 1/(2 eps) ||(A.T x - b)_+||**2,

with A the block-diagonal of A1, A2, b the stacked right-hand sides and
B the difference form with 0.5 x.T B x = 0.5 ||x1 - x2||**2. The
surrogate is convex piecewise quadratic, so the shared damped Newton
driver applies; because the iterate lives in R^{2s} (R^6 for 3-d
polyhedra), directions come from an explicit dense Hessian and its
Cholesky factorization rather than from inner CG iterations, and each
iteration costs O(s^2 n) in the total face count n.

The quasirandom generator reproduces the deterministic test family:
face normals drawn from the chaotic scalar sequence at stride-20
indices, columns normalized to unit length, and the two bodies centered
at +e and -e (e the all-ones point) by folding the shifts into the
right-hand sides.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .newton import DirectionResult, LineEvaluation, NewtonReport, SolverConfig, minimize
from .sparse_linalg import logistic_values


@dataclass
class PolyhedraPair:
    """Face-form polyhedra {x : A1.T x <= b1} and {x : A2.T x <= b2}."""

    A1: np.ndarray
    b1: np.ndarray
    A2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        self.A1 = np.atleast_2d(np.asarray(self.A1, dtype=np.float64))
        self.A2 = np.atleast_2d(np.asarray(self.A2, dtype=np.float64))
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        if self.A1.shape[0] != self.A2.shape[0]:
            raise ValueError("A1 and A2 must share the space dimension")
        if self.b1.shape != (self.A1.shape[1],):
            raise ValueError("b1 length must match the face count of A1")
        if self.b2.shape != (self.A2.shape[1],):
            raise ValueError("b2 length must match the face count of A2")

    @property
    def s(self) -> int:
        return self.A1.shape[0]


@dataclass
class PenalizedProblem:
    """Stacked data of the penalized reformulation."""

    A: np.ndarray        # 2s x (n1+n2) block diagonal
    b: np.ndarray
    B: np.ndarray        # 2s x 2s difference form, eigenvalues {0, 2}
    epsilon: float
    s: int
    n1: int
    n2: int


def build_penalized(pair: PolyhedraPair, epsilon: float) -> PenalizedProblem:
    """Assemble the block structures of the penalized surrogate."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    s, n1, n2 = pair.s, pair.A1.shape[1], pair.A2.shape[1]
    A = np.zeros((2 * s, n1 + n2))
    A[:s, :n1] = pair.A1
    A[s:, n1:] = pair.A2
    eye = np.eye(s)
    B = np.block([[eye, -eye], [-eye, eye]])
    b = np.concatenate([pair.b1, pair.b2])
    return PenalizedProblem(A=A, b=b, B=B, epsilon=epsilon, s=s, n1=n1, n2=n2)


def eval_poly_objective(prob: PenalizedProblem, x):
    """Penalized objective value and gradient at x (dense evaluation)."""
    x = np.asarray(x, dtype=np.float64)
    eps = prob.epsilon
    u = prob.A.T @ x - prob.b
    up = np.maximum(u, 0.0)
    Bx = prob.B @ x
    phi = 0.5 * eps * float(x @ x) + 0.5 * float(x @ Bx) + 0.5 / eps * float(up @ up)
    g = eps * x + Bx + (prob.A @ up) / eps
    return phi, g


def eval_poly_hessian(prob: PenalizedProblem, x) -> np.ndarray:
    """Generalized Hessian eps*I + B + (1/eps) A D A.T, D the face activity."""
    x = np.asarray(x, dtype=np.float64)
    active = (prob.A.T @ x - prob.b) > 0.0
    Aact = prob.A[:, active]
    H = prob.epsilon * np.eye(2 * prob.s) + prob.B
    if Aact.shape[1]:
        H = H + (Aact @ Aact.T) / prob.epsilon
    return H


def cholesky_solve(H, g) -> np.ndarray:
    """Solve H d = g for small symmetric positive definite H.

    Raises scipy/numpy LinAlgError when a nonpositive pivot shows H is
    not positive definite (e.g. a zero penalty parameter upstream).
    """
    H = np.asarray(H, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    c, low = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
    return scipy.linalg.cho_solve((c, low), g, check_finite=False)


def generate_polyhedra(n: int, indexing: str = "continued") -> PolyhedraPair:
    """Deterministic 3-d test pair with n/2 faces each.

    Face normals are chaotic-sequence values at indices 20*(i-1+3*(j-1))
    (1-based row i, column j); with the default ``indexing='continued'``
    the second body continues the same strided scheme where the first
    one stopped, i.e. the combined 3 x n matrix [A1 | A2] follows one
    index formula. ``indexing='restart'`` restarts the sequence for the
    second body instead (making both normal sets identical before
    normalization). Columns are normalized to unit length.

    The bodies are centered at +e and -e (e = all ones) with unit
    right-hand sides, which inscribes a unit ball in each; the shifts
    are folded into the returned right-hand sides so the solve can run
    in unshifted coordinates.
    """
    if n % 2 != 0:
        raise ValueError("n must be even")
    if n < 8:
        raise ValueError("n must be at least 8")
    if indexing not in ("continued", "restart"):
        raise ValueError("indexing must be 'continued' or 'restart'")
    half = n // 2
    s = 3

    def raw(cols: int, col_offset: int) -> np.ndarray:
        i = np.arange(s).reshape(s, 1)
        j = np.arange(cols).reshape(1, cols) + col_offset
        idx = 20 * (i + 3 * j)
        values = logistic_values(int(idx.max()) + 1)
        return values[idx]

    A1 = raw(half, 0)
    A2 = raw(half, half) if indexing == "continued" else raw(half, 0)
    A1 = A1 / np.linalg.norm(A1, axis=0)
    A2 = A2 / np.linalg.norm(A2, axis=0)
    e = np.ones(s)
    b1 = np.ones(half) + A1.T @ e
    b2 = np.ones(half) - A2.T @ e
    return PolyhedraPair(A1=A1, b1=b1, A2=A2, b2=b2)


class PolyhedraOracle:
    """Direction oracle for the penalized distance problem.

    The pre-kink argument u = A.T x - b is cached across iterations and
    backtracking trials; directions solve H d = g with the explicit
    dense Hessian, so they satisfy the scaling identity to rounding.
    """

    def __init__(self, prob: PenalizedProblem):
        self.prob = prob
        self.m = 2 * prob.s
        self.grad_scale = float(np.linalg.norm(prob.b))

    def initial_u(self, x: np.ndarray) -> np.ndarray:
        return self.prob.A.T @ x - self.prob.b

    def phi(self, u: np.ndarray, x: np.ndarray):
        eps = self.prob.epsilon
        up = np.maximum(u, 0.0)
        Bx = self.prob.B @ x
        value = 0.5 * eps * float(x @ x) + 0.5 * float(x @ Bx) + 0.5 / eps * float(up @ up)
        return value, up

    def gradient(self, x, u, up) -> np.ndarray:
        return self.prob.epsilon * x + self.prob.B @ x + (self.prob.A @ up) / self.prob.epsilon

    def direction(self, x, u, up, g) -> DirectionResult:
        eps = self.prob.epsilon
        active = u > 0.0
        Aact = self.prob.A[:, active]
        H = eps * np.eye(self.m) + self.prob.B
        if Aact.shape[1]:
            H = H + (Aact @ Aact.T) / eps
        d = cholesky_solve(H, g)
        return DirectionResult(d=d, dtg=float(d @ g), dtmd=float(d @ (H @ d)))

    def line_evaluator(self, x, u, d) -> LineEvaluation:
        eps = self.prob.epsilon
        w = self.prob.A.T @ d
        Bx = self.prob.B @ x
        xx, xd, dd = float(x @ x), float(x @ d), float(d @ d)
        xBx, dBx, dBd = float(x @ Bx), float(d @ Bx), float(d @ (self.prob.B @ d))

        def phi_at(alpha: float):
            up = np.maximum(u - alpha * w, 0.0)
            quad = 0.5 * eps * (xx - 2 * alpha * xd + alpha * alpha * dd)
            diff = 0.5 * (xBx - 2 * alpha * dBx + alpha * alpha * dBd)
            return quad + diff + 0.5 / eps * float(up @ up), up

        return LineEvaluation(w, phi_at)


@dataclass
class DistanceReport:
    """Result of one penalized distance solve."""

    n: int
    distance: float
    violation_inf: float
    wall_time_s: float
    grad_inf: float
    newton_iters: int
    status: str
    epsilon: float
    x1: np.ndarray = field(repr=False, default=None)
    x2: np.ndarray = field(repr=False, default=None)
    newton: NewtonReport = field(repr=False, default=None)


def solve_distance(pair: PolyhedraPair, epsilon: float = 1e-4,
                   config: SolverConfig | None = None) -> DistanceReport:
    """Minimize the penalized surrogate and report the body distance.

    Runs the shared damped Newton loop with Cholesky directions and no
    extra Hessian regularization (the eps*I + B part is already positive
    definite).
    """
    config = (config or SolverConfig()).replace(delta=0.0)
    prob = build_penalized(pair, epsilon)
    oracle = PolyhedraOracle(prob)
    t0 = time.perf_counter()
    report = minimize(oracle, None, config)
    wall = time.perf_counter() - t0
    s = pair.s
    x1 = report.p_final[:s]
    x2 = report.p_final[s:]
    violation = float(report.x_final.max(initial=0.0))
    return DistanceReport(
        n=prob.n1 + prob.n2,
        distance=float(np.linalg.norm(x1 - x2)),
        violation_inf=violation,
        wall_time_s=wall,
        grad_inf=float(np.abs(report.g_final).max(initial=0.0)),
        newton_iters=report.newton_iters,
        status=report.status,
        epsilon=epsilon,
        x1=x1,
        x2=x2,
        newton=report,
    )
