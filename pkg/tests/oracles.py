"""Independent reference computations for the test suite.

Everything here is built from dense numpy linear algebra, scipy
quadrature and exhaustive enumeration, deliberately sharing no code with
the package kernels it checks.
"""

import numpy as np
from scipy.integrate import quad


def random_sparse(rng, m, n, density=0.3, row_scale=None):
    """Random sparse test matrix as (SparseMatrix, dense copy).

    ``row_scale`` multiplies each row by a random factor in the given
    (lo, hi) range, exercising instances with widely varying row norms.
    """
    from pwqnewton import SparseMatrix

    dense = rng.standard_normal((m, n)) * (rng.random((m, n)) < density)
    if row_scale is not None:
        lo, hi = row_scale
        dense *= np.exp(rng.uniform(np.log(lo), np.log(hi), size=(m, 1)))
    return SparseMatrix.from_dense(dense), dense


def segment_measure(y, t, z):
    """Quadrature value of the s-measure of {s in [0,1] : y + s*t*z > 0}."""
    def f(s):
        return 1.0 if y + s * t * z > 0.0 else 0.0

    points = None
    if t != 0.0 and z != 0.0:
        s_star = -y / (t * z)
        if 0.0 < s_star < 1.0:
            points = [s_star]
    val, _ = quad(f, 0.0, 1.0, points=points, limit=200)
    return val


def curvature_weight(y, z):
    """d = int_0^1 (int_0^1 [y + s t z > 0] ds) 2t dt by nested quadrature.

    Zero by convention when z is zero (the weight multiplies z**2).
    """
    if z == 0.0:
        return 0.0

    def outer(t):
        return segment_measure(y, t, z) * 2.0 * t

    points = None
    t_star = -y / z
    if 0.0 < t_star < 1.0:
        points = [t_star]
    val, _ = quad(outer, 0.0, 1.0, points=points, limit=200)
    return val


def scalar_taylor_rhs(eta, zeta):
    """zeta**2 * int_0^1 (int_0^1 [eta + s t zeta > 0] ds) t dt by quadrature."""
    if zeta == 0.0:
        return 0.0
    return zeta * zeta * 0.5 * curvature_weight(eta, zeta)


def scalar_taylor_lhs(eta, zeta):
    def pos(v):
        return max(v, 0.0)

    return 0.5 * pos(eta + zeta) ** 2 - 0.5 * pos(eta) ** 2 - zeta * pos(eta)


def dense_regularized_hessian(dense_A, indicator, delta):
    """Explicit A Diag(ind) A.T + delta Diag(AA.T)."""
    rowsq = np.diag(dense_A @ dense_A.T)
    return dense_A @ np.diag(indicator) @ dense_A.T + delta * np.diag(rowsq)


def row_normalized_sq_norm(dense_A):
    """Squared spectral norm of Diag(AA.T)^{-1/2} A (rows must be nonnull)."""
    rowsq = (dense_A ** 2).sum(axis=1)
    scaled = dense_A / np.sqrt(rowsq)[:, None]
    return np.linalg.norm(scaled, 2) ** 2


def fd_gradient(f, p, h):
    """Central finite differences of a scalar function."""
    p = np.asarray(p, dtype=np.float64)
    out = np.empty(len(p))
    for i in range(len(p)):
        e = np.zeros(len(p))
        e[i] = h
        out[i] = (f(p + e) - f(p - e)) / (2.0 * h)
    return out


def projection_qp_bruteforce(dense_A, b, xhat, tol=1e-9):
    """Exact minimizer of 0.5||x - xhat||^2 over {A x = b, x >= 0}.

    Enumerates every support set of free variables and solves the
    equality-constrained subproblem through its normal equations; the
    optimizer's support is among the subsets, every feasible candidate
    upper-bounds the optimum, and the objective is strictly convex, so
    the best feasible candidate is the global solution. Returns (value,
    x) or None when no subset yields a feasible point.
    """
    m, n = dense_A.shape
    b = np.asarray(b, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    scale = 1.0 + np.linalg.norm(b)
    best = None
    for mask in range(1 << n):
        free = [j for j in range(n) if (mask >> j) & 1]
        x = np.zeros(n)
        if free:
            AF = dense_A[:, free]
            rhs = b - AF @ xhat[free]
            lam, *_ = np.linalg.lstsq(AF @ AF.T, rhs, rcond=None)
            xF = xhat[free] + AF.T @ lam
            if np.linalg.norm(AF @ xF - b) > tol * scale:
                continue
            if xF.min(initial=0.0) < -tol:
                continue
            x[free] = np.maximum(xF, 0.0)
        if np.linalg.norm(dense_A @ x - b) > tol * scale:
            continue
        val = 0.5 * float((x - xhat) @ (x - xhat))
        if best is None or val < best[0]:
            best = (val, x)
    return best


def polyhedra_qp_bruteforce(A1, b1, A2, b2, tol=1e-9):
    """Exact min 0.5||x1 - x2||^2 over the two face-form polyhedra.

    Enumerates candidate active face sets and solves the corresponding
    KKT saddle systems; any candidate passing primal feasibility and
    dual sign checks is globally optimal by convexity, and the smallest
    objective over passing candidates is returned as (value, x). Returns
    None when no candidate passes (empty feasible set within tol).
    """
    s = A1.shape[0]
    G = np.zeros((A1.shape[1] + A2.shape[1], 2 * s))
    G[:A1.shape[1], :s] = A1.T
    G[A1.shape[1]:, s:] = A2.T
    h = np.concatenate([b1, b2])
    nc = G.shape[0]
    eye = np.eye(s)
    B = np.block([[eye, -eye], [-eye, eye]])
    best = None
    for mask in range(1 << nc):
        act = [i for i in range(nc) if (mask >> i) & 1]
        k = len(act)
        if k > 2 * s:
            continue
        GS = G[act]
        K = np.zeros((2 * s + k, 2 * s + k))
        K[:2 * s, :2 * s] = B
        K[:2 * s, 2 * s:] = GS.T
        K[2 * s:, :2 * s] = GS
        rhs = np.concatenate([np.zeros(2 * s), h[act]])
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        if np.linalg.norm(K @ sol - rhs) > tol * (1.0 + np.linalg.norm(rhs)):
            continue
        x, mu = sol[:2 * s], sol[2 * s:]
        if k and mu.min() < -tol:
            continue
        if (G @ x - h).max(initial=0.0) > tol:
            continue
        val = 0.5 * float(x @ (B @ x))
        if best is None or val < best[0]:
            best = (val, x)
    return best


def jacobi_preconditioned_condition(M_dense):
    """cond of C^(1/2) M C^(1/2) for the Jacobi C, by dense eigenvalues."""
    d = np.diag(M_dense)
    c_sqrt = 1.0 / np.sqrt(np.where(d >= 1e-300, d, 1.0))
    sym = c_sqrt[:, None] * M_dense * c_sqrt[None, :]
    ev = np.linalg.eigvalsh(sym)
    return float(ev[-1] / ev[0])


def random_spd(rng, n, cond=100.0):
    """Random dense SPD matrix with the given spectral condition number."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.exp(np.linspace(0.0, np.log(cond), n))
    lam = lam[rng.permutation(n)]
    return (q * lam) @ q.T
