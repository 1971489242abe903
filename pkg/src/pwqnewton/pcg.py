"""Preconditioned conjugate gradients for the Newton systems M d = g.

Two algebraically equivalent variants are provided. ``solve_fused``
computes its three iteration scalars from one synchronization point per
iteration (a single fused reduction, which is what a distributed
implementation would want) and terminates early under a cost-based rule:
once the marginal M-norm gain of one more increment stops paying for its
cost, i.e.

    (1/eps_cg + i) * eta(i-1) <= zeta(i),

where eta(j) = s_j.T M s_j is the gain of increment j and zeta(i) is the
accumulated d.T M d. ``solve_standard`` is the textbook recurrence with
the classical residual test and serves as an equivalence oracle and
fallback.

Both start from d = 0, which makes every iterate satisfy the scaling
identity d.T g = d.T M d; directions produced this way are automatically
descent directions for the outer Newton loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class PcgError(RuntimeError):
    """Unrecoverable failure inside a PCG solve."""


class LinearOperator:
    """Symmetric positive (semi)definite operator with an apply contract."""

    __slots__ = ("m", "_apply", "diag")

    def __init__(self, m: int, apply, diag=None):
        self.m = int(m)
        self._apply = apply
        self.diag = None if diag is None else np.asarray(diag, dtype=np.float64)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._apply(v)

    @classmethod
    def from_dense(cls, M) -> "LinearOperator":
        M = np.asarray(M, dtype=np.float64)
        return cls(M.shape[0], lambda v: M @ v, diag=np.diag(M).copy())


class JacobiPreconditioner:
    """Inverse of the operator diagonal, with unit fallback on zero rows.

    Entries of the diagonal below ``floor`` (null rows of A whose columns
    are all inactive) would make the inverse blow up; the preconditioner
    substitutes 1 there, which leaves those components unscaled.
    """

    __slots__ = ("c",)

    FLOOR = 1e-300

    def __init__(self, c):
        self.c = np.ascontiguousarray(c, dtype=np.float64)
        if not np.all(np.isfinite(self.c)) or np.any(self.c <= 0.0):
            raise ValueError("preconditioner entries must be finite and positive")
        self.c.flags.writeable = False

    @classmethod
    def from_diagonal(cls, diag, floor: float = FLOOR) -> "JacobiPreconditioner":
        diag = np.asarray(diag, dtype=np.float64)
        if np.any(diag < 0.0):
            raise ValueError("operator diagonal has negative entries")
        c = np.where(diag >= floor, 1.0 / np.where(diag >= floor, diag, 1.0), 1.0)
        return cls(c)

    @classmethod
    def identity(cls, m: int) -> "JacobiPreconditioner":
        return cls(np.ones(m))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.c * v


@dataclass
class PcgOutcome:
    """Approximate solution of M d = g plus per-iteration diagnostics.

    ``gammas[i]``, ``etas[i]``, ``zetas[i]`` hold the scalars examined at
    iteration i (eta lags one step: etas[i] is the M-norm gain of the
    previous increment). ``dtmd`` is the accumulated d.T M d, which the
    scaling identity makes equal to ``dtg`` up to rounding.
    """

    d: np.ndarray
    iterations: int
    stop_reason: str  # 'new-rule' | 'standard-rule' | 'it_max' | 'breakdown'
    dtg: float
    dtmd: float
    gammas: np.ndarray
    etas: np.ndarray
    zetas: np.ndarray
    breakdown: bool = False
    iterates: list = field(default_factory=list, repr=False)


def _finish(d, g, i, reason, gammas, etas, zetas, breakdown, iterates):
    return PcgOutcome(
        d=d,
        iterations=i,
        stop_reason=reason,
        dtg=float(d @ g),
        dtmd=float(zetas[-1]) if zetas else 0.0,
        gammas=np.array(gammas),
        etas=np.array(etas),
        zetas=np.array(zetas),
        breakdown=breakdown,
        iterates=iterates if iterates is not None else [],
    )


def solve_fused(M: LinearOperator, C: JacobiPreconditioner, g, eps_cg: float,
                it_max: int, use_new_rule: bool = True, trace: bool = False) -> PcgOutcome:
    """Fused-recurrence PCG with the cost-based stopping rule.

    The cost-based test is skipped at i = 0, where it degenerates to
    0 <= 0 and would return the zero vector; from i = 1 on it can first
    fire at i = 2, so a cost-based exit always carries at least two
    increments. The classical test gamma(i) <= eps_cg**2 * gamma(0) runs
    alongside it, and ``it_max`` bounds the iteration count.

    A nonpositive 2x2 system determinant or a non-finite scalar signals
    loss of positive definiteness; the solve then stops and returns the
    last completed iterate flagged with ``breakdown=True`` instead of
    raising, so the caller can salvage the partial direction.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (M.m,):
        raise ValueError(f"g must have length {M.m}")
    if not (0.0 < eps_cg < 1.0):
        raise ValueError("eps_cg must lie in (0, 1)")
    if it_max < 2:
        raise ValueError("it_max must be at least 2")
    if not np.all(np.isfinite(g)):
        raise ValueError("g has non-finite entries")

    inv_eps = 1.0 / eps_cg
    thresh2 = eps_cg * eps_cg

    r = -g
    d = np.zeros(M.m)
    s_prev = np.zeros(M.m)
    t_prev = np.zeros(M.m)
    zeta = 0.0
    gamma0 = None
    gammas: list[float] = []
    etas: list[float] = []
    zetas: list[float] = []
    iterates: list[np.ndarray] | None = [] if trace else None

    i = 0
    while True:
        w = C.apply(r)
        z = M.apply(w)
        gamma = float(r @ w)
        xi = float(w @ z)
        eta = float(s_prev @ t_prev)
        zeta = zeta + eta
        if gamma0 is None:
            gamma0 = gamma
        gammas.append(gamma)
        etas.append(eta)
        zetas.append(zeta)

        if not (math.isfinite(gamma) and math.isfinite(xi) and math.isfinite(eta)):
            return _finish(d, g, i, "breakdown", gammas, etas, zetas, True, iterates)
        if use_new_rule and i >= 1 and (inv_eps + i) * eta <= zeta:
            return _finish(d, g, i, "new-rule", gammas, etas, zetas, False, iterates)
        if gamma <= thresh2 * gamma0:
            return _finish(d, g, i, "standard-rule", gammas, etas, zetas, False, iterates)
        if i >= it_max:
            return _finish(d, g, i, "it_max", gammas, etas, zetas, False, iterates)

        if i == 0:
            if xi <= 0.0:
                return _finish(d, g, i, "breakdown", gammas, etas, zetas, True, iterates)
            alpha = -gamma / xi
            beta = 0.0
        else:
            denom = xi * eta - gamma * gamma
            if denom <= 0.0 or not math.isfinite(denom):
                return _finish(d, g, i, "breakdown", gammas, etas, zetas, True, iterates)
            dl = gamma / denom
            alpha = -eta * dl
            beta = gamma * dl

        t = z * alpha + t_prev * beta
        r = r + t
        s = w * alpha + s_prev * beta
        d = d + s
        s_prev, t_prev = s, t
        if iterates is not None:
            iterates.append(d.copy())
        i += 1


def solve_standard(M: LinearOperator, C: JacobiPreconditioner, g, eps_cg: float,
                   it_max: int, trace: bool = False) -> PcgOutcome:
    """Textbook PCG with the classical residual test r.T C r <= eps**2 r0.T C r0."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (M.m,):
        raise ValueError(f"g must have length {M.m}")
    if not (0.0 < eps_cg < 1.0):
        raise ValueError("eps_cg must lie in (0, 1)")
    if not np.all(np.isfinite(g)):
        raise ValueError("g has non-finite entries")

    d = np.zeros(M.m)
    r = g.copy()
    cr = C.apply(r)
    rho = float(r @ cr)
    rho0 = rho
    s = cr
    # diagnostics mirror the fused variant: gamma(i) = r.T C r, eta(i-1) the
    # M-norm gain of the previous increment, zeta(i) the accumulated sum
    gammas = [rho]
    etas = [0.0]
    zetas = [0.0]
    zeta = 0.0
    iterates: list[np.ndarray] | None = [] if trace else None

    if rho <= 0.0:
        return _finish(d, g, 0, "standard-rule", gammas, etas, zetas, False, iterates)

    i = 0
    while i < it_max:
        Ms = M.apply(s)
        sms = float(s @ Ms)
        if sms <= 0.0 or not math.isfinite(sms):
            return _finish(d, g, i, "breakdown", gammas, etas, zetas, True, iterates)
        alpha = rho / sms
        d = d + alpha * s
        r = r - alpha * Ms
        if iterates is not None:
            iterates.append(d.copy())
        zeta = zeta + alpha * alpha * sms
        cr = C.apply(r)
        rho_new = float(r @ cr)
        gammas.append(rho_new)
        etas.append(alpha * alpha * sms)
        zetas.append(zeta)
        i += 1
        if not math.isfinite(rho_new):
            return _finish(d, g, i, "breakdown", gammas, etas, zetas, True, iterates)
        if rho_new <= eps_cg * eps_cg * rho0:
            return _finish(d, g, i, "standard-rule", gammas, etas, zetas, False, iterates)
        beta = rho_new / rho
        s = cr + beta * s
        rho = rho_new
    return _finish(d, g, i, "it_max", gammas, etas, zetas, False, iterates)


def direction_quality(M_dense, g, d) -> float:
    """Ratio d.T M d / g.T M^{-1} g for a dense symmetric positive definite M.

    Equals the squared fraction of the Newton decrement captured by d:
    0 for d = 0, exactly 1 at the true solution, and monotonically
    approaching 1 as CG iterates progress. Test-harness diagnostic; uses
    a direct dense solve, so keep M small.
    """
    M_dense = np.asarray(M_dense, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    num = float(d @ (M_dense @ d))
    den = float(g @ np.linalg.solve(M_dense, g))
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise PcgError("zero right-hand side with nonzero direction")
    return num / den
