"""Damped inexact Newton iteration for convex piecewise-quadratic objectives.

The loop is generic over a direction oracle so the same driver serves
both applications: the sparse projection problem (directions from
matrix-free PCG) and the small dense penalized problems (directions from
a Cholesky solve). An oracle exposes

    m               dimension of the iterate
    grad_scale      norm of the right-hand side for the relative stop
                    test (0 switches the test to absolute)
    initial_u(p)    the pre-kink argument cached along the iteration
    phi(u, p)       objective value plus the positive part of u
    gradient(p, u, x)
    direction(p, u, x, g)   a DirectionResult satisfying d.T g = d.T M d
    line_evaluator(p, u, d) step images for kernel-free backtracking

Steps use Armijo halving: alpha in {1, 1/2, 1/4, ...} and the first
alpha with

    (0.5 * alpha * d.T g + phi(p - alpha d)) - phi(p) <= tau * |phi(p)|

is taken. Because each accepted trial reuses the cached pre-kink argument
and one step image, a whole backtracking loop costs a single transposed
kernel call regardless of how many trials it makes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .objective import ProjectionProblem, active_set_from_x, apply_hessian, hessian_diag, positive_part
from .pcg import JacobiPreconditioner, LinearOperator, PcgOutcome, solve_fused
from .sparse_linalg import MatvecCounter, matvec, matvec_transpose


@dataclass
class SolverConfig:
    """Tuning parameters of the outer loop and the inner PCG solver.

    ``it_max=None`` resolves to min(m, 500): m bounds exact-arithmetic
    CG and 500 bounds pathological cases.
    """

    delta: float = 1e-6
    eps: float = 1e-12
    tau: float = 1e-15
    eps_cg: float = 1e-3
    k_max: int = 2000
    l_max: int = 10
    it_max: int | None = None

    def resolve_it_max(self, m: int) -> int:
        return min(m, 500) if self.it_max is None else self.it_max

    def as_dict(self) -> dict:
        return asdict(self)

    def replace(self, **kwargs) -> "SolverConfig":
        d = self.as_dict()
        d.update({k: v for k, v in kwargs.items() if v is not None})
        return SolverConfig(**d)


@dataclass
class DirectionResult:
    """Newton direction with the scalars the line search needs."""

    d: np.ndarray
    dtg: float
    dtmd: float
    iterations: int = 0
    breakdown: bool = False
    pcg: PcgOutcome | None = None


@dataclass
class NewtonReport:
    """Outcome of one minimize run.

    ``step_accepted`` marks, per step, whether the sufficient-decrease
    test passed; steps taken through the exhausted-backtracking fallback
    are recorded as False and are the only ones allowed to raise the
    objective.
    """

    p_final: np.ndarray
    x_final: np.ndarray
    g_final: np.ndarray
    phi_history: np.ndarray
    grad_norm_history: np.ndarray
    newton_iters: int
    matvec_count: int
    status: str  # 'converged' | 'k_max_reached' | 'stagnated' | 'pcg_breakdown'
    pcg_stop_counts: dict = field(default_factory=dict)
    pcg_iters_total: int = 0
    alpha_history: list = field(default_factory=list)
    step_accepted: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class LineEvaluation:
    """Kernel-free objective evaluations along p - alpha*d."""

    __slots__ = ("w", "_phi_at")

    def __init__(self, w: np.ndarray, phi_at):
        self.w = w
        self._phi_at = phi_at

    def phi(self, alpha: float):
        return self._phi_at(alpha)


class BacktrackStagnation(Exception):
    """All trial steps failed the acceptance test.

    Carries the best evaluated trial plus the one-more-halving fallback
    step that the exhausted loop would take, so the caller can either
    keep the best descent found or push through with the fallback.
    """

    def __init__(self, alpha, p_next, phi_next, x_next, u_next, improved: bool,
                 fallback=None):
        super().__init__("backtracking exhausted")
        self.alpha = alpha
        self.p_next = p_next
        self.phi_next = phi_next
        self.x_next = x_next
        self.u_next = u_next
        self.improved = improved
        self.fallback = fallback  # (alpha, p, phi, x, u) at alpha = 2**-l_max


def backtrack(oracle, p, u, d, dtg: float, phi_k: float, config: SolverConfig):
    """Armijo halving along -d; returns (alpha, p_next, phi_next, x_next, u_next).

    Requires dtg > 0 (a descent direction, which the scaling identity
    guarantees when the direction provider succeeds). Raises
    BacktrackStagnation when l_max trials all fail; the exception carries
    the best trial found (``improved`` records whether it lowered phi by
    more than the tau slack) and the final-halving fallback step.
    """
    if not dtg > 0.0:
        raise ValueError("backtrack requires a descent direction (dtg > 0)")
    ev = oracle.line_evaluator(p, u, d)
    slack = config.tau * abs(phi_k)
    best = None  # (phi, alpha, x)
    alpha = 1.0
    for _ in range(config.l_max):
        phi_a, x_a = ev.phi(alpha)
        if math.isfinite(phi_a):
            if (0.5 * alpha * dtg + phi_a) - phi_k <= slack:
                return alpha, p - alpha * d, phi_a, x_a, u - alpha * ev.w
            if best is None or phi_a < best[0]:
                best = (phi_a, alpha, x_a)
        alpha *= 0.5
    # alpha is now 2**-l_max, the step the exhausted loop falls back to
    phi_f, x_f = ev.phi(alpha)
    fallback = (alpha, p - alpha * d, phi_f, x_f, u - alpha * ev.w)
    if best is None:
        raise BacktrackStagnation(0.0, p, phi_k, None, u, improved=False,
                                  fallback=fallback)
    phi_b, alpha_b, x_b = best
    raise BacktrackStagnation(alpha_b, p - alpha_b * d, phi_b, x_b,
                              u - alpha_b * ev.w, improved=phi_b < phi_k - slack,
                              fallback=fallback)


def minimize(oracle, p0, config: SolverConfig | None = None) -> NewtonReport:
    """Run the damped Newton iteration from p0 (all zeros by default).

    Terminates as 'converged' once ||g||_2 <= eps * grad_scale (absolute
    when grad_scale is zero), as 'k_max_reached' after k_max steps, as
    'stagnated' when backtracking cannot improve the objective, and as
    'pcg_breakdown' when the direction provider fails without a usable
    descent direction.
    """
    config = config or SolverConfig()
    if config.k_max < 1:
        raise ValueError("k_max must be at least 1")
    p = np.zeros(oracle.m) if p0 is None else np.array(p0, dtype=np.float64)
    if p.shape != (oracle.m,):
        raise ValueError(f"p0 must have length {oracle.m}")
    if not np.all(np.isfinite(p)):
        raise ValueError("p0 has non-finite entries")

    threshold = config.eps * oracle.grad_scale if oracle.grad_scale > 0 else config.eps
    u = oracle.initial_u(p)
    phi, x = oracle.phi(u, p)

    phis: list[float] = []
    gnorms: list[float] = []
    alphas: list[float] = []
    accepted: list[bool] = []
    stop_counts: dict[str, int] = {}
    pcg_total = 0
    status = "k_max_reached"

    for _ in range(config.k_max):
        g = oracle.gradient(p, u, x)
        phis.append(phi)
        gnorms.append(float(np.linalg.norm(g)))
        if not math.isfinite(phi):
            raise FloatingPointError("objective overflow")
        if gnorms[-1] <= threshold:
            status = "converged"
            break

        res = oracle.direction(p, u, x, g)
        if res.pcg is not None:
            stop_counts[res.pcg.stop_reason] = stop_counts.get(res.pcg.stop_reason, 0) + 1
            pcg_total += res.pcg.iterations
        if res.breakdown and not res.dtg > 0.0:
            status = "pcg_breakdown"
            break
        if not res.dtg > 0.0:
            status = "pcg_breakdown"
            break

        try:
            alpha, p, phi, x, u = backtrack(oracle, p, u, res.d, res.dtg, phi, config)
            alphas.append(alpha)
            accepted.append(True)
        except BacktrackStagnation as stag:
            if stag.improved:
                alphas.append(stag.alpha)
                accepted.append(False)
                p, phi, x, u = stag.p_next, stag.phi_next, stag.x_next, stag.u_next
                continue
            # No trial gave a real decrease. Push through with the
            # final-halving fallback when it still moves the iterate
            # (far from the solution the generalized Hessian can be a
            # poor model across piece boundaries, and the tiny step
            # changes the active set so later iterations recover); give
            # up only when even that step is a numerical no-op.
            fb_alpha, fb_p, fb_phi, fb_x, fb_u = stag.fallback
            if math.isfinite(fb_phi) and np.any(fb_p != p):
                alphas.append(fb_alpha)
                accepted.append(False)
                p, phi, x, u = fb_p, fb_phi, fb_x, fb_u
                continue
            if stag.x_next is not None and stag.phi_next < phi:
                p, phi, x, u = stag.p_next, stag.phi_next, stag.x_next, stag.u_next
            status = "stagnated"
            break
    else:
        # k_max exhausted: record the final point's data
        g = oracle.gradient(p, u, x)
        phis.append(phi)
        gnorms.append(float(np.linalg.norm(g)))

    if status in ("stagnated", "pcg_breakdown"):
        g = oracle.gradient(p, u, x)
        phis.append(phi)
        gnorms.append(float(np.linalg.norm(g)))

    counter = getattr(oracle, "counter", None)
    return NewtonReport(
        p_final=p,
        x_final=x,
        g_final=g,
        phi_history=np.array(phis),
        grad_norm_history=np.array(gnorms),
        newton_iters=len(alphas),
        matvec_count=counter.count if counter is not None else 0,
        status=status,
        pcg_stop_counts=stop_counts,
        pcg_iters_total=pcg_total,
        alpha_history=alphas,
        step_accepted=accepted,
    )


class ProjectionOracle:
    """Direction oracle for the sparse projection problem.

    Directions come from the fused PCG applied to the matrix-free
    regularized Hessian with Jacobi preconditioning. ``stop_rule``
    selects the inner termination: 'old' uses only the classical
    residual test; 'new' and 'both' additionally enable the cost-based
    rule (the classical test is always kept as a safety net).
    """

    def __init__(self, prob: ProjectionProblem, config: SolverConfig | None = None,
                 counter: MatvecCounter | None = None, stop_rule: str = "both"):
        if stop_rule not in ("old", "new", "both"):
            raise ValueError("stop_rule must be 'old', 'new' or 'both'")
        self.prob = prob
        self.config = config or SolverConfig()
        self.counter = counter if counter is not None else MatvecCounter()
        self.stop_rule = stop_rule
        self.m = prob.m
        self.grad_scale = float(np.linalg.norm(prob.b))

    def initial_u(self, p: np.ndarray) -> np.ndarray:
        if not np.any(p):
            return self.prob.xhat.copy()
        return self.prob.xhat + matvec_transpose(self.prob.A, p, self.counter)

    def phi(self, u: np.ndarray, p: np.ndarray):
        x = positive_part(u)
        value = 0.5 * float(x @ x) - float(self.prob.b @ p)
        return value, x

    def gradient(self, p, u, x) -> np.ndarray:
        return matvec(self.prob.A, x, self.counter) - self.prob.b

    def direction(self, p, u, x, g) -> DirectionResult:
        act = active_set_from_x(x, p)
        diag = hessian_diag(self.prob, act, self.config.delta)
        precond = JacobiPreconditioner.from_diagonal(diag)
        op = LinearOperator(
            self.m,
            lambda v: apply_hessian(self.prob, act, self.config.delta, v, self.counter),
            diag=diag,
        )
        outcome = solve_fused(
            op, precond, g,
            eps_cg=self.config.eps_cg,
            it_max=self.config.resolve_it_max(self.m),
            use_new_rule=self.stop_rule != "old",
        )
        return DirectionResult(
            d=outcome.d,
            dtg=outcome.dtg,
            dtmd=outcome.dtmd,
            iterations=outcome.iterations,
            breakdown=outcome.breakdown,
            pcg=outcome,
        )

    def line_evaluator(self, p, u, d) -> LineEvaluation:
        w = matvec_transpose(self.prob.A, d, self.counter)
        btp = float(self.prob.b @ p)
        btd = float(self.prob.b @ d)

        def phi_at(alpha: float):
            x = positive_part(u - alpha * w)
            return 0.5 * float(x @ x) - btp + alpha * btd, x

        return LineEvaluation(w, phi_at)


def solve_projection(prob: ProjectionProblem, config: SolverConfig | None = None,
                     p0=None, stop_rule: str = "both") -> NewtonReport:
    """Project prob.xhat onto the nonnegative solutions of A x = b."""
    oracle = ProjectionOracle(prob, config, stop_rule=stop_rule)
    return minimize(oracle, p0, oracle.config)
