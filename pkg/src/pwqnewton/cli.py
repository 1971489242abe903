"""Command-line harness: problem ingestion, solves, machine-readable reports.

Three subcommands:

    project          project a point onto the nonnegative solutions of
                     A x = b for a Matrix Market matrix
    polydist         generate the deterministic polyhedra pair of a given
                     total face count and report its distance
    compare-stopping rerun projection solves under the classical and the
                     cost-based inner stopping rules over a grid of
                     tolerances and tabulate times/residuals/kernel counts

Single runs print JSON (or one TSV row); tables print TSV. Every record
embeds the effective configuration (defaults < config file < flags) and
a schema version so golden files stay diffable. The exit code is 0 only
when every requested solve converged.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .newton import ProjectionOracle, SolverConfig, minimize
from .objective import ProjectionProblem
from .polydist import DistanceReport, generate_polyhedra, solve_distance
from .sparse_linalg import MatvecCounter, SparseMatrix, load_matrix_market, matvec

SCHEMA_VERSION = 1


@dataclass
class RunRecord:
    """One projection solve in machine-readable form."""

    problem: str
    status: str
    stop_rule: str
    config: dict
    wall_time_s: float
    resid_inf: float
    resid_2: float
    x_norm: float
    newton_iters: int
    matvec_count: int
    pcg_iters_total: int
    pcg_stop_counts: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))

    TSV_COLUMNS = ("problem", "status", "wall_time_s", "resid_inf", "x_norm",
                   "newton_iters", "matvec_count")

    @classmethod
    def tsv_header(cls) -> str:
        return "# schema %d\n%s" % (SCHEMA_VERSION, "\t".join(cls.TSV_COLUMNS))

    def to_tsv_row(self) -> str:
        vals = [getattr(self, c) for c in self.TSV_COLUMNS]
        return "\t".join(_fmt(v) for v in vals)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _load_vector(source: str, prob_matrix: SparseMatrix, length: int) -> np.ndarray:
    """Vector source: a whitespace-separated text file, or 'feasible:SEED'."""
    if source.startswith("feasible:"):
        seed = int(source.split(":", 1)[1])
        rng = np.random.default_rng(seed)
        x0 = rng.random(prob_matrix.n)
        return matvec(prob_matrix, x0)
    vec = np.loadtxt(source, dtype=np.float64).reshape(-1)
    if vec.shape != (length,):
        raise ValueError(f"{source}: expected {length} values, found {vec.shape[0]}")
    return vec


def _build_config(args) -> SolverConfig:
    config = SolverConfig()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as f:
            loaded = json.load(f)
        unknown = set(loaded) - set(config.as_dict())
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config = config.replace(**loaded)
    return config.replace(
        delta=args.delta, eps=args.eps, tau=args.tau, eps_cg=args.eps_cg,
        k_max=args.kmax, l_max=args.lmax, it_max=args.itmax,
    )


def _run_projection(matrix_path: str, b_source: str, xhat_source: str,
                    config: SolverConfig, stop_rule: str, name: str | None = None) -> RunRecord:
    A = load_matrix_market(matrix_path)
    b = _load_vector(b_source, A, A.m)
    if xhat_source == "zero":
        xhat = np.zeros(A.n)
    else:
        xhat = _load_vector(xhat_source, A, A.n)
    prob = ProjectionProblem(A, b, xhat)
    counter = MatvecCounter()
    oracle = ProjectionOracle(prob, config, counter=counter, stop_rule=stop_rule)
    t0 = time.perf_counter()
    report = minimize(oracle, None, config)
    wall = time.perf_counter() - t0
    resid = report.g_final  # A x - b by construction
    return RunRecord(
        problem=name or matrix_path,
        status=report.status,
        stop_rule=stop_rule,
        config=config.as_dict(),
        wall_time_s=wall,
        resid_inf=float(np.abs(resid).max(initial=0.0)),
        resid_2=float(np.linalg.norm(resid)),
        x_norm=float(np.linalg.norm(report.x_final)),
        newton_iters=report.newton_iters,
        matvec_count=report.matvec_count,
        pcg_iters_total=report.pcg_iters_total,
        pcg_stop_counts=dict(report.pcg_stop_counts),
    )


def cmd_project(args, out) -> int:
    config = _build_config(args)
    record = _run_projection(args.matrix, args.b, args.xhat, config,
                             args.stop_rule, name=args.name)
    if args.format == "json":
        out.write(record.to_json() + "\n")
    else:
        out.write(record.tsv_header() + "\n")
        out.write(record.to_tsv_row() + "\n")
    return 0 if record.status == "converged" else 1


def cmd_polydist(args, out) -> int:
    config = _build_config(args)
    pair = generate_polyhedra(args.n)
    report = solve_distance(pair, epsilon=args.epsilon, config=config)
    if args.format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "n": report.n,
            "distance": report.distance,
            "violation_inf": report.violation_inf,
            "wall_time_s": report.wall_time_s,
            "grad_inf": report.grad_inf,
            "newton_iters": report.newton_iters,
            "status": report.status,
            "epsilon": report.epsilon,
            "config": config.as_dict(),
        }
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        out.write("# schema %d\n" % SCHEMA_VERSION)
        out.write("n\tdistance\tviolation_inf\twall_time_s\tgrad_inf\tnewton_iters\n")
        out.write("%d\t%.6f\t%s\t%s\t%s\t%d\n" % (
            report.n, report.distance, _fmt(report.violation_inf),
            _fmt(report.wall_time_s), _fmt(report.grad_inf), report.newton_iters))
    return 0 if report.status == "converged" else 1


def cmd_compare_stopping(args, out) -> int:
    config = _build_config(args)
    grid = [float(tok) for tok in args.eps_cg_grid.split(",") if tok.strip()]
    if not grid:
        raise ValueError("empty eps-cg grid")
    out.write("# schema %d\n" % SCHEMA_VERSION)
    out.write("criterion\teps_cg\tgeom_mean_time_s\tarith_mean_time_s\t"
              "geom_mean_resid_inf\ttotal_matvecs\tconverged\tproblems\n")
    all_converged = True
    for rule, label in (("old", "old"), ("both", "new")):
        for eps_cg in grid:
            cfg = config.replace(eps_cg=eps_cg)
            times, resids, matvecs, converged = [], [], 0, 0
            for path in args.matrices:
                rec = _run_projection(path, args.b, args.xhat, cfg, rule)
                times.append(max(rec.wall_time_s, 1e-9))
                resids.append(max(rec.resid_inf, 1e-300))
                matvecs += rec.matvec_count
                converged += rec.status == "converged"
            n = len(args.matrices)
            all_converged &= converged == n
            gtime = math.exp(sum(math.log(t) for t in times) / n)
            atime = sum(times) / n
            gres = math.exp(sum(math.log(r) for r in resids) / n)
            out.write("%s\t%s\t%.6g\t%.6g\t%.6g\t%d\t%d/%d\n" % (
                label, _fmt(eps_cg), gtime, atime, gres, matvecs, converged, n))
    return 0 if all_converged else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwqnewton",
        description="Damped inexact Newton solver for convex piecewise-quadratic "
                    "minimization: nonnegative projections and polyhedra distances.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON file with solver parameter overrides")
        p.add_argument("--delta", type=float, help="Hessian regularization weight")
        p.add_argument("--eps", type=float, help="outer gradient tolerance")
        p.add_argument("--tau", type=float, help="backtracking acceptance slack")
        p.add_argument("--eps-cg", dest="eps_cg", type=float, help="inner PCG tolerance")
        p.add_argument("--kmax", type=int, help="outer iteration cap")
        p.add_argument("--lmax", type=int, help="backtracking trial cap")
        p.add_argument("--itmax", type=int, help="inner PCG iteration cap")

    p_proj = sub.add_parser("project", help="projection onto nonnegative solutions of A x = b")
    p_proj.add_argument("matrix", help="Matrix Market coordinate file")
    p_proj.add_argument("--b", default="feasible:1",
                        help="right-hand side: vector file or feasible:SEED (default)")
    p_proj.add_argument("--xhat", default="zero", help="point to project: vector file or 'zero'")
    p_proj.add_argument("--stop-rule", dest="stop_rule", default="both",
                        choices=("new", "old", "both"),
                        help="inner stopping rule; 'new'/'both' enable the cost-based "
                             "test (the classical test always stays on as a safety net)")
    p_proj.add_argument("--format", default="json", choices=("json", "tsv"))
    p_proj.add_argument("--name", help="problem label for the report")
    add_config_flags(p_proj)

    p_poly = sub.add_parser("polydist", help="distance between generated test polyhedra")
    p_poly.add_argument("--n", type=int, required=True, help="total face count (even, >= 8)")
    p_poly.add_argument("--epsilon", type=float, default=1e-4, help="penalty parameter")
    p_poly.add_argument("--format", default="tsv", choices=("json", "tsv"))
    add_config_flags(p_poly)

    p_cmp = sub.add_parser("compare-stopping", help="classical vs cost-based inner stopping")
    p_cmp.add_argument("matrices", nargs="+", help="Matrix Market files")
    p_cmp.add_argument("--b", default="feasible:1",
                       help="right-hand side source applied to every matrix")
    p_cmp.add_argument("--xhat", default="zero")
    p_cmp.add_argument("--eps-cg-grid", dest="eps_cg_grid", default="1e-2,3e-3,1e-3",
                       help="comma-separated inner tolerances")
    add_config_flags(p_cmp)

    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "project": cmd_project,
        "polydist": cmd_polydist,
        "compare-stopping": cmd_compare_stopping,
    }
    try:
        return handlers[args.command](args, out)
    except (OSError, ValueError) as exc:
        print(f"pwqnewton: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
