"""Command-line interface: ``subgraph-cavity <command> ...`` or ``python -m subgraph_cavity``.

Exit codes: 0 success, 2 invalid input, 3 non-convergence (output still written).
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .analytic import LimitSpec, historical_minima, karp_sipser, limit_table
from .cavity import (
    NotCavityMonotoneError,
    NotConvergedError,
    energy_at,
    free_entropy,
    marginal,
    rank_estimate,
    solve_cavity,
    solve_infinite_activity,
    edge_probabilities,
)
from .ensembles import (
    DegreeDistribution,
    configuration_model,
    erdos_renyi,
    random_regular,
    read_degree_distribution,
)
from .exact import MAX_EDGES, exact_M, exact_marginals, partition_polynomial
from .measure import MeasureError
from .network import NetworkValidationError, is_forest, read_network, save_network
from .rde import DEFAULT_ITERS, DEFAULT_POOL, solve_rde

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3


class InputError(ValueError):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return obj


@dataclass
class RunRecord:
    command: str
    parameters: dict
    seed: int
    wall_time: float = 0.0
    outputs: dict = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2) + "\n"


def parse_activity(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        t = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid activity {text!r}") from exc
    if not t > 0:
        raise argparse.ArgumentTypeError("activity must be positive")
    return t


def _degree_law(args) -> DegreeDistribution:
    if getattr(args, "pi", None):
        return read_degree_distribution(args.pi)
    if getattr(args, "c", None) is not None:
        return DegreeDistribution.poisson(args.c)
    if getattr(args, "d", None) is not None:
        return DegreeDistribution.point_mass(args.d)
    raise InputError("give --pi, --c or --d")


# -- commands -----------------------------------------------------------------------


def cmd_exact(args, record):
    net = read_network(args.network)
    poly = partition_polynomial(net)
    rows = []
    for t in args.t:
        if math.isinf(t):
            raise InputError("exact quantities need a finite activity")
        logz = poly.log_Z(t)
        rows.append([t, logz, logz / net.n if net.n else 0.0, poly.energy(t), exact_M(poly)])
    record.outputs = {"coeffs": poly.coeffs, "rows": rows}
    text = csv_text(["t", "log_Z", "free_entropy", "energy", "M"], rows)
    return text, EXIT_OK


def _edge_rows(net, sol):
    x = sol.estimate
    p = edge_probabilities(net, x, sol.t) if math.isfinite(sol.t) else [None] * net.n_edges
    rows = []
    for e, (u, v) in enumerate(net.edges.tolist()):
        rows.append([u, v, x[2 * e], x[2 * e + 1], p[e]])
    return rows


def cmd_bp(args, record):
    net = read_network(args.network)
    if math.isinf(args.t):
        sol = solve_infinite_activity(net, max_iters=args.iters, tol=args.tol)
        value = rank_estimate(net, sol)
        summary = {"t": math.inf, "energy": value, "rank_estimate": value}
    else:
        sol = solve_cavity(net, args.t, max_iters=args.iters, tol=args.tol)
        value = energy_at(net, sol).total if sol.converged else None
        summary = {"t": args.t, "energy": value}
    summary.update(gap=sol.gap, iterations=sol.iterations, converged=sol.converged)
    record.outputs = summary
    code = EXIT_OK if sol.converged else EXIT_NOT_CONVERGED
    if args.format == "json":
        return None, code
    return csv_text(["u", "v", "x_uv", "x_vu", "p_edge"], _edge_rows(net, sol)), code


def cmd_compare(args, record):
    net = read_network(args.network)
    t = args.t
    poly = partition_polynomial(net)
    sol = solve_cavity(net, t, max_iters=args.iters, tol=args.tol)
    if not sol.converged:
        record.outputs = {"gap": sol.gap, "converged": False}
        return csv_text(["quantity", "exact", "cavity", "abs_diff"], []), EXIT_NOT_CONVERGED
    rep = energy_at(net, sol)
    small = [i for i in range(net.n) if net.degrees[i] <= 20]
    exact_marg = exact_marginals(net, [t], small)[0]
    max_marg = 0.0
    for i in small:
        max_marg = max(max_marg, float(np.abs(exact_marg[i] - marginal(net, sol, i)).max()))
    exact_p = []
    for e, (u, v) in enumerate(net.edges.tolist()):
        pm = exact_marg.get(u)
        slot = int(net.arc_slot[2 * e])
        if pm is None:
            exact_p.append(math.nan)
        else:
            exact_p.append(float(pm[(np.arange(len(pm)) >> slot) & 1 == 1].sum()))
    max_edge = float(np.max(np.abs(np.array(exact_p) - rep.per_edge))) if net.n_edges else 0.0
    fe = free_entropy(net, t, tol=args.fe_tol)
    inf_sol = solve_infinite_activity(net)
    M_bp = rank_estimate(net, inf_sol)
    e_exact = poly.energy(t)
    logz = poly.log_Z(t) / net.n
    M = exact_M(poly)
    rows = [
        ["energy", e_exact, rep.total, abs(e_exact - rep.total)],
        ["free_entropy", logz, fe.value, abs(logz - fe.value)],
        ["M", M, M_bp, abs(M - M_bp)],
        ["max_edge_probability_diff", 0.0, max_edge, max_edge],
        ["max_marginal_diff", 0.0, max_marg, max_marg],
    ]
    record.outputs = {"rows": rows, "is_forest": is_forest(net), "gap": sol.gap}
    return csv_text(["quantity", "exact", "cavity", "abs_diff"], rows), EXIT_OK


def cmd_sweep(args, record):
    net = read_network(args.network)
    if args.t_grid:
        grid = [float(v) for v in args.t_grid.split(",")]
    else:
        grid = np.geomspace(args.t_min, args.t_max, args.points).tolist()
    poly = partition_polynomial(net) if net.n_edges <= MAX_EDGES else None
    rows = []
    code = EXIT_OK
    for t in grid:
        # every activity starts from the zero configuration
        sol = solve_cavity(net, t, max_iters=args.iters, tol=args.tol)
        if not sol.converged:
            rows.append([t, None, poly.energy(t) / net.n if poly else None, None])
            code = EXIT_NOT_CONVERGED
            continue
        u = energy_at(net, sol).total / net.n if net.n else 0.0
        fe = free_entropy(net, t, tol=args.fe_tol).value if net.n else 0.0
        rows.append([t, u, poly.energy(t) / net.n if poly is not None and net.n else None, fe])
    record.outputs = {"rows": rows}
    return csv_text(["t", "u_bp", "u_exact", "free_entropy"], rows), code


def cmd_limit(args, record):
    spec = LimitSpec(_degree_law(args), args.b)
    rep = historical_minima(spec, grid_n=args.grid)
    out = rep.as_dict()
    out["c"] = spec.c
    if spec.pi.kind == "poisson" and args.b == 1:
        out["karp_sipser"] = karp_sipser(spec.c)
    record.outputs = out
    if args.format == "json":
        return None, EXIT_OK
    return csv_text(["s", "f", "g", "H"], limit_table(spec, args.points).tolist()), EXIT_OK


def cmd_rde(args, record):
    pi = _degree_law(args)
    traj = solve_rde(
        pi,
        args.b,
        args.s_init,
        n_pool=args.pool,
        n_iters=args.iters,
        rng=args.seed,
        exact_atoms=not args.sampled_atoms,
        early_stop=args.early_stop,
        track_M=True,
        n_eval=args.n_eval,
    )
    rows = [[n, s, m, se] for n, (s, m, se) in enumerate(zip(traj.s, traj.M, traj.M_stderr))]
    record.outputs = {
        "rows": rows,
        "non_monotone": traj.non_monotone,
        "stopped_early": traj.stopped_early,
    }
    return csv_text(["n", "s_n", "M_n", "stderr"], rows), EXIT_OK


def _build(model, n, b, seed, c=None, d=None, pi=None):
    if model == "er":
        return erdos_renyi(n, c, seed, b=b)
    if model == "regular":
        return random_regular(n, d, seed, b=b)
    return configuration_model(pi, n, seed, b=b)


def _model_args(args):
    if args.model == "er":
        if args.c is None:
            raise InputError("--model er needs --c")
        return dict(c=args.c)
    if args.model == "regular":
        if args.d is None:
            raise InputError("--model regular needs --d")
        return dict(d=args.d)
    if not args.pi:
        raise InputError("--model config needs --pi")
    return dict(pi=read_degree_distribution(args.pi))


def _limit_law(args, margs) -> DegreeDistribution:
    if args.model == "er":
        return DegreeDistribution.poisson(margs["c"])
    if args.model == "regular":
        return DegreeDistribution.point_mass(margs["d"])
    return margs["pi"]


def _ensemble_run(job):
    model, n, b, seed, margs, t, tol = job
    net = _build(model, n, b, seed, **margs)
    if math.isinf(t):
        sol = solve_infinite_activity(net, tol=tol)
        return seed, rank_estimate(net, sol) / n, sol.gap, sol.converged
    sol = solve_cavity(net, t, tol=tol)
    value = energy_at(net, sol).total / n if sol.converged else math.nan
    return seed, value, sol.gap, sol.converged


def cmd_ensemble(args, record):
    margs = _model_args(args)
    jobs = [(args.model, args.n, args.b, args.seed + k, margs, args.t, args.tol) for k in range(args.seeds)]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_ensemble_run, jobs))
    else:
        results = [_ensemble_run(j) for j in jobs]
    values = np.array([r[1] for r in results])
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    analytic = None
    if math.isinf(args.t):
        analytic = historical_minima(LimitSpec(_limit_law(args, margs), args.b)).m_b
    rows = [["run", seed, value, gap, conv] for seed, value, gap, conv in results]
    rows.append(["mean", None, mean, None, None])
    rows.append(["stddev", None, std, None, None])
    if analytic is not None:
        rows.append(["analytic", None, analytic, None, None])
        rows.append(["abs_gap", None, abs(mean - analytic), None, None])
    record.outputs = {"rows": rows, "mean": mean, "stddev": std, "analytic": analytic}
    code = EXIT_OK
    # at infinite activity a persistent envelope gap is expected on loopy graphs
    if math.isfinite(args.t) and not all(r[3] for r in results):
        code = EXIT_NOT_CONVERGED
    return csv_text(["kind", "seed", "value", "gap", "converged"], rows), code


def cmd_gen(args, record):
    margs = _model_args(args)
    net = _build(args.model, args.n, args.b, args.seed, **margs)
    record.outputs = {"n": net.n, "edges": net.n_edges}
    return save_network(net), EXIT_OK


# -- argument parsing -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default="-", help="output file ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="subgraph-cavity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--iters", type=int, default=None, help="iteration cap (default 10*diameter+1000)")

    p = sub.add_parser("exact", parents=[common], help="partition polynomial and exact quantities")
    p.add_argument("network")
    p.add_argument("--t", type=parse_activity, nargs="+", default=[1.0])
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("bp", parents=[common], help="cavity fixed point at one activity")
    p.add_argument("network")
    p.add_argument("--t", type=parse_activity, default=1.0, help="activity or 'inf'")
    solver_flags(p)
    p.set_defaults(func=cmd_bp)

    p = sub.add_parser("compare", parents=[common], help="exact oracle against the cavity method")
    p.add_argument("network")
    p.add_argument("--t", type=parse_activity, default=1.0)
    p.add_argument("--fe-tol", type=float, default=1e-7)
    solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", parents=[common], help="energy and free entropy over activities")
    p.add_argument("network")
    p.add_argument("--t-grid", help="comma-separated activities")
    p.add_argument("--t-min", type=float, default=0.1)
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--fe-tol", type=float, default=1e-7)
    solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    def law_flags(p):
        p.add_argument("--pi", help="file with degree probabilities pi_0 pi_1 ...")
        p.add_argument("--c", type=float, help="Poisson mean degree")
        p.add_argument("--d", type=int, help="regular degree")
        p.add_argument("--b", type=int, default=1)

    p = sub.add_parser("limit", parents=[common], help="large-graph limit from the degree law")
    law_flags(p)
    p.add_argument("--grid", type=int, default=10_000)
    p.add_argument("--points", type=int, default=1001)
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("rde", parents=[common], help="population dynamics for the fixed-point law")
    law_flags(p)
    p.add_argument("--s-init", type=float, required=True)
    p.add_argument("--pool", type=int, default=DEFAULT_POOL)
    p.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument("--sampled-atoms", action="store_true", help="redraw atom masses binomially")
    p.add_argument("--early-stop", action="store_true")
    p.set_defaults(func=cmd_rde)

    def model_flags(p):
        p.add_argument("--model", choices=("er", "regular", "config"), required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--c", type=float)
        p.add_argument("--d", type=int)
        p.add_argument("--pi")
        p.add_argument("--b", type=int, default=1)

    p = sub.add_parser("ensemble", parents=[common], help="cavity estimates over random graphs")
    model_flags(p)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--t", type=parse_activity, default=math.inf)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("gen", parents=[common], help="write a random network as JSON")
    model_flags(p)
    p.set_defaults(func=cmd_gen)
    return parser


def _write(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out", "format", "threads", "command")}
    record = RunRecord(command=args.command, parameters=params, seed=args.seed)
    start = time.perf_counter()
    try:
        text, code = args.func(args, record)
    except (NetworkValidationError, MeasureError, NotCavityMonotoneError, InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NotConvergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    record.wall_time = time.perf_counter() - start
    if args.format == "json" and args.command != "gen":
        text = record.to_json()
    _write(text, args.out)
    if code == EXIT_NOT_CONVERGED:
        print("warning: iteration did not converge", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
