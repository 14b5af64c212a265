"""Population dynamics started at every root of f o f, with M(P) against H at the limit pools."""

import argparse

from subgraph_cavity.analytic import H, LimitSpec, historical_minima
from subgraph_cavity.ensembles import DegreeDistribution
from subgraph_cavity.rde import M_of, cluster_pools, solve_rde


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--c", type=float, help="Poisson mean (default: 3-regular)")
    ap.add_argument("--b", type=int, default=1)
    ap.add_argument("--pool", type=int, default=100_000)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    pi = DegreeDistribution.poisson(args.c) if args.c else DegreeDistribution.point_mass(3)
    spec = LimitSpec(pi, args.b)
    rep = historical_minima(spec)
    print(f"roots of f o f: {[round(r, 6) for r in rep.roots]}")
    print(f"historical minima: {[round(r, 6) for r in rep.historical_minima]}  m_b = {rep.m_b:.6f}")
    finals = []
    for k, s in enumerate(rep.roots):
        traj = solve_rde(pi, args.b, s, n_pool=args.pool, n_iters=args.iters, rng=args.seed + k)
        finals.append(traj.final)
        est = M_of(traj.final, pi, args.b, args.pool, args.seed + 1000 + k)
        print(
            f"s_init={s:.6f}  s_final={traj.s[-1]:.6f}  pool mean={traj.final.mean():.4f}  "
            f"M={est.mean:.6f} +- {est.stderr:.1e}  H(s_init)={float(H(spec, s)):.6f}"
        )
    print(f"distinct limit pools: {len(cluster_pools(finals))}")


if __name__ == "__main__":
    main()
