"""Cavity free entropy and energy against the exact values on a small random graph."""

import argparse

import numpy as np

from subgraph_cavity.cavity import energy_at, free_entropy, solve_cavity
from subgraph_cavity.ensembles import erdos_renyi
from subgraph_cavity.exact import partition_polynomial
from subgraph_cavity.network import is_forest


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--c", type=float, default=2.0)
    ap.add_argument("--b", type=int, default=1)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()
    net = erdos_renyi(args.n, args.c, args.seed, b=args.b)
    poly = partition_polynomial(net)
    print(f"n={net.n} edges={net.n_edges} forest={is_forest(net)} M={poly.degree}")
    print(f"{'t':>9} {'u_cavity':>10} {'u_exact':>10} {'phi_cavity':>11} {'phi_exact':>10}")
    for t in np.geomspace(0.1, 100, args.points):
        u = energy_at(net, solve_cavity(net, t)).total / net.n
        phi = free_entropy(net, t).value
        print(f"{t:9.3f} {u:10.6f} {poly.energy(t) / net.n:10.6f} {phi:11.6f} {poly.log_Z(t) / net.n:10.6f}")


if __name__ == "__main__":
    main()
