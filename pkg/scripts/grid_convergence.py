"""Radial refinement study of the straight-cylinder solve for each stencil order.

Usage: python3 scripts/grid_convergence.py [--dim 4] [--orders 2 4 6]
"""

import argparse
import math

import numpy as np

from exceptional_domains.geometry import DomainSpec
from exceptional_domains.grid import GridConfig
from exceptional_domains.solver import boundary_flux, solve_dirichlet


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--T", type=float, default=2 * math.pi)
    p.add_argument("--orders", type=int, nargs="+", default=[2, 4, 6])
    p.add_argument("--sizes", type=int, nargs="+", default=[25, 50, 100, 200, 400])
    args = p.parse_args()

    spec = DomainSpec(args.dim, args.T)
    for order in args.orders:
        prev = None
        for n_r in args.sizes:
            cfg = GridConfig(n_r=n_r, m_tau=16, order=order)
            res = solve_dirichlet(spec, cfg)
            exact = cfg.r_nodes ** (3.0 - args.dim)
            err = float(np.max(np.abs(res.field.values - exact[:, None])))
            f_inf = float(np.max(np.abs(boundary_flux(spec, res).f_values)))
            rate = "" if prev is None else f" order={math.log2(prev / err):.2f}"
            print(f"order {order} n_r={n_r:4d} err={err:.3e} |F|={f_inf:.3e}{rate}")
            prev = err


if __name__ == "__main__":
    main()
