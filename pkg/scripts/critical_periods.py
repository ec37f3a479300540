"""Critical frequency, critical period and the lower bound for a range of dimensions.

Usage: python3 scripts/critical_periods.py [--nmax 12] [-o table.csv]
"""

import argparse
import math

from exceptional_domains.bifurcation import find_bifurcation


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nmax", type=int, default=12)
    p.add_argument("-o", "--output")
    args = p.parse_args()

    rows = ["n,rho_star,T_star,T_lower,lambda1_slope,min_abs_other"]
    for n in range(4, args.nmax + 1):
        cert = find_bifurcation(n)
        bound = 2 * math.pi / math.sqrt(n - 2)
        rows.append(
            f"{n},{cert.rho_star:.17g},{cert.t_star:.17g},{bound:.17g},{cert.slope:.17g},{cert.min_abs_other:.17g}"
        )
        print(f"n={n:2d} rho*={cert.rho_star:.10f} T*={cert.t_star:.10f} bound={bound:.10f}")
    if args.output:
        with open(args.output, "w") as fh:
            fh.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
