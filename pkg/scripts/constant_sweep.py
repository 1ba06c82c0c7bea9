"""Observed estimate ratio as s approaches omega*Z, next to the cubic ceiling.

Writes a CSV to stdout: s, dist, observed ratio, ceiling.
"""

import argparse
import csv
import sys

from oseenlab.core import SpectralGrid
from oseenlab.estimates import constant_sweep, counterexample_sweep
from oseenlab.profiles import gaussian_poly


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--omega", type=float, default=1.0)
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--grid-n", type=int, default=17)
    ap.add_argument("--grid-l", type=float, default=4.0)
    ap.add_argument("--family", action="store_true", help="use the resonant family instead")
    args = ap.parse_args()

    out = csv.writer(sys.stdout, lineterminator="\n")
    if args.family:
        out.writerow(["n", "dist", "observed_ratio", "certified_lower", "ceiling"])
        for r in counterexample_sweep([2 ** j for j in range(3, 3 + args.steps)], args.lam):
            out.writerow([r.n, f"{r.dist:.17g}", f"{r.observed_ratio:.17g}",
                          f"{r.certified_lower:.17g}", f"{r.predicted_ceiling:.17g}"])
        return
    grid = SpectralGrid(args.grid_l, args.grid_n)
    s_list = [args.omega * (1 - 2.0 ** -j) for j in range(1, args.steps + 1)]
    rows = constant_sweep(gaussian_poly(0), args.lam, args.omega, s_list, grid, 16)
    out.writerow(["s", "dist", "observed_ratio", "ceiling"])
    for r in rows:
        out.writerow([f"{r.s:.17g}", f"{r.dist:.17g}", f"{r.observed_ratio:.17g}",
                      f"{r.predicted_ceiling:.17g}"])


if __name__ == "__main__":
    main()
