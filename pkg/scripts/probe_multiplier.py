"""Sampled sup of the shifted multiplier ratio for a few reduced shifts.

The bound 4 (1 + lam^2/|s|) is printed next to each sup; the sup scales like
lam^2/|s| with a larger constant, so the last column shows sup * |s| / lam^2.
"""

import argparse

from oseenlab.core import Params
from oseenlab.solver import ProbeBox, marcinkiewicz_probe


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--omega", type=float, default=1.0)
    ap.add_argument("--shifts", default="0.5,0.05,0.005")
    ap.add_argument("--points", type=int, default=100_000)
    args = ap.parse_args()

    box = ProbeBox(n_points=args.points)
    print(f"{'s':>8} {'sampled':>12} {'refined':>12} {'4(1+l^2/s)':>12} {'sup*s/l^2':>10}")
    for s in (float(x) for x in args.shifts.split(",")):
        rep = marcinkiewicz_probe(Params(args.lam, args.omega, s=s), box)
        print(f"{s:>8g} {rep.sup_ratio:>12.4f} {rep.sup_ratio_refined:>12.4f} "
              f"{4 * (1 + args.lam ** 2 / s):>12.4f} {rep.sup_ratio_refined * s / args.lam ** 2:>10.4f}")


if __name__ == "__main__":
    main()
