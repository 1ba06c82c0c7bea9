"""Build the resonant family for a range of n and print ratio against the certified bound.

    python3 scripts/run_counterexample.py --n-max 64 --lam 1 --window resonant
"""

import argparse

from oseenlab.counterexample import (blowup_ratio, build_item, certification_threshold,
                                     divergence_probe)
from oseenlab.errors import SmallS


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-max", type=int, default=64)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--ratio", default="sqrt2")
    ap.add_argument("--window", default="resonant", choices=["resonant", "wide"])
    ap.add_argument("--divergence", type=int, default=0, help="also sum the series up to this n")
    args = ap.parse_args()

    print(f"certification threshold n >= {certification_threshold(args.lam):.3f}")
    print(f"{'n':>4} {'k':>8} {'ell':>8} {'sigma':>10} {'ratio':>10} {'bound':>10}  status")
    for n in range(1, args.n_max + 1):
        try:
            item = build_item(n, args.ratio, 1, args.lam, window=args.window)
        except SmallS:
            print(f"{n:>4} rejected (|s_n| too small)")
            continue
        b = blowup_ratio(item)
        status = ("ok" if b.passed else "FAIL") if b.threshold_met else "uncertified"
        print(f"{n:>4} {item.k_n:>8} {item.ell_n:>8} {item.sigma_n:>10.5f} {b.ratio:>10.4f} "
              f"{b.certified_lower:>10.4f}  {status}")

    if args.divergence:
        for variant in ("A_norm", "L2_norm"):
            tab = divergence_probe(args.ratio, 1, args.lam, args.divergence, variant, args.window)
            print(f"{variant}: certified sum {tab.certified_sum:.6f}, direct sum {tab.direct_sum:.6f}")


if __name__ == "__main__":
    main()
