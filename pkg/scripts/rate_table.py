#!/usr/bin/env python3
"""Tabulate the minimax rate r_n(sigma) and its regime boundaries."""
import argparse

import numpy as np

from dispersal.experiments import RateParams, rate_boundaries, rate_fn


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=float, default=2.0)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--points", type=int, default=21)
    args = ap.parse_args()

    b = rate_boundaries(args.s, args.n)
    print("regime boundaries (log_n sigma):", ", ".join(f"{np.log(x) / np.log(args.n):.4f}" for x in b))
    print(f"{'tau':>7} {'sigma':>12} {'rate':>12} {'log_n rate':>11}")
    for tau in np.linspace(-2.0, 0.0, args.points):
        sigma = args.n ** tau
        r = rate_fn(RateParams(args.s, args.n, sigma))
        print(f"{tau:7.3f} {sigma:12.4e} {r:12.6f} {np.log(r) / np.log(args.n):11.4f}")


if __name__ == "__main__":
    main()
