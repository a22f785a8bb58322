#!/usr/bin/env python3
"""Graded holonomy along a stable-leaf pair of the twisted cat cocycle as the leaf offset s shrinks."""
import argparse
import math

import numpy as np

from subres import cocyc, nform


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-max", type=int, default=50)
    ap.add_argument("--kappa", type=float, default=0.3)
    args = ap.parse_args()
    sys_ = cocyc.twisted_cat(kappa=args.kappa)
    print(f"{'s':>8s} {'|H - I|':>10s} {'|HH - I|':>10s} {'ratio':>8s}")
    for s in (1e-1, 1e-2, 1e-3, 1e-4):
        X, Y = cocyc.stable_leaf_pair(["1/7", "2/9"], s, args.t_max)
        mx, my = cocyc.cocycle_along(sys_, X), cocyc.cocycle_along(sys_, Y)
        h = nform.holonomy_graded(mx, my, args.t_max, [1, 1])
        hb = nform.holonomy_graded(my, mx, args.t_max, [1, 1])
        print(f"{s:8.0e} {np.abs(h.H - np.eye(2)).max():10.3e} {np.abs(h.H @ hb.H - np.eye(2)).max():10.2e} "
              f"{h.ratio:8.4f}")
    print(f"e^-lambda = {math.exp(-cocyc.CAT_EXPONENT):.4f}")


if __name__ == "__main__":
    main()
