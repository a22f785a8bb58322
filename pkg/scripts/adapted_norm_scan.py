#!/usr/bin/env python3
"""Worst contraction ratio and envelope growth of the adapted norm for the cat map over a range of eps."""
import argparse
import math

import numpy as np

from subres import cocyc
from subres.rng import SplitMix64


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=1000)
    ap.add_argument("--vectors", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    tr = cocyc.make_trace(cocyc.cat_map(), ["1/7", "2/9"], args.horizon)
    r = SplitMix64(args.seed)
    V = np.array([[r.normal(), r.normal()] for _ in range(args.vectors)])
    print(f"{'eps':>6s} {'worst':>8s} {'e^-eps':>8s} {'viol':>5s} {'max env':>9s} {'slope':>8s}")
    for eps in (0.01, 0.05, 0.1, 0.3, 0.6):
        an = cocyc.adapted_norm(tr, eps)
        res = cocyc.contraction_check(an, V)
        env = [math.log(an.envelope(n)) for n in range(len(an))]
        tmp = cocyc.check_tempered(env, eps)
        print(f"{eps:6.2f} {res['worst_ratio']:8.4f} {math.exp(-eps):8.4f} {res['violations']:5d} "
              f"{math.exp(max(env)):9.3f} {tmp.tail_slope:8.2e}")


if __name__ == "__main__":
    main()
