#!/usr/bin/env python3
"""Orbit-iteration deviations for A = (x/2, y/4 + x^2 + c x^3) and their fitted rates.

The super-resonant term x^3 in the y-slot has weight excess w_x = log 2, so the
deviations of N^(n) should decay like 2^-n whatever the value of c.
"""
import argparse
import math
from fractions import Fraction

from subres import nform


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=60)
    ap.add_argument("--degree", type=int, default=4)
    args = ap.parse_args()
    print(f"{'c':>6s} {'rate':>10s} {'verdict':>10s} {'-log rate':>10s}")
    for c in (Fraction(1, 4), Fraction(1), Fraction(4), Fraction(-3)):
        A = nform.Jet(({(1, 0): Fraction(1, 2)}, {(0, 1): Fraction(1, 4), (2, 0): 1, (3, 0): c}),
                      args.degree, (1, 2)).to_float()
        orb = nform.normal_form_orbit([A] * args.horizon, (1, 2), args.degree)
        print(f"{str(c):>6s} {orb.rate:10.5f} {orb.verdict:>10s} {-math.log(orb.rate):10.5f}")
    print(f"log 2 = {math.log(2):.5f}; e^-1 = {math.exp(-1):.5f}")


if __name__ == "__main__":
    main()
