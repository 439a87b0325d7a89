"""Limit of the cumulative recursion across alpha for f(x) = x**c.

Checks the iterated limit against the closed-form threshold
alpha theta'(1) (f'(1) - 1) <= lam phi'(1) on a grid of alpha.
"""

import argparse

import numpy as np

from herding.distributions import degenerate
from herding.meanfield import ModelParams
from herding.policies import CumulativeF
from herding.stationary import cumulative_fixed_point


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--c", type=float, default=2.0)
    ap.add_argument("--alphas", type=float, nargs="+", default=list(np.round(np.linspace(0.25, 3.0, 12), 4)))
    args = ap.parse_args()
    z = degenerate(1)
    f = CumulativeF.power(args.c)
    print(f"threshold alpha <= {1.0 / (args.c - 1.0):.6g}")
    for a in args.alphas:
        res = cumulative_fixed_point(ModelParams(1.0, a, 1.0), f, z, z)
        print(f"alpha={a:<7g} P_inf={res.P_inf:.12f} ergodic={res.ergodic} iterations={res.iterations}")


if __name__ == "__main__":
    main()
