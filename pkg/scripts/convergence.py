"""Distance between the finite-N game and its mean-field limit as N grows.

Uniform selection, lam = mu = alpha = 1, unit increments. For each N the
median over seeds of the worst-in-time sup-norm gap is reported together
with its product with sqrt(N), which should level off.
"""

import argparse
import csv
import math
import time
from pathlib import Path

import numpy as np

from herding.distributions import degenerate
from herding.meanfield import MeanFieldState, ModelParams, integrate
from herding.policies import Uniform
from herding.simulator import compare_to_meanfield, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--players", type=int, nargs="+", default=[50, 100, 200, 400, 800, 1600, 3200])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--t-end", type=float, default=100.0)
    ap.add_argument("--out", type=Path, default=Path("results/convergence.csv"))
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    z = degenerate(1)
    p = ModelParams(1.0, 1.0, 1.0)
    mf = integrate(MeanFieldState.empty(200), p, Uniform(), z, z, args.t_end)
    rows = []
    for N in args.players:
        t0 = time.perf_counter()
        reps = [compare_to_meanfield(simulate(N, p, Uniform(), z, z, args.t_end, seed=s), mf)
                for s in range(args.seeds)]
        sup = float(np.median([r.max_sup_error for r in reps]))
        mass = float(np.median([r.final_relative_mass_error for r in reps]))
        rows.append((N, sup, sup * math.sqrt(N), mass))
        print(f"N={N:<6} sup={sup:.4f} sup*sqrt(N)={sup * math.sqrt(N):.3f} "
              f"mass error={mass:.3%} ({time.perf_counter() - t0:.1f}s)")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "median_sup_error", "scaled", "median_mass_error"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
