"""Long simulation in the condensed phase next to the mean-field prediction.

Ratio-power weights with gamma = 2 and alpha/lam above the bound. Prints the
top score, the mean score, the escaped fraction of the mean field and the
stationary prediction for the escaping density.
"""

import argparse

import numpy as np

from herding.distributions import degenerate
from herding.meanfield import MeanFieldState, ModelParams, integrate
from herding.policies import RatioPower
from herding.simulator import compare_to_meanfield, simulate
from herding.stationary import solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=2.0)
    ap.add_argument("--ratio", type=float, default=1.0, help="alpha / lambda")
    ap.add_argument("--players", type=int, default=400)
    ap.add_argument("--t-end", type=float, default=300.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--window", type=int, default=400, help="mean-field score window")
    args = ap.parse_args()
    z = degenerate(1)
    pol = RatioPower(args.gamma)
    p = ModelParams(3.0, 3.0 * args.ratio, 3.0)
    sol = solve(p, pol, z, z)
    print(f"stationary regime {sol.regime}: delta={sol.delta:.6f} pi_bar={sol.pi_bar:.6f} r(1)={sol.r1_total:.6f}")
    emp = simulate(args.players, p, pol, z, z, args.t_end, seed=args.seed)
    mf = integrate(MeanFieldState.empty(args.window), p, pol, z, z, args.t_end)
    rep = compare_to_meanfield(emp, mf, threshold=50)
    for k in np.linspace(0, len(emp.t) - 1, 7).astype(int):
        print(f"t={emp.t[k]:6.0f} top={emp.top_score[k]:5d} mean={emp.mean_score[k]:7.3f} "
              f"above 50: sim {rep.empirical_tail[k]:.4f} mean-field {rep.meanfield_tail[k]:.4f} "
              f"escaped(mf) {mf.escaped[k]:.4f}")
    print(f"herding flag: {rep.herding}; events {emp.stats}")


if __name__ == "__main__":
    main()
