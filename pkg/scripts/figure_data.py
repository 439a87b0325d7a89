"""Parametric (alpha, r'(1)) curves for the ratio-power family, lam = mu = 3."""

import argparse
from pathlib import Path

from herding.closed_forms import figure_endpoints, figure_sweep, trichotomy, write_figure_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.8, 1.5, 2.5])
    ap.add_argument("--out", type=Path, default=Path("results/figure.csv"))
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    rows = figure_sweep(args.gammas, 3.0, 3.0)
    write_figure_csv(rows, args.out)
    for g in args.gammas:
        a_max, s_max = figure_endpoints(g)
        last = max((r for r in rows if r.gamma == g), key=lambda r: r.x)
        print(f"gamma={g:<4} {trichotomy(g):<30} alpha_max={a_max:<20.12g} r'(1)_max={s_max:<20.12g}"
              f" last grid point x={last.x:.7f} r'(1)={last.r_prime_1:.4g}")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
