"""Sweep K for an inverse-square chain and compare c with pi / (1 - 2K / nu^2).

The closed form is an empirical observation of the computed family, reported
here as a relative deviation per row.
"""
import argparse
import math

from lrfput import Grid, PotentialFamily, SolverConfig
from lrfput.experiments import sweep_k, write_sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3, 0.4, 0.45])
    ap.add_argument("--q", type=int, default=16)
    ap.add_argument("--R", type=float, default=60.0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="speed_law.csv")
    args = ap.parse_args()

    fam = PotentialFamily(alpha=2.0)
    rows = sweep_k(args.K, fam, SolverConfig(K=args.K[0], grid=Grid(args.q, args.R)), jobs=args.jobs)
    for r in rows:
        law = math.pi / r.delta
        print(f"K = {r.K:.3f}  c = {r.c:.8f}  pi/delta = {law:.8f}  rel dev = {r.c / law - 1:+.2e}"
              f"  2c^2 - P/K = {r.speed_bound_slack:.4f}")
    write_sweep_csv(args.out, rows)


if __name__ == "__main__":
    main()
