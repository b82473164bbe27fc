"""Approach K -> nu^2/2 and track the distance to the box profile nu * chi_[-1/2, 1/2]."""
import argparse

from lrfput import Grid, PotentialFamily, SolverConfig
from lrfput.experiments import high_energy_sweep, smallest_delta, write_sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.02])
    ap.add_argument("--q", type=int, default=129, help="odd q puts the box edges on cell edges")
    ap.add_argument("--R", type=float, default=60.0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="high_energy.csv")
    args = ap.parse_args()

    fam = PotentialFamily(alpha=2.0)
    cfg = SolverConfig(K=0.4, grid=Grid(args.q, args.R))
    rows = high_energy_sweep(args.delta, fam, cfg, jobs=args.jobs)
    for r in rows:
        print(f"delta = {r.delta:.3f}  c = {r.c:10.4f}  eps1 = {r.eps1:.6f}  "
              f"|W - W0| = {r.l2_dist_to_W0:.5f}  identity residual = {r.direct_identity_residual:.2e}"
              f"  [{r.status}]")
    print(f"smallest delta reached: {smallest_delta(rows)}")
    write_sweep_csv(args.out, rows)


if __name__ == "__main__":
    main()
