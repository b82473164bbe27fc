"""Wave speed under grid refinement and the observed order of convergence."""
import argparse
import csv
import math

from lrfput import Grid, PotentialFamily, SolverConfig, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=float, default=0.2)
    ap.add_argument("--alpha", type=float, default=2.0)
    ap.add_argument("--R", type=float, default=60.0)
    ap.add_argument("--q", type=int, nargs="+", default=[4, 8, 16, 32])
    ap.add_argument("--out", default="grid_convergence.csv")
    args = ap.parse_args()

    fam = PotentialFamily(alpha=args.alpha)
    rows = []
    for q in args.q:
        sol = solve(SolverConfig(K=args.K, grid=Grid(q, args.R)), fam)
        rows.append((q, sol.c, sol.P, sol.residual["l2"], sol.iterations))
        print(f"q = {q:4d}  c = {sol.c:.12f}  P = {sol.P:.12f}  iterations = {sol.iterations}")
    # successive differences shrink by 2^p for an order-p scheme
    for a, b, c in zip(rows, rows[1:], rows[2:]):
        p = math.log2(abs(a[1] - b[1]) / abs(b[1] - c[1]))
        print(f"observed order from q = {a[0]}, {b[0]}, {c[0]}: {p:.2f}")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "c", "P", "residual_l2", "iterations"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
