"""Quadratic energy of wide plateaus against the supremum Q(K)."""
import argparse

from lrfput import PotentialFamily
from lrfput.experiments import q_testfunction_study, write_table_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, nargs="+", default=[16, 64, 256, 1024])
    ap.add_argument("--K", type=float, default=0.1)
    ap.add_argument("--alpha", type=float, default=2.0)
    ap.add_argument("--q", type=int, default=4)
    ap.add_argument("--out", default="plateau_study.csv")
    args = ap.parse_args()

    rows = q_testfunction_study(args.L, args.K, PotentialFamily(alpha=args.alpha), q=args.q)
    for r in rows:
        print(f"L = {r['L']:5d}  lower = {r['lower_bound']:.8f}  Q(W_L) = {r['Qcal_WL']:.8f}  "
              f"Q(K) = {r['Q_of_K']:.8f}  ratio = {r['Qcal_WL'] / r['Q_of_K']:.5f}")
    write_table_csv(args.out, rows, ("L", "Qcal_WL", "lower_bound", "Q_of_K"))


if __name__ == "__main__":
    main()
