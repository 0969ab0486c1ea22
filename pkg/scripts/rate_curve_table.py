"""Print the large-deviation rate curve at several beta as a plot-ready CSV table."""
import argparse
import csv
import sys

import numpy as np

from cbe.validation import rate_curve_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--betas", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    ap.add_argument("--points", type=int, default=34)
    args = ap.parse_args()
    xs = list(np.linspace(0.02, 0.66, args.points)) + [0.666]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["beta", "x", "theta_inv", "rate"])
    for beta in args.betas:
        for r in rate_curve_rows(beta, xs):
            w.writerow([beta] + [repr(float(r[k])) for k in ("x", "theta_inv", "rate")])


if __name__ == "__main__":
    main()
