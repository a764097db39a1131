"""R(D) and R_perp(D) for AR(1) sources, printed as CSV.

    python scripts/rdf_curves.py --poles 0 0.5 0.9 --num 40
"""
import argparse
import csv
import sys

import numpy as np

from rperp import ArModel, ar_to_psd, shannon_at_distortion, uncorr_at_distortion


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--poles", type=float, nargs="+", default=[0.0, 0.5, 0.9])
    p.add_argument("--num", type=int, default=40)
    p.add_argument("--grid", type=int, default=4096)
    args = p.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["pole", "D_over_var", "D", "R_shannon", "R_perp", "penalty"])
    for a in args.poles:
        psd = ar_to_psd(ArModel((a,) if a else (), 1.0), args.grid)
        for frac in np.geomspace(1e-3, 0.99, args.num):
            D = frac * psd.variance
            r = shannon_at_distortion(psd, D)[0].rate
            rp = uncorr_at_distortion(psd, D)[0].rate
            w.writerow([a, frac, D, r, rp, rp - r])


if __name__ == "__main__":
    main()
