"""Rate loss of the parallel feedback-quantiser bank for Z1, D4 and E8.

Each lattice dimension n runs n independent copies of the source through
their own noise-shaping loops and quantises the n channel inputs jointly.

    python scripts/rate_loss_vs_dimension.py --pole 0 --D 0.5
"""
import argparse
import csv
import sys

import numpy as np

from rperp import ArModel, SimConfig, ar_to_psd, make_lattice, run_parallel_bank
from rperp.design import design_noise_shaper


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--pole", type=float, default=0.0)
    p.add_argument("--D", type=float, default=0.5)
    p.add_argument("--lattices", nargs="+", default=["Z1", "D4", "E8"])
    p.add_argument("--samples", type=int, default=250_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    psd = ar_to_psd(ArModel((args.pole,) if args.pole else (), 1.0), 8192)
    design = design_noise_shaper(psd, args.D)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["lattice", "dimension", "normalized_second_moment", "rate_loss", "rate_loss_se",
                "space_filling_loss"])
    for name in args.lattices:
        lat = make_lattice(name)
        cfg = SimConfig(channel=name, n_samples=args.samples, n_parallel=lat.dim,
                        seed=args.seed, rate_estimator="requantize")
        rep = run_parallel_bank(design, lat, cfg)
        G = lat.normalized_second_moment
        w.writerow([name, lat.dim, G, rep.rate_loss, rep.rate_loss_se,
                    0.5 * np.log2(2 * np.pi * np.e * G)])


if __name__ == "__main__":
    main()
