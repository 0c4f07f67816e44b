"""Rank all 256 elementary rules by compressed length of their space-time diagram.

    python demos/eca_ranking.py [--width 512]
"""
import argparse

import numpy as np

from complexca.ca import eca_rule, eca_spec, simulate, single_cell
from complexca.complexity import compressed_length, kmeans_1d


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--width", type=int, default=512)
    ap.add_argument("--clusters", type=int, default=4)
    args = ap.parse_args()
    spec = eca_spec(args.width)
    lengths = np.array([compressed_length(simulate(single_cell(spec), eca_rule(n), args.width - 1).data)
                        for n in range(256)])
    labels, centers = kmeans_1d(lengths, args.clusters)
    order = np.argsort(-lengths, kind="stable")
    print("top 10 rules by compressed length:")
    for n in order[:10]:
        print(f"  rule {n:3d}  {lengths[n]:6d} bytes  cluster {labels[n]}")
    for c, center in enumerate(centers):
        members = np.flatnonzero(labels == c)
        print(f"cluster {c}: center {center:8.1f} bytes, {members.size} rules, e.g. {members[:8].tolist()}")


if __name__ == "__main__":
    main()
