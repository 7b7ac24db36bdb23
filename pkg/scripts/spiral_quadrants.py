"""Quadrant fractions of approximation directions on S^1 (n = 2), batch by batch.

Each batch uses the targets the CLI draws for that seed; the pooled line
aggregates every batch.
"""

import argparse

import numpy as np

from sphere_approx.cli import ExperimentConfig
from sphere_approx.counting import Window, directional_counts, quadrants


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--c", type=float, default=1.5)
    p.add_argument("--T", type=float, default=12.0)
    p.add_argument("--alphas", type=int, default=10)
    p.add_argument("--seeds", type=int, default=30)
    p.add_argument("--tol", type=float, default=0.05)
    args = p.parse_args()
    w = Window(args.T, args.c)
    pooled = np.zeros(4)
    passed = 0
    print("seed,q1,q2,q3,q4,directions,max_dev")
    for seed in range(args.seeds):
        tot = np.zeros(4)
        nonpolar = 0
        for a in ExperimentConfig(n=2, alpha_count=args.alphas, seed=seed).targets():
            counts, npol, _ = directional_counts(a, w, quadrants())
            tot += counts
            nonpolar += npol
        fr = tot / nonpolar
        dev = float(np.max(np.abs(fr - 0.25)))
        passed += dev <= args.tol
        pooled += tot
        print(f"{seed}," + ",".join(f"{v:.3f}" for v in fr) + f",{nonpolar},{dev:.3f}")
    print(f"# pooled fractions {np.round(pooled / pooled.sum(), 4).tolist()}; {passed}/{args.seeds} batches within {args.tol}")


if __name__ == "__main__":
    main()
