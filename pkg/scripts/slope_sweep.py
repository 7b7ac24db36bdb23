"""Slope of N_{T,c}(alpha) against T over random targets, repeated over seeds.

    python3 scripts/slope_sweep.py --n 2 --T 2:12 --seeds 10
"""

import argparse

import numpy as np

from sphere_approx.cli import ExperimentConfig, sweep_table


def grid(text):
    if ":" in text:
        lo, hi = (float(v) for v in text.split(":"))
        return tuple(np.arange(lo, hi + 0.5))
    return tuple(float(v) for v in text.split(","))


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--c", default="1,2")
    p.add_argument("--T", default="2:12", help="lo:hi (unit steps) or a comma list")
    p.add_argument("--alphas", type=int, default=10)
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()
    cs = tuple(float(v) for v in args.c.split(","))
    T = grid(args.T)
    print("seed,c,mean_slope,rel_sd,min_r2,mean_slope_primitive,ratio_to_first_c")
    for seed in range(args.seeds):
        tab = sweep_table(ExperimentConfig(n=args.n, c_list=cs, T_grid=T, alpha_count=args.alphas, seed=seed))
        base = None
        for c in cs:
            s = np.array([r["slope"] for r in tab[c]])
            sp = np.array([r["slope_primitive"] for r in tab[c]])
            r2 = min(r["r2"] for r in tab[c])
            base = s.mean() if base is None else base
            print(f"{seed},{c},{s.mean():.4f},{s.std(ddof=1) / s.mean():.3f},{r2:.3f},{sp.mean():.4f},{s.mean() / base:.3f}")


if __name__ == "__main__":
    main()
