"""Growth of N_{T,c}(alpha) on S^1 (n = 1): all points against primitive points.

Multiples k(p, q) of a primitive approximation with ||q alpha - p|| = d stay
inside the window while k < c/d, so totals pick up a harmonic sum per point and
grow faster than T; primitive counts grow linearly.
"""

import argparse

import numpy as np

from sphere_approx.counting import count_table


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--T", default="6,8,10,12,14,16,18")
    p.add_argument("--alphas", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    T = [float(v) for v in args.T.split(",")]
    rng = np.random.default_rng(args.seed)
    tot = np.zeros(len(T))
    prim = np.zeros(len(T))
    for _ in range(args.alphas):
        a = rng.standard_normal(2)
        tab = count_table(a / np.linalg.norm(a), [args.c], T, cross_check=False)
        tot += tab.total[0]
        prim += tab.primitive[0]
    print("T,mean_total,mean_primitive,total_over_T,primitive_over_T")
    for t, a, b in zip(T, tot / args.alphas, prim / args.alphas):
        print(f"{t},{a:.1f},{b:.1f},{a / t:.3f},{b / t:.3f}")


if __name__ == "__main__":
    main()
