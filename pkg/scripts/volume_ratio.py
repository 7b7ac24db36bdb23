"""|E_{T,c}| / |F_{T,c}| against T, quadrature and Monte Carlo side by side."""

import argparse

from sphere_approx.counting import Window
from sphere_approx.measure import ConeMeasureConfig, volume_E, volume_F


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--T", default="1,2,5,10,15,20,30")
    p.add_argument("--mc-samples", type=int, default=10**6)
    args = p.parse_args()
    cfg = ConeMeasureConfig(mc_samples=args.mc_samples)
    print("T,F,E_quadrature,E_mc,E_mc_se,ratio")
    for T in (float(v) for v in args.T.split(",")):
        w = Window(T, args.c)
        F = volume_F(w, n=args.n).value
        Eq = volume_E(w, n=args.n).value
        Em = volume_E(w, None, cfg, n=args.n, method="monte_carlo")
        print(f"{T},{F:.6g},{Eq:.6g},{Em.value:.6g},{Em.stderr:.2g},{Eq / F:.5f}")


if __name__ == "__main__":
    main()
