"""Paired heavy/Gaussian lower-bound probe repeated over several base seeds.

The slope gap is estimated from a few hundred replications of a quantized
loss, so its bootstrap lower bound moves noticeably between seeds; this
script shows how much.

    python3 scripts/lower_bound_seeds.py --seeds 0 1 2 3 --replications 300
"""

import argparse
import math

from shaperate.experiments import paired_slope_gap, run_lower_bound_probe
from shaperate.noise import ErrorLaw


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--replications", type=int, default=300)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--eps", type=float, default=0.25)
    args = ap.parse_args()
    ns = tuple(2**k for k in range(9, 14))
    print("seed  heavy   gauss   gap     lower95")
    for seed in args.seeds:
        heavy = run_lower_bound_probe(args.gamma, args.eps, ns, args.replications, base_seed=seed)
        light = run_lower_bound_probe(args.gamma, args.eps, ns, args.replications, base_seed=seed,
                                      law=ErrorLaw.gaussian(math.sqrt(2.0)))
        gap, lower = paired_slope_gap(heavy, light, seed=seed)
        print(f"{seed:4d}  {heavy.slope:+.3f}  {light.slope:+.3f}  {gap:+.3f}  {lower:+.3f}")


if __name__ == "__main__":
    main()
