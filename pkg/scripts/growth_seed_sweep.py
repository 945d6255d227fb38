"""How often does R(150) >= 2 R(50) across sampling seeds?"""
import argparse

import numpy as np

from sampled_ioss.experiments import growth_seed_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--delta-max", type=int, default=25)
    args = ap.parse_args()
    q = growth_seed_sweep(range(args.seeds), delta_max=args.delta_max)
    print(f"seeds: {args.seeds}")
    print(f"fraction with R(150) >= 2 R(50): {np.mean(q >= 2):.3f}")
    print(f"fraction with R(150) > R(50):    {np.mean(q > 1):.3f}")
    print("quantiles of R(150)/R(50) (10/50/90%):", np.round(np.quantile(q, [0.1, 0.5, 0.9]), 3))


if __name__ == "__main__":
    main()
