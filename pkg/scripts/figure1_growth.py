"""Growth of the true/sampled maximum ratio R(T) for a diverging spiral and a stable one.

    python3 scripts/figure1_growth.py --seed 1 --csv growth.csv
"""
import argparse
import json
from dataclasses import replace

from sampled_ioss.experiments import STABLE, GrowthConfig, figure1_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--delta-max", type=int, default=25)
    ap.add_argument("--csv", help="write per-step dy and sample mask of the unstable run here")
    args = ap.parse_args()

    unstable = figure1_experiment(GrowthConfig(seed=args.seed, delta_max=args.delta_max))
    stable = figure1_experiment(replace(STABLE, seed=args.seed, delta_max=args.delta_max))
    for name, run in (("unstable", unstable), ("stable", stable)):
        print(name, json.dumps({k: round(v, 4) for k, v in run.ratio.items()}))
    print("R(150) / R(50) =", round(unstable.ratio[150] / unstable.ratio[50], 3))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(unstable.to_csv())


if __name__ == "__main__":
    main()
