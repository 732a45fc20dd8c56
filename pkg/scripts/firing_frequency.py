"""Empirical firing rate of the global/local/combined transforms over a grid of probabilities."""

import argparse

from rcd.cli import firing_stats
from rcd.transforms import AugmentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("p,p_r,transform,configured,empirical,ci95,inside")
    for p in (0.0, 0.05, 0.2, 0.5):
        for p_r in (0.0, 0.4, 0.7, 1.0):
            cfg = AugmentConfig(p=p, p_r=p_r, seed=args.seed)
            for name, conf, emp, _, ci in firing_stats(cfg, args.trials, [(64, 128)]):
                # lgt can fall short of p_r when rectangle sampling exhausts its retries
                print(f"{p},{p_r},{name},{conf:.4f},{emp:.4f},{ci:.4f},{abs(emp - conf) <= ci}")


if __name__ == "__main__":
    main()
