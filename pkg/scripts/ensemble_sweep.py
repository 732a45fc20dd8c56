"""How often swapping one ensemble member for a differently-trained one lowers majority-vote error.

Prints the Monte-Carlo table, then a compact view of mean improvement per (N, err_dev).
"""

import argparse
from collections import defaultdict

from rcd.ensemble import format_sweep_csv, sweep
from rcd.imgcore import RngStream


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=5000)
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows = sweep([3, 5, 7, 9], args.m, [0.3], [0.0, 0.1, 0.2, 0.3, 0.4, 0.5], args.trials, RngStream(args.seed))
    print(format_sweep_csv(rows), end="")

    table = defaultdict(dict)
    for r in rows:
        table[r.N][r.err_dev] = r.mean_improvement
    devs = sorted({r.err_dev for r in rows})
    print("\nmean improvement (base err 0.3)")
    print("N   " + " ".join(f"{d:>8.1f}" for d in devs))
    for n in sorted(table):
        print(f"{n:<3} " + " ".join(f"{table[n][d]:>8.4f}" for d in devs))


if __name__ == "__main__":
    main()
