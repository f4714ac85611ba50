"""Witness regret against three priors over point masses on eventually-zero sequences.

    python3 scripts/run_lower_bound.py -K 10 --tsv results/lower_bound.tsv
"""

import argparse
import sys
from pathlib import Path

from bayes_regret.adversary import geometric_dirac_prior, single_delta_prior, theta_curve, uniform_dirac_prior


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-K", type=int, default=10)
    ap.add_argument("--ratio", type=float, default=0.5, help="geometric prior decay per support length")
    ap.add_argument("--tsv", type=Path, help="write n and one regret column per prior")
    args = ap.parse_args()

    priors = {
        "uniform": uniform_dirac_prior(args.K),
        "geometric": geometric_dirac_prior(args.K, args.ratio),
        "single": single_delta_prior(),
    }
    curves = {name: theta_curve(p, args.K) for name, p in priors.items()}

    print(f"{'n':>3} " + " ".join(f"{name + ' regret':>18} {'floor':>8}" for name in priors))
    for j in range(args.K - 1):
        cells = [f"{curves[name][j].regret_bits:18.4f} {curves[name][j].guarantee_bits:8.4f}" for name in priors]
        print(f"{j + 1:3d} " + " ".join(cells))

    if args.tsv:
        args.tsv.parent.mkdir(parents=True, exist_ok=True)
        rows = ["n\t" + "\t".join(priors)]
        rows += [f"{j + 1}\t" + "\t".join(repr(curves[name][j].regret_bits) for name in priors)
                 for j in range(args.K - 1)]
        args.tsv.write_text("\n".join(rows) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
