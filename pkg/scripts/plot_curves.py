"""Print learning curves (median J per kappa and iteration) from a sweep CSV.

Plotting is left to external tools; this emits a tidy table suitable for them.
"""

from __future__ import annotations

import argparse
from collections import defaultdict

import numpy as np

from netsac.experiment import read_results


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="sweep CSV")
    args = parser.parse_args()
    curves: dict[tuple[int, int], list[float]] = defaultdict(list)
    for row in read_results(args.csv):
        curves[(row["kappa"], row["m"])].append(row["eval_J"])
    print("kappa,m,median_J,seeds")
    for (kappa, m), js in sorted(curves.items()):
        print(f"{kappa},{m},{np.median(js):.6f},{len(js)}")


if __name__ == "__main__":
    main()
