"""Plot-ready data for the simulation and Kalman figures.

Writes one directory per family under --out with series.csv and predictor.csv
(lambda = 0.93, alpha in {0.70, 0.95}, T = 2000), plus kalman.csv with the
gain times weight curves for the default q grid.
"""
import argparse
import os

from ewcef.cli import main as cli

FAMILIES = [
    ("bernoulli", []),
    ("gaussian_known_sd", ["--sigma", "1"]),
    ("poisson", []),
    ("exponential", []),
    ("gaussian_zero_mean", []),
    ("pareto", ["--m", "1"]),
    ("beta", []),
    ("dirichlet", ["--d", "7"]),
    ("gaussian", []),
    ("von_mises", []),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figure_data")
    ap.add_argument("--seed", default="1")
    ap.add_argument("--T", default="2000")
    args = ap.parse_args()
    for name, extra in FAMILIES:
        for alpha in ("0.70", "0.95"):
            out = os.path.join(args.out, f"{name}_alpha{alpha}")
            code = cli(["simulate", "--frame", name, *extra, "--alpha", alpha, "--lambda", "0.93",
                        "--T", args.T, "--seed", args.seed, "--out", out])
            if code:
                raise SystemExit(code)
            print(out)
    cli(["kalman", "--T", "100", "--out", args.out])
    print(os.path.join(args.out, "kalman.csv"))


if __name__ == "__main__":
    main()
