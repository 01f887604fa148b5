"""Monte Carlo band for the long-run mean of the Poisson one-step predictor.

DGP: Poisson frame, lambda = 0.93, alpha = 0.7, E[Y_1] = 1, T = 2000.
Prints quantiles of the time average of mu_{t|t-1} over replicate paths.
"""
import argparse

import numpy as np

from ewcef import Hyper, SimConfig, make_frame, simulate_dgp, spawn_seeds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()
    frame = make_frame("poisson")
    hyper = Hyper([1.0], 0.7, 0.93)
    means = []
    for s in spawn_seeds(args.seed, args.reps):
        sim = simulate_dgp(SimConfig(frame, hyper, 2000, s))
        means.append(sim.mu_pred[:, 0].mean())
    means = np.array(means)
    qs = [0.0, 0.005, 0.025, 0.5, 0.975, 0.995, 1.0]
    print(f"replicates {args.reps}: mean {means.mean():.4f} sd {means.std(ddof=1):.4f}")
    for q, v in zip(qs, np.quantile(means, qs)):
        print(f"  q{q:<6} {v:.4f}")


if __name__ == "__main__":
    main()
