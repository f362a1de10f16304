"""Ordinary least squares is biased under correlated noise while the exact MLE is not.

    python scripts/lse_inconsistency.py [--n 2000] [--m 500] [--seed 5]
"""

import argparse
import math

import numpy as np

from armle.montecarlo import ExperimentConfig, run_experiment
from armle.noise import parse_noise


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--theta", type=float, default=0.2)
    ap.add_argument("--noise", default="ar1:0.4")
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--m", type=int, default=500)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()
    cfg = ExperimentConfig((args.theta,), parse_noise(args.noise), args.n, args.m, args.seed, ("mle", "lse"))
    rep = run_experiment(cfg)
    for name in ("mle", "lse"):
        th = rep.results[name].theta_hat[:, 0]
        se = th.std(ddof=1) / math.sqrt(th.size)
        bias = th.mean() - args.theta
        print(f"{name}: mean={th.mean():.5f} bias={bias:+.5f} se={se:.5f} bias/se={bias / se:+.1f}")
    # large-N limit of the OLS estimate for AR(1) noise: (theta + a) / (1 + theta a)
    if cfg.noise.kind == "ar1":
        a = cfg.noise.param
        print(f"OLS limit (theta + a)/(1 + theta a) = {(args.theta + a) / (1 + args.theta * a):.5f}")


if __name__ == "__main__":
    main()
