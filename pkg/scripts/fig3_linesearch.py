#!/usr/bin/env python3
"""Sampled free energy along the mean-field-to-exact segment of the classical
chain at alpha = 0.5, T = 3, for increasing pseudorandom sample counts."""

import argparse

from robust_vmc.cli import ExperimentConfig, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="results/linesearch")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--x-points", type=int, default=21)
    args = parser.parse_args()
    config = ExperimentConfig(
        command="linesearch",
        alpha=(0.5,),
        T=(3.0,),
        n=(1,),
        family="classical_field",
        seed=args.seed,
        samples=(100, 1000, 10_000, 100_000),
        x_points=args.x_points,
        output=args.output,
    )
    run_experiment(config)
    print(f"wrote {args.output}/linesearch.csv")


if __name__ == "__main__":
    main()
