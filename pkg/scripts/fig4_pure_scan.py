#!/usr/bin/env python3
"""Ground-state energy scan of the transverse-field chain: variational models
conditioned on n previous spins versus the free-fermion result."""

import argparse

from robust_vmc.cli import ExperimentConfig, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="results/pure")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--alpha", default="0.25,0.5,0.75,1.0,1.15,1.5,2.0")
    parser.add_argument("--n", default="0,1,2,3")
    args = parser.parse_args()
    config = ExperimentConfig(
        command="pure",
        alpha=tuple(float(a) for a in args.alpha.split(",")),
        T=(0.0,),
        n=tuple(int(v) for v in args.n.split(",")),
        family="transverse_field",
        seed=args.seed,
        opt_sites=10_000,
        max_iters=(40, 40, 40, 40),
        output=args.output,
    )
    run_experiment(config)
    print(f"wrote {args.output}/pure.csv")


if __name__ == "__main__":
    main()
