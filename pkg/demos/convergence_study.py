"""How many rounds does the alternating map-and-weight design take?

The covariance-intersection map design alternates two coupled solves until
the objective stops moving.  This script samples random Wishart covariance
pairs and histograms the iteration count per (dimension, tolerance) cell.
"""

import argparse

from drfuse.scenarios.convergence import ConvergenceStudyConfig, run_convergence_study


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=400)
    parser.add_argument("--m", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cfg = ConvergenceStudyConfig(
        nx_values=(6, 9),
        epsilons=(1e-3, 1e-4),
        m_values=(args.m,),
        trials=args.trials,
        seed=args.seed,
    )
    results = run_convergence_study(cfg)

    for (nx, eps, m), stats in results.items():
        print(f"\nnx={nx}  epsilon={eps:g}  m={m}  "
              f"(mean {stats.mean:.2f}, std {stats.std:.2f}, mode {stats.mode})")
        peak = stats.counts.max()
        for rounds, count in enumerate(stats.counts):
            if count == 0:
                continue
            bar = "#" * max(1, int(40 * count / peak))
            print(f"  {rounds:3d} rounds  {bar} {count}")


if __name__ == "__main__":
    main()
