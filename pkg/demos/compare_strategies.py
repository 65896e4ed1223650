"""Small head-to-head: baseline islands vs. extinction/repopulation on sine_mix.

Runs a handful of short trials per strategy, prints each final validation MSE,
then the worst/avg/best summary with a Mann-Whitney comparison against the
baseline.  Takes about a minute on one core with the defaults below.

    python3 demos/compare_strategies.py --trials 4 --budget 600
"""
import argparse

from rnnevo import ExtinctionPolicy, RunConfig, run, summarize, synthetic_series
from rnnevo.islands import REPEAT_ALLOWED


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=4)
    parser.add_argument("--budget", type=int, default=600)
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    data = synthetic_series("sine_mix", length=300)
    policy = ExtinctionPolicy(frequency=100, repop_mutations=2, repeat_rule=REPEAT_ALLOWED)
    finals = {"baseline_islands": [], "extinction": []}
    for strategy in finals:
        for trial in range(args.trials):
            cfg = RunConfig(strategy=strategy, genome_budget=args.budget,
                            worker_count=args.workers, rng_seed=trial, extinction=policy)
            record = run(cfg, data)
            finals[strategy].append(record.final_fitness)
            print(f"{strategy:17s} trial {trial}: seed MSE {record.seed_fitness:.4f} "
                  f"-> best {record.final_fitness:.5f}  ({record.wall_time:.1f}s)")

    print()
    print(summarize(finals, baseline="baseline_islands").table())


if __name__ == "__main__":
    main()
