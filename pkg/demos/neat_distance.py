"""Structural distance and fitness sharing on three hand-built genomes.

Builds a minimal genome plus two structural variants, prints the pairwise
distances, the species they fall into at a given threshold, and the
adjusted fitness each receives.

    python3 demos/neat_distance.py --delta-t 0.3
"""
import argparse

import numpy as np

from rnnevo import EdgeGene, InnovationCounter, NeatConfig, minimal_genome, structural_distance
from rnnevo.neat import adjusted_fitness


def variants():
    counter = InnovationCounter()
    base = minimal_genome(2, 1, np.random.default_rng(0), counter)
    base.fitness = 0.20
    o = base.output_ids[0]

    looped = base.copy(fitness=0.15)
    eid = counter.edge_id(o, o, 1)
    looped.edges[eid] = EdgeGene(eid, o, o, 0.5, True, 1)

    far = looped.copy(fitness=0.30)
    for skip in (2, 3, 4):
        eid = counter.edge_id(o, o, skip)
        far.edges[eid] = EdgeGene(eid, o, o, -0.4, True, skip)
    return {"base": base, "looped": looped, "far": far}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--delta-t", type=float, default=0.3)
    args = parser.parse_args()
    cfg = NeatConfig(delta_t=args.delta_t)

    genomes = variants()
    names = list(genomes)
    print("pairwise distance (c1=1, c2=1, c3=0.4)")
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            d = structural_distance(genomes[a], genomes[b], cfg.c1, cfg.c2, cfg.c3)
            print(f"  {a:>6s} - {b:<6s} {d:.3f}  {'same niche' if d <= cfg.delta_t else ''}")

    population = list(genomes.values())
    print(f"\nadjusted fitness at delta_t = {cfg.delta_t} (MSE; culling removes the highest)")
    for name, g in genomes.items():
        print(f"  {name:>6s} raw {g.fitness:.3f} -> {adjusted_fitness(g, population, cfg):.3f}")


if __name__ == "__main__":
    main()
