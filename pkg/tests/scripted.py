"""Deterministic extinction scenario driven without training."""
import numpy as np

from rnnevo.genome import InnovationCounter, minimal_genome
from rnnevo.islands import ExtinctionPolicy, IslandPopulation
from rnnevo.operators import EvoConfig

# fitness by island, indexed by how many times the island has been erased
FITNESS = {
    0: [0.1, 0.5, 0.6],
    1: [0.2, 0.4, 0.7],
    2: [0.9, 0.3, 0.35, 0.05],
}

EXPECTED_REPEAT = [
    "all_islands_filled generated=6",
    "extinction ordinal=1 generation_id=16 island=2 snapshot_best=0.1 island_best=0:0.1 1:0.2 2:0.9",
    "extinction ordinal=2 generation_id=26 island=2 snapshot_best=0.1 island_best=0:0.1 1:0.2 2:0.3",
    "extinction ordinal=3 generation_id=36 island=2 snapshot_best=0.1 island_best=0:0.1 1:0.2 2:0.35",
    "rejected_stale generation_id=35 island=2 epoch=36",
    "extinction ordinal=4 generation_id=46 island=1 snapshot_best=0.05 island_best=0:0.1 1:0.2 2:0.05",
    "extinction ordinal=5 generation_id=56 island=1 snapshot_best=0.05 island_best=0:0.1 1:0.4 2:0.05",
    "rejected_stale generation_id=55 island=1 epoch=56",
    "extinction ordinal=6 generation_id=66 island=1 snapshot_best=0.05 island_best=0:0.1 1:0.7 2:0.05",
]

EXPECTED_NO_REPEAT = [
    "all_islands_filled generated=6",
    "extinction ordinal=1 generation_id=16 island=2 snapshot_best=0.1 island_best=0:0.1 1:0.2 2:0.9",
    "extinction ordinal=2 generation_id=26 island=1 snapshot_best=0.1 island_best=0:0.1 1:0.2 2:0.3",
    "rejected_stale generation_id=25 island=1 epoch=26",
    "extinction ordinal=3 generation_id=36 island=0 snapshot_best=0.1 island_best=0:0.1 1:0.4 2:0.3",
    "extinction_skipped ordinal=4 generation_id=46 island_best=0:0.5 1:0.4 2:0.3",
    "extinction_skipped ordinal=5 generation_id=56 island_best=0:0.5 1:0.4 2:0.3",
    "extinction ordinal=6 generation_id=66 island=2 snapshot_best=0.1 island_best=0:0.5 1:0.4 2:0.3",
    "rejected_stale generation_id=65 island=2 epoch=66",
]


def run_scenario(repeat_rule, budget=66, seed=0):
    """Generate, score and insert one genome at a time, as a single worker would."""
    counter = InnovationCounter()
    seed_genome = minimal_genome(2, 1, np.random.default_rng(seed), counter)
    policy = ExtinctionPolicy(frequency=10, repop_mutations=2, repeat_rule=repeat_rule)
    pop = IslandPopulation(seed_genome, EvoConfig(), counter, n_islands=3, capacity=2,
                           policy=policy)
    results = []
    for gid in range(budget):
        child = pop.generate(gid, np.random.default_rng([seed, gid]))
        island = pop.islands[child.origin_island]
        child.fitness = FITNESS[island.index][len(island.erased_at)]
        results.append(pop.insert(child))
    return pop, results


# -- NEAT stagnation ---------------------------------------------------------

def three_species(counter=None):
    """Three structurally distant genomes with identical shared weights."""
    from rnnevo.genome import EdgeGene
    counter = counter or InnovationCounter()
    base = minimal_genome(2, 1, np.random.default_rng(0), counter)
    o = base.output_ids[0]
    out = [base]
    for skips in ((1, 2, 3), (4, 5, 6)):
        g = base.copy()
        for k in skips:
            eid = counter.edge_id(o, o, k)
            g.edges[eid] = EdgeGene(eid, o, o, 0.0, True, k)
        out.append(g)
    return out, counter


def run_stagnation(n_inserts=3001, trace_counts=(2250, 2251, 3000, 3001)):
    """Species A holds the population best (set once), B is set once too,
    C keeps improving slowly without ever beating A.  Everything else is
    filler that never improves anything."""
    from rnnevo.neat import NeatConfig, NeatPopulation
    (a, b, c), counter = three_species()
    cfg = NeatConfig(delta_t=0.1)
    pop = NeatPopulation(a, EvoConfig(), counter, cfg, np.random.default_rng(0))
    flags = {}
    c_fit = 0.9
    for count in range(1, n_inserts + 1):
        template = (a, b, c)[(count - 1) % 3]
        if count == 1:
            fitness = 0.5
        elif count == 2:
            fitness = 0.6
        elif template is c and count % 99 == 0:
            c_fit -= 1e-4
            fitness = c_fit
        else:
            fitness = 100.0
        pop.insert(template.copy(fitness=fitness, generation_id=count - 1))
        if count in trace_counts:
            flags[count] = {s.id: s.reproduction_enabled for s in pop.species}
    return pop, flags
