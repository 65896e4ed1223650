"""NEAT-style speciation adapted to asynchronous insertion.

Species are formed by a distance threshold against a per-species
representative, total population size is held at a cap by removing the
genome with the highest shared (adjusted) fitness, and reproduction is
switched off for species that stop improving.  Generational budgets are
expressed in inserted genomes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .genome import Genome, InnovationCounter, structural_distance
from .islands import InsertResult, Population, rank_key
from .operators import INTER_CROSSOVER, INTRA_CROSSOVER, EvoConfig, crossover, select_operation


@dataclass(frozen=True)
class NeatConfig:
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.4
    delta_t: float = 0.6
    species_stagnation_budget: int = 2250
    population_stagnation_budget: int = 3000
    generation_size: int = 150
    population_cap: int = 100
    protected_species: int = 2
    # "divide": f / niche size as written; "multiply": f * niche size, which
    # penalizes crowded niches when fitness is minimized
    sharing: str = "divide"

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("delta_t must be positive")
        if self.species_stagnation_budget <= 0 or self.population_stagnation_budget <= 0:
            raise ValueError("stagnation budgets must be positive")
        if self.sharing not in ("divide", "multiply"):
            raise ValueError(f"unknown sharing mode {self.sharing!r}")

    def distance(self, a: Genome, b: Genome) -> float:
        return structural_distance(a, b, self.c1, self.c2, self.c3)


@dataclass
class Species:
    id: int
    representative: Genome
    members: list[Genome] = field(default_factory=list)
    best_fitness: float = math.inf
    last_improvement_marker: int = 0
    reproduction_enabled: bool = True

    @property
    def best(self) -> Genome | None:
        return min(self.members, key=rank_key) if self.members else None


def assign_species(genome: Genome, species_list: list[Species], cfg: NeatConfig,
                   next_id: int | None = None) -> int:
    """Id of the first species (by id) whose representative is closer than
    ``delta_t``; otherwise a fresh id."""
    for sp in sorted(species_list, key=lambda s: s.id):
        if cfg.distance(genome, sp.representative) < cfg.delta_t:
            return sp.id
    if next_id is not None:
        return next_id
    return max((s.id for s in species_list), default=-1) + 1


def niche_size(index: int, distances: np.ndarray, delta_t: float) -> int:
    return int(np.count_nonzero(distances[index] <= delta_t))


def adjusted_fitness(genome: Genome, population: list[Genome], cfg: NeatConfig) -> float:
    """Shared fitness: raw fitness over the number of genomes within ``delta_t``
    (the genome itself included)."""
    if not any(g is genome for g in population):
        raise ValueError("genome must belong to the population")
    count = sum(1 for other in population
                if other is genome or cfg.distance(genome, other) <= cfg.delta_t)
    return _share(genome.fitness, count, cfg.sharing)


def _share(fitness: float, count: int, mode: str) -> float:
    return fitness / count if mode == "divide" else fitness * count


def update_stagnation(species_list: list[Species], inserted_count: int,
                      population_marker: int, cfg: NeatConfig) -> None:
    """Recompute reproduction flags.

    A species reproduces while it has improved within the last
    ``species_stagnation_budget`` insertions.  On top of that, when the
    population-wide best has not improved for ``population_stagnation_budget``
    insertions, every species outside the top ``protected_species`` (by best
    fitness) is disabled as well.
    """
    top = None
    if inserted_count - population_marker >= cfg.population_stagnation_budget:
        ranked = sorted(species_list, key=lambda s: (s.best_fitness, s.id))
        top = {s.id for s in ranked[:cfg.protected_species]}
    for s in species_list:
        fresh = inserted_count - s.last_improvement_marker < cfg.species_stagnation_budget
        s.reproduction_enabled = fresh and (top is None or s.id in top)


class NeatPopulation(Population):
    name = "neat"

    def __init__(self, seed_genome: Genome, evo_cfg: EvoConfig, counter: InnovationCounter,
                 cfg: NeatConfig | None = None, rng: np.random.Generator | None = None):
        super().__init__(seed_genome, evo_cfg, counter)
        self.cfg = cfg or NeatConfig()
        self.species: list[Species] = []
        self._next_species = 0
        self.population_marker = 0
        # representative resampling stream, separate from generation streams
        self._rng = rng or np.random.default_rng(0)
        self._pool: list[Genome] = []
        self._dist = np.zeros((0, 0))

    def size(self) -> int:
        return len(self._pool)

    def species_of(self, genome: Genome) -> Species | None:
        for sp in self.species:
            if any(m is genome for m in sp.members):
                return sp
        return None

    # -- generation -----------------------------------------------------

    def _reproducing(self) -> list[Species]:
        live = [s for s in self.species if s.members]
        enabled = [s for s in live if s.reproduction_enabled]
        if enabled:
            return enabled
        ranked = sorted(live, key=lambda s: (s.best_fitness, s.id))
        return ranked[:self.cfg.protected_species]

    def _make_child(self, rng: np.random.Generator) -> Genome:
        candidates = self._reproducing()
        if not candidates:
            child = self._mutant(self.seed_genome, 1, rng)
            child.meta["operation"] = "mutation"
            return child
        sizes = np.array([len(s.members) for s in candidates], dtype=float)
        sp = candidates[int(rng.choice(len(candidates), p=sizes / sizes.sum()))]
        members = sp.members
        op = select_operation(self.evo_cfg, rng)
        child = None
        if op == INTRA_CROSSOVER and len(members) >= 2:
            i, j = rng.choice(len(members), size=2, replace=False)
            a, b = sorted((members[int(i)], members[int(j)]), key=rank_key)
            child = crossover(a, b, self.evo_cfg, rng)
        elif op == INTER_CROSSOVER:
            others = [s for s in self.species if s is not sp and s.members]
            if others:
                other = others[int(rng.integers(len(others)))]
                mine = members[int(rng.integers(len(members)))]
                a, b = sorted((mine, other.best), key=rank_key)
                child = crossover(a, b, self.evo_cfg, rng)
        if child is None:
            op = "mutation"
            child = self._mutant(members[int(rng.integers(len(members)))], 1, rng)
        child.meta["operation"] = op
        child.group_id = sp.id
        return child

    # -- insertion ------------------------------------------------------

    def insert(self, genome: Genome) -> InsertResult:
        if genome.fitness is None:
            raise ValueError("cannot insert an unevaluated genome")
        self.inserted += 1
        count = self.inserted
        sid = assign_species(genome, self.species, self.cfg, self._next_species)
        genome = genome.copy(group_id=sid)
        if sid == self._next_species:
            self._next_species += 1
            self.species.append(Species(sid, genome, last_improvement_marker=count))
        sp = next(s for s in self.species if s.id == sid)
        sp.members.append(genome)
        if genome.fitness < sp.best_fitness:
            sp.best_fitness = genome.fitness
            sp.last_improvement_marker = count
        if self._record_best(genome):
            self.population_marker = count

        row = np.array([self.cfg.distance(genome, g) for g in self._pool])
        n = len(self._pool)
        dist = np.zeros((n + 1, n + 1))
        dist[:n, :n] = self._dist
        dist[n, :n] = row
        dist[:n, n] = row
        self._dist = dist
        self._pool.append(genome)
        while len(self._pool) > self.cfg.population_cap:
            self._cull_one()

        if count % self.cfg.generation_size == 0:
            self._reorganize(count)
        update_stagnation(self.species, count, self.population_marker, self.cfg)
        return InsertResult.INSERTED

    def adjusted_fitnesses(self) -> np.ndarray:
        counts = np.count_nonzero(self._dist <= self.cfg.delta_t, axis=1)
        fit = np.array([g.fitness for g in self._pool])
        return fit / counts if self.cfg.sharing == "divide" else fit * counts

    def _cull_one(self) -> None:
        adj = self.adjusted_fitnesses()
        # highest adjusted fitness goes; among ties the later generation_id
        idx = max(range(len(self._pool)), key=lambda i: (adj[i], self._pool[i].generation_id))
        victim = self._pool.pop(idx)
        self._dist = np.delete(np.delete(self._dist, idx, axis=0), idx, axis=1)
        for sp in self.species:
            for k, m in enumerate(sp.members):
                if m is victim:
                    del sp.members[k]
                    break
        self.species = [s for s in self.species if s.members]

    def _reorganize(self, count: int) -> None:
        for sp in self.species:
            sp.representative = sp.members[int(self._rng.integers(len(sp.members)))]
            self.log(f"species_census inserted={count} id={sp.id} size={len(sp.members)} "
                     f"best={sp.best_fitness!r} enabled={sp.reproduction_enabled}")
