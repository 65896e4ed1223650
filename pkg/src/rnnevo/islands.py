"""Island populations with optional periodic extinction and repopulation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .genome import Genome, InnovationCounter
from .operators import (
    INTER_CROSSOVER, INTRA_CROSSOVER, EvoConfig, crossover, mutate, select_operation,
)


class IslandStatus(str, Enum):
    INITIALIZATION = "initialization"
    FILLED = "filled"
    REPOPULATION = "repopulation"


class InsertResult(str, Enum):
    INSERTED = "inserted"
    REPLACED_WORST = "replaced_worst"
    REJECTED_FULL = "rejected_full"
    REJECTED_STALE = "rejected_stale"


REPEAT_ALLOWED = "repeat_allowed"
NO_REPEAT = "no_repeat_within_5"


def rank_key(genome: Genome) -> tuple[float, int]:
    """Sort key: lower fitness first, ties go to the earlier generation_id."""
    return (genome.fitness, genome.generation_id)


@dataclass
class ExtinctionPolicy:
    frequency: int = 1000
    repop_mutations: int = 2
    repeat_rule: str = REPEAT_ALLOWED
    no_repeat_window: int = 5

    def __post_init__(self):
        aliases = {"repeat": REPEAT_ALLOWED, "no_repeat": NO_REPEAT}
        self.repeat_rule = aliases.get(self.repeat_rule, self.repeat_rule)
        if self.repeat_rule not in (REPEAT_ALLOWED, NO_REPEAT):
            raise ValueError(f"unknown repeat rule {self.repeat_rule!r}")
        if self.frequency < 1:
            raise ValueError("extinction frequency must be >= 1")
        if self.repop_mutations < 0:
            raise ValueError("repop_mutations must be >= 0")


@dataclass
class Island:
    index: int
    capacity: int = 10
    members: list[Genome] = field(default_factory=list)
    status: IslandStatus = IslandStatus.INITIALIZATION
    erased_at: list[int] = field(default_factory=list)
    repopulation_epoch: int = -1
    repopulation_source: Genome | None = None

    @property
    def is_full(self) -> bool:
        return len(self.members) >= self.capacity

    @property
    def best(self) -> Genome | None:
        return self.members[0] if self.members else None

    @property
    def worst(self) -> Genome | None:
        return self.members[-1] if self.members else None

    def best_key(self) -> tuple[float, float]:
        b = self.best
        return (math.inf, math.inf) if b is None else rank_key(b)


def try_insert(island: Island, genome: Genome) -> InsertResult:
    """Insert ``genome`` into ``island`` following the capacity/replacement rules."""
    if genome.fitness is None:
        raise ValueError("cannot insert an unevaluated genome")
    if genome.generation_id < island.repopulation_epoch:
        return InsertResult.REJECTED_STALE
    key = rank_key(genome)
    if not island.is_full:
        result = InsertResult.INSERTED
    elif key < rank_key(island.worst):
        island.members.pop()
        result = InsertResult.REPLACED_WORST
    else:
        return InsertResult.REJECTED_FULL
    pos = 0
    while pos < len(island.members) and rank_key(island.members[pos]) <= key:
        pos += 1
    island.members.insert(pos, genome)
    if island.is_full:
        island.status = IslandStatus.FILLED
        island.repopulation_source = None
    return result


def global_best(islands: list[Island]) -> Genome:
    """Lowest-fitness member over all islands, earlier generation_id on ties."""
    members = [g for isl in islands for g in isl.members]
    if not members:
        raise ValueError("population is empty")
    return min(members, key=rank_key)


class Population:
    """State shared by every speciation strategy.

    Subclasses implement ``_make_child`` and ``insert``; the coordinator only
    ever calls ``generate``, ``insert`` and reads ``best``/``events``.
    """

    name = "population"

    def __init__(self, seed_genome: Genome, evo_cfg: EvoConfig, counter: InnovationCounter):
        self.seed_genome = seed_genome
        self.evo_cfg = evo_cfg
        self.counter = counter
        counter.observe(seed_genome)
        self.generated = 0
        self.inserted = 0
        self.best: Genome | None = None
        self.events: list[str] = []

    def log(self, line: str) -> None:
        self.events.append(line)

    def _record_best(self, genome: Genome) -> bool:
        if self.best is None or rank_key(genome) < rank_key(self.best):
            self.best = genome
            return True
        return False

    def _mutant(self, parent: Genome, n: int, rng: np.random.Generator,
                retries: int = 5) -> Genome:
        child = mutate(parent, n, self.evo_cfg, rng, self.counter)
        for _ in range(retries):
            if not child.meta.get("unmutated"):
                break
            child = mutate(parent, n, self.evo_cfg, rng, self.counter)
        return child

    def generate(self, generation_id: int, rng: np.random.Generator) -> Genome:
        child = self._make_child(rng)
        child.generation_id = generation_id
        self.generated += 1
        self._after_generate(generation_id)
        return child

    def _make_child(self, rng: np.random.Generator) -> Genome:
        raise NotImplementedError

    def _after_generate(self, generation_id: int) -> None:
        pass

    def insert(self, genome: Genome):
        raise NotImplementedError

    def size(self) -> int:
        raise NotImplementedError


class IslandPopulation(Population):
    """Round-robin island model; pass ``policy`` to enable extinction events."""

    name = "baseline_islands"

    def __init__(self, seed_genome: Genome, evo_cfg: EvoConfig, counter: InnovationCounter,
                 n_islands: int = 10, capacity: int = 10,
                 policy: ExtinctionPolicy | None = None):
        super().__init__(seed_genome, evo_cfg, counter)
        if n_islands < 1 or capacity < 1:
            raise ValueError("need at least one island of capacity >= 1")
        self.islands = [Island(i, capacity) for i in range(n_islands)]
        self.policy = policy
        if policy is not None:
            self.name = "extinction"
        self._cursor = 0
        self.all_filled_once = False
        self._event_mark = 0
        self.extinction_ordinal = 0

    def size(self) -> int:
        return sum(len(isl.members) for isl in self.islands)

    # -- generation -----------------------------------------------------

    def _make_child(self, rng: np.random.Generator) -> Genome:
        island = self.islands[self._cursor]
        self._cursor = (self._cursor + 1) % len(self.islands)
        child = self.generate_from(island, rng)
        child.origin_island = island.index
        child.group_id = island.index
        return child

    def generate_from(self, island: Island, rng: np.random.Generator) -> Genome:
        if island.status is IslandStatus.REPOPULATION:
            source = island.repopulation_source or self.best or self.seed_genome
            n = self.policy.repop_mutations if self.policy else 1
            child = self._mutant(source, n, rng)
            child.meta["operation"] = "repopulation"
            return child
        members = island.members
        if island.status is IslandStatus.INITIALIZATION or not members:
            parent = members[int(rng.integers(len(members)))] if members else self.seed_genome
            child = self._mutant(parent, 1, rng)
            child.meta["operation"] = "mutation"
            return child
        op = select_operation(self.evo_cfg, rng)
        if op == INTRA_CROSSOVER and len(members) >= 2:
            i, j = rng.choice(len(members), size=2, replace=False)
            a, b = sorted((members[int(i)], members[int(j)]), key=rank_key)
            child = crossover(a, b, self.evo_cfg, rng)
            child.meta["operation"] = op
            return child
        if op == INTER_CROSSOVER:
            others = [isl for isl in self.islands if isl is not island and isl.members]
            if others:
                other = others[int(rng.integers(len(others)))]
                mine = members[int(rng.integers(len(members)))]
                a, b = sorted((mine, other.best), key=rank_key)
                child = crossover(a, b, self.evo_cfg, rng)
                child.meta["operation"] = op
                child.meta["partner_island"] = other.index
                child.meta["partner_generation_id"] = other.best.generation_id
                return child
        child = self._mutant(members[int(rng.integers(len(members)))], 1, rng)
        child.meta["operation"] = "mutation"
        return child

    def _after_generate(self, generation_id: int) -> None:
        self.maybe_trigger_extinction(generation_id + 1)

    # -- insertion ------------------------------------------------------

    def insert(self, genome: Genome) -> InsertResult:
        island = self.islands[genome.origin_island]
        result = try_insert(island, genome)
        if result is InsertResult.REJECTED_STALE:
            self.log(f"rejected_stale generation_id={genome.generation_id} island={island.index} "
                     f"epoch={island.repopulation_epoch}")
        elif result in (InsertResult.INSERTED, InsertResult.REPLACED_WORST):
            self.inserted += 1
            self._record_best(genome)
        if not self.all_filled_once and all(isl.is_full for isl in self.islands):
            self.all_filled_once = True
            self._event_mark = self.generated
            self.log(f"all_islands_filled generated={self.generated}")
        return result

    # -- extinction -----------------------------------------------------

    def ranked_worst_first(self) -> list[Island]:
        return sorted(self.islands, key=lambda isl: (isl.best_key(), isl.index), reverse=True)

    def maybe_trigger_extinction(self, next_generation_id: int) -> Island | None:
        """Erase the worst eligible island once ``policy.frequency`` genomes have
        been generated since the previous event (or since all islands first
        filled).  Returns the erased island, or None."""
        policy = self.policy
        if policy is None or not self.all_filled_once:
            return None
        if self.generated - self._event_mark < policy.frequency:
            return None
        self._event_mark = self.generated
        self.extinction_ordinal += 1
        ordinal = self.extinction_ordinal
        bests = " ".join(f"{isl.index}:{isl.best_key()[0]!r}" for isl in self.islands)
        target = None
        for isl in self.ranked_worst_first():
            if (policy.repeat_rule == REPEAT_ALLOWED or not isl.erased_at
                    or ordinal - isl.erased_at[-1] >= policy.no_repeat_window):
                target = isl
                break
        if target is None:
            self.log(f"extinction_skipped ordinal={ordinal} generation_id={next_generation_id} "
                     f"island_best={bests}")
            return None
        snapshot = self.best
        target.members.clear()
        target.status = IslandStatus.REPOPULATION
        target.repopulation_epoch = next_generation_id
        target.repopulation_source = snapshot
        target.erased_at.append(ordinal)
        best_fit = snapshot.fitness if snapshot is not None else math.inf
        self.log(f"extinction ordinal={ordinal} generation_id={next_generation_id} "
                 f"island={target.index} snapshot_best={best_fit!r} island_best={bests}")
        return target
