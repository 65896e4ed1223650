"""Asynchronous master/worker search loop.

One coordinator owns all population state.  Workers are stateless: they ask
for a genome, train it and send it back, talking to the coordinator through
queues only.  Trained genomes arrive in completion order, which may differ
from generation order when several workers run at once.
"""
from __future__ import annotations

import logging
import math
import queue
import threading
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import RunConfig
from .genome import Genome, InnovationCounter, minimal_genome
from .islands import IslandPopulation, Population
from .neat import NeatPopulation
from .runtime import TrainConfig, train

log = logging.getLogger(__name__)

_GENERATE, _TRAIN, _SEED, _SPECIES = 0, 1, 2, 3


def genome_rng(seed: int, generation_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, _GENERATE, generation_id])


def training_rng(seed: int, generation_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, _TRAIN, generation_id])


class WorkerFailure(Exception):
    """Raised inside a worker to simulate losing the job it was running."""


@dataclass
class ExperimentRecord:
    config: dict
    trace: list[tuple[int, float]]
    best_genome: Genome | None
    wall_time: float
    events: list[str]
    issued: list[int] = field(default_factory=list)
    accepted: list[int] = field(default_factory=list)
    trained_by: dict[int, int] = field(default_factory=dict)
    outcomes: Counter = field(default_factory=Counter)
    seed_fitness: float | None = None

    @property
    def final_fitness(self) -> float:
        return self.trace[-1][1] if self.trace else math.inf


def make_population(cfg: RunConfig, seed_genome: Genome,
                    counter: InnovationCounter) -> Population:
    if cfg.strategy == "neat":
        return NeatPopulation(seed_genome, cfg.evolution, counter, cfg.neat,
                              np.random.default_rng([cfg.rng_seed, _SPECIES]))
    policy = cfg.extinction if cfg.strategy == "extinction" else None
    return IslandPopulation(seed_genome, cfg.evolution, counter, cfg.n_islands,
                            cfg.island_capacity, policy)


class Coordinator:
    """Hands out genomes on request and folds results back into the population."""

    def __init__(self, population: Population, budget: int, seed: int):
        self.population = population
        self.budget = budget
        self.seed = seed
        self.generated = 0
        self.in_flight: dict[int, Genome] = {}
        self.reissue: deque[int] = deque()
        self.done: set[int] = set()
        self.trace: list[tuple[int, float]] = []
        self.issued: list[int] = []
        self.accepted: list[int] = []
        self.outcomes: Counter = Counter()
        self.inbox: queue.Queue = queue.Queue()

    def next_work(self) -> Genome | None:
        if self.reissue:
            gid = self.reissue.popleft()
            self.population.log(f"reissued generation_id={gid}")
            return self.in_flight[gid]
        if self.generated >= self.budget:
            return None
        gid = self.generated
        child = self.population.generate(gid, genome_rng(self.seed, gid))
        self.generated += 1
        self.in_flight[gid] = child
        self.issued.append(gid)
        return child

    def accept(self, genome: Genome) -> str:
        gid = genome.generation_id
        if gid in self.done or gid not in self.in_flight:
            self.population.log(f"duplicate_result generation_id={gid}")
            return "duplicate"
        del self.in_flight[gid]
        self.done.add(gid)
        self.accepted.append(gid)
        previous = self.population.best
        result = self.population.insert(genome)
        outcome = getattr(result, "value", str(result))
        self.outcomes[outcome] += 1
        best = self.population.best
        if best is not None and best is not previous:
            self.trace.append((self.generated, best.fitness))
        return outcome

    def fail(self, gid: int, reason: str) -> None:
        if gid in self.in_flight and gid not in self.done:
            self.population.log(f"worker_failure generation_id={gid} reason={reason}")
            self.reissue.append(gid)


Trainer = Callable[[Genome, object, TrainConfig, np.random.Generator], Genome]


def worker_loop(worker_id: int, inbox: queue.Queue, outbox: queue.Queue, data,
                train_cfg: TrainConfig, seed: int, trainer: Trainer = train) -> None:
    """Request, train, report; exit on a ``None`` work item."""
    while True:
        inbox.put(("request", worker_id))
        genome = outbox.get()
        if genome is None:
            return
        rng = training_rng(seed, genome.generation_id)
        try:
            trained = trainer(genome, data, train_cfg, rng)
        except WorkerFailure as exc:
            inbox.put(("failed", worker_id, genome.generation_id, str(exc)))
            continue
        except Exception as exc:  # training errors are a fitness, not a crash
            log.warning("training generation %d failed: %r", genome.generation_id, exc)
            trained = genome.copy(fitness=math.inf)
        trained.generation_id = genome.generation_id
        trained.origin_island = genome.origin_island
        inbox.put(("result", worker_id, trained))


def run(cfg: RunConfig, data, seed_genome: Genome | None = None,
        trainer: Trainer = train) -> ExperimentRecord:
    """Evolve until ``cfg.genome_budget`` genomes have been generated and trained."""
    from .config import to_plain

    start = time.perf_counter()
    if data.n_inputs < 1:
        raise ValueError("data has no input columns")
    counter = InnovationCounter()
    if seed_genome is None:
        seed_genome = minimal_genome(data.n_inputs, data.n_outputs,
                                     np.random.default_rng([cfg.rng_seed, _SEED]), counter)
    elif seed_genome.n_inputs != data.n_inputs or seed_genome.n_outputs != data.n_outputs:
        raise ValueError("seed genome shape does not match the data")
    seed_genome = seed_genome.copy(fitness=None, generation_id=-1, origin_island=-1)
    population = make_population(cfg, seed_genome, counter)
    coord = Coordinator(population, cfg.genome_budget, cfg.rng_seed)

    outboxes = [queue.Queue() for _ in range(cfg.worker_count)]
    workers = [threading.Thread(target=worker_loop, name=f"worker-{i}", daemon=True,
                                args=(i, coord.inbox, outboxes[i], data, cfg.training,
                                      cfg.rng_seed, trainer))
               for i in range(cfg.worker_count)]
    for w in workers:
        w.start()
    holding: dict[int, int] = {}
    trained_by: dict[int, int] = {}
    stopped = 0
    while stopped < cfg.worker_count:
        msg = coord.inbox.get()
        kind, wid = msg[0], msg[1]
        if kind == "request":
            work = coord.next_work()
            if work is None:
                stopped += 1
            else:
                holding[wid] = work.generation_id
            outboxes[wid].put(work)
        elif kind == "result":
            genome = msg[2]
            holding.pop(wid, None)
            if coord.accept(genome) != "duplicate":
                trained_by[genome.generation_id] = wid
        elif kind == "failed":
            holding.pop(wid, None)
            coord.fail(msg[2], msg[3])
    for w in workers:
        w.join()

    from .runtime import evaluate_mse, unroll
    seed_fit = evaluate_mse(unroll(seed_genome, cfg.training), data.validation_pairs())
    return ExperimentRecord(
        config=to_plain(cfg),
        trace=coord.trace,
        best_genome=population.best,
        wall_time=time.perf_counter() - start,
        events=list(population.events),
        issued=coord.issued,
        accepted=coord.accepted,
        trained_by=trained_by,
        outcomes=coord.outcomes,
        seed_fitness=seed_fit,
    )
