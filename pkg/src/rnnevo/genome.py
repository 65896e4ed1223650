"""Graph-encoded recurrent network genomes.

A genome is a set of node genes and edge genes, each tagged with an
innovation number that is unique within a run.  Edges with
``recurrent_skip == 0`` are feed-forward and must point from a shallower
node to a deeper one; edges with ``recurrent_skip = k >= 1`` read the source
node's output from ``k`` steps in the past and may connect any pair of nodes.
"""
from __future__ import annotations

import json
import math
import threading
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np


class NodeKind(str, Enum):
    INPUT = "input"
    OUTPUT = "output"
    SIMPLE = "simple"
    DELTA_RNN = "delta_rnn"
    GRU = "gru"
    LSTM = "lstm"
    MGU = "mgu"
    UGRNN = "ugrnn"


# Trainable per-node parameters; layouts are documented in rnnevo.runtime.
PARAM_COUNTS = {
    NodeKind.INPUT: 0,
    NodeKind.OUTPUT: 0,
    NodeKind.SIMPLE: 1,
    NodeKind.DELTA_RNN: 6,
    NodeKind.GRU: 9,
    NodeKind.LSTM: 12,
    NodeKind.MGU: 6,
    NodeKind.UGRNN: 6,
}

HIDDEN_KINDS = (
    NodeKind.SIMPLE,
    NodeKind.DELTA_RNN,
    NodeKind.GRU,
    NodeKind.LSTM,
    NodeKind.MGU,
    NodeKind.UGRNN,
)


@dataclass(frozen=True)
class NodeGene:
    id: int
    kind: NodeKind
    depth: float
    enabled: bool = True
    cell_params: tuple[float, ...] = ()

    @property
    def is_hidden(self) -> bool:
        return self.kind not in (NodeKind.INPUT, NodeKind.OUTPUT)


@dataclass(frozen=True)
class EdgeGene:
    id: int
    source: int
    target: int
    weight: float
    enabled: bool = True
    recurrent_skip: int = 0

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.source, self.target, self.recurrent_skip)


class InnovationCounter:
    """Run-scoped source of innovation numbers.

    Node and edge genes draw from one id space.  Edge ids are registered by
    ``(source, target, recurrent_skip)`` so the same connection gets the same
    id wherever it is created during a run, which keeps crossover unions free
    of duplicate connections.
    """

    def __init__(self, start: int = 0):
        self._next = start
        self._edges: dict[tuple[int, int, int], int] = {}
        self._lock = threading.Lock()

    def next_id(self) -> int:
        with self._lock:
            value = self._next
            self._next += 1
            return value

    def edge_id(self, source: int, target: int, skip: int) -> int:
        key = (source, target, skip)
        with self._lock:
            found = self._edges.get(key)
            if found is None:
                found = self._next
                self._next += 1
                self._edges[key] = found
            return found

    def observe(self, genome: "Genome") -> None:
        """Make sure future ids never collide with ids already in ``genome``."""
        with self._lock:
            for edge in genome.edges.values():
                self._edges.setdefault(edge.key, edge.id)
            top = max(genome.gene_ids(), default=-1)
            self._next = max(self._next, top + 1)

    @property
    def peek(self) -> int:
        return self._next


@dataclass
class Genome:
    nodes: dict[int, NodeGene]
    edges: dict[int, EdgeGene]
    fitness: float | None = None
    generation_id: int = -1
    origin_island: int = -1
    group_id: int = -1
    meta: dict = field(default_factory=dict)

    def copy(self, **changes) -> "Genome":
        """Shallow structural copy; gene objects are frozen so sharing is safe."""
        out = Genome(dict(self.nodes), dict(self.edges), self.fitness,
                     self.generation_id, self.origin_island, self.group_id,
                     dict(self.meta))
        for key, value in changes.items():
            setattr(out, key, value)
        return out

    def gene_ids(self) -> list[int]:
        return list(self.nodes) + list(self.edges)

    @property
    def input_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind is NodeKind.INPUT)

    @property
    def output_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind is NodeKind.OUTPUT)

    @property
    def n_inputs(self) -> int:
        return len(self.input_ids)

    @property
    def n_outputs(self) -> int:
        return len(self.output_ids)

    def hidden_nodes(self) -> list[NodeGene]:
        return [n for n in self.nodes.values() if n.is_hidden]

    def edge_keys(self) -> set[tuple[int, int, int]]:
        return {e.key for e in self.edges.values()}

    def all_weights(self) -> np.ndarray:
        values = [e.weight for e in self.edges.values()]
        for node in self.nodes.values():
            values.extend(node.cell_params)
        return np.asarray(values, dtype=float)

    def weight_stats(self) -> tuple[float, float]:
        """Mean and standard deviation over every edge weight and cell parameter."""
        w = self.all_weights()
        if w.size == 0:
            return 0.0, 0.0
        return float(w.mean()), float(w.std())

    def structure_key(self) -> tuple:
        """Hashable description of topology and enabled flags (weights excluded)."""
        nodes = tuple(sorted((n.id, n.kind.value, n.enabled) for n in self.nodes.values()))
        edges = tuple(sorted((e.id, e.source, e.target, e.recurrent_skip, e.enabled)
                             for e in self.edges.values()))
        return nodes, edges

    def __repr__(self) -> str:
        n_en = sum(n.enabled for n in self.nodes.values())
        e_en = sum(e.enabled for e in self.edges.values())
        return (f"Genome(gen={self.generation_id}, island={self.origin_island}, "
                f"nodes={n_en}/{len(self.nodes)}, edges={e_en}/{len(self.edges)}, "
                f"fitness={self.fitness})")


def minimal_genome(n_inputs: int, n_outputs: int, rng: np.random.Generator,
                   counter: InnovationCounter | None = None) -> Genome:
    """Inputs fully connected to outputs, no hidden nodes, weights U(-0.5, 0.5)."""
    if n_inputs < 1 or n_outputs < 1:
        raise ValueError(f"need at least one input and one output, got {n_inputs}, {n_outputs}")
    counter = counter or InnovationCounter()
    nodes: dict[int, NodeGene] = {}
    inputs = [counter.next_id() for _ in range(n_inputs)]
    outputs = [counter.next_id() for _ in range(n_outputs)]
    for nid in inputs:
        nodes[nid] = NodeGene(nid, NodeKind.INPUT, 0.0)
    for nid in outputs:
        nodes[nid] = NodeGene(nid, NodeKind.OUTPUT, 1.0)
    edges: dict[int, EdgeGene] = {}
    for src in inputs:
        for tgt in outputs:
            eid = counter.edge_id(src, tgt, 0)
            edges[eid] = EdgeGene(eid, src, tgt, float(rng.uniform(-0.5, 0.5)))
    return Genome(nodes, edges)


def feed_forward_order(genome: Genome, enabled_only: bool = True) -> list[int] | None:
    """Topological order over skip-0 edges, or None when they contain a cycle."""
    nodes = [n.id for n in genome.nodes.values() if n.enabled or not enabled_only]
    present = set(nodes)
    indeg = {nid: 0 for nid in nodes}
    succ: dict[int, list[int]] = {nid: [] for nid in nodes}
    for e in genome.edges.values():
        if e.recurrent_skip != 0 or (enabled_only and not e.enabled):
            continue
        if e.source in present and e.target in present:
            succ[e.source].append(e.target)
            indeg[e.target] += 1
    ready = deque(sorted((nid for nid in nodes if indeg[nid] == 0),
                         key=lambda nid: (genome.nodes[nid].depth, nid)))
    order = []
    while ready:
        nid = ready.popleft()
        order.append(nid)
        for t in succ[nid]:
            indeg[t] -= 1
            if indeg[t] == 0:
                ready.append(t)
    return order if len(order) == len(nodes) else None


def reachable_outputs(genome: Genome) -> set[int]:
    """Output ids reachable from any input through enabled edges and nodes."""
    adj: dict[int, list[int]] = {}
    for e in genome.edges.values():
        if not e.enabled:
            continue
        src, tgt = genome.nodes.get(e.source), genome.nodes.get(e.target)
        if src is None or tgt is None or not (src.enabled and tgt.enabled):
            continue
        adj.setdefault(e.source, []).append(e.target)
    seen = set(genome.input_ids)
    stack = list(seen)
    while stack:
        for nxt in adj.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen.intersection(genome.output_ids)


def validate(genome: Genome) -> list[str]:
    """Return every structural violation found in ``genome`` (empty when valid)."""
    problems: list[str] = []
    if not genome.input_ids:
        problems.append("no input nodes")
    if not genome.output_ids:
        problems.append("no output nodes")
    for nid, node in genome.nodes.items():
        if nid != node.id:
            problems.append(f"node key {nid} does not match gene id {node.id}")
        if not isinstance(node.kind, NodeKind):
            problems.append(f"node {nid}: unknown kind {node.kind!r}")
            continue
        if len(node.cell_params) != PARAM_COUNTS[node.kind]:
            problems.append(f"node {nid}: {node.kind.value} expects {PARAM_COUNTS[node.kind]} "
                            f"cell params, has {len(node.cell_params)}")
        if not all(math.isfinite(p) for p in node.cell_params):
            problems.append(f"node {nid}: non-finite cell parameter")
        if not 0.0 <= node.depth <= 1.0:
            problems.append(f"node {nid}: depth {node.depth} outside [0, 1]")
        if node.kind is NodeKind.INPUT:
            if not node.enabled:
                problems.append(f"input node {nid} is disabled")
            if node.depth != 0.0:
                problems.append(f"input node {nid} has depth {node.depth}, expected 0")
        elif node.kind is NodeKind.OUTPUT:
            if not node.enabled:
                problems.append(f"output node {nid} is disabled")
            if node.depth != 1.0:
                problems.append(f"output node {nid} has depth {node.depth}, expected 1")

    seen_keys: dict[tuple[int, int, int], int] = {}
    for eid, edge in genome.edges.items():
        if eid != edge.id:
            problems.append(f"edge key {eid} does not match gene id {edge.id}")
        if eid in genome.nodes:
            problems.append(f"innovation id {eid} used by both a node and an edge")
        if edge.key in seen_keys:
            problems.append(f"edges {seen_keys[edge.key]} and {eid} duplicate connection {edge.key}")
        seen_keys[edge.key] = eid
        if edge.recurrent_skip < 0:
            problems.append(f"edge {eid}: negative recurrent skip {edge.recurrent_skip}")
        if not math.isfinite(edge.weight):
            problems.append(f"edge {eid}: non-finite weight")
        src, tgt = genome.nodes.get(edge.source), genome.nodes.get(edge.target)
        if src is None or tgt is None:
            problems.append(f"edge {eid}: references missing node "
                            f"{edge.source if src is None else edge.target}")
            continue
        if tgt.kind is NodeKind.INPUT:
            problems.append(f"edge {eid}: targets input node {tgt.id}")
        if edge.enabled and not (src.enabled and tgt.enabled):
            problems.append(f"edge {eid}: enabled edge references disabled node")
        if edge.recurrent_skip == 0 and not src.depth < tgt.depth:
            problems.append(f"edge {eid}: feed-forward depth violation "
                            f"({src.depth} -> {tgt.depth})")

    if feed_forward_order(genome) is None:
        problems.append("enabled feed-forward subgraph contains a cycle")
    missing = set(genome.output_ids) - reachable_outputs(genome)
    for nid in sorted(missing):
        problems.append(f"output unreachable: node {nid} has no enabled path from an input")
    if genome.fitness is not None and not genome.fitness >= 0.0:
        problems.append(f"fitness {genome.fitness} is negative or NaN")
    return problems


def structural_distance(a: Genome, b: Genome, c1: float = 1.0, c2: float = 1.0,
                        c3: float = 0.4) -> float:
    """Compatibility distance from excess, disjoint and matching-weight terms.

    Node and edge genes both count as genes for the excess/disjoint tallies
    and for ``N`` (size of the larger genome); the mean weight difference
    only covers matching edge genes.
    """
    ids_a, ids_b = set(a.gene_ids()), set(b.gene_ids())
    if not ids_a and not ids_b:
        return 0.0
    max_a = max(ids_a, default=-1)
    max_b = max(ids_b, default=-1)
    excess = disjoint = 0
    for gid in ids_a ^ ids_b:
        other_max = max_b if gid in ids_a else max_a
        if gid > other_max:
            excess += 1
        else:
            disjoint += 1
    shared = a.edges.keys() & b.edges.keys()
    wbar = (sum(abs(a.edges[i].weight - b.edges[i].weight) for i in shared) / len(shared)
            if shared else 0.0)
    n = max(len(ids_a), len(ids_b))
    return c1 * excess / n + c2 * disjoint / n + c3 * wbar


def with_fitness(genome: Genome, fitness: float) -> Genome:
    return genome.copy(fitness=fitness)


def update_weights(genome: Genome, edge_weights: dict[int, float],
                   cell_params: dict[int, Iterable[float]]) -> Genome:
    out = genome.copy()
    for eid, w in edge_weights.items():
        out.edges[eid] = replace(out.edges[eid], weight=float(w))
    for nid, params in cell_params.items():
        out.nodes[nid] = replace(out.nodes[nid], cell_params=tuple(float(p) for p in params))
    return out


# -- serialization -----------------------------------------------------------

FORMAT_VERSION = 1


def to_dict(genome: Genome) -> dict:
    return {
        "format": "rnnevo-genome",
        "version": FORMAT_VERSION,
        "fitness": genome.fitness,
        "generation_id": genome.generation_id,
        "origin_island": genome.origin_island,
        "group_id": genome.group_id,
        "nodes": [
            {"id": n.id, "kind": n.kind.value, "depth": n.depth, "enabled": n.enabled,
             "cell_params": list(n.cell_params)}
            for n in sorted(genome.nodes.values(), key=lambda n: n.id)
        ],
        "edges": [
            {"id": e.id, "source": e.source, "target": e.target, "weight": e.weight,
             "enabled": e.enabled, "recurrent_skip": e.recurrent_skip}
            for e in sorted(genome.edges.values(), key=lambda e: e.id)
        ],
    }


def from_dict(data: dict) -> Genome:
    if data.get("format") != "rnnevo-genome":
        raise ValueError("not a genome document")
    nodes = {}
    for n in data["nodes"]:
        nodes[n["id"]] = NodeGene(int(n["id"]), NodeKind(n["kind"]), float(n["depth"]),
                                  bool(n["enabled"]), tuple(float(p) for p in n["cell_params"]))
    edges = {}
    for e in data["edges"]:
        edges[e["id"]] = EdgeGene(int(e["id"]), int(e["source"]), int(e["target"]),
                                  float(e["weight"]), bool(e["enabled"]), int(e["recurrent_skip"]))
    fitness = data.get("fitness")
    return Genome(nodes, edges, None if fitness is None else float(fitness),
                  int(data.get("generation_id", -1)), int(data.get("origin_island", -1)),
                  int(data.get("group_id", -1)))


def serialize(genome: Genome) -> str:
    # json writes floats with repr(), which round-trips bit-exactly
    return json.dumps(to_dict(genome), indent=1)


def deserialize(text: str) -> Genome:
    return from_dict(json.loads(text))


def save_genome(genome: Genome, path: str | Path) -> None:
    Path(path).write_text(serialize(genome))


def load_genome(path: str | Path) -> Genome:
    return deserialize(Path(path).read_text())
