"""Mutation catalog, crossover and reproduction-type selection.

All operators are pure: they take an immutable parent genome plus a caller
supplied RNG stream and innovation counter, and return a new genome.  Genes
shared with the parent keep their trained weights (Lamarckian inheritance);
genuinely new weights are drawn from a normal distribution fitted to the
parent's existing weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .genome import (
    HIDDEN_KINDS, PARAM_COUNTS, EdgeGene, Genome, InnovationCounter, NodeGene, NodeKind,
    feed_forward_order, reachable_outputs, validate,
)

MUTATIONS = (
    "clone", "add_edge", "add_recurrent_edge", "enable_edge", "disable_edge", "split_edge",
    "add_node", "enable_node", "disable_node", "split_node", "merge_node",
)
DEFAULT_MUTATIONS = frozenset(m for m in MUTATIONS if m != "split_edge")

MUTATION = "mutation"
INTRA_CROSSOVER = "intra_crossover"
INTER_CROSSOVER = "inter_crossover"


@dataclass(frozen=True)
class EvoConfig:
    mutation_rate: float = 0.70
    intra_crossover_rate: float = 0.20
    inter_crossover_rate: float = 0.10
    enabled_mutations: frozenset = DEFAULT_MUTATIONS
    node_kind_pool: tuple = HIDDEN_KINDS
    recurrent_skip_range: tuple[int, int] = (1, 10)
    crossover_r_range: tuple[float, float] = (-0.5, 1.5)
    crossover_r_per_gene: bool = True
    # chance that a gene disabled in either parent comes back enabled
    reenable_probability: float = 0.5

    def __post_init__(self):
        total = self.mutation_rate + self.intra_crossover_rate + self.inter_crossover_rate
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"reproduction rates must sum to 1, got {total}")
        if min(self.mutation_rate, self.intra_crossover_rate, self.inter_crossover_rate) < 0:
            raise ValueError("reproduction rates must be non-negative")
        if not self.enabled_mutations:
            raise ValueError("enabled_mutations must not be empty")
        unknown = set(self.enabled_mutations) - set(MUTATIONS)
        if unknown:
            raise ValueError(f"unknown mutations: {sorted(unknown)}")
        lo, hi = self.recurrent_skip_range
        if not 1 <= lo <= hi:
            raise ValueError("recurrent_skip_range must satisfy 1 <= lo <= hi")
        object.__setattr__(self, "enabled_mutations", frozenset(self.enabled_mutations))
        object.__setattr__(self, "node_kind_pool",
                           tuple(NodeKind(k) for k in self.node_kind_pool))


def select_operation(cfg: EvoConfig, rng: np.random.Generator,
                     initializing: bool = False) -> str:
    if initializing:
        return MUTATION
    u = rng.random()
    if u < cfg.mutation_rate:
        return MUTATION
    if u < cfg.mutation_rate + cfg.intra_crossover_rate:
        return INTRA_CROSSOVER
    return INTER_CROSSOVER


# -- mutation ---------------------------------------------------------------

@dataclass
class _Context:
    cfg: EvoConfig
    rng: np.random.Generator
    counter: InnovationCounter
    mu: float
    sigma: float

    def weight(self) -> float:
        return float(self.rng.normal(self.mu, self.sigma))

    def params(self, kind: NodeKind) -> tuple[float, ...]:
        return tuple(float(v) for v in self.rng.normal(self.mu, self.sigma, PARAM_COUNTS[kind]))

    def kind(self) -> NodeKind:
        pool = self.cfg.node_kind_pool
        return pool[int(self.rng.integers(len(pool)))]

    def open_depth(self, lo: float = 0.0, hi: float = 1.0) -> float:
        while True:
            d = float(self.rng.uniform(lo, hi))
            if lo < d < hi:
                return d


def _enabled_nodes(g: Genome) -> list[NodeGene]:
    return [g.nodes[i] for i in sorted(g.nodes) if g.nodes[i].enabled]


def _add_edge_gene(g: Genome, ctx: _Context, src: int, tgt: int, skip: int,
                   weight: float) -> None:
    eid = ctx.counter.edge_id(src, tgt, skip)
    g.edges[eid] = EdgeGene(eid, src, tgt, weight, True, skip)


def _outputs_ok(g: Genome) -> bool:
    return len(reachable_outputs(g)) == len(g.output_ids)


def _clone(parent: Genome, ctx: _Context) -> Genome | None:
    return parent.copy()


def _add_edge(parent: Genome, ctx: _Context) -> Genome | None:
    nodes = _enabled_nodes(parent)
    keys = parent.edge_keys()
    candidates = [(a.id, b.id) for a in nodes for b in nodes
                  if a.depth < b.depth and b.kind is not NodeKind.INPUT
                  and (a.id, b.id, 0) not in keys]
    if not candidates:
        return None
    src, tgt = candidates[int(ctx.rng.integers(len(candidates)))]
    g = parent.copy()
    _add_edge_gene(g, ctx, src, tgt, 0, ctx.weight())
    return g


def _add_recurrent_edge(parent: Genome, ctx: _Context) -> Genome | None:
    nodes = _enabled_nodes(parent)
    keys = parent.edge_keys()
    lo, hi = ctx.cfg.recurrent_skip_range
    skips = [int(ctx.rng.integers(lo, hi + 1))]
    skips += [int(s) for s in ctx.rng.permutation(np.arange(lo, hi + 1)) if s != skips[0]]
    for skip in skips:
        candidates = [(a.id, b.id) for a in nodes for b in nodes
                      if b.kind is not NodeKind.INPUT and (a.id, b.id, skip) not in keys]
        if candidates:
            src, tgt = candidates[int(ctx.rng.integers(len(candidates)))]
            g = parent.copy()
            _add_edge_gene(g, ctx, src, tgt, skip, ctx.weight())
            return g
    return None


def _enable_edge(parent: Genome, ctx: _Context) -> Genome | None:
    candidates = [e for _, e in sorted(parent.edges.items())
                  if not e.enabled and parent.nodes[e.source].enabled
                  and parent.nodes[e.target].enabled]
    if not candidates:
        return None
    edge = candidates[int(ctx.rng.integers(len(candidates)))]
    g = parent.copy()
    g.edges[edge.id] = replace(edge, enabled=True)
    return g


def _disable_edge(parent: Genome, ctx: _Context) -> Genome | None:
    candidates = [e for _, e in sorted(parent.edges.items()) if e.enabled]
    for idx in ctx.rng.permutation(len(candidates)):
        edge = candidates[idx]
        g = parent.copy()
        g.edges[edge.id] = replace(edge, enabled=False)
        if _outputs_ok(g):
            return g
    return None


def _split_edge(parent: Genome, ctx: _Context) -> Genome | None:
    candidates = [e for _, e in sorted(parent.edges.items())
                  if e.enabled and e.recurrent_skip == 0]
    if not candidates:
        return None
    edge = candidates[int(ctx.rng.integers(len(candidates)))]
    src, tgt = parent.nodes[edge.source], parent.nodes[edge.target]
    g = parent.copy()
    kind = ctx.kind()
    nid = ctx.counter.next_id()
    g.nodes[nid] = NodeGene(nid, kind, ctx.open_depth(src.depth, tgt.depth), True, ctx.params(kind))
    g.edges[edge.id] = replace(edge, enabled=False)
    _add_edge_gene(g, ctx, src.id, nid, 0, ctx.weight())
    _add_edge_gene(g, ctx, nid, tgt.id, 0, ctx.weight())
    return g


def _pick_some(ids: list[int], rng: np.random.Generator) -> list[int]:
    chosen = [i for i in ids if rng.random() < 0.5]
    return chosen or [ids[int(rng.integers(len(ids)))]]


def _add_node(parent: Genome, ctx: _Context) -> Genome | None:
    depth = ctx.open_depth()
    nodes = _enabled_nodes(parent)
    sources = [n.id for n in nodes if n.depth < depth]
    targets = [n.id for n in nodes if n.depth > depth and n.kind is not NodeKind.INPUT]
    if not sources or not targets:
        return None
    g = parent.copy()
    kind = ctx.kind()
    nid = ctx.counter.next_id()
    g.nodes[nid] = NodeGene(nid, kind, depth, True, ctx.params(kind))
    for src in _pick_some(sources, ctx.rng):
        _add_edge_gene(g, ctx, src, nid, 0, ctx.weight())
    for tgt in _pick_some(targets, ctx.rng):
        _add_edge_gene(g, ctx, nid, tgt, 0, ctx.weight())
    return g


def _enable_node(parent: Genome, ctx: _Context) -> Genome | None:
    candidates = [n for n in (parent.nodes[i] for i in sorted(parent.nodes))
                  if n.is_hidden and not n.enabled]
    if not candidates:
        return None
    node = candidates[int(ctx.rng.integers(len(candidates)))]
    g = parent.copy()
    g.nodes[node.id] = replace(node, enabled=True)
    for eid, e in parent.edges.items():
        if e.enabled or node.id not in (e.source, e.target):
            continue
        other = e.target if e.source == node.id else e.source
        if g.nodes[other].enabled:
            g.edges[eid] = replace(e, enabled=True)
    return g


def _without_node(parent: Genome, nid: int) -> Genome:
    g = parent.copy()
    g.nodes[nid] = replace(g.nodes[nid], enabled=False)
    for eid, e in parent.edges.items():
        if e.enabled and nid in (e.source, e.target):
            g.edges[eid] = replace(e, enabled=False)
    return g


def _disable_node(parent: Genome, ctx: _Context) -> Genome | None:
    candidates = [n for n in _enabled_nodes(parent) if n.is_hidden]
    for idx in ctx.rng.permutation(len(candidates)):
        g = _without_node(parent, candidates[idx].id)
        if _outputs_ok(g):
            return g
    return None


def _split_node(parent: Genome, ctx: _Context) -> Genome | None:
    """Clone a hidden node: in-edges are duplicated, out-edges partitioned."""
    def out_edges(nid):
        return [e for _, e in sorted(parent.edges.items())
                if e.enabled and e.source == nid and e.target != nid]

    candidates = [n for n in _enabled_nodes(parent) if n.is_hidden and len(out_edges(n.id)) >= 2]
    if not candidates:
        return None
    node = candidates[int(ctx.rng.integers(len(candidates)))]
    outs = out_edges(node.id)
    g = parent.copy()
    cid = ctx.counter.next_id()
    g.nodes[cid] = NodeGene(cid, node.kind, node.depth, True, node.cell_params)
    for _, e in sorted(parent.edges.items()):
        if e.enabled and e.target == node.id:
            src = cid if e.source == node.id else e.source
            _add_edge_gene(g, ctx, src, cid, e.recurrent_skip, e.weight)
    order = ctx.rng.permutation(len(outs))
    n_moved = int(ctx.rng.integers(1, len(outs)))
    for idx in order[:n_moved]:
        e = outs[idx]
        g.edges[e.id] = replace(e, enabled=False)
        _add_edge_gene(g, ctx, cid, e.target, e.recurrent_skip, e.weight)
    return g


def _merge_node(parent: Genome, ctx: _Context) -> Genome | None:
    hidden = [n for n in _enabled_nodes(parent) if n.is_hidden]
    if len(hidden) < 2:
        return None
    pairs = [(a, b) for i, a in enumerate(hidden) for b in hidden[i + 1:]]
    for idx in ctx.rng.permutation(len(pairs)):
        a, b = pairs[idx]
        pair = (a.id, b.id)
        depth = 0.5 * (a.depth + b.depth)
        kind = ctx.kind()
        g = _without_node(_without_node(parent, a.id), b.id)
        mid = ctx.counter.next_id()
        g.nodes[mid] = NodeGene(mid, kind, depth, True, ctx.params(kind))
        made: set[tuple[int, int, int]] = set()
        for _, e in sorted(parent.edges.items()):
            if not e.enabled or (e.source not in pair and e.target not in pair):
                continue
            src = mid if e.source in pair else e.source
            tgt = mid if e.target in pair else e.target
            if e.recurrent_skip == 0 and not g.nodes[src].depth < g.nodes[tgt].depth:
                continue
            if not (g.nodes[src].enabled and g.nodes[tgt].enabled):
                continue
            key = (src, tgt, e.recurrent_skip)
            if key in made:
                continue
            made.add(key)
            _add_edge_gene(g, ctx, src, tgt, e.recurrent_skip, e.weight)
        if _outputs_ok(g):
            return g
    return None


OPERATORS: dict[str, Callable[[Genome, _Context], Genome | None]] = {
    "clone": _clone,
    "add_edge": _add_edge,
    "add_recurrent_edge": _add_recurrent_edge,
    "enable_edge": _enable_edge,
    "disable_edge": _disable_edge,
    "split_edge": _split_edge,
    "add_node": _add_node,
    "enable_node": _enable_node,
    "disable_node": _disable_node,
    "split_node": _split_node,
    "merge_node": _merge_node,
}


def _fresh_child(g: Genome) -> Genome:
    return g.copy(fitness=None, generation_id=-1, meta={})


def apply_mutation(parent: Genome, name: str, cfg: EvoConfig, rng: np.random.Generator,
                   counter: InnovationCounter) -> Genome | None:
    """Apply one named operator; None when it has nothing to act on."""
    mu, sigma = parent.weight_stats()
    ctx = _Context(cfg, rng, counter, mu, sigma)
    child = OPERATORS[name](parent, ctx)
    return None if child is None else _fresh_child(child)


def mutate(parent: Genome, n_mutations: int, cfg: EvoConfig, rng: np.random.Generator,
           counter: InnovationCounter) -> Genome:
    """Apply ``n_mutations`` operators drawn uniformly from the enabled set.

    An inapplicable draw is removed and the operator redrawn.  When nothing
    applies the child is a structural copy with ``meta["unmutated"] = True``.
    ``n_mutations == 0`` returns a plain copy.
    """
    if n_mutations < 0:
        raise ValueError("n_mutations must be >= 0")
    mu, sigma = parent.weight_stats()
    ctx = _Context(cfg, rng, counter, mu, sigma)
    child = parent
    applied: list[str] = []
    ops = sorted(cfg.enabled_mutations)
    for _ in range(n_mutations):
        remaining = list(ops)
        while remaining:
            name = remaining[int(rng.integers(len(remaining)))]
            result = OPERATORS[name](child, ctx)
            if result is not None:
                child = result
                applied.append(name)
                break
            remaining.remove(name)
        else:
            break
    out = _fresh_child(child)
    out.meta = {"mutations": applied, "unmutated": n_mutations > 0 and not applied}
    return out


# -- crossover --------------------------------------------------------------

def recombine(w_better, w_worse, r):
    """Child weight along the line through both parents, anchored at the fitter one."""
    return r * (w_worse - w_better) + w_better


def crossover(better: Genome, worse: Genome, cfg: EvoConfig,
              rng: np.random.Generator) -> Genome:
    """Union of parental genes matched by innovation id.

    Matching genes get ``r * (w_worse - w_better) + w_better`` with ``r``
    uniform on ``cfg.crossover_r_range``.  A matching gene disabled in either
    parent comes back enabled with probability ``cfg.reenable_probability``.
    """
    if (better.fitness is not None and worse.fitness is not None
            and worse.fitness < better.fitness):
        better, worse = worse, better
    lo, hi = cfg.crossover_r_range
    shared_r = float(rng.uniform(lo, hi)) if not cfg.crossover_r_per_gene else None

    def draw_r():
        return shared_r if shared_r is not None else float(rng.uniform(lo, hi))

    def merged_flag(a_enabled, b_enabled):
        if a_enabled and b_enabled:
            return True
        return bool(rng.random() < cfg.reenable_probability)

    nodes: dict[int, NodeGene] = {}
    for nid in sorted(better.nodes.keys() | worse.nodes.keys()):
        a, b = better.nodes.get(nid), worse.nodes.get(nid)
        if a is None or b is None:
            nodes[nid] = a or b
            continue
        r = draw_r()
        params = tuple(float(recombine(p1, p2, r)) for p1, p2 in zip(a.cell_params, b.cell_params))
        enabled = True if not a.is_hidden else merged_flag(a.enabled, b.enabled)
        nodes[nid] = replace(a, cell_params=params, enabled=enabled)

    edges: dict[int, EdgeGene] = {}
    for eid in sorted(better.edges.keys() | worse.edges.keys()):
        a, b = better.edges.get(eid), worse.edges.get(eid)
        if a is None or b is None:
            edges[eid] = a or b
            continue
        r = draw_r()
        edges[eid] = replace(a, weight=float(recombine(a.weight, b.weight, r)),
                             enabled=merged_flag(a.enabled, b.enabled))

    child = Genome(nodes, edges)
    _repair(child, better)
    child.meta = {"crossover": True}
    return child


def _disable_dangling(g: Genome) -> None:
    for eid, e in list(g.edges.items()):
        if e.enabled and not (g.nodes[e.source].enabled and g.nodes[e.target].enabled):
            g.edges[eid] = replace(e, enabled=False)


def _repair(child: Genome, better: Genome) -> None:
    _disable_dangling(child)
    if feed_forward_order(child) is None:
        for eid, e in list(child.edges.items()):
            if e.enabled and e.recurrent_skip == 0 and eid not in better.edges:
                child.edges[eid] = replace(e, enabled=False)
    if not _outputs_ok(child):
        # the fitter parent is valid, so its own enabled pattern restores a path
        for nid, n in better.nodes.items():
            child.nodes[nid] = replace(child.nodes[nid], enabled=n.enabled)
        for eid, e in better.edges.items():
            child.edges[eid] = replace(child.edges[eid], enabled=e.enabled)
        _disable_dangling(child)
    problems = validate(child)
    if problems:
        raise RuntimeError(f"crossover produced an invalid child: {problems}")
