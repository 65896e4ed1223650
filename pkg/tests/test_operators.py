import numpy as np
import pytest

from rnnevo.genome import (HIDDEN_KINDS, EdgeGene, InnovationCounter, NodeGene, NodeKind,
                           minimal_genome, validate)
from rnnevo.operators import (DEFAULT_MUTATIONS, INTER_CROSSOVER, INTRA_CROSSOVER, MUTATION,
                              MUTATIONS, EvoConfig, apply_mutation, crossover, mutate, recombine,
                              select_operation)

from conftest import evolved


def with_hidden(rng):
    """minimal(1,1) plus one hidden simple node on a parallel path."""
    c = InnovationCounter()
    g = minimal_genome(1, 1, rng, c)
    i, o = g.input_ids[0], g.output_ids[0]
    h = c.next_id()
    g.nodes[h] = NodeGene(h, NodeKind.SIMPLE, 0.5, True, (0.1,))
    for s, t in ((i, h), (h, o)):
        eid = c.edge_id(s, t, 0)
        g.edges[eid] = EdgeGene(eid, s, t, 0.4)
    return g, c


class TestConfig:
    def test_defaults(self):
        cfg = EvoConfig()
        assert "split_edge" not in cfg.enabled_mutations
        assert len(cfg.enabled_mutations) == 10
        assert set(cfg.node_kind_pool) == set(HIDDEN_KINDS)

    @pytest.mark.parametrize("kwargs", [
        {"mutation_rate": 0.5},
        {"enabled_mutations": frozenset()},
        {"enabled_mutations": frozenset({"teleport"})},
        {"recurrent_skip_range": (0, 3)},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            EvoConfig(**kwargs)


class TestSelectOperation:
    def test_always_mutation(self, rng):
        cfg = EvoConfig(1.0, 0.0, 0.0)
        assert {select_operation(cfg, rng) for _ in range(1000)} == {MUTATION}

    def test_initializing(self, rng):
        assert {select_operation(EvoConfig(), rng, initializing=True)
                for _ in range(1000)} == {MUTATION}

    def test_frequencies(self, rng):
        draws = [select_operation(EvoConfig(), rng) for _ in range(100_000)]
        for op, rate in ((MUTATION, 0.7), (INTRA_CROSSOVER, 0.2), (INTER_CROSSOVER, 0.1)):
            assert abs(draws.count(op) / len(draws) - rate) < 0.01


class TestMutation:
    def test_saturated_add_edge_is_redrawn(self, rng):
        parent = minimal_genome(2, 1, rng)
        assert apply_mutation(parent, "add_edge", EvoConfig(), rng, InnovationCounter()) is None
        cfg = EvoConfig(enabled_mutations=frozenset({"add_edge", "add_node"}))
        child = mutate(parent, 1, cfg, rng, InnovationCounter())
        assert child.meta["mutations"] == ["add_node"]

    def test_nothing_applies_flags_unmutated(self, rng):
        parent = minimal_genome(2, 1, rng)
        cfg = EvoConfig(enabled_mutations=frozenset({"add_edge", "enable_node", "merge_node"}))
        child = mutate(parent, 1, cfg, rng, InnovationCounter())
        assert child.meta["unmutated"] is True
        assert child.structure_key() == parent.structure_key()

    def test_zero_mutations_is_copy(self, rng):
        parent, _ = evolved(rng)
        child = mutate(parent, 0, EvoConfig(), rng, InnovationCounter())
        assert child.edges == parent.edges and child.nodes == parent.nodes
        assert child.fitness is None

    def test_add_node_shape(self, rng):
        parent = minimal_genome(1, 1, rng)
        c = InnovationCounter()
        c.observe(parent)
        child = apply_mutation(parent, "add_node", EvoConfig(), rng, c)
        assert len(child.nodes) == 3
        new = child.hidden_nodes()[0]
        assert 0.0 < new.depth < 1.0
        assert sum(e.target == new.id for e in child.edges.values()) >= 1
        assert sum(e.source == new.id for e in child.edges.values()) >= 1
        assert np.isfinite(child.all_weights()).all()

    def test_new_weights_follow_parent_stats(self):
        rng = np.random.default_rng(1)
        parent, counter = evolved(rng, steps=12)
        mu, sigma = parent.weight_stats()
        drawn = []
        for _ in range(10_000):
            child = apply_mutation(parent, "add_node", EvoConfig(), rng, counter)
            if child is None:
                continue
            drawn.extend(e.weight for eid, e in child.edges.items() if eid not in parent.edges)
            drawn.extend(p for nid, n in child.nodes.items() if nid not in parent.nodes
                         for p in n.cell_params)
        drawn = np.array(drawn)
        assert abs(drawn.mean() - mu) < 0.05 * sigma
        assert abs(drawn.std() / sigma - 1.0) < 0.05

    def test_disable_only_hidden_node(self, rng):
        parent, c = with_hidden(rng)
        h = parent.hidden_nodes()[0].id
        child = apply_mutation(parent, "disable_node", EvoConfig(), rng, c)
        assert not child.nodes[h].enabled
        assert all(not e.enabled for e in child.edges.values() if h in (e.source, e.target))
        assert validate(child) == []

    def test_split_node_keeps_function(self, rng):
        from rnnevo.runtime import unroll
        parent, c = with_hidden(rng)
        h = parent.hidden_nodes()[0].id
        # split_node needs two out-edges
        o = parent.output_ids[0]
        eid = c.edge_id(h, o, 1)
        parent.edges[eid] = EdgeGene(eid, h, o, 0.3, True, 1)
        child = apply_mutation(parent, "split_node", EvoConfig(), rng, c)
        assert child is not None and validate(child) == []
        X = rng.uniform(size=(12, 1))
        assert np.allclose(unroll(parent).forward(X), unroll(child).forward(X), atol=1e-14)

    def test_recurrent_skip_range(self, rng):
        parent = minimal_genome(2, 1, rng)
        c = InnovationCounter()
        c.observe(parent)
        cfg = EvoConfig(recurrent_skip_range=(2, 4))
        skips = set()
        for _ in range(300):
            child = apply_mutation(parent, "add_recurrent_edge", cfg, rng, c)
            skips |= {e.recurrent_skip for eid, e in child.edges.items() if eid not in parent.edges}
        assert skips == {2, 3, 4}

    def test_lamarckian_preservation(self):
        rng = np.random.default_rng(2)
        counter = InnovationCounter()
        for _ in range(300):
            parent, _ = evolved(rng, steps=int(rng.integers(0, 8)), counter=counter)
            child = mutate(parent, int(rng.integers(1, 4)), EvoConfig(), rng, counter)
            for eid in parent.edges.keys() & child.edges.keys():
                assert child.edges[eid].weight == parent.edges[eid].weight
            for nid in parent.nodes.keys() & child.nodes.keys():
                assert child.nodes[nid].cell_params == parent.nodes[nid].cell_params

    @pytest.mark.parametrize("name", MUTATIONS)
    def test_each_operator_closed(self, name):
        rng = np.random.default_rng(MUTATIONS.index(name))
        counter = InnovationCounter()
        cfg = EvoConfig(enabled_mutations=frozenset(MUTATIONS))
        for _ in range(150):
            parent, _ = evolved(rng, steps=int(rng.integers(0, 10)), counter=counter, cfg=cfg)
            child = apply_mutation(parent, name, cfg, rng, counter)
            if child is not None:
                assert validate(child) == [], name

    def test_uniform_operator_choice(self):
        rng = np.random.default_rng(3)
        counter = InnovationCounter()
        parent, _ = evolved(rng, steps=20, counter=counter)
        applicable = {name for name in DEFAULT_MUTATIONS
                      if apply_mutation(parent, name, EvoConfig(), np.random.default_rng(0),
                                        InnovationCounter()) is not None}
        counts = dict.fromkeys(DEFAULT_MUTATIONS, 0)
        n = 6000
        for _ in range(n):
            applied = mutate(parent, 1, EvoConfig(), rng, counter).meta["mutations"]
            counts[applied[0]] += 1
        share = 1.0 / len(applicable)
        for name in DEFAULT_MUTATIONS:
            expected = share if name in applicable else 0.0
            assert abs(counts[name] / n - expected) < 4 * np.sqrt(share / n), counts


class TestCrossover:
    def test_recombine_formula(self):
        assert recombine(0.2, 0.6, 0.5) == pytest.approx(0.4)
        assert recombine(0.2, 0.6, -0.5) == pytest.approx(0.0)
        assert recombine(0.2, 0.6, 1.5) == pytest.approx(0.8)

    def test_self_crossover_identity(self, rng):
        g, _ = evolved(rng)
        child = crossover(g, g, EvoConfig(), rng)
        assert {k: e.weight for k, e in child.edges.items()} == \
               {k: e.weight for k, e in g.edges.items()}

    def test_parents_are_ordered_by_fitness(self, rng):
        c = InnovationCounter()
        a = minimal_genome(1, 1, rng, c)
        b = a.copy()
        eid = next(iter(a.edges))
        a.edges[eid] = EdgeGene(eid, *a.edges[eid].key[:2], 0.2)
        b.edges[eid] = EdgeGene(eid, *a.edges[eid].key[:2], 0.6)
        a.fitness, b.fitness = 0.1, 0.5
        cfg = EvoConfig(crossover_r_range=(1.0, 1.0))
        # r = 1 returns the worse parent's weight whichever order they come in
        assert crossover(b, a, cfg, rng).edges[eid].weight == pytest.approx(0.6)
        assert crossover(a, b, cfg, rng).edges[eid].weight == pytest.approx(0.6)

    def test_union_and_bounds(self):
        rng = np.random.default_rng(4)
        counter = InnovationCounter()
        for _ in range(200):
            a, _ = evolved(rng, steps=6, counter=counter)
            b, _ = evolved(rng, steps=6, counter=counter)
            better, worse = sorted((a, b), key=lambda g: g.fitness)
            child = crossover(better, worse, EvoConfig(), rng)
            assert validate(child) == []
            assert child.edges.keys() == better.edges.keys() | worse.edges.keys()
            for eid in better.edges.keys() & worse.edges.keys():
                w1, w2 = better.edges[eid].weight, worse.edges[eid].weight
                d = abs(w2 - w1)
                assert min(w1, w2) - 0.5 * d - 1e-12 <= child.edges[eid].weight
                assert child.edges[eid].weight <= max(w1, w2) + 0.5 * d + 1e-12

    def test_shared_r_mode(self, rng):
        c = InnovationCounter()
        a = minimal_genome(3, 1, rng, c)
        b = a.copy()
        for eid, e in a.edges.items():
            b.edges[eid] = EdgeGene(eid, e.source, e.target, e.weight + 1.0)
        a.fitness, b.fitness = 0.1, 0.2
        child = crossover(a, b, EvoConfig(crossover_r_per_gene=False), rng)
        rs = {round(child.edges[k].weight - a.edges[k].weight, 12) for k in a.edges}
        assert len(rs) == 1
