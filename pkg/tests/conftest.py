import numpy as np
import pytest

from rnnevo.genome import (HIDDEN_KINDS, PARAM_COUNTS, EdgeGene, InnovationCounter, NodeGene,
                           NodeKind, minimal_genome)
from rnnevo.operators import EvoConfig, mutate


def random_rnn(rng, kinds=None, n_inputs=2, max_hidden=5, max_skip=3, counter=None):
    """Random valid genome with up to ``max_hidden`` hidden cells of the given
    kinds, dense feed-forward wiring and a few recurrent edges."""
    counter = counter or InnovationCounter()
    g = minimal_genome(n_inputs, 1, rng, counter)
    if kinds is None:
        kinds = [HIDDEN_KINDS[i] for i in rng.integers(len(HIDDEN_KINDS),
                                                        size=rng.integers(1, max_hidden + 1))]
    out = g.output_ids[0]
    hidden = []
    for k, kind in enumerate(kinds):
        nid = counter.next_id()
        depth = (k + 1) / (len(kinds) + 1)
        params = tuple(float(v) for v in rng.normal(0, 0.6, PARAM_COUNTS[kind]))
        g.nodes[nid] = NodeGene(nid, NodeKind(kind), depth, True, params)
        for src in g.input_ids + hidden:
            if src in g.input_ids or rng.random() < 0.6:
                eid = counter.edge_id(src, nid, 0)
                g.edges[eid] = EdgeGene(eid, src, nid, float(rng.normal(0, 0.8)))
        eid = counter.edge_id(nid, out, 0)
        g.edges[eid] = EdgeGene(eid, nid, out, float(rng.normal(0, 0.8)))
        hidden.append(nid)
    for _ in range(int(rng.integers(1, 4))):
        src = int(rng.choice(hidden + [out]))
        tgt = int(rng.choice(hidden))
        skip = int(rng.integers(1, max_skip + 1))
        eid = counter.edge_id(src, tgt, skip)
        g.edges[eid] = EdgeGene(eid, src, tgt, float(rng.normal(0, 0.5)), True, skip)
    return g


def evolved(rng, steps=8, n_inputs=2, counter=None, cfg=None):
    """A genome grown by a short random mutation chain from a minimal seed."""
    counter = counter or InnovationCounter()
    cfg = cfg or EvoConfig()
    g = minimal_genome(n_inputs, 1, rng, counter)
    for _ in range(steps):
        g = mutate(g, 1, cfg, rng, counter)
    g.fitness = float(rng.uniform(0.01, 1.0))
    return g, counter


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
