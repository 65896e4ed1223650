import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnnevo.data import from_arrays
from rnnevo.genome import (HIDDEN_KINDS, EdgeGene, InnovationCounter, NodeGene, NodeKind,
                           minimal_genome, validate)
from rnnevo.runtime import (TrainConfig, adjust_gradient, bptt_gradient, evaluate_mse, train,
                            unroll)

from conftest import random_rnn


def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def lstm_oracle(params, w_in, xs, bonus):
    """Scalar LSTM written straight from the gate equations."""
    wi, ui, bi, wf, uf, bf, wo, uo, bo, wg, ug, bg = params
    h = c = 0.0
    out = []
    for x_t in xs:
        x = w_in * x_t
        i = sigmoid(wi * x + ui * h + bi)
        f = sigmoid(wf * x + uf * h + bf + bonus)
        o = sigmoid(wo * x + uo * h + bo)
        g = math.tanh(wg * x + ug * h + bg)
        c = f * c + i * g
        h = o * math.tanh(c)
        out.append(h)
    return out


def single_cell(kind, params, w_in=0.7, w_out=1.0):
    c = InnovationCounter()
    g = minimal_genome(1, 1, np.random.default_rng(0), c)
    i, o = g.input_ids[0], g.output_ids[0]
    g.edges.clear()
    h = c.next_id()
    g.nodes[h] = NodeGene(h, kind, 0.5, True, tuple(params))
    e1, e2 = c.edge_id(i, h, 0), c.edge_id(h, o, 0)
    g.edges[e1] = EdgeGene(e1, i, h, w_in)
    g.edges[e2] = EdgeGene(e2, h, o, w_out)
    return g


def fd_gradient(net, X, Y, h=1e-5):
    theta = net.parameter_vector
    fd = np.zeros_like(theta)
    for k in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[k] += h
        dn[k] -= h
        fd[k] = (net.loss_and_gradient(X, Y, up)[0] - net.loss_and_gradient(X, Y, dn)[0]) / (2 * h)
    return fd


class TestForward:
    def test_zero_input_zero_output(self):
        g = single_cell(NodeKind.SIMPLE, (0.0,), w_in=1.0)
        assert np.array_equal(unroll(g).forward(np.zeros((3, 1))), np.zeros((3, 1)))

    def test_linear_single_edge(self, rng):
        g = minimal_genome(1, 1, rng)
        w = next(iter(g.edges.values())).weight
        X = rng.normal(size=(6, 1))
        assert np.allclose(unroll(g).forward(X), w * X, rtol=0, atol=1e-15)

    def test_lstm_matches_scalar_oracle(self, rng):
        params = rng.normal(0, 0.8, 12)
        g = single_cell(NodeKind.LSTM, params)
        xs = np.full(5, 0.6)
        pred = unroll(g, TrainConfig()).forward(xs.reshape(-1, 1))[:, 0]
        ref = lstm_oracle(params, 0.7, xs, bonus=1.0)
        assert np.max(np.abs(pred - ref)) < 1e-10

    def test_forget_bonus_not_stored(self, rng):
        params = tuple(rng.normal(0, 0.5, 12))
        g = single_cell(NodeKind.LSTM, params)
        a = unroll(g, TrainConfig(forget_gate_bias_bonus=0.0)).forward(np.ones((4, 1)))
        b = unroll(g, TrainConfig()).forward(np.ones((4, 1)))
        assert not np.allclose(a, b)
        assert unroll(g).genome.nodes[g.hidden_nodes()[0].id].cell_params == params

    def test_recurrent_skip_reads_past(self):
        c = InnovationCounter()
        g = minimal_genome(1, 1, np.random.default_rng(0), c)
        i, o = g.input_ids[0], g.output_ids[0]
        eid = next(iter(g.edges))
        g.edges[eid] = EdgeGene(eid, i, o, 1.0)
        r = c.edge_id(i, o, 2)
        g.edges[r] = EdgeGene(r, i, o, 10.0, True, 2)
        out = unroll(g).forward(np.array([[1.0], [2.0], [3.0], [4.0]]))[:, 0]
        assert out.tolist() == [1.0, 2.0, 13.0, 24.0]

    def test_width_mismatch_and_nan(self, rng):
        net = unroll(minimal_genome(2, 1, rng))
        with pytest.raises(ValueError):
            net.forward(np.zeros((4, 3)))
        X = np.zeros((4, 2))
        X[1, 0] = np.nan
        with pytest.raises(ValueError):
            net.forward(X)

    @pytest.mark.parametrize("kind", HIDDEN_KINDS)
    def test_each_kind_finite(self, rng, kind):
        g = random_rnn(rng, kinds=[kind])
        out = unroll(g).forward(rng.uniform(size=(20, 2)))
        assert np.isfinite(out).all()


class TestGradient:
    @pytest.mark.parametrize("kind", HIDDEN_KINDS)
    def test_matches_finite_differences(self, kind):
        rng = np.random.default_rng(HIDDEN_KINDS.index(kind))
        g = random_rnn(rng, kinds=[kind, kind])
        net = unroll(g)
        X, Y = rng.uniform(size=(10, 2)), rng.uniform(size=(10, 1))
        _, grad = net.loss_and_gradient(X, Y)
        fd = fd_gradient(net, X, Y)
        assert np.allclose(grad, fd, rtol=1e-4, atol=1e-9)

    def test_zero_weights_zero_series(self):
        g = single_cell(NodeKind.GRU, np.zeros(9), w_in=0.0, w_out=0.0)
        grad = bptt_gradient(unroll(g), np.zeros((10, 1)), np.zeros((10, 1)))
        assert np.all(grad == 0.0)

    def test_disabled_edge_slot_is_zero(self, rng):
        g = random_rnn(rng, kinds=[NodeKind.MGU])
        eid = max(e.id for e in g.edges.values() if e.recurrent_skip == 0
                  and g.nodes[e.target].kind is NodeKind.OUTPUT and e.source in g.input_ids)
        e = g.edges[eid]
        g.edges[eid] = EdgeGene(e.id, e.source, e.target, e.weight, False)
        assert validate(g) == []
        net = unroll(g)
        grad = bptt_gradient(net, rng.uniform(size=(10, 2)), rng.uniform(size=(10, 1)))
        assert grad[net.edge_ids.index(eid)] == 0.0


class TestAdjustGradient:
    def test_clip(self):
        g = np.array([3.0, 4.0])
        assert np.linalg.norm(adjust_gradient(g)) == pytest.approx(1.0, abs=1e-15)

    def test_boost(self):
        g = np.array([0.006, 0.008])
        assert np.linalg.norm(adjust_gradient(g)) == pytest.approx(0.05, abs=1e-15)

    @pytest.mark.parametrize("values", [[2e-162], [5e-324, 0.0], [1e300, -1e300]])
    def test_extreme_magnitudes(self, values):
        adj = adjust_gradient(np.array(values))
        target = 0.05 if abs(values[0]) < 1 else 1.0
        assert np.linalg.norm(adj) == pytest.approx(target, rel=1e-12)

    def test_zero_left_alone(self):
        assert np.all(adjust_gradient(np.zeros(4)) == 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3, allow_subnormal=False), min_size=1, max_size=30))
    def test_norm_in_band(self, values):
        g = np.array(values)
        raw = math.hypot(*values)
        adj = np.linalg.norm(adjust_gradient(g))
        if raw == 0:
            assert adj == 0
        else:
            assert adj == pytest.approx(min(max(raw, 0.05), 1.0), rel=1e-12)


class TestEvaluate:
    def test_perfect_and_constant(self):
        g = minimal_genome(1, 1, np.random.default_rng(0))
        net = unroll(g)
        X = np.linspace(0, 1, 8).reshape(-1, 1)
        assert evaluate_mse(net, [(X, net.forward(X))]) == 0.0
        zero = np.zeros_like(net.parameter_vector)
        assert evaluate_mse(net, [(X, np.ones((8, 1)))], zero) == 1.0

    def test_recomputation(self, rng):
        g = random_rnn(rng)
        net = unroll(g)
        X, Y = rng.uniform(size=(20, 2)), rng.uniform(size=(20, 1))
        pred = net.forward(X)
        ref = sum((float(pred[t, 0]) - float(Y[t, 0])) ** 2 for t in range(20)) / 20
        assert evaluate_mse(net, [(X, Y)]) == pytest.approx(ref, abs=1e-12)

    def test_empty(self, rng):
        net = unroll(minimal_genome(1, 1, rng))
        with pytest.raises(ValueError):
            evaluate_mse(net, [])


def linear_data(n=200):
    x = np.sin(np.linspace(0, 12, n))
    # output lags the input by one step, so the model sees x_t and must predict 0.5 x_t
    seq = np.column_stack([x, np.r_[0.0, 0.5 * x[:-1]]])
    return from_arrays([seq], ["x", "y"], [0], 1, normalization="none")


class TestTrain:
    def test_converges_on_linear_map(self):
        data = linear_data()
        g = minimal_genome(1, 1, np.random.default_rng(3))
        before = evaluate_mse(unroll(g), data.validation_pairs())
        trained = train(g, data, TrainConfig(), np.random.default_rng(0))
        assert trained.fitness < before
        longer = train(g, data, TrainConfig(epochs=300, learning_rate=0.05),
                       np.random.default_rng(0))
        assert longer.fitness < 1e-4

    def test_deterministic(self, rng):
        data = linear_data()
        g = random_rnn(rng, n_inputs=1)
        a = train(g, data, TrainConfig(chunk_length=20), np.random.default_rng(5))
        b = train(g, data, TrainConfig(chunk_length=20), np.random.default_rng(5))
        assert a.fitness == b.fitness
        assert a.edges == b.edges and a.nodes == b.nodes

    def test_divergence_gives_inf(self):
        data = linear_data()
        g = single_cell(NodeKind.SIMPLE, (0.0,), w_in=1e308, w_out=1e308)
        out = train(g, data, TrainConfig(epochs=1), np.random.default_rng(0))
        assert out.fitness == math.inf

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(boost_threshold=2.0)
        with pytest.raises(ValueError):
            TrainConfig(nesterov_momentum=1.0)
