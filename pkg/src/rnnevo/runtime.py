"""Unrolling, forward pass, backpropagation through time and SGD training.

Every hidden node is a scalar unit: its input ``x`` is the weighted sum of
its incoming edges and ``h`` is its own output from the previous step.  Cell
parameter layouts (indices into ``NodeGene.cell_params``):

=========  ==========================================================
simple     b                          y = tanh(x + b)
delta_rnn  alpha, beta1, beta2, v, br, bz
gru        wz, uz, bz, wr, ur, br, wh, uh, bh
lstm       wi, ui, bi, wf, uf, bf, wo, uo, bo, wg, ug, bg
mgu        wf, uf, bf, wh, uh, bh
ugrnn      wc, uc, bc, wg, ug, bg
=========  ==========================================================

Output nodes are linear (``y = x``); input nodes emit the input column.  The
forget-gate bias bonus is a constant added to the forget pre-activation of
LSTM and MGU cells, so stored biases never drift from inheritance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .genome import Genome, NodeKind, PARAM_COUNTS, feed_forward_order, update_weights

KIND_CODES = {
    NodeKind.INPUT: 0,
    NodeKind.OUTPUT: 1,
    NodeKind.SIMPLE: 2,
    NodeKind.DELTA_RNN: 3,
    NodeKind.GRU: 4,
    NodeKind.LSTM: 5,
    NodeKind.MGU: 6,
    NodeKind.UGRNN: 7,
}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.001
    nesterov_momentum: float = 0.9
    clip_threshold: float = 1.0
    boost_threshold: float = 0.05
    forget_gate_bias_bonus: float = 1.0
    # Steps per SGD update; None means one update per whole training sequence.
    chunk_length: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.nesterov_momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if not self.boost_threshold < self.clip_threshold:
            raise ValueError("boost_threshold must be below clip_threshold")
        if self.chunk_length is not None and self.chunk_length < 1:
            raise ValueError("chunk_length must be >= 1")


# -- kernels -----------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


@numba.njit(cache=True, nogil=True)
def _forward_kernel(theta, X, kind, poff, in_col, in_ptr, in_src, in_skip, in_w, bonus, Y, S, C):
    T = X.shape[0]
    N = kind.shape[0]
    for t in range(T):
        for n in range(N):
            k = kind[n]
            if k == 0:
                Y[t, n] = X[t, in_col[n]]
                continue
            x = 0.0
            for j in range(in_ptr[n], in_ptr[n + 1]):
                tt = t - in_skip[j]
                if tt >= 0:
                    x += theta[in_w[j]] * Y[tt, in_src[j]]
            S[t, n] = x
            h = Y[t - 1, n] if t > 0 else 0.0
            p = poff[n]
            if k == 1:
                Y[t, n] = x
            elif k == 2:
                Y[t, n] = math.tanh(x + theta[p])
            elif k == 3:
                alpha, b1, b2, v, br, bz = (theta[p], theta[p + 1], theta[p + 2],
                                            theta[p + 3], theta[p + 4], theta[p + 5])
                vh = v * h
                z = math.tanh(alpha * vh * x + b1 * vh + b2 * x + bz)
                r = _sigmoid(x + br)
                Y[t, n] = math.tanh((1.0 - r) * z + r * h)
            elif k == 4:
                z = _sigmoid(theta[p] * x + theta[p + 1] * h + theta[p + 2])
                r = _sigmoid(theta[p + 3] * x + theta[p + 4] * h + theta[p + 5])
                hc = math.tanh(theta[p + 6] * x + theta[p + 7] * (r * h) + theta[p + 8])
                Y[t, n] = (1.0 - z) * h + z * hc
            elif k == 5:
                c_prev = C[t - 1, n] if t > 0 else 0.0
                i = _sigmoid(theta[p] * x + theta[p + 1] * h + theta[p + 2])
                f = _sigmoid(theta[p + 3] * x + theta[p + 4] * h + theta[p + 5] + bonus)
                o = _sigmoid(theta[p + 6] * x + theta[p + 7] * h + theta[p + 8])
                g = math.tanh(theta[p + 9] * x + theta[p + 10] * h + theta[p + 11])
                c = f * c_prev + i * g
                C[t, n] = c
                Y[t, n] = o * math.tanh(c)
            elif k == 6:
                f = _sigmoid(theta[p] * x + theta[p + 1] * h + theta[p + 2] + bonus)
                hc = math.tanh(theta[p + 3] * x + theta[p + 4] * (f * h) + theta[p + 5])
                Y[t, n] = (1.0 - f) * h + f * hc
            else:
                c = math.tanh(theta[p] * x + theta[p + 1] * h + theta[p + 2])
                g = _sigmoid(theta[p + 3] * x + theta[p + 4] * h + theta[p + 5])
                Y[t, n] = g * h + (1.0 - g) * c


@numba.njit(cache=True, nogil=True)
def _backward_kernel(theta, kind, poff, in_ptr, in_src, in_skip, in_w, bonus, Y, S, C, dY, grad):
    T = Y.shape[0]
    N = kind.shape[0]
    dC = np.zeros((T, N))
    for t in range(T - 1, -1, -1):
        for n in range(N - 1, -1, -1):
            k = kind[n]
            if k == 0:
                continue
            dy = dY[t, n]
            x = S[t, n]
            h = Y[t - 1, n] if t > 0 else 0.0
            p = poff[n]
            dh = 0.0
            if k == 1:
                dx = dy
            elif k == 2:
                da = dy * (1.0 - Y[t, n] * Y[t, n])
                grad[p] += da
                dx = da
            elif k == 3:
                alpha, b1, b2, v, br, bz = (theta[p], theta[p + 1], theta[p + 2],
                                            theta[p + 3], theta[p + 4], theta[p + 5])
                vh = v * h
                z = math.tanh(alpha * vh * x + b1 * vh + b2 * x + bz)
                r = _sigmoid(x + br)
                y = Y[t, n]
                da = dy * (1.0 - y * y)
                dz = da * (1.0 - r)
                dr = da * (h - z)
                dh = da * r
                daz = dz * (1.0 - z * z)
                grad[p] += daz * vh * x
                grad[p + 1] += daz * vh
                grad[p + 2] += daz * x
                grad[p + 5] += daz
                dvh = daz * (alpha * x + b1)
                grad[p + 3] += dvh * h
                dh += dvh * v
                dar = dr * r * (1.0 - r)
                grad[p + 4] += dar
                dx = daz * (alpha * vh + b2) + dar
            elif k == 4:
                wz, uz, bz, wr, ur, br, wh, uh, bh = (theta[p], theta[p + 1], theta[p + 2],
                                                      theta[p + 3], theta[p + 4], theta[p + 5],
                                                      theta[p + 6], theta[p + 7], theta[p + 8])
                z = _sigmoid(wz * x + uz * h + bz)
                r = _sigmoid(wr * x + ur * h + br)
                hc = math.tanh(wh * x + uh * (r * h) + bh)
                dz = dy * (hc - h)
                dhc = dy * z
                dh = dy * (1.0 - z)
                dahc = dhc * (1.0 - hc * hc)
                grad[p + 6] += dahc * x
                grad[p + 7] += dahc * r * h
                grad[p + 8] += dahc
                drh = dahc * uh
                dr = drh * h
                dh += drh * r
                dar = dr * r * (1.0 - r)
                grad[p + 3] += dar * x
                grad[p + 4] += dar * h
                grad[p + 5] += dar
                daz = dz * z * (1.0 - z)
                grad[p] += daz * x
                grad[p + 1] += daz * h
                grad[p + 2] += daz
                dx = wh * dahc + wr * dar + wz * daz
                dh += ur * dar + uz * daz
            elif k == 5:
                c_prev = C[t - 1, n] if t > 0 else 0.0
                i = _sigmoid(theta[p] * x + theta[p + 1] * h + theta[p + 2])
                f = _sigmoid(theta[p + 3] * x + theta[p + 4] * h + theta[p + 5] + bonus)
                o = _sigmoid(theta[p + 6] * x + theta[p + 7] * h + theta[p + 8])
                g = math.tanh(theta[p + 9] * x + theta[p + 10] * h + theta[p + 11])
                tc = math.tanh(C[t, n])
                do = dy * tc
                dc = dy * o * (1.0 - tc * tc) + dC[t, n]
                dai = dc * g * i * (1.0 - i)
                daf = dc * c_prev * f * (1.0 - f)
                dao = do * o * (1.0 - o)
                dag = dc * i * (1.0 - g * g)
                if t > 0:
                    dC[t - 1, n] += dc * f
                grad[p] += dai * x
                grad[p + 1] += dai * h
                grad[p + 2] += dai
                grad[p + 3] += daf * x
                grad[p + 4] += daf * h
                grad[p + 5] += daf
                grad[p + 6] += dao * x
                grad[p + 7] += dao * h
                grad[p + 8] += dao
                grad[p + 9] += dag * x
                grad[p + 10] += dag * h
                grad[p + 11] += dag
                dx = theta[p] * dai + theta[p + 3] * daf + theta[p + 6] * dao + theta[p + 9] * dag
                dh = theta[p + 1] * dai + theta[p + 4] * daf + theta[p + 7] * dao + theta[p + 10] * dag
            elif k == 6:
                wf, uf, bf, wh, uh, bh = (theta[p], theta[p + 1], theta[p + 2],
                                          theta[p + 3], theta[p + 4], theta[p + 5])
                f = _sigmoid(wf * x + uf * h + bf + bonus)
                hc = math.tanh(wh * x + uh * (f * h) + bh)
                dhc = dy * f
                df = dy * (hc - h)
                dh = dy * (1.0 - f)
                dahc = dhc * (1.0 - hc * hc)
                grad[p + 3] += dahc * x
                grad[p + 4] += dahc * f * h
                grad[p + 5] += dahc
                dfh = dahc * uh
                df += dfh * h
                dh += dfh * f
                daf = df * f * (1.0 - f)
                grad[p] += daf * x
                grad[p + 1] += daf * h
                grad[p + 2] += daf
                dx = wh * dahc + wf * daf
                dh += uf * daf
            else:
                wc, uc, bc, wg, ug, bg = (theta[p], theta[p + 1], theta[p + 2],
                                          theta[p + 3], theta[p + 4], theta[p + 5])
                c = math.tanh(wc * x + uc * h + bc)
                g = _sigmoid(wg * x + ug * h + bg)
                dg = dy * (h - c)
                dcand = dy * (1.0 - g)
                dh = dy * g
                dac = dcand * (1.0 - c * c)
                dag = dg * g * (1.0 - g)
                grad[p] += dac * x
                grad[p + 1] += dac * h
                grad[p + 2] += dac
                grad[p + 3] += dag * x
                grad[p + 4] += dag * h
                grad[p + 5] += dag
                dx = wc * dac + wg * dag
                dh += uc * dac + ug * dag
            if t > 0:
                dY[t - 1, n] += dh
            for j in range(in_ptr[n], in_ptr[n + 1]):
                tt = t - in_skip[j]
                if tt >= 0:
                    grad[in_w[j]] += dx * Y[tt, in_src[j]]
                    dY[tt, in_src[j]] += dx * theta[in_w[j]]


# -- unrolled network ----------------------------------------------------------

class UnrolledNetwork:
    """A genome compiled into flat arrays for the kernels.

    ``parameter_vector`` holds every edge weight (edges sorted by id) followed
    by every node's cell parameters (nodes sorted by id).  Disabled genes keep
    their slots but never take part in the computation, so their gradient is
    exactly zero.
    """

    def __init__(self, genome: Genome, forget_gate_bias_bonus: float = 1.0):
        self.genome = genome
        self.bonus = float(forget_gate_bias_bonus)
        self.edge_ids = sorted(genome.edges)
        edge_slot = {eid: i for i, eid in enumerate(self.edge_ids)}
        params = [genome.edges[eid].weight for eid in self.edge_ids]
        self.param_offset: dict[int, int] = {}
        for nid in sorted(genome.nodes):
            node = genome.nodes[nid]
            if PARAM_COUNTS[node.kind]:
                self.param_offset[nid] = len(params)
                params.extend(node.cell_params)
        self.parameter_vector = np.asarray(params, dtype=np.float64)

        order = feed_forward_order(genome)
        if order is None:
            raise ValueError("genome has a feed-forward cycle")
        self.order = order
        index = {nid: i for i, nid in enumerate(order)}
        inputs, outputs = genome.input_ids, genome.output_ids
        self.n_inputs, self.n_outputs = len(inputs), len(outputs)
        n = len(order)
        self.kind = np.array([KIND_CODES[genome.nodes[nid].kind] for nid in order], dtype=np.int64)
        self.poff = np.array([self.param_offset.get(nid, -1) for nid in order], dtype=np.int64)
        in_col = np.full(n, -1, dtype=np.int64)
        for col, nid in enumerate(inputs):
            in_col[index[nid]] = col
        self.in_col = in_col
        self.out_index = np.array([index[nid] for nid in outputs], dtype=np.int64)

        incoming: list[list[tuple[int, int, int]]] = [[] for _ in range(n)]
        for eid in self.edge_ids:
            e = genome.edges[eid]
            if not e.enabled or e.source not in index or e.target not in index:
                continue
            incoming[index[e.target]].append((index[e.source], e.recurrent_skip, edge_slot[eid]))
        ptr = np.zeros(n + 1, dtype=np.int64)
        for i, lst in enumerate(incoming):
            ptr[i + 1] = ptr[i] + len(lst)
        flat = [item for lst in incoming for item in lst]
        self.in_ptr = ptr
        self.in_src = np.array([f[0] for f in flat], dtype=np.int64)
        self.in_skip = np.array([f[1] for f in flat], dtype=np.int64)
        self.in_w = np.array([f[2] for f in flat], dtype=np.int64)
        self.time_window = int(self.in_skip.max()) if len(flat) else 0

    @property
    def n_params(self) -> int:
        return self.parameter_vector.size

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_inputs:
            raise ValueError(f"expected input of shape (T, {self.n_inputs}), got {X.shape}")
        if np.isnan(X).any():
            raise ValueError("NaN in input series")
        return X

    def _run(self, X, theta):
        T, N = X.shape[0], self.kind.shape[0]
        Y = np.zeros((T, N))
        S = np.zeros((T, N))
        C = np.zeros((T, N))
        _forward_kernel(theta, X, self.kind, self.poff, self.in_col, self.in_ptr, self.in_src,
                        self.in_skip, self.in_w, self.bonus, Y, S, C)
        return Y, S, C

    def forward(self, X: np.ndarray, theta: np.ndarray | None = None) -> np.ndarray:
        """Predictions of shape ``(T, n_outputs)``; state is zero before step 0."""
        X = self._check(X)
        theta = self.parameter_vector if theta is None else np.asarray(theta, dtype=np.float64)
        Y, _, _ = self._run(X, theta)
        return Y[:, self.out_index]

    def loss_and_gradient(self, X: np.ndarray, targets: np.ndarray,
                          theta: np.ndarray | None = None) -> tuple[float, np.ndarray]:
        """MSE over all (step, output) pairs and its full BPTT gradient."""
        X = self._check(X)
        targets = np.asarray(targets, dtype=np.float64).reshape(X.shape[0], self.n_outputs)
        theta = self.parameter_vector if theta is None else np.asarray(theta, dtype=np.float64)
        Y, S, C = self._run(X, theta)
        err = Y[:, self.out_index] - targets
        dY = np.zeros_like(Y)
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is caught by the caller
            loss = float(np.mean(err * err))
            dY[:, self.out_index] = 2.0 * err / err.size
        grad = np.zeros_like(theta)
        _backward_kernel(theta, self.kind, self.poff, self.in_ptr, self.in_src, self.in_skip,
                         self.in_w, self.bonus, Y, S, C, dY, grad)
        return loss, grad

    def to_genome(self, theta: np.ndarray) -> Genome:
        edge_weights = {eid: theta[i] for i, eid in enumerate(self.edge_ids)}
        cells = {}
        for nid, off in self.param_offset.items():
            count = PARAM_COUNTS[self.genome.nodes[nid].kind]
            cells[nid] = theta[off:off + count]
        return update_weights(self.genome, edge_weights, cells)


def unroll(genome: Genome, cfg: TrainConfig | None = None) -> UnrolledNetwork:
    bonus = (cfg or TrainConfig()).forget_gate_bias_bonus
    return UnrolledNetwork(genome, bonus)


def forward(net: UnrolledNetwork, X: np.ndarray) -> np.ndarray:
    return net.forward(X)


def bptt_gradient(net: UnrolledNetwork, X: np.ndarray, targets: np.ndarray,
                  theta: np.ndarray | None = None) -> np.ndarray:
    return net.loss_and_gradient(X, targets, theta)[1]


def evaluate_mse(net: UnrolledNetwork, pairs, theta: np.ndarray | None = None) -> float:
    """Mean over validation sequences of the per-sequence MSE.

    ``pairs`` is a sequence of ``(inputs, targets)`` arrays, or a single pair.
    """
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray):
        pairs = [pairs]
    if not pairs:
        raise ValueError("empty validation data")
    total = 0.0
    for X, target in pairs:
        if len(X) == 0:
            raise ValueError("empty validation slice")
        pred = net.forward(X, theta)
        err = pred - np.asarray(target, dtype=np.float64).reshape(pred.shape)
        total += float(np.mean(err * err))
    mse = total / len(pairs)
    return mse if math.isfinite(mse) else math.inf


def adjust_gradient(grad: np.ndarray, clip_threshold: float = 1.0,
                    boost_threshold: float = 0.05) -> np.ndarray:
    """Rescale to ``clip_threshold`` when above it, up to ``boost_threshold`` when below."""
    scale = float(np.max(np.abs(grad))) if grad.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        return grad
    # dividing by the largest magnitude first keeps tiny norms from underflowing
    unit = grad / scale
    unit_norm = float(np.linalg.norm(unit))
    norm = scale * unit_norm
    if norm > clip_threshold:
        return unit * (clip_threshold / unit_norm)
    if norm < boost_threshold:
        return unit * (boost_threshold / unit_norm)
    return grad


def _chunks(pairs, chunk_length):
    out = []
    for X, Y in pairs:
        if chunk_length is None or chunk_length >= len(X):
            out.append((X, Y))
            continue
        for start in range(0, len(X), chunk_length):
            out.append((X[start:start + chunk_length], Y[start:start + chunk_length]))
    return out


def train(genome: Genome, data, cfg: TrainConfig, rng: np.random.Generator) -> Genome:
    """SGD with Nesterov momentum over BPTT gradients; fitness is validation MSE.

    ``data`` provides ``train_pairs()`` and ``validation_pairs()``.  A diverging
    run (non-finite loss or gradient) returns the untrained weights with
    fitness ``inf``.
    """
    net = unroll(genome, cfg)
    chunks = _chunks(data.train_pairs(), cfg.chunk_length)
    if not chunks:
        raise ValueError("no training data")
    theta = net.parameter_vector.copy()
    velocity = np.zeros_like(theta)
    mu, lr = cfg.nesterov_momentum, cfg.learning_rate
    for _ in range(cfg.epochs):
        for idx in rng.permutation(len(chunks)):
            X, Y = chunks[idx]
            loss, grad = net.loss_and_gradient(X, Y, theta)
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                return genome.copy(fitness=math.inf)
            grad = adjust_gradient(grad, cfg.clip_threshold, cfg.boost_threshold)
            previous = velocity
            velocity = mu * velocity - lr * grad
            theta = theta - mu * previous + (1.0 + mu) * velocity
    if not np.all(np.isfinite(theta)):
        return genome.copy(fitness=math.inf)
    fitness = evaluate_mse(net, data.validation_pairs(), theta)
    trained = net.to_genome(theta)
    trained.fitness = fitness
    return trained
