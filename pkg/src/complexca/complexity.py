"""Complexity scores for space-time behavior.

* DEFLATE compressed length of a frame and the joint-compression overlap ratio.
* A frequency lookup-table predictor of a cell from its neighbors.
* The neural predictor score ``mu_tau = L(T) / L(T + tau)``: a small network is
  fit on frame T and its cross-entropy is compared on frames T and T + tau.

Neighborhoods here exclude the center cell: 2r cells in 1D and
(2r+1)^2 - 1 cells in 2D.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ca import Grid, SpaceTime, window_offsets
from .tinynet import TrainConfig, init_net, loss, train_sgd

__all__ = [
    "FrequencyModel",
    "ComplexityScore",
    "compressed_length",
    "joint_score",
    "kmeans_1d",
    "context_cells",
    "fit_lookup",
    "lookup_loss",
    "nn_losses",
    "nn_mu_tau",
    "average_precision",
    "LOSS_FLOOR",
]

LOSS_FLOOR = 1e-6


def _deflate(data: bytes) -> int:
    comp = zlib.compressobj(9, zlib.DEFLATED, -15)  # raw stream, no header
    return len(comp.compress(data) + comp.flush())


def compressed_length(g: Grid | np.ndarray) -> int:
    cells = g.cells if isinstance(g, Grid) else np.asarray(g, dtype=np.uint8)
    return _deflate(np.ascontiguousarray(cells, dtype=np.uint8).tobytes())


def joint_score(s1: Grid, s2: Grid) -> float:
    """(C(s1) + C(s2)) / C(s1 || s2)."""
    if s1.spec != s2.spec:
        raise ValueError("joint score needs grids of the same spec")
    joint = _deflate(s1.to_bytes() + s2.to_bytes())
    return (compressed_length(s1) + compressed_length(s2)) / joint


def kmeans_1d(values: Sequence[float], k: int, seed: int = 0, n_init: int = 10,
              max_iter: int = 300) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm on scalars; cluster 0 has the lowest center.

    Each restart seeds the centers with k distinct observed values; the run
    with the lowest inertia wins.
    """
    x = np.asarray(values, dtype=np.float64)
    distinct = np.unique(x)
    if k < 1 or k > distinct.size:
        raise ValueError(f"k={k} must be in [1, {distinct.size}] (number of distinct values)")
    rng = np.random.Generator(np.random.Philox(seed))
    best = None
    for _ in range(n_init):
        centers = np.sort(rng.choice(distinct, size=k, replace=False))
        for _ in range(max_iter):
            labels = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
            new = np.array([x[labels == j].mean() if np.any(labels == j) else centers[j] for j in range(k)])
            if np.array_equal(new, centers):
                break
            centers = new
        inertia = float(((x - centers[labels]) ** 2).sum())
        if best is None or inertia < best[0]:
            best = (inertia, labels, centers)
    _, labels, centers = best
    order = np.argsort(centers, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    return rank[labels], centers[order]


# --- lookup-table predictor ------------------------------------------------------


def context_cells(frame: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """(neighbors, centers): neighbors has one row per cell, center excluded."""
    frame = np.asarray(frame, dtype=np.uint8)
    dims = frame.ndim
    axes = tuple(range(dims))
    cols = [
        np.roll(frame, tuple(-d for d in off), axis=axes).reshape(-1)
        for off in window_offsets(dims, radius)
        if any(off)
    ]
    return np.stack(cols, axis=1), frame.reshape(-1)


def _keys(neigh: np.ndarray, k: int) -> np.ndarray:
    m = neigh.shape[1]
    if m * math.log2(k) < 62:
        return neigh.astype(np.int64) @ (k ** np.arange(m - 1, -1, -1, dtype=np.int64))
    # too many cells for an integer code: key on the raw bytes
    rows = np.ascontiguousarray(neigh)
    return rows.view(np.dtype((np.void, m))).reshape(-1)


@dataclass
class FrequencyModel:
    radius: int
    num_states: int
    table: dict = field(default_factory=dict)  # neighborhood key -> per-state counts

    def probabilities(self, key) -> np.ndarray:
        counts = self.table.get(key)
        if counts is None:
            return np.full(self.num_states, 1.0 / self.num_states)
        return counts / counts.sum()


def fit_lookup(frame: Grid, radius: int) -> FrequencyModel:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    k = frame.spec.num_states
    neigh, center = context_cells(frame.cells, radius)
    keys = _keys(neigh, k)
    uniq, inv = np.unique(keys, return_inverse=True)
    counts = np.zeros((uniq.size, k), dtype=np.int64)
    np.add.at(counts, (inv.reshape(-1), center), 1)
    return FrequencyModel(radius, k, {key.item(): c for key, c in zip(uniq, counts)})


def lookup_loss(model: FrequencyModel, frame: Grid) -> float:
    """Mean negative log-likelihood of every cell given its neighbors.

    Neighborhoods absent from the model are scored with the uniform
    distribution, i.e. contribute log k.
    """
    k = model.num_states
    neigh, center = context_cells(frame.cells, model.radius)
    keys = _keys(neigh, k)
    uniq, inv = np.unique(keys, return_inverse=True)
    probs = np.stack([model.probabilities(key.item()) for key in uniq])
    p = probs[inv.reshape(-1), center]
    return float(-np.log(p).mean())


# --- neural predictor ------------------------------------------------------------


def _onehot_context(frame: np.ndarray, radius: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    neigh, center = context_cells(frame, radius)
    x = np.eye(k, dtype=np.float64)[neigh].reshape(neigh.shape[0], -1)
    return x, center.astype(np.int64)


def nn_losses(st: SpaceTime, T: int, tau: int, radius: int = 3, hidden: int = 10,
              cfg: TrainConfig | None = None) -> tuple[float, float]:
    """Train on frame T, return cross-entropies (L(T), L(T + tau))."""
    if T < 0 or tau < 0 or T + tau >= len(st):
        raise ValueError(f"frames T={T} and T+tau={T + tau} must exist (have {len(st)})")
    cfg = cfg or TrainConfig(learning_rate=0.01, epochs=30, batch_size=8, seed=0)
    k = st.spec.num_states
    x_train, y_train = _onehot_context(st.data[T], radius, k)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    net = init_net([x_train.shape[1], hidden, k], ["relu", "softmax"], rng)
    net, _ = train_sgd(net, x_train, y_train, cfg)
    x_test, y_test = _onehot_context(st.data[T + tau], radius, k)
    return loss(net, x_train, y_train), loss(net, x_test, y_test)


def nn_mu_tau(st: SpaceTime, T: int, tau: int, radius: int = 3, hidden: int = 10,
              cfg: TrainConfig | None = None) -> float:
    """Neural complexity score L(T) / L(T + tau).

    Both losses are floored at ``LOSS_FLOOR``. A vanishing L(T + tau) with a
    non-vanishing L(T) is reported as ``inf``.
    """
    l_t, l_tt = nn_losses(st, T, tau, radius, hidden, cfg)
    if l_tt < LOSS_FLOOR and l_t >= LOSS_FLOOR:
        return math.inf
    return max(l_t, LOSS_FLOOR) / max(l_tt, LOSS_FLOOR)


@dataclass
class ComplexityScore:
    rule_id: str
    compressed_length: int
    joint_mu: float
    nn_mu_tau: float
    tau: int
    T: int


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """AP of ranking by descending score against binary labels."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.sum() == 0:
        raise ValueError("average precision needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float((precision * hits).sum() / hits.sum())
