"""Coarse-graining of grids and space-time diagrams into supercells.

Every method splits a grid into non-overlapping blocks of edge ``b`` (cropping
any remainder) and maps each block to one output state:

* frequency histogram: blocks ranked by probability, the negative
  log-probability mass is cut into ``k_out`` bins, rare blocks land in high
  states; optional Floyd-Steinberg dithering of the continuous rarity;
* Hamming k-means over block strings;
* a small softmax autoencoder whose latent argmax is the output state;
* local averaging (baseline).

``filter_eca`` applies the histogram method to elementary space-time diagrams.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .ca import CaSpec, Grid, SpaceTime
from .tinynet import TrainConfig, forward, init_net, train_sgd

__all__ = [
    "BlockHistogram",
    "SupercellMap",
    "block_view",
    "block_histogram",
    "partition_histogram",
    "coarse_grain_histogram",
    "rarity",
    "dither",
    "coarse_grain_kmeans",
    "hamming_kmeans",
    "coarse_grain_autoencoder",
    "local_average",
    "filter_eca",
    "pyramid",
]


def block_view(cells: np.ndarray, b: int) -> tuple[np.ndarray, tuple[int, ...]]:
    """Blocks as rows of a (n_blocks, b**dims) array plus the block-grid shape.

    Rows follow the raster order of blocks; cells inside a block are row-major.
    """
    cells = np.asarray(cells, dtype=np.uint8)
    if b < 1:
        raise ValueError("block edge must be >= 1")
    if any(e < b for e in cells.shape):
        raise ValueError(f"block edge {b} larger than grid {cells.shape}")
    out_shape = tuple(e // b for e in cells.shape)
    crop = cells[tuple(slice(0, n * b) for n in out_shape)]
    if cells.ndim == 1:
        return crop.reshape(-1, b), out_shape
    if cells.ndim == 2:
        h, w = out_shape
        rows = crop.reshape(h, b, w, b).transpose(0, 2, 1, 3).reshape(h * w, b * b)
        return rows, out_shape
    raise ValueError("grids must be 1D or 2D")


def _block_keys(rows: np.ndarray) -> np.ndarray:
    rows = np.ascontiguousarray(rows, dtype=np.uint8)
    return rows.view(np.dtype((np.void, rows.shape[1]))).reshape(-1)


@dataclass(frozen=True)
class BlockHistogram:
    """Block configuration counts; configurations are the raw cell bytes."""

    block: int
    dims: int
    num_states: int
    configs: tuple[bytes, ...]  # sorted ascending, i.e. by base-k configuration index
    counts: np.ndarray  # aligned with configs

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def as_dict(self) -> dict[bytes, int]:
        return dict(zip(self.configs, self.counts.tolist()))


def _histogram_rows(rows: np.ndarray, b: int, dims: int, k: int) -> BlockHistogram:
    keys = _block_keys(rows)
    uniq, counts = np.unique(keys, return_counts=True)
    counts = counts.astype(np.int64)
    counts.flags.writeable = False
    return BlockHistogram(b, dims, k, tuple(u.item() for u in uniq), counts)


def block_histogram(g: Grid, b: int) -> BlockHistogram:
    rows, _ = block_view(g.cells, b)
    return _histogram_rows(rows, b, g.spec.dims, g.spec.num_states)


@dataclass(frozen=True)
class SupercellMap:
    """Block configuration -> output state, with the bin boundaries used."""

    f: dict
    thresholds: np.ndarray  # k_out + 1 cumulative fractions, 0 ... 1
    k_out: int

    def apply(self, rows: np.ndarray) -> np.ndarray:
        keys = _block_keys(rows)
        uniq, inv = np.unique(keys, return_inverse=True)
        try:
            images = np.array([self.f[u.item()] for u in uniq], dtype=np.uint8)
        except KeyError as exc:
            raise ValueError("block configuration absent from the histogram") from exc
        return images[inv.reshape(-1)]


def _bin_edges(k_out: int, scheme: str) -> np.ndarray:
    if scheme == "linear":
        mass = np.ones(k_out)
    elif scheme == "quadratic":
        mass = 1.0 / np.arange(1, k_out + 1) ** 2
    else:
        raise ValueError(f"unknown partition scheme {scheme!r}")
    return np.concatenate([[0.0], np.cumsum(mass / mass.sum())])


def _rank_order(h: BlockHistogram) -> np.ndarray:
    # descending probability; ties by ascending configuration index
    return np.lexsort((np.arange(len(h.configs)), -h.counts))


def partition_histogram(h: BlockHistogram, k_out: int, scheme: str | None = None) -> SupercellMap:
    """Split the area under the sorted -log p histogram into ``k_out`` bins.

    ``scheme`` is "linear" (equal bin masses, default for 1D) or "quadratic"
    (bin j mass proportional to 1/j**2, default for 2D). A block lands in the
    bin where its own mass interval ends, so the rarest block always takes
    state k_out - 1 and a rarer block never gets a lower state.
    """
    if k_out < 2:
        raise ValueError("k_out must be >= 2")
    scheme = scheme or ("linear" if h.dims == 1 else "quadratic")
    edges = _bin_edges(k_out, scheme)
    order = _rank_order(h)
    mass = -np.log(h.probabilities[order])
    total = mass.sum()
    if total <= 0:
        states = np.zeros(order.size, dtype=np.int64)
    else:
        end = np.cumsum(mass) / total
        # bin j holds blocks whose mass interval ends in (edges[j], edges[j+1]]
        states = np.clip(np.searchsorted(edges, end - 1e-12, side="left") - 1, 0, k_out - 1)
        states = states - states[0]  # most frequent block is state 0
    f = {h.configs[i]: int(s) for i, s in zip(order, states)}
    return SupercellMap(f, edges, k_out)


def _out_spec(spec: CaSpec, shape: tuple[int, ...], k_out: int) -> CaSpec:
    return CaSpec(spec.dims, max(k_out, 2), spec.radius, shape)


def rarity(h: BlockHistogram) -> dict:
    """Normalized rarity -log p / max(-log p) in [0, 1] per configuration."""
    r = -np.log(h.probabilities)
    top = r.max()
    r = r / top if top > 0 else np.zeros_like(r)
    return dict(zip(h.configs, r.tolist()))


def dither(values: np.ndarray, k_out: int) -> np.ndarray:
    """Floyd-Steinberg quantization of values in [0, 1] to levels 0..k_out-1.

    Raster order, no serpentine. In 1D the whole error moves to the right.
    """
    v = np.asarray(values, dtype=np.float64) * (k_out - 1)
    out = np.zeros(v.shape, dtype=np.uint8)
    if v.ndim == 1:
        err = 0.0
        for i in range(v.size):
            old = v[i] + err
            new = min(max(int(np.floor(old + 0.5)), 0), k_out - 1)
            out[i] = new
            err = old - new
        return out
    work = v.copy()
    h, w = work.shape
    for y in range(h):
        for x in range(w):
            old = work[y, x]
            new = min(max(int(np.floor(old + 0.5)), 0), k_out - 1)
            out[y, x] = new
            e = old - new
            if x + 1 < w:
                work[y, x + 1] += e * 7 / 16
            if y + 1 < h:
                if x > 0:
                    work[y + 1, x - 1] += e * 3 / 16
                work[y + 1, x] += e * 5 / 16
                if x + 1 < w:
                    work[y + 1, x + 1] += e * 1 / 16
    return out


def coarse_grain_histogram(g: Grid, b: int, k_out: int, dither_output: bool = False,
                           scheme: str | None = None) -> Grid:
    rows, shape = block_view(g.cells, b)
    h = _histogram_rows(rows, b, g.spec.dims, g.spec.num_states)
    if dither_output:
        r = rarity(h)
        keys = _block_keys(rows)
        uniq, inv = np.unique(keys, return_inverse=True)
        field = np.array([r[u.item()] for u in uniq])[inv.reshape(-1)].reshape(shape)
        out = dither(field, k_out)
    else:
        out = partition_histogram(h, k_out, scheme).apply(rows).reshape(shape)
    return Grid(_out_spec(g.spec, shape, k_out), out)


# --- Hamming k-means ---------------------------------------------------------------


def hamming_kmeans(rows: np.ndarray, k: int, rng: np.random.Generator,
                   max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """k-means on state strings under Hamming distance.

    Centers start at k distinct observed rows (k shrinks to the number of
    distinct rows) and are updated to the rounded per-position mean. Labels
    are ranked by descending cluster size, ties by first center. Returns
    (labels, centers) with centers in label order.
    """
    rows = np.asarray(rows, dtype=np.int64)
    distinct = np.unique(rows, axis=0)
    k = min(k, distinct.shape[0])
    if k < 1:
        raise ValueError("k must be >= 1")
    centers = distinct[np.sort(rng.choice(distinct.shape[0], size=k, replace=False))]
    labels = None
    for _ in range(max_iter):
        dist = (rows[:, None, :] != centers[None, :, :]).sum(axis=2)
        new_labels = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = rows[labels == j]
            if members.size:
                centers[j] = np.floor(members.mean(axis=0) + 0.5)
    sizes = np.bincount(labels, minlength=k)
    order = np.lexsort((np.arange(k), -sizes))
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    return rank[labels], centers[order]


def coarse_grain_kmeans(g: Grid, b: int, k_out: int, seed: int = 0) -> Grid:
    rows, shape = block_view(g.cells, b)
    labels, _ = hamming_kmeans(rows, k_out, np.random.Generator(np.random.Philox(seed)))
    return Grid(_out_spec(g.spec, shape, k_out), labels.reshape(shape))


# --- autoencoder --------------------------------------------------------------------


def coarse_grain_autoencoder(g: Grid, b: int = 6, latent_dim: int = 3, cfg: TrainConfig | None = None,
                             mode: Literal["discrete", "continuous"] = "discrete"):
    """Softmax-bottleneck autoencoder over one-hot blocks.

    Discrete mode returns a Grid of latent argmax codes; continuous mode
    returns the latent mixture as an array of shape (*block_grid, latent_dim).
    """
    if latent_dim < 1:
        raise ValueError("latent_dim must be >= 1")
    cfg = cfg or TrainConfig(learning_rate=0.5, epochs=200, batch_size=16, seed=0, tol=1e-4)
    k = g.spec.num_states
    rows, shape = block_view(g.cells, b)
    m = rows.shape[1]
    x = np.eye(k)[rows].reshape(rows.shape[0], m * k)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    net = init_net([m * k, latent_dim, m * k], ["softmax", "softmax"], rng, groups=[1, m])
    net, _ = train_sgd(net, x, rows, cfg)
    z = forward(type(net)(net.layers[:1]), x)
    if mode == "continuous":
        return z.reshape(shape + (latent_dim,))
    if mode != "discrete":
        raise ValueError(f"unknown mode {mode!r}")
    return Grid(_out_spec(g.spec, shape, latent_dim), np.argmax(z, axis=1).reshape(shape))


def local_average(g: Grid, b: int) -> Grid:
    """Baseline downscaling: block mean rounded half-up to the nearest state."""
    rows, shape = block_view(g.cells, b)
    out = np.floor(rows.mean(axis=1) + 0.5).astype(np.uint8)
    return Grid(_out_spec(g.spec, shape, g.spec.num_states), out.reshape(shape))


# --- elementary space-time filtering ----------------------------------------------

FILTER_MODES = ("or", "diff")
DEFAULT_MODES = {18: "or", 54: "diff"}


def _offset_map(data: np.ndarray, offset: int) -> np.ndarray:
    """Histogram-filter 2-cell spatial blocks starting at ``offset``, pooled over time."""
    shifted = np.roll(data, -offset, axis=1) if offset else data
    t, n = shifted.shape
    rows = shifted.reshape(t * (n // 2), 2)
    h = _histogram_rows(rows, 2, 1, 2)
    return partition_histogram(h, 2, "linear").apply(rows).reshape(t, n // 2)


def filter_eca(st: SpaceTime, rule_id: int | None = None, mode: str | None = None) -> SpaceTime:
    """Suppress background domains of a binary 1D space-time diagram.

    Even blocks are (2j, 2j+1), odd blocks (2j+1, 2j+2) with wrap-around; both
    are aligned on j. Mode "or" merges them; "diff" additionally keeps only
    cells that differ from their right neighbor. Odd widths lose their last
    column.
    """
    spec = st.spec
    if spec.dims != 1 or spec.num_states != 2:
        raise ValueError("filter_eca needs a binary 1D space-time diagram")
    mode = mode or DEFAULT_MODES.get(rule_id, "or")
    if mode not in FILTER_MODES:
        raise ValueError(f"unknown filter mode {mode!r}")
    data = np.asarray(st.data)
    n = data.shape[1] - data.shape[1] % 2
    if n < 2:
        raise ValueError("need at least two columns")
    data = data[:, :n]
    merged = _offset_map(data, 0) | _offset_map(data, 1)
    if mode == "diff":
        merged = merged ^ np.roll(merged, -1, axis=1)
    return SpaceTime(CaSpec(1, 2, spec.radius, (n // 2,)), merged)


def pyramid(g: Grid, b: int, k_out: int, depth: int, method: str = "histogram",
            seed: int = 0) -> list[Grid]:
    """Repeated coarse-graining; stops early once the grid is smaller than ``b``."""
    levels = []
    cur = g
    for level in range(depth):
        if any(e < b for e in cur.spec.shape):
            break
        if method == "histogram":
            cur = coarse_grain_histogram(cur, b, k_out)
        elif method == "kmeans":
            cur = coarse_grain_kmeans(cur, b, k_out, seed + level)
        elif method == "average":
            cur = local_average(cur, b)
        else:
            raise ValueError(f"unknown method {method!r}")
        levels.append(cur)
    return levels
