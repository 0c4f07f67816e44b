"""Discrete cellular automata on 1D and 2D tori.

Neighborhood configurations are indexed by flattening the (2r+1)^dims window
row-major, top-left cell most significant::

    index = sum_j state_j * k ** (s - 1 - j)

For elementary automata this is the Wolfram numbering: the configuration 111
has index 7 and ``outputs[7]`` is bit 7 of the rule number.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "CaSpec",
    "RuleTable",
    "Grid",
    "SpaceTime",
    "ConvNet",
    "eca_spec",
    "eca_rule",
    "rule_number",
    "life_rule",
    "step",
    "step_array",
    "simulate",
    "single_cell",
    "random_grid",
    "rule_as_conv",
    "conv_step",
    "conv_step_array",
    "window_offsets",
]


@dataclass(frozen=True)
class CaSpec:
    dims: int
    num_states: int
    radius: int
    shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(e) for e in self.shape))
        if self.dims not in (1, 2):
            raise ValueError(f"dims must be 1 or 2, got {self.dims}")
        if not 2 <= self.num_states <= 256:
            raise ValueError(f"num_states must be in [2, 256], got {self.num_states}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")
        if len(self.shape) != self.dims:
            raise ValueError(f"shape {self.shape} does not match dims={self.dims}")
        if any(e < 1 for e in self.shape):
            raise ValueError(f"every extent must be >= 1, got {self.shape}")

    @property
    def window(self) -> int:
        return 2 * self.radius + 1

    @property
    def neighborhood_size(self) -> int:
        return self.window**self.dims

    @property
    def table_size(self) -> int:
        return self.num_states**self.neighborhood_size

    def compatible(self, other: "CaSpec") -> bool:
        return (
            self.dims == other.dims
            and self.num_states == other.num_states
            and self.radius == other.radius
        )

    def with_shape(self, shape: Sequence[int]) -> "CaSpec":
        return CaSpec(self.dims, self.num_states, self.radius, tuple(shape))


def eca_spec(n: int = 64) -> CaSpec:
    return CaSpec(dims=1, num_states=2, radius=1, shape=(n,))


@dataclass(frozen=True, eq=False)
class RuleTable:
    """Full transition map; ``outputs[i]`` is the next state for configuration ``i``.

    The shape stored in ``spec`` is only a default lattice size; a rule table
    applies to any grid with matching dims, num_states and radius.
    """

    spec: CaSpec
    outputs: np.ndarray

    def __post_init__(self):
        out = np.asarray(self.outputs)
        if out.ndim != 1 or out.size != self.spec.table_size:
            raise ValueError(
                f"rule table needs {self.spec.table_size} entries, got shape {out.shape}"
            )
        if out.size and (out.min() < 0 or out.max() >= self.spec.num_states):
            raise ValueError("rule outputs must lie in [0, num_states)")
        out = out.astype(np.uint8)
        out.flags.writeable = False
        object.__setattr__(self, "outputs", out)

    def __eq__(self, other):
        if not isinstance(other, RuleTable):
            return NotImplemented
        return self.spec.compatible(other.spec) and np.array_equal(
            self.outputs, other.outputs
        )

    def __hash__(self):
        return hash((self.spec.dims, self.spec.num_states, self.spec.radius, self.outputs.tobytes()))

    @property
    def is_eca(self) -> bool:
        s = self.spec
        return s.dims == 1 and s.num_states == 2 and s.radius == 1

    def digits(self) -> str:
        """Base-k digit string, most significant (highest configuration index) first."""
        alphabet = "0123456789abcdefghijklmnopqrstuvwxyz"
        if self.spec.num_states > len(alphabet):
            raise ValueError("digit strings support at most 36 states")
        return "".join(alphabet[v] for v in self.outputs[::-1])

    @classmethod
    def from_digits(cls, spec: CaSpec, digits: str) -> "RuleTable":
        values = [int(c, 36) for c in digits]
        return cls(spec, np.array(values[::-1], dtype=np.int64))


@dataclass(frozen=True, eq=False)
class Grid:
    spec: CaSpec
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.shape != self.spec.shape:
            raise ValueError(f"cells shape {cells.shape} != spec shape {self.spec.shape}")
        cells = cells.astype(np.uint8)
        if cells.size and cells.max() >= self.spec.num_states:
            raise ValueError("cell states must lie in [0, num_states)")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.spec, self.cells.tobytes()))

    def to_bytes(self) -> bytes:
        return np.ascontiguousarray(self.cells).tobytes()


@dataclass(frozen=True, eq=False)
class SpaceTime:
    """Time-major stack of frames; ``data[t]`` is the lattice at step t."""

    spec: CaSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.uint8)
        if data.shape[1:] != self.spec.shape or data.shape[0] < 1:
            raise ValueError(f"frames shape {data.shape} incompatible with {self.spec.shape}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, t: int) -> Grid:
        return Grid(self.spec, self.data[t])

    def __eq__(self, other):
        if not isinstance(other, SpaceTime):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.data, other.data)

    @property
    def frames(self) -> list[Grid]:
        return [self[t] for t in range(len(self))]

    @property
    def final(self) -> Grid:
        return self[len(self) - 1]


def eca_rule(number: int) -> RuleTable:
    if not 0 <= int(number) <= 255:
        raise ValueError(f"ECA rule number must be in [0, 255], got {number}")
    bits = (int(number) >> np.arange(8)) & 1
    return RuleTable(eca_spec(), bits)


def rule_number(rt: RuleTable) -> int:
    """Rule number: the outputs read as base-k digits (arbitrary precision int)."""
    k = rt.spec.num_states
    value = 0
    for v in rt.outputs[::-1]:
        value = value * k + int(v)
    return value


def window_offsets(dims: int, radius: int) -> list[tuple[int, ...]]:
    """Neighborhood offsets in flattening order (row-major, top-left first)."""
    rng = range(-radius, radius + 1)
    if dims == 1:
        return [(d,) for d in rng]
    return [(dy, dx) for dy in rng for dx in rng]


def life_rule(shape: tuple[int, int] = (64, 64)) -> RuleTable:
    """Conway's Game of Life (B3/S23) on the Moore neighborhood."""
    spec = CaSpec(2, 2, 1, shape)
    idx = np.arange(spec.table_size)
    bits = (idx[:, None] >> np.arange(8, -1, -1)) & 1  # column j = window cell j
    center = bits[:, 4]
    alive = bits.sum(axis=1) - center
    out = np.where(center == 1, (alive == 2) | (alive == 3), alive == 3)
    return RuleTable(spec, out.astype(np.uint8))


def _neighborhood_index(cells: np.ndarray, k: int, radius: int, dims: int) -> np.ndarray:
    """Configuration index of every cell; lattice axes are the trailing ``dims`` axes."""
    axes = tuple(range(cells.ndim - dims, cells.ndim))
    idx = np.zeros(cells.shape, dtype=np.int64)
    for off in window_offsets(dims, radius):
        # neighbor at offset d of cell i is cells[i + d]
        shifted = np.roll(cells, tuple(-d for d in off), axis=axes)
        idx *= k
        idx += shifted
    return idx


def step_array(cells: np.ndarray, outputs: np.ndarray, k: int, radius: int, dims: int) -> np.ndarray:
    """One synchronous update on raw arrays; leading axes are treated as a batch."""
    return outputs[_neighborhood_index(cells, k, radius, dims)]


def step(g: Grid, rt: RuleTable) -> Grid:
    if not g.spec.compatible(rt.spec):
        raise ValueError("grid and rule table have different (dims, num_states, radius)")
    s = g.spec
    return Grid(s, step_array(g.cells, rt.outputs, s.num_states, s.radius, s.dims))


def simulate(g0: Grid, rt: RuleTable, steps: int) -> SpaceTime:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not g0.spec.compatible(rt.spec):
        raise ValueError("grid and rule table have different (dims, num_states, radius)")
    s = g0.spec
    data = np.empty((steps + 1,) + s.shape, dtype=np.uint8)
    data[0] = g0.cells
    for t in range(steps):
        data[t + 1] = step_array(data[t], rt.outputs, s.num_states, s.radius, s.dims)
    return SpaceTime(s, data)


def single_cell(spec: CaSpec, state: int = 1) -> Grid:
    cells = np.zeros(spec.shape, dtype=np.uint8)
    cells[tuple(e // 2 for e in spec.shape)] = state
    return Grid(spec, cells)


def random_grid(spec: CaSpec, rng: np.random.Generator, p: Sequence[float] | None = None) -> Grid:
    cells = rng.choice(spec.num_states, size=spec.shape, p=p)
    return Grid(spec, cells)


# --- rule as a two-layer convolutional network ---------------------------------


@dataclass(frozen=True, eq=False)
class ConvNet:
    """Two-layer convolutional form of a rule table.

    ``filters`` has shape (k^s, s, k): filter f is the one-hot image of
    configuration f. ``bias`` is -(s - 1) so that relu(filter . x + bias) is 1
    exactly for the matching configuration. ``readout`` (k, k^s) is the 1x1
    second layer emitting a one-hot next state.
    """

    spec: CaSpec
    filters: np.ndarray
    bias: float
    readout: np.ndarray


def rule_as_conv(rt: RuleTable) -> ConvNet:
    s = rt.spec
    n_cfg, size, k = s.table_size, s.neighborhood_size, s.num_states
    cfg = np.arange(n_cfg)
    # digit j (most significant first) of every configuration index
    digits = (cfg[:, None] // k ** np.arange(size - 1, -1, -1)[None, :]) % k
    filters = np.zeros((n_cfg, size, k), dtype=np.float64)
    filters[cfg[:, None], np.arange(size)[None, :], digits] = 1.0
    readout = np.zeros((k, n_cfg), dtype=np.float64)
    readout[rt.outputs, cfg] = 1.0
    return ConvNet(s, filters, -(size - 1.0), readout)


def conv_step_array(net: ConvNet, cells: np.ndarray) -> np.ndarray:
    """conv_step on raw cells; leading axes beyond the lattice dims are a batch."""
    s = net.spec
    cells = np.asarray(cells)
    if cells.ndim < s.dims:
        raise ValueError(f"need at least {s.dims} axes, got shape {cells.shape}")
    axes = tuple(range(cells.ndim - s.dims, cells.ndim))
    onehot = np.eye(s.num_states)[cells]  # (..., *shape, k)
    # circular padding: gather the window as (..., *shape, s, k)
    patches = np.stack(
        [np.roll(onehot, tuple(-d for d in off), axis=axes) for off in window_offsets(s.dims, s.radius)],
        axis=-2,
    )
    hidden = np.maximum(np.einsum("...sk,fsk->...f", patches, net.filters) + net.bias, 0.0)
    logits = hidden @ net.readout.T
    return np.argmax(logits, axis=-1).astype(np.uint8)


def conv_step(net: ConvNet, g: Grid) -> Grid:
    if not g.spec.compatible(net.spec):
        raise ValueError("grid and network have different (dims, num_states, radius)")
    return Grid(g.spec, conv_step_array(net, g.cells))
