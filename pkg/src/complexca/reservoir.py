"""Reservoir models: echo-state networks and cellular-automaton reservoirs.

Both turn a one-hot token sequence into one feature vector per token; a
linear softmax decoder trained online reads the next token from the feature
of the current one.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from .ca import RuleTable, eca_rule, step_array

__all__ = [
    "EsnParams",
    "Esn",
    "esn_init",
    "esn_run",
    "spectral_radius",
    "Projection",
    "build_projection",
    "ExtendedRule",
    "extended_from",
    "RecaConfig",
    "reca_run",
    "extended_reca_run",
    "Decoder",
    "DecoderConfig",
    "decoder_init",
    "decoder_step",
    "decoder_train",
    "decoder_predict",
]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


# --- echo-state network -------------------------------------------------------------


@dataclass(frozen=True)
class EsnParams:
    K: int = 1800
    rho: float = 0.9
    beta: float = 0.0
    nonzeros_per_row: float = 10.0
    sigma: float = 1.0  # single input scaling for every column
    seed: int = 0
    literal_leak: bool = False  # True: r' = (1-beta) r + beta tanh(...) as written

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.nonzeros_per_row <= 0:
            raise ValueError("nonzeros_per_row must be > 0")

    @property
    def leak(self) -> float:
        """Weight of the tanh term in the update."""
        return self.beta if self.literal_leak else 1.0 - self.beta


@dataclass
class Esn:
    params: EsnParams
    W_h: sp.csr_matrix  # (K, K)
    W_in: np.ndarray  # (K, L_in)
    radius_estimate: float  # spectral radius of W_h before rescaling
    radius_fallback: bool = False  # True when the row-sum bound replaced ARPACK

    @property
    def K(self) -> int:
        return self.params.K

    @property
    def L_in(self) -> int:
        return self.W_in.shape[1]


def spectral_radius(W, tol: float = 1e-8, maxiter: int = 5000) -> tuple[float, bool]:
    """(|largest eigenvalue|, fell_back).

    ARPACK on the few largest-magnitude eigenvalues; dominant eigenvalues of
    random sparse matrices come in complex pairs, which defeats plain power
    iteration, and a narrow Krylov space can settle on the wrong pair. If
    ARPACK fails, matrices up to ``DENSE_LIMIT`` rows use a dense solve; larger
    ones fall back to 1.25 x the largest absolute row sum.
    """
    W = sp.csr_matrix(W)
    n = W.shape[0]
    if W.nnz == 0:
        return 0.0, False
    if n <= 16:
        return float(np.abs(np.linalg.eigvals(W.toarray())).max()), False
    k = min(6, n - 2)
    try:
        vals = eigs(W, k=k, which="LM", tol=tol, maxiter=maxiter, ncv=min(n, max(2 * k + 1, 80)),
                    return_eigenvectors=False, v0=np.ones(n))
        return float(np.abs(vals).max()), False
    except ArpackNoConvergence:
        if n <= DENSE_LIMIT:
            return float(np.abs(np.linalg.eigvals(W.toarray())).max()), False
        warnings.warn("spectral radius did not converge; using the row-sum bound", RuntimeWarning)
        return 1.25 * float(np.abs(W).sum(axis=1).max()), True


DENSE_LIMIT = 4000


def esn_init(p: EsnParams, L_in: int) -> Esn:
    if L_in < 1:
        raise ValueError("L_in must be >= 1")
    rng = _rng(p.seed)
    K = p.K
    density = min(1.0, p.nonzeros_per_row / K)
    mask = rng.random((K, K)) < density
    rows, cols = np.nonzero(mask)
    vals = rng.uniform(-1.0, 1.0, size=rows.size)
    W = sp.csr_matrix((vals, (rows, cols)), shape=(K, K))
    radius, fallback = spectral_radius(W)
    if radius > 0:
        W = W * (p.rho / radius)
    W_in = rng.uniform(-1.0, 1.0, size=(K, L_in)) * p.sigma
    return Esn(p, W.tocsr(), W_in, radius, fallback)


def esn_run(esn: Esn, inputs: np.ndarray, r0: np.ndarray | None = None) -> np.ndarray:
    """Reservoir states after each input.

    ``inputs`` is (T, L_in) or batched (B, T, L_in); the result has the same
    leading shape with K features. ``r0`` defaults to zeros.
    """
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    B, T, L = x.shape
    if L != esn.L_in:
        raise ValueError(f"input width {L} != {esn.L_in}")
    a = esn.params.leak
    r = np.zeros((esn.K, B)) if r0 is None else np.array(np.broadcast_to(np.asarray(r0, dtype=np.float64).reshape(-1, esn.K).T, (esn.K, B)))
    drive = np.einsum("kl,btl->tkb", esn.W_in, x)
    out = np.empty((B, T, esn.K))
    for t in range(T):
        r = (1.0 - a) * r + a * np.tanh(esn.W_h @ r + drive[t])
        out[:, t] = r.T
    return out[0] if single else out


# --- projections --------------------------------------------------------------------

ProjectionKind = Literal["one-to-one", "one-to-many", "one-to-pattern"]
KINDS = ("one-to-one", "one-to-many", "one-to-pattern")


@dataclass(frozen=True, eq=False)
class Projection:
    """Fixed random map from a one-hot input to a binary CA input vector.

    ``matrix[i]`` is the binary vector written by input bit i: R copies of
    width L_d concatenated. Within a copy, the bits own disjoint cells.
    """

    kind: str
    k: int
    R: int
    L_in: int
    L_d: int
    matrix: np.ndarray  # (L_in, R * L_d) uint8

    @property
    def width(self) -> int:
        return self.R * self.L_d

    def __call__(self, tokens) -> np.ndarray:
        """Projected vectors for integer token ids (any shape)."""
        return self.matrix[np.asarray(tokens, dtype=np.int64)]

    def __eq__(self, other):
        if not isinstance(other, Projection):
            return NotImplemented
        return (self.kind, self.k, self.R, self.L_in, self.L_d) == (
            other.kind, other.k, other.R, other.L_in, other.L_d
        ) and np.array_equal(self.matrix, other.matrix)


def _footprint(kind: str, k: int) -> int:
    return 1 if kind == "one-to-one" else k


def _copy_one_to_pattern(rng, L_in: int, L_d: int, k: int) -> np.ndarray:
    # disjoint windows of length k at uniform random gaps (stars and bars)
    slack = L_d - L_in * k
    cuts = np.sort(rng.choice(slack + L_in, size=L_in, replace=False))
    gaps_before = cuts - np.arange(L_in)  # nondecreasing, in [0, slack]
    starts = gaps_before + np.arange(L_in) * k
    owner = rng.permutation(L_in)
    copy = np.zeros((L_in, L_d), dtype=np.uint8)
    for w, bit in enumerate(owner):
        pattern = np.zeros(k, dtype=np.uint8)
        while not pattern.any():
            pattern = rng.integers(0, 2, size=k, dtype=np.uint8)
        copy[bit, starts[w]:starts[w] + k] = pattern
    return copy


def build_projection(kind: str, k: int, R: int, L_in: int, L_d: int, seed=0) -> Projection:
    if kind not in KINDS:
        raise ValueError(f"unknown projection kind {kind!r}")
    if R < 1 or L_in < 1 or k < 1:
        raise ValueError("R, L_in and k must be >= 1")
    need = L_in * _footprint(kind, k)
    if need > L_d:
        raise ValueError(f"cannot pack {L_in} bits x footprint {_footprint(kind, k)} into {L_d} cells")
    rng = _rng(seed)
    copies = []
    for _ in range(R):
        if kind == "one-to-pattern":
            copies.append(_copy_one_to_pattern(rng, L_in, L_d, k))
            continue
        per_bit = 1 if kind == "one-to-one" else k
        cells = rng.choice(L_d, size=L_in * per_bit, replace=False).reshape(L_in, per_bit)
        copy = np.zeros((L_in, L_d), dtype=np.uint8)
        copy[np.arange(L_in)[:, None], cells] = 1
        copies.append(copy)
    matrix = np.concatenate(copies, axis=1)
    matrix.flags.writeable = False
    return Projection(kind, k, R, L_in, L_d, matrix)


# --- CA reservoirs -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExtendedRule:
    """Binary radius-1 rule reading (left, center, right, input) -> next state.

    Configuration index is 8*left + 4*center + 2*right + input.
    """

    outputs: np.ndarray

    def __post_init__(self):
        out = np.asarray(self.outputs)
        if out.shape != (16,) or out.min() < 0 or out.max() > 1:
            raise ValueError("an extended rule has 16 binary outputs")
        out = out.astype(np.uint8)
        out.flags.writeable = False
        object.__setattr__(self, "outputs", out)

    def __eq__(self, other):
        if not isinstance(other, ExtendedRule):
            return NotImplemented
        return np.array_equal(self.outputs, other.outputs)

    def __hash__(self):
        return hash(self.outputs.tobytes())

    @property
    def number(self) -> int:
        return int(sum(int(v) << i for i, v in enumerate(self.outputs)))

    @classmethod
    def from_number(cls, n: int) -> "ExtendedRule":
        if not 0 <= n < 1 << 16:
            raise ValueError("extended rule number must be in [0, 65536)")
        return cls((n >> np.arange(16)) & 1)

    @classmethod
    def ignoring_input(cls, rule: RuleTable) -> "ExtendedRule":
        """Both input halves equal the plain rule."""
        return cls(np.repeat(rule.outputs, 2))

    @property
    def base(self) -> RuleTable:
        """The rule seen when the input cell is 0."""
        return RuleTable(eca_rule(0).spec, self.outputs[0::2])


def extended_from(rule: RuleTable) -> ExtendedRule:
    """Extended rule equal to rule(left, center XOR input, right).

    This matches XOR-combining the input into the state and then applying
    ``rule`` at every cell whose neighbors receive no input bit.
    """
    if not rule.is_eca:
        raise ValueError("extended rules are defined for elementary rules")
    idx = np.arange(16)
    left, center, right, inp = (idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
    return ExtendedRule(rule.outputs[4 * left + 2 * (center ^ inp) + right])


def _extended_step(state: np.ndarray, inp: np.ndarray, rule: ExtendedRule) -> np.ndarray:
    left = np.roll(state, 1, axis=-1)
    right = np.roll(state, -1, axis=-1)
    return rule.outputs[8 * left + 4 * state + 2 * right + inp]


@dataclass(frozen=True)
class RecaConfig:
    rule: RuleTable | ExtendedRule
    projection: Projection
    I: int = 2

    def __post_init__(self):
        if self.I < 1:
            raise ValueError("I must be >= 1")
        if isinstance(self.rule, RuleTable) and not self.rule.is_eca:
            raise ValueError("CA reservoirs use elementary (binary, radius 1) rules")

    @property
    def feature_dim(self) -> int:
        return self.I * self.projection.width


def _token_array(tokens) -> tuple[np.ndarray, bool]:
    t = np.asarray(tokens, dtype=np.int64)
    if t.ndim == 1:
        return t[None], True
    if t.ndim != 2:
        raise ValueError("tokens must be (T,) or (B, T) integer ids")
    return t, False


def reca_run(cfg: RecaConfig, tokens, s0: np.ndarray | None = None) -> np.ndarray:
    """Features (T, I * R * L_d) for token ids (T,), or (B, T, ...) for (B, T).

    Per token: s' = s XOR P(x), then I applications of the rule; the feature
    is the concatenation of those I states and the last one carries over.
    With an ExtendedRule the first application reads the projected input as
    the virtual cell instead of XOR-ing it in; the others see input 0.
    """
    toks, single = _token_array(tokens)
    B, T = toks.shape
    n = cfg.projection.width
    state = np.zeros((B, n), dtype=np.uint8) if s0 is None else np.array(np.broadcast_to(s0, (B, n)), dtype=np.uint8)
    out = np.empty((B, T, cfg.I * n), dtype=np.uint8)
    extended = isinstance(cfg.rule, ExtendedRule)
    zeros = np.zeros_like(state)
    for t in range(T):
        p = cfg.projection(toks[:, t])
        for i in range(cfg.I):
            if extended:
                state = _extended_step(state, p if i == 0 else zeros, cfg.rule)
            else:
                if i == 0:
                    state = state ^ p
                state = step_array(state, cfg.rule.outputs, 2, 1, 1)
            out[:, t, i * n:(i + 1) * n] = state
    return out[0] if single else out


def extended_reca_run(cfg: RecaConfig, tokens, s0: np.ndarray | None = None) -> np.ndarray:
    if not isinstance(cfg.rule, ExtendedRule):
        raise ValueError("extended_reca_run needs an ExtendedRule")
    return reca_run(cfg, tokens, s0)


# --- decoder -----------------------------------------------------------------------


@dataclass(frozen=True)
class DecoderConfig:
    learning_rate: float = 0.001
    weight_decay: float = 0.001

    def __post_init__(self):
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be > 0 and weight_decay >= 0")


@dataclass
class Decoder:
    weights: np.ndarray  # (vocab, K)
    bias: np.ndarray  # (vocab,)

    @property
    def vocab(self) -> int:
        return self.weights.shape[0]


def decoder_init(vocab: int, K: int) -> Decoder:
    """Zero weights: the first prediction is token 0 and training is seed-free."""
    return Decoder(np.zeros((vocab, K)), np.zeros(vocab))


def decoder_step(dec: Decoder, feature: np.ndarray, target: int, cfg: DecoderConfig) -> float:
    """One SGD step (batch 1) on softmax cross-entropy; returns the loss before it."""
    x = np.asarray(feature, dtype=np.float64)
    z = dec.weights @ x + dec.bias
    z -= z.max()
    e = np.exp(z)
    p = e / e.sum()
    value = -math.log(max(p[target], 1e-300))
    p[target] -= 1.0
    lr, wd = cfg.learning_rate, cfg.weight_decay
    if wd:
        dec.weights *= 1.0 - lr * wd
        dec.bias *= 1.0 - lr * wd
    dec.weights -= lr * np.outer(p, x)
    dec.bias -= lr * p
    return value


def decoder_train(features: Sequence[np.ndarray], targets: Sequence[np.ndarray], masks: Sequence[np.ndarray],
                  vocab: int, cfg: DecoderConfig | None = None, dec: Decoder | None = None) -> Decoder:
    """Single pass in sequence order over supervised positions.

    For sequence j, ``features[j][t]`` is the reservoir state after token t;
    position t >= 1 with ``masks[j][t]`` is trained to predict
    ``targets[j][t]`` from ``features[j][t - 1]``.
    """
    cfg = cfg or DecoderConfig()
    if not any(np.asarray(m)[1:].any() for m in masks):
        raise ValueError("no supervised positions")
    dec = dec or decoder_init(vocab, np.asarray(features[0]).shape[-1])
    for f, y, m in zip(features, targets, masks):
        f = np.asarray(f)
        for t in np.flatnonzero(np.asarray(m)):
            if t == 0:
                continue
            decoder_step(dec, f[t - 1], int(y[t]), cfg)
    return dec


def decoder_predict(dec: Decoder, feature: np.ndarray) -> np.ndarray:
    """Argmax token for one feature (K,) or a batch (N, K); ties go to the lowest id."""
    x = np.asarray(feature, dtype=np.float64)
    return np.argmax(x @ dec.weights.T + dec.bias, axis=-1)
