"""Rule sampling: uniform, Langton's lambda trajectory, Dirichlet proportions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .ca import CaSpec, RuleTable

__all__ = [
    "LambdaReport",
    "DirichletParams",
    "make_rng",
    "langton_lambda",
    "lambda_sweep",
    "sample_uniform",
    "sample_dirichlet",
    "transition_counts",
    "largest_remainder",
    "multinomial_logpmf",
]


def make_rng(seed: int | None) -> np.random.Generator:
    """Philox counter-based generator; every sampler in the package draws from one."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class LambdaReport:
    lam: Fraction
    quiescent: int
    n_quiescent: int

    def __float__(self) -> float:
        return float(self.lam)


@dataclass(frozen=True)
class DirichletParams:
    alpha: float
    k: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.k < 2:
            raise ValueError("k must be >= 2")


def langton_lambda(rt: RuleTable, quiescent: int = 0) -> LambdaReport:
    k = rt.spec.num_states
    if not 0 <= quiescent < k:
        raise ValueError(f"quiescent state must be in [0, {k}), got {quiescent}")
    total = rt.outputs.size
    n = int(np.count_nonzero(rt.outputs == quiescent))
    return LambdaReport(Fraction(total - n, total), quiescent, n)


def lambda_sweep(spec: CaSpec, quiescent: int, steps: int, rng: np.random.Generator) -> list[RuleTable]:
    """Langton's trajectory: start fully quiescent, flip one transition per step.

    Returns ``steps + 1`` tables unless the sweep runs out of quiescent
    transitions first, in which case it stops at lambda = 1 - 1/K^s.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    k = spec.num_states
    if not 0 <= quiescent < k:
        raise ValueError(f"quiescent state must be in [0, {k})")
    outputs = np.full(spec.table_size, quiescent, dtype=np.uint8)
    others = np.array([s for s in range(k) if s != quiescent], dtype=np.uint8)
    # the last quiescent transition is never flipped
    order = rng.permutation(spec.table_size)[: spec.table_size - 1]
    rules = [RuleTable(spec, outputs.copy())]
    for pos in order[:steps]:
        outputs[pos] = others[rng.integers(others.size)]
        rules.append(RuleTable(spec, outputs.copy()))
    return rules


def sample_uniform(spec: CaSpec, rng: np.random.Generator) -> RuleTable:
    return RuleTable(spec, rng.integers(0, spec.num_states, size=spec.table_size))


def largest_remainder(proportions: Sequence[float], total: int) -> np.ndarray:
    """Integer apportionment of ``total`` following ``proportions`` (sums exactly)."""
    q = np.asarray(proportions, dtype=np.float64)
    q = q / q.sum()
    raw = q * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short:
        # stable: ties go to the lower state id
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def sample_dirichlet(spec: CaSpec, params: DirichletParams, rng: np.random.Generator) -> RuleTable:
    """Rule whose output-state counts follow a Dirichlet(alpha) draw.

    ``alpha = inf`` is the equal-proportion limit.
    """
    if params.k != spec.num_states:
        raise ValueError("DirichletParams.k must equal spec.num_states")
    k = spec.num_states
    if math.isinf(params.alpha):
        q = np.full(k, 1.0 / k)
    else:
        q = rng.dirichlet(np.full(k, params.alpha))
    counts = largest_remainder(q, spec.table_size)
    outputs = np.repeat(np.arange(k, dtype=np.uint8), counts)
    return RuleTable(spec, rng.permutation(outputs))


def transition_counts(rt: RuleTable) -> np.ndarray:
    return np.bincount(rt.outputs, minlength=rt.spec.num_states)


def multinomial_logpmf(counts: Sequence[int], probs: Sequence[float]) -> float:
    """log( n! / prod x_i! * prod p_i^x_i ) via log-gamma."""
    if len(counts) != len(probs):
        raise ValueError("counts and probs must have the same length")
    if any(c < 0 for c in counts) or any(p < 0 for p in probs):
        raise ValueError("counts and probabilities must be non-negative")
    if not math.isclose(sum(probs), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("probabilities must sum to 1")
    n = sum(counts)
    out = math.lgamma(n + 1)
    for x, p in zip(counts, probs):
        out -= math.lgamma(x + 1)
        if x:
            if p == 0:
                return -math.inf
            out += x * math.log(p)
    return out
