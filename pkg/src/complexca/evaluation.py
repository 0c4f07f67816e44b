"""Learning-speed scoring: masked accuracy, time-to-threshold and WADE."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "AccuracyCurve",
    "CheckpointSet",
    "DEFAULT_CHECKPOINTS",
    "time_to_threshold",
    "wade",
    "masked_accuracy",
    "curve_to_csv",
    "curve_from_csv",
]


@dataclass(frozen=True)
class AccuracyCurve:
    steps: tuple[int, ...]
    accuracies: tuple[float, ...]

    def __post_init__(self):
        steps = tuple(int(s) for s in self.steps)
        acc = tuple(float(a) for a in self.accuracies)
        if not steps or len(steps) != len(acc):
            raise ValueError("a curve needs matching, nonempty steps and accuracies")
        if steps[0] < 1 or any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("steps must be >= 1 and strictly increasing")
        if any(not 0.0 <= a <= 1.0 for a in acc):
            raise ValueError("accuracies must lie in [0, 1]")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "accuracies", acc)

    @classmethod
    def from_accuracies(cls, accuracies: Sequence[float]) -> "AccuracyCurve":
        """Curve indexed 1..n."""
        return cls(tuple(range(1, len(accuracies) + 1)), tuple(accuracies))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final(self) -> float:
        return self.accuracies[-1]


@dataclass(frozen=True)
class CheckpointSet:
    alphas: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        if len(a) < 2:
            raise ValueError("need at least two checkpoints")
        if any(not 0.0 < x <= 1.0 for x in a) or any(y <= x for x, y in zip(a, a[1:])):
            raise ValueError("checkpoints must be strictly increasing in (0, 1]")
        object.__setattr__(self, "alphas", a)

    @classmethod
    def evenly(cls, n: int) -> "CheckpointSet":
        return cls(tuple((i + 1) / n for i in range(n)))


DEFAULT_CHECKPOINTS = CheckpointSet.evenly(20)


def _accuracies(curve) -> Sequence[float]:
    return curve.accuracies if isinstance(curve, AccuracyCurve) else list(curve)


def time_to_threshold(alpha: float, curve: AccuracyCurve | Sequence[float]) -> float:
    """1-based index of the first accuracy >= alpha, ``math.inf`` if none."""
    for i, a in enumerate(_accuracies(curve), 1):
        if a >= alpha:
            return i
    return math.inf


def wade(curve: AccuracyCurve | Sequence[float], checkpoints: CheckpointSet = DEFAULT_CHECKPOINTS) -> float:
    """sum(alpha / T(alpha)) / sum(alpha), with 1/inf = 0."""
    acc = _accuracies(curve)
    terms = []
    for alpha in checkpoints.alphas:
        t = time_to_threshold(alpha, acc)
        if t != math.inf:
            terms.append(alpha / t)
    return math.fsum(terms) / math.fsum(checkpoints.alphas)


def masked_accuracy(predictions: Iterable[np.ndarray], targets: Iterable[np.ndarray],
                    masks: Iterable[np.ndarray]) -> float:
    """Fraction of correct predictions over masked positions of all sequences."""
    correct = total = 0
    for p, y, m in zip(predictions, targets, masks):
        m = np.asarray(m, dtype=bool)
        correct += int(np.count_nonzero(np.asarray(p)[m] == np.asarray(y)[m]))
        total += int(np.count_nonzero(m))
    if total == 0:
        raise ValueError("no masked positions")
    return correct / total


def curve_to_csv(curve: AccuracyCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "accuracy"])
    for s, a in zip(curve.steps, curve.accuracies):
        w.writerow([s, repr(a)])
    return buf.getvalue()


def curve_from_csv(text: str) -> AccuracyCurve:
    """Parse ``step,accuracy`` rows (header optional); errors name the line."""
    steps, acc = [], []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or (lineno == 1 and row[0].strip().lower() == "step"):
            continue
        if len(row) != 2:
            raise ValueError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            steps.append(int(row[0]))
            acc.append(float(row[1]))
        except ValueError:
            raise ValueError(f"line {lineno}: malformed number in {row!r}") from None
    if not steps:
        raise ValueError("curve file has no data rows")
    try:
        return AccuracyCurve(tuple(steps), tuple(acc))
    except ValueError as exc:
        raise ValueError(f"invalid curve: {exc}") from None
