"""Experiment orchestration: rule search, reservoir benchmarks and persistence."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .ca import CaSpec, RuleTable, eca_rule, random_grid, simulate, single_cell
from .complexity import compressed_length, joint_score, nn_mu_tau
from .evaluation import DEFAULT_CHECKPOINTS, AccuracyCurve, CheckpointSet, wade
from .reservoir import (
    DecoderConfig,
    EsnParams,
    ExtendedRule,
    RecaConfig,
    build_projection,
    decoder_init,
    decoder_predict,
    decoder_step,
    esn_init,
    esn_run,
    reca_run,
)
from .sampling import DirichletParams, langton_lambda, make_rng, sample_dirichlet, sample_uniform
from .tasks import TaskParams, TaskSample, generate_dataset, task_vocab

__all__ = [
    "RESULT_FORMAT",
    "ModelSpec",
    "RECA_DEFAULT_SIZES",
    "RECA_TASK_SIZES",
    "ExperimentRecord",
    "Reservoir",
    "make_reservoir",
    "run_experiment",
    "run_benchmark",
    "summarize",
    "SearchConfig",
    "SearchRow",
    "search_rules",
    "records_to_json",
    "records_from_json",
    "records_to_csv",
    "search_to_csv",
]

RESULT_FORMAT = "complexca.results/1"


@dataclass(frozen=True)
class ModelSpec:
    """A reservoir model description.

    ``kind`` is "reca" (elementary rule ``rule``, or a 16-entry extended rule
    when ``extended`` is set) or "esn". ReCA sizes left as None take the
    per-task values of ``RECA_TASK_SIZES`` when run (``for_task``).
    """

    kind: str = "reca"
    rule: int = 110
    extended: bool = False
    projection: str = "one-to-one"
    k: int = 1
    R: int | None = None
    L_d: int | None = None
    I: int | None = None
    K: int = 1800
    rho: float = 0.9
    beta: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("reca", "esn"):
            raise ValueError(f"unknown model kind {self.kind!r}")

    def for_task(self, task_id: int) -> "ModelSpec":
        """Fill unset ReCA sizes from the per-task table."""
        if self.kind == "esn":
            return self
        sizes = RECA_TASK_SIZES.get(task_id, RECA_DEFAULT_SIZES)
        return replace(self, **{f: sizes[f] for f in ("R", "L_d", "I") if getattr(self, f) is None})

    @property
    def label(self) -> str:
        if self.kind == "esn":
            return f"esn-K{self.K}-rho{self.rho:g}-sigma{self.sigma:g}-beta{self.beta:g}"
        prefix = "xreca" if self.extended else "reca"
        return f"{prefix}-{self.rule}-{self.projection}-k{self.k}-R{self.R}-Ld{self.L_d}-I{self.I}"

    @property
    def feature_dim(self) -> int:
        if self.kind == "esn":
            return self.K
        if None in (self.R, self.L_d, self.I):
            raise ValueError("unresolved ReCA sizes; call for_task first")
        return self.I * self.R * self.L_d


# Feature budget I*R*L_d stays near the 1800-unit reservoir width. Task 1 and 3
# sizes are the best one-to-one grid points for rules 2 and 37; see README.
RECA_DEFAULT_SIZES = {"R": 4, "L_d": 225, "I": 2}
RECA_TASK_SIZES = {
    1: {"R": 28, "L_d": 32, "I": 2},
    3: {"R": 7, "L_d": 64, "I": 4},
}


Reservoir = Callable[[np.ndarray], np.ndarray]  # (B, T) token ids -> (B, T, K) features


def make_reservoir(model: ModelSpec, vocab_size: int, seed: int) -> Reservoir:
    model = model.for_task(0) if model.kind == "reca" and None in (model.R, model.L_d, model.I) else model
    if model.kind == "esn":
        esn = esn_init(EsnParams(model.K, model.rho, model.beta, sigma=model.sigma, seed=seed), vocab_size)
        eye = np.eye(vocab_size)
        return lambda toks: esn_run(esn, eye[toks])
    rule = ExtendedRule.from_number(model.rule) if model.extended else eca_rule(model.rule)
    proj = build_projection(model.projection, model.k, model.R, vocab_size, model.L_d, seed)
    cfg = RecaConfig(rule, proj, model.I)
    return lambda toks: reca_run(cfg, toks)


@dataclass
class ExperimentRecord:
    task_id: int
    model: str
    seed: int
    steps: list[int] = field(default_factory=list)  # training sequences seen at each evaluation
    accuracies: list[float] = field(default_factory=list)
    wade: float = math.nan
    final_accuracy: float = math.nan
    wall_time: float = 0.0
    status: str = "ok"
    error: str = ""
    checkpoints: list[float] = field(default_factory=lambda: list(DEFAULT_CHECKPOINTS.alphas))
    eval_every: int = 20

    @property
    def curve(self) -> AccuracyCurve:
        return AccuracyCurve(tuple(self.steps), tuple(self.accuracies))

    def recompute_wade(self) -> float:
        return wade(self.curve, CheckpointSet(tuple(self.checkpoints)))


def _pad(samples: Sequence[TaskSample]) -> np.ndarray:
    T = max(len(s) for s in samples)
    out = np.zeros((len(samples), T), dtype=np.int64)
    for i, s in enumerate(samples):
        out[i, : len(s)] = s.tokens
    return out


def _supervised(samples: Sequence[TaskSample], reservoir: Reservoir, chunk: int = 40
                ) -> tuple[np.ndarray, np.ndarray]:
    """Stack (feature at t-1, token at t) for every masked t >= 1."""
    xs, ys = [], []
    for lo in range(0, len(samples), chunk):
        part = samples[lo:lo + chunk]
        feats = reservoir(_pad(part))
        for i, s in enumerate(part):
            pos = np.flatnonzero(s.mask)
            pos = pos[pos >= 1]
            xs.append(np.asarray(feats[i, pos - 1], dtype=np.float32))
            ys.append(s.tokens[pos])
    return np.concatenate(xs), np.concatenate(ys)


def _split_seeds(seed: int) -> tuple[int, int, int]:
    data, split, model = np.random.SeedSequence(seed).generate_state(3)
    return int(data), int(split), int(model)


def run_experiment(task_id: int, model: ModelSpec, seed: int, n_samples: int = 1200, n_train: int = 960,
                   eval_every: int = 20, params: TaskParams | None = None,
                   decoder: DecoderConfig | None = None,
                   checkpoints: CheckpointSet = DEFAULT_CHECKPOINTS) -> ExperimentRecord:
    """Generate data, run the reservoir, train the decoder in one pass, record test accuracy.

    The data depends only on (task_id, seed), so models compared under the
    same seed see the same sequences.
    """
    if not 0 < n_train < n_samples:
        raise ValueError("need 0 < n_train < n_samples")
    start = time.perf_counter()
    model = model.for_task(task_id)
    rec = ExperimentRecord(task_id, model.label, seed, checkpoints=list(checkpoints.alphas), eval_every=eval_every)
    data_seed, split_seed, model_seed = _split_seeds(seed)
    samples = generate_dataset(task_id, n_samples, data_seed, params)
    order = make_rng(split_seed).permutation(n_samples)
    train = [samples[i] for i in order[:n_train]]
    test = [samples[i] for i in order[n_train:]]
    vocab = len(task_vocab(task_id))
    reservoir = make_reservoir(model, vocab, model_seed)
    x_test, y_test = _supervised(test, reservoir)
    dec = decoder_init(vocab, model.feature_dim)
    cfg = decoder or DecoderConfig()
    for lo in range(0, n_train, eval_every):
        chunk = train[lo:lo + eval_every]
        feats = reservoir(_pad(chunk))
        for i, s in enumerate(chunk):
            for t in np.flatnonzero(s.mask):
                if t:
                    decoder_step(dec, feats[i, t - 1], int(s.tokens[t]), cfg)
        acc = float(np.mean(decoder_predict(dec, x_test) == y_test))
        rec.steps.append(lo + len(chunk))
        rec.accuracies.append(acc)
    rec.final_accuracy = rec.accuracies[-1]
    rec.wade = rec.recompute_wade()
    rec.wall_time = time.perf_counter() - start
    return rec


def run_benchmark(task_ids: Sequence[int], models: Sequence[ModelSpec], seeds: Sequence[int],
                  progress: Callable[[ExperimentRecord], None] | None = None, **kwargs) -> list[ExperimentRecord]:
    """Every (task, model, seed) run; a raising run is kept with status "failed"."""
    records = []
    for task_id in task_ids:
        for model in models:
            for seed in seeds:
                try:
                    rec = run_experiment(task_id, model, seed, **kwargs)
                except Exception as exc:  # recorded, never dropped
                    rec = ExperimentRecord(task_id, model.for_task(task_id).label, seed, status="failed",
                                           error=f"{type(exc).__name__}: {exc}")
                records.append(rec)
                if progress:
                    progress(rec)
    return records


def summarize(records: Sequence[ExperimentRecord]) -> dict:
    """Mean and std of final accuracy and WADE over successful runs, keyed by (task, model)."""
    groups: dict[tuple[int, str], list[ExperimentRecord]] = {}
    for r in sorted(records, key=lambda r: (r.task_id, r.model, r.seed)):
        groups.setdefault((r.task_id, r.model), []).append(r)
    out = {}
    for key, recs in groups.items():
        ok = [r for r in recs if r.status == "ok"]
        acc = np.array([r.final_accuracy for r in ok])
        wd = np.array([r.wade for r in ok])
        out[key] = {
            "runs": len(recs),
            "failed": len(recs) - len(ok),
            "accuracy_mean": float(acc.mean()) if ok else math.nan,
            "accuracy_std": float(acc.std()) if ok else math.nan,
            "wade_mean": float(wd.mean()) if ok else math.nan,
            "wade_std": float(wd.std()) if ok else math.nan,
        }
    return out


# --- rule search --------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    """Rule-space search; ``sampler`` is "eca" (all 256), "uniform" or "dirichlet"."""

    sampler: str = "dirichlet"
    n_rules: int = 16
    dims: int = 2
    num_states: int = 2
    radius: int = 1
    shape: tuple[int, ...] = (256, 256)
    steps: int = 1000
    alpha: float = 1.0
    T: int = 950
    tau: int = 50
    predictor_radius: int = 3
    init: str = "random"  # or "single"
    seed: int = 0


@dataclass
class SearchRow:
    rule_id: str
    lam: float
    compressed_length: int
    joint_mu: float
    nn_mu_tau: float
    rank: int = 0


def _sample_rules(cfg: SearchConfig, rng) -> list[tuple[str, RuleTable]]:
    if cfg.sampler == "eca":
        return [(str(n), eca_rule(n)) for n in range(256)]
    spec = CaSpec(cfg.dims, cfg.num_states, cfg.radius, cfg.shape)
    rules = []
    for i in range(cfg.n_rules):
        if cfg.sampler == "uniform":
            rt = sample_uniform(spec, rng)
        elif cfg.sampler == "dirichlet":
            rt = sample_dirichlet(spec, DirichletParams(cfg.alpha, cfg.num_states), rng)
        else:
            raise ValueError(f"unknown sampler {cfg.sampler!r}")
        rules.append((f"r{i:04d}", rt))
    return rules


def search_rules(cfg: SearchConfig, progress: Callable[[int, int], None] | None = None
                 ) -> tuple[list[SearchRow], dict[str, RuleTable]]:
    """Sample, simulate and score rules; rows come back ranked by descending mu_tau.

    Ties (and NaN-free infinities) keep sampling order.
    """
    rng = make_rng(cfg.seed)
    rules = _sample_rules(cfg, rng)
    shape = cfg.shape if cfg.sampler != "eca" else (cfg.shape[0],)
    rows = []
    for i, (rid, rt) in enumerate(rules):
        spec = rt.spec.with_shape(shape)
        g0 = single_cell(spec) if cfg.init == "single" else random_grid(spec, rng)
        st = simulate(g0, rt, cfg.steps)
        T = min(cfg.T, cfg.steps - cfg.tau)
        rows.append(SearchRow(
            rid,
            float(langton_lambda(rt).lam),
            compressed_length(st.final),
            joint_score(st[T], st[T + cfg.tau]),
            nn_mu_tau(st, T, cfg.tau, cfg.predictor_radius),
        ))
        if progress:
            progress(i + 1, len(rules))
    ranked = sorted(range(len(rows)), key=lambda j: -rows[j].nn_mu_tau)
    for r, j in enumerate(ranked, 1):
        rows[j].rank = r
    return [rows[j] for j in ranked], dict(rules)


# --- persistence --------------------------------------------------------------------


def records_to_json(records: Sequence[ExperimentRecord], meta: dict | None = None) -> str:
    doc = {"format": RESULT_FORMAT, "meta": meta or {}, "records": [asdict(r) for r in records]}
    return json.dumps(doc, indent=1, allow_nan=True)


def records_from_json(text: str) -> list[ExperimentRecord]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed results file at byte {len(text[:exc.pos].encode())}: {exc.msg}") from None
    if doc.get("format") != RESULT_FORMAT:
        raise ValueError(f"unsupported results format {doc.get('format')!r}")
    return [ExperimentRecord(**r) for r in doc["records"]]


def records_to_csv(records: Sequence[ExperimentRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task_id", "model", "seed", "status", "final_accuracy", "wade", "wall_time"])
    for r in records:
        w.writerow([r.task_id, r.model, r.seed, r.status, repr(r.final_accuracy), repr(r.wade), f"{r.wall_time:.3f}"])
    return buf.getvalue()


def search_to_csv(rows: Sequence[SearchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rule_id", "lambda", "compressed_length", "joint_mu", "nn_mu_tau", "rank"])
    for r in rows:
        w.writerow([r.rule_id, repr(r.lam), r.compressed_length, repr(r.joint_mu), repr(r.nn_mu_tau), r.rank])
    return buf.getvalue()
