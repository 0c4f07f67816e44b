"""Command-line entry point: ``complexca <subcommand> ...``.

Outputs go to ``--out``, else ``$COMPLEXCA_OUT``, else ``./complexca-out``.
Exit status is 0 only when every requested run succeeds.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import tomli

from . import coarse
from .ca import CaSpec, Grid, SpaceTime, eca_rule, random_grid, simulate, single_cell
from .complexity import average_precision
from .evaluation import CheckpointSet, curve_from_csv, wade
from .harness import (
    ModelSpec,
    SearchConfig,
    records_to_csv,
    records_to_json,
    run_benchmark,
    search_rules,
    search_to_csv,
    summarize,
)
from .io import float_to_gray, labels_from_csv, load_pgm, load_rule, rule_sample_csv, save_image, save_rule
from .sampling import DirichletParams, langton_lambda, make_rng, sample_dirichlet, sample_uniform, transition_counts
from .tasks import TaskParams, generate_dataset, obfuscation_map, task_vocab, text_dump, to_jsonl

log = logging.getLogger("complexca")

OUT_ENV = "COMPLEXCA_OUT"
RENDER_METHODS = ("raw", "histogram", "kmeans", "autoencoder", "average", "filter", "pyramid")


def out_dir(arg: str | None) -> Path:
    p = Path(arg or os.environ.get(OUT_ENV) or "complexca-out")
    p.mkdir(parents=True, exist_ok=True)
    return p


def _ints(text: str) -> list[int]:
    """'1,3,5-7' -> [1, 3, 5, 6, 7]."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _shape(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.lower().split("x"))


# --- search -------------------------------------------------------------------------


def cmd_search(args) -> int:
    out = out_dir(args.out)
    cfg = SearchConfig(
        sampler=args.sampler, n_rules=args.n, dims=args.dims, num_states=args.states, radius=args.radius,
        shape=_shape(args.size), steps=args.steps, alpha=args.alpha, T=args.T, tau=args.tau,
        predictor_radius=args.predictor_radius, init=args.init, seed=args.seed,
    )
    rows, rules = search_rules(cfg, lambda i, n: log.info("scored %d/%d", i, n))
    (out / "search.csv").write_text(search_to_csv(rows))
    if args.save_rules:
        (out / "rules").mkdir(exist_ok=True)
        for rid, rt in rules.items():
            save_rule(rt, out / "rules" / f"{rid}.json")
    if args.labels:
        labels = labels_from_csv(Path(args.labels).read_text())
        known = [r for r in rows if r.rule_id in labels]
        if not known:
            log.error("label file matches none of the sampled rule ids")
            return 1
        ap = average_precision([r.nn_mu_tau for r in known], [labels[r.rule_id] for r in known])
        print(f"average_precision {ap:.6f} over {len(known)} labeled rules")
    print(out / "search.csv")
    return 0


# --- benchmark ----------------------------------------------------------------------

_MODEL_FIELDS = {f.name for f in fields(ModelSpec)}


def load_manifest(path: str | Path) -> dict:
    """Read a TOML benchmark manifest.

    Keys: ``tasks`` (list), ``seeds`` (count or list), ``eval_every``,
    ``n_samples``, ``n_train`` and ``[[model]]`` tables with ModelSpec fields.
    """
    raw = Path(path).read_bytes()
    try:
        doc = tomli.loads(raw.decode("utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ValueError(f"malformed manifest {path}: {exc}") from None
    models = doc.get("model", [])
    if not models:
        raise ValueError("manifest declares no [[model]] tables")
    for m in models:
        extra = set(m) - _MODEL_FIELDS
        if extra:
            raise ValueError(f"unknown model field(s) {sorted(extra)}")
    return doc


def _benchmark_plan(args) -> tuple[list[int], list[ModelSpec], list[int], dict]:
    if args.manifest:
        doc = load_manifest(args.manifest)
        tasks = [int(t) for t in doc.get("tasks", [1])]
        seeds = doc.get("seeds", 20)
        seeds = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
        models = [ModelSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in m.items()}) for m in doc["model"]]
        extra = {k: doc[k] for k in ("eval_every", "n_samples", "n_train") if k in doc}
        return tasks, models, seeds, extra
    models = [ModelSpec(kind="reca", rule=r, extended=args.extended, projection=args.projection, k=args.k,
                        R=args.R, L_d=args.L_d, I=args.I) for r in _ints(args.rules)] if args.rules else []
    if args.esn:
        models.append(ModelSpec(kind="esn", K=args.K, rho=args.rho, sigma=args.sigma, beta=args.beta))
    if not models:
        raise ValueError("no models: pass --rules and/or --esn, or --manifest")
    return _ints(args.tasks), models, list(range(args.seeds)), {"eval_every": args.eval_every}


def cmd_benchmark(args) -> int:
    out = out_dir(args.out)
    tasks, models, seeds, extra = _benchmark_plan(args)

    def report(rec):
        if rec.status == "ok":
            log.info("task %d %s seed %d: acc %.4f wade %.4f", rec.task_id, rec.model, rec.seed,
                     rec.final_accuracy, rec.wade)
        else:
            log.error("task %d %s seed %d failed: %s", rec.task_id, rec.model, rec.seed, rec.error)

    records = run_benchmark(tasks, models, seeds, progress=report, **extra)
    meta = {"tasks": tasks, "models": [asdict(m) for m in models], "seeds": seeds, **extra}
    (out / "results.json").write_text(records_to_json(records, meta))
    (out / "results.csv").write_text(records_to_csv(records))
    lines = ["task_id,model,runs,failed,accuracy_mean,accuracy_std,wade_mean,wade_std"]
    for (task, model), s in summarize(records).items():
        lines.append(f"{task},{model},{s['runs']},{s['failed']},{s['accuracy_mean']!r},{s['accuracy_std']!r},"
                     f"{s['wade_mean']!r},{s['wade_std']!r}")
        print(f"task {task} {model}: accuracy {s['accuracy_mean']:.4f} +- {s['accuracy_std']:.4f}, "
              f"WADE {s['wade_mean']:.4f} +- {s['wade_std']:.4f} ({s['failed']} failed)")
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    return 0 if all(r.status == "ok" for r in records) else 1


# --- render -------------------------------------------------------------------------


def _load_input(args) -> tuple[Grid | SpaceTime, str]:
    """A space-time diagram from a rule (simulated) or a stored grid."""
    if args.eca is not None or (args.input and args.input.endswith(".json")):
        rt = eca_rule(args.eca) if args.eca is not None else load_rule(args.input)
        shape = (args.width,) if rt.spec.dims == 1 else (args.width, args.width)
        spec = rt.spec.with_shape(shape)
        g0 = single_cell(spec) if args.init == "single" else random_grid(spec, make_rng(args.seed))
        st = simulate(g0, rt, args.steps)
        stem = f"eca{args.eca}" if args.eca is not None else Path(args.input).stem
        stem += f"-w{args.width}-t{args.steps}-{args.init}-s{args.seed}"
        return (st if rt.spec.dims == 1 else st.final), stem
    if not args.input:
        raise ValueError("render needs --eca N or an input file")
    path = Path(args.input)
    if path.suffix == ".npy":
        cells = np.load(path)
        k = int(cells.max()) + 1 if cells.size else 2
    else:
        cells, k = load_pgm(path)
    spec = CaSpec(2, max(k, 2), 1, cells.shape)
    return Grid(spec, cells), path.stem


def _as_grid(obj: Grid | SpaceTime) -> Grid:
    if isinstance(obj, Grid):
        return obj
    d = obj.data
    return Grid(CaSpec(2, obj.spec.num_states, 1, d.shape), d)


def cmd_render(args) -> int:
    if args.method not in RENDER_METHODS:
        raise ValueError(f"unknown method {args.method!r}; choose from {', '.join(RENDER_METHODS)}")
    out = out_dir(args.out)
    obj, stem = _load_input(args)
    formats = args.formats.split(",")
    written = []
    raw = _as_grid(obj)
    written += save_image(raw.cells, raw.spec.num_states, out / f"{stem}_raw", formats, args.scale)
    m, b, k = args.method, args.b, args.k_out
    if m == "filter":
        if not isinstance(obj, SpaceTime):
            raise ValueError("filter needs a 1D space-time diagram")
        f = coarse.filter_eca(obj, args.eca, args.mode)
        written += save_image(f.data, 2, out / f"{stem}_filter-{args.mode or coarse.DEFAULT_MODES.get(args.eca, 'or')}",
                              formats, args.scale)
    elif m == "pyramid":
        levels = coarse.pyramid(raw, b, k, args.depth, args.base_method, args.seed)
        for i, g in enumerate(levels, 1):
            written += save_image(g.cells, g.spec.num_states,
                                  out / f"{stem}_pyramid-{args.base_method}-b{b}-k{k}-level{i}", formats, args.scale)
    elif m == "histogram":
        h = coarse.block_histogram(raw, b)
        fmap = coarse.partition_histogram(h, k)
        g = coarse.coarse_grain_histogram(raw, b, k, args.dither)
        name = f"{stem}_histogram-b{b}-k{k}" + ("-dither" if args.dither else "")
        written += save_image(g.cells, g.spec.num_states, out / name, formats, args.scale)
        side = out / f"{name}.json"
        side.write_text(json.dumps({"b": b, "k_out": k, "thresholds": list(map(float, fmap.thresholds)),
                                    "distinct_blocks": len(h.configs)}, indent=1) + "\n")
        written.append(side)
    elif m == "kmeans":
        g = coarse.coarse_grain_kmeans(raw, b, k, args.seed)
        written += save_image(g.cells, g.spec.num_states, out / f"{stem}_kmeans-b{b}-k{k}-s{args.seed}", formats,
                              args.scale)
    elif m == "autoencoder":
        g = coarse.coarse_grain_autoencoder(raw, b, k)
        written += save_image(g.cells, g.spec.num_states, out / f"{stem}_autoencoder-b{b}-z{k}", formats, args.scale)
    elif m == "average":
        g = coarse.local_average(raw, b)
        written += save_image(g.cells, g.spec.num_states, out / f"{stem}_average-b{b}", formats, args.scale)
    if args.gray_average:
        rows, shape = coarse.block_view(raw.cells, b)
        gray = float_to_gray(1.0 - rows.mean(axis=1).reshape(shape) / (raw.spec.num_states - 1))
        written += save_image(gray, 256, out / f"{stem}_mean-b{b}", ("pgm",))
    for p in written:
        print(p)
    return 0


# --- wade ---------------------------------------------------------------------------


def cmd_wade(args) -> int:
    cps = CheckpointSet.evenly(args.checkpoints)
    status = 0
    for path in args.curves:
        try:
            curve = curve_from_csv(Path(path).read_text())
        except (OSError, ValueError) as exc:
            log.error("%s: %s", path, exc)
            status = 1
            continue
        print(f"{path}\twade={wade(curve, cps):.6f}\tfinal={curve.final:.6f}\tpoints={len(curve)}")
    return status


# --- sample-rules -------------------------------------------------------------------


def cmd_sample_rules(args) -> int:
    out = out_dir(args.out)
    rng = make_rng(args.seed)
    spec = CaSpec(args.dims, args.states, args.radius, _shape(args.size))
    rdir = out / "rules"
    rdir.mkdir(exist_ok=True)
    rows = []
    for i in range(args.n):
        rt = (sample_uniform(spec, rng) if args.sampler == "uniform"
              else sample_dirichlet(spec, DirichletParams(args.alpha, args.states), rng))
        rid = f"r{i:04d}"
        save_rule(rt, rdir / f"{rid}.json")
        rows.append((rid, float(langton_lambda(rt).lam), transition_counts(rt).tolist()))
    (out / "rules.csv").write_text(rule_sample_csv(rows))
    print(out / "rules.csv")
    return 0


# --- taskgen-dump -------------------------------------------------------------------


def cmd_taskgen_dump(args) -> int:
    params = TaskParams()
    samples = generate_dataset(args.task, args.n, args.seed, params)
    transform = obfuscation_map(task_vocab(args.task), make_rng(args.obfuscate)) if args.obfuscate is not None else None
    text = to_jsonl(samples, transform) if args.format == "jsonl" else text_dump(samples, transform)
    if args.stdout:
        sys.stdout.write(text)
    else:
        path = out_dir(args.out) / f"task{args.task}-n{args.n}-s{args.seed}.{args.format}"
        path.write_text(text)
        print(path)
    return 0


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="complexca", description=__doc__.splitlines()[0])
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./complexca-out)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="sample rules and rank them by complexity")
    p.add_argument("--sampler", choices=("eca", "uniform", "dirichlet"), default="dirichlet")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--size", default="256x256", help="lattice extents, e.g. 256x256 or 512")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--T", type=int, default=950)
    p.add_argument("--tau", type=int, default=50)
    p.add_argument("--predictor-radius", type=int, default=3)
    p.add_argument("--init", choices=("random", "single"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-rules", action="store_true")
    p.add_argument("--labels", help="CSV of rule_id,0|1 to score the ranking by average precision")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("benchmark", help="train reservoir decoders on the task suite")
    p.add_argument("--manifest", help="TOML manifest; overrides the model flags")
    p.add_argument("--tasks", default="1")
    p.add_argument("--rules", default="", help="elementary rule numbers, e.g. 2,38,130")
    p.add_argument("--extended", action="store_true", help="interpret rules as 16-entry input-aware rules")
    p.add_argument("--projection", default="one-to-one")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--R", type=int, help="redundancy (default: per-task size table)")
    p.add_argument("--L-d", dest="L_d", type=int, help="per-copy width (default: per-task size table)")
    p.add_argument("--I", type=int, help="CA steps per token (default: per-task size table)")
    p.add_argument("--esn", action="store_true")
    p.add_argument("--K", type=int, default=1800)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--eval-every", type=int, default=20)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("render", help="write raw and processed images")
    p.add_argument("input", nargs="?", help="rule JSON (simulated), PGM or .npy grid")
    p.add_argument("--eca", type=int, help="simulate this elementary rule instead of reading a file")
    p.add_argument("--method", default="raw", help="|".join(RENDER_METHODS))
    p.add_argument("--mode", choices=coarse.FILTER_MODES, help="filter mode (default by rule)")
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--k-out", type=int, default=2)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--base-method", default="histogram", help="pyramid level method: histogram|kmeans|average")
    p.add_argument("--dither", action="store_true")
    p.add_argument("--gray-average", action="store_true", help="also write the unrounded block mean as a graymap")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--init", choices=("random", "single"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=int, default=1, help="PNG pixel size")
    p.add_argument("--formats", default="png,pgm")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("wade", help="score accuracy-curve CSV files")
    p.add_argument("curves", nargs="+")
    p.add_argument("--checkpoints", type=int, default=20)
    p.set_defaults(func=cmd_wade)

    p = sub.add_parser("sample-rules", help="sample rule tables and report their lambda")
    p.add_argument("--sampler", choices=("uniform", "dirichlet"), default="dirichlet")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--size", default="64x64")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample_rules)

    p = sub.add_parser("taskgen-dump", help="export generated task samples")
    p.add_argument("--task", type=int, required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("jsonl", "text"), default="jsonl")
    p.add_argument("--obfuscate", type=int, metavar="SEED", help="remap tokens to random letters")
    p.add_argument("--stdout", action="store_true")
    p.set_defaults(func=cmd_taskgen_dump)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
