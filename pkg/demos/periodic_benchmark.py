"""Compare a CA reservoir and an echo-state network on the periodic task.

    python demos/periodic_benchmark.py [--seeds 3]
"""
import argparse

import numpy as np

from complexca.harness import ModelSpec, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--task", type=int, default=1)
    args = ap.parse_args()
    for model in (ModelSpec(rule=2), ModelSpec(rule=90), ModelSpec(kind="esn")):
        recs = [run_experiment(args.task, model, s) for s in range(args.seeds)]
        acc = np.array([r.final_accuracy for r in recs])
        wd = np.array([r.wade for r in recs])
        curve = np.mean([r.accuracies for r in recs], axis=0)
        marks = " ".join(f"{a:.2f}" for a in curve[::8])
        print(f"{recs[0].model}: accuracy {acc.mean():.3f}+-{acc.std():.3f}  WADE {wd.mean():.3f}+-{wd.std():.3f}")
        print(f"  mean curve every 160 sequences: {marks}")


if __name__ == "__main__":
    main()
