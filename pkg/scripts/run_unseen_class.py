#!/usr/bin/env python3
"""Zero/few-shot experiment with movement classes hidden from the base model.

The mock classifier never predicts the holdout classes; rules are learned
first without any holdout samples (zero-shot) and then with growing fractions
of them added to the rule-learning set only.  Accuracy is scored novel-aware,
so routing a holdout sample to the unknown label counts as correct.

    python3 scripts/run_unseen_class.py --out results/unseen
"""
import argparse
from pathlib import Path

from edcr import generate_synthetic, unseen_class_experiment
from edcr.io import write_unseen


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--noise", type=float, default=0.25)
    parser.add_argument("--holdout", default="walk,drive")
    parser.add_argument("--fractions", default="0,0.05,0.1,0.2,0.4,0.8")
    parser.add_argument("--epsilon", type=float, default=0.1)
    parser.add_argument("--out", default="results/unseen")
    args = parser.parse_args()

    holdout = args.holdout.split(",")
    corpus = generate_synthetic(
        seed=args.seed, n_samples=args.samples, noise=args.noise, holdout_classes=holdout
    )
    result = unseen_class_experiment(
        corpus.table,
        corpus.conditions,
        holdout=holdout,
        fractions=[float(f) for f in args.fractions.split(",")],
        epsilon=args.epsilon,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "unseen.csv"
    write_unseen(path, result)

    print(f"{'fraction':>8} {'baseline':>9} {'edcr':>7} {'delta':>7}")
    for row in result.rows:
        print(
            f"{row.fraction:>8.2f} {row.baseline_accuracy:>9.4f} "
            f"{row.edcr_accuracy:>7.4f} {row.delta:>+7.4f}"
        )
    print(f"\nwrote {path}")


if __name__ == "__main__":
    main()
