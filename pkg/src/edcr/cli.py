"""Command-line surface tying the library into reproducible pipelines.

Exit codes: 0 success, 2 configuration/contract error, 3 data/parse error,
4 internal invariant failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import io
from .conditions import generate_synthetic
from .core import ContractError, DataError, EdcrError, VerificationError, compute_class_stats
from .evaluate import (
    ScoringMode,
    error_detection_metrics,
    metrics_report,
    sequential_split,
    epsilon_sweep,
    unseen_class_experiment,
)
from .learn import LearnConfig, det_corr_rule_learn
from .rules import apply_ruleset
from .theory import (
    build_correction_scenario,
    check_submodular,
    correction_precision_delta,
    precision_delta_exact,
    recall_delta_exact,
    theorem_report,
)

EXIT_OK = 0
EXIT_CONTRACT = 2
EXIT_DATA = 3
EXIT_INVARIANT = 4


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise ContractError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_epsilon(args, classes) -> float | dict[str, float]:
    """Scalar epsilon, or a full per-class mapping with --epsilon-per-class
    entries overriding the scalar default."""
    if not args.epsilon_per_class:
        return args.epsilon
    mapping = {name: args.epsilon for name in classes.names}
    for chunk in args.epsilon_per_class.split(","):
        if "=" not in chunk:
            raise ContractError(f"expected class=value, got {chunk!r}")
        name, value = chunk.split("=", 1)
        name = name.strip()
        if name not in mapping:
            raise ContractError(f"--epsilon-per-class names unknown class {name!r}")
        try:
            mapping[name] = float(value)
        except ValueError:
            raise ContractError(f"bad epsilon value in {chunk!r}") from None
    return mapping


def cmd_gen(args) -> int:
    corpus = generate_synthetic(
        seed=args.seed,
        n_samples=args.samples,
        noise=args.noise,
        holdout_classes=args.holdout.split(",") if args.holdout else None,
        condition_noise=args.condition_noise,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajectories = out / "trajectories.csv"
    predictions = out / "predictions.csv"
    conditions = out / "conditions.csv"
    io.write_trajectories(trajectories, corpus.records)
    io.write_predictions(predictions, corpus.table)
    io.write_conditions(conditions, corpus.table, corpus.conditions)
    io.write_manifest(
        out,
        command="gen",
        config={
            "samples": args.samples,
            "noise": args.noise,
            "holdout": args.holdout or "",
            "condition_noise": args.condition_noise,
        },
        output_paths=[trajectories, predictions, conditions],
        seed=args.seed,
    )
    print(f"wrote {corpus.table.n} samples, {corpus.conditions.n_conditions} conditions to {out}")
    return EXIT_OK


def _require_gt(table, path) -> None:
    if not table.has_ground_truth:
        raise ContractError(f"{path}: predictions file has no gt column")


def cmd_learn(args) -> int:
    table = io.read_predictions(args.predictions)
    _require_gt(table, args.predictions)
    conds = io.read_conditions(args.conditions, table)
    config = LearnConfig(epsilon=_parse_epsilon(args, table.classes))
    rule_set = det_corr_rule_learn(config, table, conds)
    stats = compute_class_stats(table)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ruleset_path = out / "ruleset.yaml"
    io.save_ruleset(ruleset_path, rule_set)
    io.write_manifest(
        out,
        command="learn",
        config={"epsilon": rule_set.epsilon},
        input_paths=[args.predictions, args.conditions],
        output_paths=[ruleset_path],
    )

    for label in table.classes:
        det = rule_set.detection_by_class.get(label.name)
        corr = rule_set.correction_by_class.get(label.name)
        p_i = float(stats.precision[label.id])
        r_i = float(stats.recall[label.id])
        if det is not None:
            if det.class_support < 1.0 and p_i > 0.0:
                d_prec = precision_delta_exact(det.class_support, det.confidence, p_i)
                d_rec = recall_delta_exact(det.class_support, det.confidence, r_i, p_i)
                effect = f" predicted dP={d_prec:+.4f} dR={-d_rec:+.4f}"
            else:
                effect = " (degenerate stats)"
            print(
                f"{label.name}: detect via {list(det.conditions)} "
                f"s_i={det.class_support:.4f} c={det.confidence:.4f}{effect}"
            )
        else:
            print(f"{label.name}: no detection rule")
        if corr is not None:
            pairs = [(cond, cls.name) for cond, cls in corr.pairs]
            print(
                f"{label.name}: correct via {pairs} s={corr.support:.4f} c={corr.confidence:.4f}"
            )
    print(f"wrote {ruleset_path}")
    return EXIT_OK


def cmd_apply(args) -> int:
    rule_set = io.load_ruleset(args.ruleset)
    table = io.read_predictions(args.predictions, classes=rule_set.classes)
    conds = io.read_conditions(args.conditions, table)
    missing = set(rule_set.condition_names) - set(conds.condition_names)
    if missing:
        raise ContractError(f"conditions file lacks columns {sorted(missing)}")
    revised, trace = apply_ruleset(rule_set, table, conds, correction_scope=args.correction_scope)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    revised_path = out / "revised.csv"
    trace_path = out / "trace.csv"
    io.write_predictions(revised_path, revised)
    io.write_trace(trace_path, trace)
    io.write_manifest(
        out,
        command="apply",
        config={"correction_scope": args.correction_scope},
        input_paths=[args.ruleset, args.predictions, args.conditions],
        output_paths=[revised_path, trace_path],
    )
    n_unknown = sum(1 for label in revised.predicted if label.is_unknown)
    n_changed = sum(1 for a, b in zip(table.predicted, revised.predicted) if a != b)
    print(f"revised {n_changed} of {table.n} predictions ({n_unknown} now unknown); wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    table = io.read_predictions(args.predictions)
    _require_gt(table, args.predictions)
    mode = ScoringMode.from_string(args.mode)
    report = metrics_report(table, mode=mode)
    if args.trace:
        trace = io.read_trace(args.trace)
        by_id = {entry.sample_id: entry for entry in trace}
        missing = [s for s in table.sample_ids if s not in by_id]
        if missing:
            raise ContractError(f"trace file lacks sample id {missing[0]!r}")
        # detection verdicts are scored against the original predictions
        original = table.with_predictions(
            tuple(table.classes.resolve(by_id[s].original) for s in table.sample_ids)
        )
        flags = [by_id[s].flagged for s in table.sample_ids]
        detection = error_detection_metrics(flags, original)
        report = dataclasses.replace(report, error_detection=detection)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    io.write_metrics(metrics_path, report)
    inputs = [args.predictions] + ([args.trace] if args.trace else [])
    io.write_manifest(
        out,
        command="eval",
        config={"mode": mode.value},
        input_paths=inputs,
        output_paths=[metrics_path],
    )
    print(f"accuracy ({mode.value}): {report.accuracy:.4f}")
    for entry in report.per_class:
        print(
            f"{entry.class_name}: P={entry.precision:.4f} R={entry.recall:.4f} F1={entry.f1:.4f}"
        )
    if report.error_detection is not None:
        d = report.error_detection
        print(f"error detection: P={d.precision:.4f} R={d.recall:.4f} F1={d.f1:.4f}")
    print(f"wrote {metrics_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    table = io.read_predictions(args.predictions)
    _require_gt(table, args.predictions)
    conds = io.read_conditions(args.conditions, table)
    epsilons = _parse_floats(args.epsilons)
    split = sequential_split(table, conds, args.learn_fraction)
    result = epsilon_sweep(epsilons, split)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sweep_path = out / "sweep.csv"
    io.write_sweep(sweep_path, result)
    io.write_manifest(
        out,
        command="sweep",
        config={"epsilons": epsilons, "learn_fraction": args.learn_fraction},
        input_paths=[args.predictions, args.conditions],
        output_paths=[sweep_path],
    )
    print(f"wrote {len(result.rows)} sweep rows to {sweep_path}")
    return EXIT_OK


def cmd_unseen(args) -> int:
    table = io.read_predictions(args.predictions)
    _require_gt(table, args.predictions)
    conds = io.read_conditions(args.conditions, table)
    fractions = _parse_floats(args.fractions)
    result = unseen_class_experiment(
        table,
        conds,
        holdout=args.holdout.split(","),
        fractions=fractions,
        epsilon=args.epsilon,
        learn_fraction=args.learn_fraction,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    unseen_path = out / "unseen.csv"
    io.write_unseen(unseen_path, result)
    io.write_manifest(
        out,
        command="unseen",
        config={
            "holdout": args.holdout,
            "fractions": fractions,
            "epsilon": args.epsilon,
            "learn_fraction": args.learn_fraction,
        },
        input_paths=[args.predictions, args.conditions],
        output_paths=[unseen_path],
    )
    for row in result.rows:
        print(
            f"fraction={row.fraction:.2f}: baseline={row.baseline_accuracy:.4f} "
            f"edcr={row.edcr_accuracy:.4f} delta={row.delta:+.4f}"
        )
    print(f"wrote {unseen_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    table = io.read_predictions(args.predictions)
    _require_gt(table, args.predictions)
    conds = io.read_conditions(args.conditions, table)

    reports = theorem_report(table, conds, epsilon=args.epsilon)
    failures = [r for r in reports if not r.passed]
    for r in reports:
        status = "ok" if r.passed else "FAIL"
        note = f" ({r.note})" if r.note else ""
        print(
            f"detection theorems {r.class_name}: {status}{note} "
            f"dP pred={r.predicted_delta_precision:+.6f} meas={r.empirical_delta_precision:+.6f} "
            f"dR pred={-r.predicted_delta_recall:+.6f} meas={r.empirical_delta_recall:+.6f}"
        )

    submodular_fail = False
    check_class = table.classes.labels[0]
    for quantity in ("pos", "neg", "bod"):
        result = check_submodular(
            quantity, check_class, table, conds, trials=args.trials, seed=args.seed
        )
        status = "ok" if result.passed else "FAIL"
        scope = "exhaustive" if result.exhaustive else f"{result.pairs_checked} sampled pairs"
        print(f"submodularity {quantity}: {status} ({scope})")
        if not result.passed:
            submodular_fail = True
            print(f"  counterexample: {result.counterexample}")

    # correction theorems on constructed scenarios seeded from this run
    rng = np.random.default_rng(args.seed)
    correction_fail = False
    for _ in range(args.correction_scenarios):
        n_i = int(rng.integers(10, 60))
        tp = int(rng.integers(1, n_i + 1))
        bod = int(rng.integers(1, 40))
        pos = int(rng.integers(0, bod + 1))
        extra_fn = int(rng.integers(0, 10))
        n_total = n_i + bod + extra_fn + int(rng.integers(0, 40))
        scenario = build_correction_scenario(
            n_total, n_i / n_total, tp / n_i, bod / n_total, pos / bod, extra_fn=extra_fn
        )
        before = compute_class_stats(scenario.table)
        revised, _ = apply_ruleset(scenario.ruleset(), scenario.table, scenario.conds)
        after = compute_class_stats(revised)
        i = scenario.target.id
        predicted = correction_precision_delta(
            scenario.rule.support, scenario.rule.confidence, float(before.precision[i]),
            float(before.prior[i]),
        )
        measured = float(after.precision[i]) - float(before.precision[i])
        if abs(predicted - measured) > 1e-9:
            correction_fail = True
    print(f"correction theorems: {'FAIL' if correction_fail else 'ok'} "
          f"({args.correction_scenarios} constructed scenarios)")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "theorem_report.csv"
    io.write_theorem_reports(report_path, reports)
    io.write_manifest(
        out,
        command="verify",
        config={"epsilon": args.epsilon, "trials": args.trials,
                "correction_scenarios": args.correction_scenarios},
        input_paths=[args.predictions, args.conditions],
        output_paths=[report_path],
        seed=args.seed,
    )
    print(f"wrote {report_path}")
    if failures or submodular_fail or correction_fail:
        raise VerificationError("one or more theorem checks failed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edcr",
        description="Learn, apply, and verify error-detecting and error-correcting rules.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--noise", type=float, default=0.25)
    p.add_argument("--holdout", default="", help="comma-separated classes the mock model never predicts")
    p.add_argument("--condition-noise", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("learn", help="learn a rule set from predictions + conditions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--epsilon-per-class", default="", help="overrides, e.g. walk=0.05,bike=0.2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("apply", help="apply a saved rule set to predictions")
    p.add_argument("--ruleset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--correction-scope", choices=("body", "flagged"), default="body")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("eval", help="score a (possibly revised) predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--trace", default="", help="trace.csv from apply, for error-detection metrics")
    p.add_argument("--mode", default="strict", help="strict or novel-aware")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="epsilon sweep with theoretical recall overlay")
    p.add_argument("--predictions", required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--epsilons", default="0,0.05,0.1,0.2,0.3")
    p.add_argument("--learn-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("unseen", help="zero/few-shot unseen-class experiment")
    p.add_argument("--predictions", required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--holdout", required=True, help="comma-separated holdout classes")
    p.add_argument("--fractions", default="0,0.1,0.2")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--learn-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_unseen)

    p = sub.add_parser("verify", help="run theorem and submodularity checks on a corpus")
    p.add_argument("--predictions", required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--correction-scenarios", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ContractError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONTRACT
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except VerificationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except EdcrError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
