"""Metrics and experiment drivers: error-detection scoring, accuracy under
strict or novel-aware scoring, the epsilon sweep with its theoretical-recall
overlay, and the unseen-class zero/few-shot protocol.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    ConditionMatrix,
    ContractError,
    PredictionTable,
    compute_class_stats,
)
from .learn import LearnConfig, det_corr_rule_learn
from .rules import apply_ruleset
from .theory import recall_delta_exact


class ScoringMode(enum.Enum):
    """How UNKNOWN predictions score: always wrong (STRICT), or correct when
    the ground truth lies outside the class set (NOVEL_AWARE)."""

    STRICT = "strict"
    NOVEL_AWARE = "novel-aware"

    @classmethod
    def from_string(cls, text: str) -> "ScoringMode":
        normalized = text.strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == normalized:
                return mode
        raise ContractError(f"unknown scoring mode {text!r}; use strict or novel-aware")


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ErrorMetrics:
    """Precision/recall/F1 of detection flags against prediction != truth."""

    precision: float
    recall: float
    f1: float


def error_detection_metrics(flags: Sequence[bool], table: PredictionTable) -> ErrorMetrics:
    """Score detection verdicts with actual errors as the positive class."""
    table.require_ground_truth()
    flag_arr = np.asarray(flags, dtype=bool)
    if flag_arr.shape != (table.n,):
        raise ContractError(f"{flag_arr.shape[0] if flag_arr.ndim else 0} flags for {table.n} samples")
    actual = np.array(
        [pred != gt for pred, gt in zip(table.predicted, table.ground_truth)], dtype=bool
    )
    raised = int(np.count_nonzero(flag_arr))
    errors = int(np.count_nonzero(actual))
    true_flags = int(np.count_nonzero(flag_arr & actual))
    precision = true_flags / raised if raised > 0 else 0.0
    recall = true_flags / errors if errors > 0 else 0.0
    return ErrorMetrics(precision, recall, f1_score(precision, recall))


def accuracy(table: PredictionTable, mode: ScoringMode = ScoringMode.STRICT) -> float:
    """Fraction of correct predictions under the given scoring mode."""
    table.require_ground_truth()
    correct = 0
    for pred, gt in zip(table.predicted, table.ground_truth):
        if pred == gt:
            correct += 1
        elif mode is ScoringMode.NOVEL_AWARE and pred.is_unknown and not gt.in_set:
            correct += 1
    return correct / table.n if table.n else 0.0


@dataclass(frozen=True)
class ClassMetrics:
    class_name: str
    precision: float
    recall: float
    f1: float
    n_predicted: int
    n_actual: int


@dataclass(frozen=True)
class MetricsReport:
    """Full evaluation of one table: per-class scores, accuracy under the
    chosen mode (plus both modes for reference), and optionally the
    error-detection scores for a set of flags."""

    n_samples: int
    mode: ScoringMode
    accuracy: float
    accuracy_strict: float
    accuracy_novel_aware: float
    per_class: tuple[ClassMetrics, ...]
    error_detection: ErrorMetrics | None = None


def metrics_report(
    table: PredictionTable,
    mode: ScoringMode = ScoringMode.STRICT,
    flags: Sequence[bool] | None = None,
) -> MetricsReport:
    stats = compute_class_stats(table)
    per_class = tuple(
        ClassMetrics(
            class_name=label.name,
            precision=float(stats.precision[label.id]),
            recall=float(stats.recall[label.id]),
            f1=f1_score(float(stats.precision[label.id]), float(stats.recall[label.id])),
            n_predicted=int(stats.n_predicted[label.id]),
            n_actual=int(stats.n_actual[label.id]),
        )
        for label in table.classes
    )
    strict = accuracy(table, ScoringMode.STRICT)
    novel = accuracy(table, ScoringMode.NOVEL_AWARE)
    detection = error_detection_metrics(flags, table) if flags is not None else None
    return MetricsReport(
        n_samples=table.n,
        mode=mode,
        accuracy=strict if mode is ScoringMode.STRICT else novel,
        accuracy_strict=strict,
        accuracy_novel_aware=novel,
        per_class=per_class,
        error_detection=detection,
    )


@dataclass(frozen=True)
class Split:
    """A learn/test partition of one corpus; sample ids never overlap."""

    learn_table: PredictionTable
    learn_conds: ConditionMatrix
    test_table: PredictionTable
    test_conds: ConditionMatrix

    def __post_init__(self) -> None:
        overlap = set(self.learn_table.sample_ids) & set(self.test_table.sample_ids)
        if overlap:
            raise ContractError(f"learn/test splits overlap on ids {sorted(overlap)[:5]}")


def sequential_split(
    table: PredictionTable, conds: ConditionMatrix, learn_fraction: float = 0.5
) -> Split:
    """Prefix/suffix split in sample order: no shuffling, no id overlap."""
    if not 0.0 < learn_fraction < 1.0:
        raise ContractError(f"learn_fraction must lie strictly in (0, 1), got {learn_fraction}")
    cut = int(round(table.n * learn_fraction))
    if cut < 1 or cut >= table.n:
        raise ContractError(f"learn_fraction {learn_fraction} leaves an empty split for n={table.n}")
    learn_idx = list(range(cut))
    test_idx = list(range(cut, table.n))
    return Split(
        table.subset(learn_idx),
        conds.rows(learn_idx),
        table.subset(test_idx),
        conds.rows(test_idx),
    )


@dataclass(frozen=True)
class SweepRow:
    """Per-(epsilon, class, split) outcome, plus the theoretical recall
    reduction implied by that class's learned detection rule."""

    epsilon: float
    class_name: str
    split: str
    precision_before: float
    recall_before: float
    f1_before: float
    precision_after: float
    recall_after: float
    f1_after: float
    theoretical_recall_reduction: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def for_split(self, split: str) -> tuple[SweepRow, ...]:
        return tuple(row for row in self.rows if row.split == split)


def epsilon_sweep(epsilons: Sequence[float], split: Split) -> SweepResult:
    """Learn a rule set per epsilon on the learn side, apply it to both sides,
    and tabulate per-class precision/recall/F1 before and after, with the
    theoretical recall reduction computed from the learned rule stats."""
    rows: list[SweepRow] = []
    for epsilon in epsilons:
        config = LearnConfig(epsilon=epsilon)
        rule_set = det_corr_rule_learn(config, split.learn_table, split.learn_conds)
        learn_stats = compute_class_stats(split.learn_table)
        tr: dict[str, float] = {}
        for label in split.learn_table.classes:
            rule = rule_set.detection_by_class.get(label.name)
            if rule is None or learn_stats.precision[label.id] == 0.0:
                tr[label.name] = 0.0
            else:
                tr[label.name] = recall_delta_exact(
                    rule.class_support,
                    rule.confidence,
                    float(learn_stats.recall[label.id]),
                    float(learn_stats.precision[label.id]),
                )
        for split_name, tbl, cnd in (
            ("learn", split.learn_table, split.learn_conds),
            ("test", split.test_table, split.test_conds),
        ):
            before = compute_class_stats(tbl)
            revised, _ = apply_ruleset(rule_set, tbl, cnd)
            after = compute_class_stats(revised)
            for label in tbl.classes:
                i = label.id
                rows.append(
                    SweepRow(
                        epsilon=float(epsilon),
                        class_name=label.name,
                        split=split_name,
                        precision_before=float(before.precision[i]),
                        recall_before=float(before.recall[i]),
                        f1_before=f1_score(float(before.precision[i]), float(before.recall[i])),
                        precision_after=float(after.precision[i]),
                        recall_after=float(after.recall[i]),
                        f1_after=f1_score(float(after.precision[i]), float(after.recall[i])),
                        theoretical_recall_reduction=tr[label.name],
                    )
                )
    return SweepResult(tuple(rows))


@dataclass(frozen=True)
class UnseenRow:
    """One few-shot setting: the share of holdout-class samples granted to the
    rule-learning set (0 = zero-shot), and accuracies on the mixed test set."""

    fraction: float
    baseline_accuracy: float
    edcr_accuracy: float
    delta: float


@dataclass(frozen=True)
class UnseenResult:
    rows: tuple[UnseenRow, ...]

    def zero_shot(self) -> UnseenRow:
        return self.rows[0]


def unseen_class_experiment(
    table: PredictionTable,
    conds: ConditionMatrix,
    holdout: Sequence[str],
    fractions: Sequence[float] = (),
    epsilon: float = 0.1,
    learn_fraction: float = 0.5,
    correction_scope: str = "body",
) -> UnseenResult:
    """Zero/few-shot protocol for classes the base model cannot predict.

    Rules are first learned on the holdout-free part of the learn split
    (zero-shot), then re-learned with each requested fraction of the learn
    split's holdout-class samples added to the rule-learning set only; the
    base model's predictions never change.  Accuracy is NOVEL_AWARE on the
    mixed test split, so routing a holdout sample to UNKNOWN counts as
    correct.
    """
    table.require_ground_truth()
    holdout = tuple(holdout)
    if not holdout:
        raise ContractError("need at least one holdout class")
    for fraction in fractions:
        if not 0.0 <= fraction <= 1.0:
            raise ContractError(f"few-shot fraction must lie in [0, 1], got {fraction}")
    gt_names = {label.name for label in table.ground_truth}
    for name in holdout:
        if name in table.classes:
            raise ContractError(
                f"holdout class {name!r} is predictable; it must be outside the class set"
            )
        if name not in gt_names:
            raise ContractError(f"holdout class {name!r} never occurs in ground truth")

    split = sequential_split(table, conds, learn_fraction)
    learn_gt = split.learn_table.ground_truth
    seen_idx = [k for k, label in enumerate(learn_gt) if label.name not in holdout]
    held_idx = [k for k, label in enumerate(learn_gt) if label.name in holdout]

    settings = sorted({0.0, *(float(f) for f in fractions)})
    baseline = accuracy(split.test_table, ScoringMode.NOVEL_AWARE)
    rows: list[UnseenRow] = []
    for fraction in settings:
        n_shot = int(round(fraction * len(held_idx)))
        idx = sorted(seen_idx + held_idx[:n_shot])
        learn_table = split.learn_table.subset(idx)
        learn_conds = split.learn_conds.rows(idx)
        rule_set = det_corr_rule_learn(LearnConfig(epsilon=epsilon), learn_table, learn_conds)
        revised, _ = apply_ruleset(
            rule_set, split.test_table, split.test_conds, correction_scope=correction_scope
        )
        edcr = accuracy(revised, ScoringMode.NOVEL_AWARE)
        rows.append(UnseenRow(fraction, baseline, edcr, edcr - baseline))
    return UnseenResult(tuple(rows))
