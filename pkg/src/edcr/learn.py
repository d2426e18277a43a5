"""Rule learning: greedy detection under a recall budget, double-greedy
correction, and their composition into a full rule set.

Detection learning for class i repeatedly adds the condition with the largest
body&head count POS among candidates whose body&not-head count NEG stays
within the budget eps * N_i * P_i / R_i; keeping NEG within that budget caps
the empirical recall reduction at eps exactly.  Correction learning walks
candidate (condition, class) pairs sorted by their singleton confidence,
keeping a pair when adding it to the growing set raises confidence at least
as much as dropping it from the shrinking set would, and returns nothing
unless the final confidence strictly beats the class's baseline precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import (
    ClassLabel,
    ClassStats,
    ConditionMatrix,
    ContractError,
    PredictionTable,
    _require_aligned,
    _resolve_target,
    compute_class_stats,
    correction_counts,
    detection_counts,
)
from .rules import CorrectionRule, DetectionRule, RuleSet

Pair = tuple[str, ClassLabel]


@dataclass(frozen=True)
class LearnConfig:
    """Learning-time settings.

    ``epsilon`` is the per-class cap on recall reduction, either one scalar
    broadcast to every class or a mapping keyed by class name.  ``conditions``
    optionally restricts the candidate universe to a subset of the condition
    matrix columns; the class universe always comes from the table.
    """

    epsilon: float | Mapping[str, float] = 0.1
    conditions: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        values = (
            [self.epsilon] if isinstance(self.epsilon, (int, float)) else list(self.epsilon.values())
        )
        for value in values:
            if not 0.0 <= float(value) <= 1.0:
                raise ContractError(f"epsilon must lie in [0, 1], got {value}")
        if self.conditions is not None:
            object.__setattr__(self, "conditions", tuple(self.conditions))

    def epsilon_for(self, class_name: str) -> float:
        if isinstance(self.epsilon, (int, float)):
            return float(self.epsilon)
        try:
            return float(self.epsilon[class_name])
        except KeyError:
            raise ContractError(f"no epsilon configured for class {class_name!r}") from None


def recall_budget(stats: ClassStats, class_id: int, epsilon: float) -> float:
    """Maximum NEG allowed for class ``class_id`` under recall cap ``epsilon``.

    Equals eps * N_i * P_i / R_i; evaluated as eps * (TP_i + FN_i), the exact
    integer form of the same quantity, to avoid float drift at the boundary.
    """
    return epsilon * (int(stats.tp[class_id]) + int(stats.fn[class_id]))


def det_rule_learn(
    class_i,
    epsilon: float,
    table: PredictionTable,
    conds: ConditionMatrix,
    stats: ClassStats | None = None,
    candidates: Sequence[str] | None = None,
) -> tuple[str, ...]:
    """Greedy detection-condition selection for one class.

    Returns the selected condition names (possibly empty).  Classes never
    predicted or with zero recall are skipped: their budget is undefined.
    Argmax ties go to the lexicographically smallest condition name.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ContractError(f"epsilon must lie in [0, 1], got {epsilon}")
    table.require_ground_truth()
    _require_aligned(table, conds)
    target = _resolve_target(table.classes, class_i)
    if stats is None:
        stats = compute_class_stats(table)
    i = target.id
    if stats.n_predicted[i] == 0 or stats.recall[i] == 0.0:
        return ()
    budget = recall_budget(stats, i, epsilon)
    pool = sorted(set(candidates) if candidates is not None else conds.condition_names)
    for name in pool:
        conds.column_index(name)

    chosen: list[str] = []
    while True:
        best_name = None
        best_pos = -1
        for cand in pool:
            if cand in chosen:
                continue
            counts = detection_counts(table, conds, target, chosen + [cand])
            if counts.neg <= budget and counts.pos > best_pos:
                best_pos = counts.pos
                best_name = cand
        if best_name is None:
            break
        chosen.append(best_name)
    return tuple(sorted(chosen))


def corr_rule_learn(
    class_i,
    cc_all: Iterable[Pair],
    table: PredictionTable,
    conds: ConditionMatrix,
    stats: ClassStats | None = None,
) -> tuple[Pair, ...]:
    """Double-greedy correction-pair selection for one class.

    Candidate pairs whose singleton confidence does not beat the class's
    baseline precision are dropped up front; the survivors are walked from
    highest to lowest singleton confidence (ties by condition name then class
    id), comparing the marginal confidence gain of adding against that of
    removing.  The result is discarded entirely unless its confidence strictly
    exceeds the baseline precision.
    """
    table.require_ground_truth()
    _require_aligned(table, conds)
    target = _resolve_target(table.classes, class_i)
    if stats is None:
        stats = compute_class_stats(table)
    p_i = float(stats.precision[target.id])

    pairs: list[Pair] = []
    seen: set[Pair] = set()
    for cond_name, pair_class in cc_all:
        pair = (cond_name, _resolve_target(table.classes, pair_class))
        conds.column_index(cond_name)
        if pair not in seen:
            seen.add(pair)
            pairs.append(pair)
    if not pairs:
        return ()

    def confidence(subset: Sequence[Pair]) -> float:
        if not subset:
            return 0.0
        return correction_counts(table, conds, target, subset).confidence

    singleton = {pair: confidence([pair]) for pair in pairs}
    filtered = [pair for pair in pairs if singleton[pair] > p_i]
    order = sorted(filtered, key=lambda pair: (-singleton[pair], pair[0], pair[1].id))

    kept: list[Pair] = []
    remaining: list[Pair] = list(order)
    for pair in order:
        gain_add = confidence(kept + [pair]) - confidence(kept)
        without = [p for p in remaining if p != pair]
        gain_drop = confidence(without) - confidence(remaining)
        if gain_add >= gain_drop:
            kept.append(pair)
        else:
            remaining = without

    if confidence(kept) <= p_i:
        return ()
    return tuple(sorted(kept, key=lambda pair: (pair[0], pair[1].id)))


def det_corr_rule_learn(
    config: LearnConfig,
    table: PredictionTable,
    conds: ConditionMatrix,
) -> RuleSet:
    """Learn detection rules for every class, then correction rules over the
    pairs (condition, class) contributed by the selected detection conditions.

    Emits at most one rule of each kind per class; recorded stats are measured
    on the learning table so downstream application needs no ground truth.
    """
    table.require_ground_truth()
    _require_aligned(table, conds)
    stats = compute_class_stats(table)
    universe = (
        tuple(config.conditions) if config.conditions is not None else tuple(conds.condition_names)
    )
    for name in universe:
        conds.column_index(name)

    detection: list[DetectionRule] = []
    cc_all: list[Pair] = []
    for label in table.classes:
        dc = det_rule_learn(
            label, config.epsilon_for(label.name), table, conds, stats=stats, candidates=universe
        )
        if dc:
            counts = detection_counts(table, conds, label, dc)
            detection.append(DetectionRule(label, dc, counts.class_support, counts.confidence))
            cc_all.extend((cond, label) for cond in dc)

    correction: list[CorrectionRule] = []
    for label in table.classes:
        cc = corr_rule_learn(label, cc_all, table, conds, stats=stats)
        if cc:
            counts = correction_counts(table, conds, label, cc)
            correction.append(CorrectionRule(label, cc, counts.support, counts.confidence))

    epsilon: float | dict[str, float]
    if isinstance(config.epsilon, (int, float)):
        epsilon = float(config.epsilon)
    else:
        epsilon = {name: float(value) for name, value in config.epsilon.items()}
    return RuleSet(
        classes=table.classes,
        condition_names=universe,
        epsilon=epsilon,
        detection_rules=tuple(detection),
        correction_rules=tuple(correction),
    )
