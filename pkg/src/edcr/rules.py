"""Detection and correction rules, and their two-phase application to a table.

Phase 1 (detection) flags every sample whose current prediction is the rule's
target class and that satisfies at least one of its conditions.  Phase 2
(correction) re-labels every sample matching a correction body, where bodies
are evaluated against the ORIGINAL predictions so that application order
cannot matter.  A sample that is flagged and never corrected is routed to the
reserved UNKNOWN label; anything matching no body is left untouched.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import (
    UNKNOWN,
    ClassLabel,
    ClassSet,
    ConditionMatrix,
    ContractError,
    PredictionTable,
    _require_aligned,
)

#: Correction applies wherever its body matches (default), or only to samples
#: already flagged by a detection rule.
CORRECTION_SCOPES = ("body", "flagged")


@dataclass(frozen=True)
class DetectionRule:
    """``error <- pred_target AND any(conditions)``: routes matches to UNKNOWN
    unless a correction re-claims them.  Stats are the class support s_i and
    confidence c recorded on the learning table."""

    target: ClassLabel
    conditions: tuple[str, ...]
    class_support: float
    confidence: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "conditions", tuple(sorted(set(self.conditions))))
        if not self.conditions:
            raise ContractError("a detection rule needs at least one condition")
        if not self.target.in_set:
            raise ContractError(f"detection target must be a declared class, got {self.target}")


@dataclass(frozen=True)
class CorrectionRule:
    """``corr_target <- OR over (cond, cls) of cond AND pred_cls``: re-labels
    matches to the target class.  Stats are support s and confidence c on the
    learning table."""

    target: ClassLabel
    pairs: tuple[tuple[str, ClassLabel], ...]
    support: float
    confidence: float

    def __post_init__(self) -> None:
        canon = tuple(sorted(set(self.pairs), key=lambda p: (p[0], p[1].id)))
        object.__setattr__(self, "pairs", canon)
        if not self.pairs:
            raise ContractError("a correction rule needs at least one (condition, class) pair")
        if not self.target.in_set:
            raise ContractError(f"correction target must be a declared class, got {self.target}")
        for _, pair_class in self.pairs:
            if not pair_class.in_set:
                raise ContractError(f"correction pair references non-class label {pair_class}")

    @property
    def condition_names(self) -> tuple[str, ...]:
        return tuple(sorted({cond for cond, _ in self.pairs}))


@dataclass(frozen=True)
class RuleSet:
    """All learned rules for one class universe: at most one detection and one
    correction rule per class, plus the recall budget and condition universe
    they were learned under."""

    classes: ClassSet
    condition_names: tuple[str, ...]
    epsilon: float | dict[str, float]
    detection_rules: tuple[DetectionRule, ...] = ()
    correction_rules: tuple[CorrectionRule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "condition_names", tuple(self.condition_names))
        object.__setattr__(self, "detection_rules", tuple(self.detection_rules))
        object.__setattr__(self, "correction_rules", tuple(self.correction_rules))
        universe = set(self.condition_names)
        for kind, rules in (("detection", self.detection_rules), ("correction", self.correction_rules)):
            targets = [rule.target.name for rule in rules]
            if len(set(targets)) != len(targets):
                raise ContractError(f"more than one {kind} rule for a class: {targets}")
        for rule in self.detection_rules:
            self._check_target(rule.target)
            missing = set(rule.conditions) - universe
            if missing:
                raise ContractError(f"detection rule uses undeclared conditions {sorted(missing)}")
        for rule in self.correction_rules:
            self._check_target(rule.target)
            for cond, pair_class in rule.pairs:
                if cond not in universe:
                    raise ContractError(f"correction rule uses undeclared condition {cond!r}")
                self._check_target(pair_class)

    def _check_target(self, label: ClassLabel) -> None:
        if label not in self.classes:
            raise ContractError(f"rule references {label}, not in class set {self.classes.names}")

    @cached_property
    def detection_by_class(self) -> dict[str, DetectionRule]:
        return {rule.target.name: rule for rule in self.detection_rules}

    @cached_property
    def correction_by_class(self) -> dict[str, CorrectionRule]:
        return {rule.target.name: rule for rule in self.correction_rules}

    @property
    def is_empty(self) -> bool:
        return not self.detection_rules and not self.correction_rules

    def referenced_conditions(self) -> tuple[str, ...]:
        names: set[str] = set()
        for rule in self.detection_rules:
            names.update(rule.conditions)
        for rule in self.correction_rules:
            names.update(rule.condition_names)
        return tuple(sorted(names))


@dataclass(frozen=True)
class SampleTrace:
    """Per-sample application record: detection verdict, the correction rules
    whose body matched (in priority order, winner first), and the final label."""

    sample_id: str
    original: str
    flagged: bool
    fired: tuple[str, ...]
    final: str


def _validate_application(rules: RuleSet, table: PredictionTable, conds: ConditionMatrix) -> None:
    _require_aligned(table, conds)
    if rules.classes != table.classes:
        raise ContractError(
            f"ruleset classes {rules.classes.names} do not match table classes {table.classes.names}"
        )
    missing = set(rules.referenced_conditions()) - set(conds.condition_names)
    if missing:
        raise ContractError(f"condition matrix is missing rule conditions {sorted(missing)}")


def _detection_flags(rules: RuleSet, table: PredictionTable, conds: ConditionMatrix) -> np.ndarray:
    flags = np.zeros(table.n, dtype=bool)
    for rule in rules.detection_rules:
        flags |= (table.pred_ids == rule.target.id) & conds.any_of(rule.conditions)
    return flags


def error_predictions(
    rules: RuleSet, table: PredictionTable, conds: ConditionMatrix
) -> np.ndarray:
    """Phase-1 detection verdicts only, independent of any correction rules."""
    _validate_application(rules, table, conds)
    return _detection_flags(rules, table, conds)


def apply_ruleset(
    rules: RuleSet,
    table: PredictionTable,
    conds: ConditionMatrix,
    correction_scope: str = "body",
) -> tuple[PredictionTable, tuple[SampleTrace, ...]]:
    """Apply a rule set and return the revised table plus a per-sample trace.

    Ground truth is not required: application is pure inference.  When several
    correction rules fire on one sample the rule with the highest recorded
    confidence wins, ties broken by lowest target class id.  With
    ``correction_scope="flagged"`` corrections only apply to samples flagged
    in phase 1; the default ``"body"`` scope corrects any body match.
    """
    if correction_scope not in CORRECTION_SCOPES:
        raise ContractError(
            f"correction_scope must be one of {CORRECTION_SCOPES}, got {correction_scope!r}"
        )
    _validate_application(rules, table, conds)

    flags = _detection_flags(rules, table, conds)

    ordered = sorted(rules.correction_rules, key=lambda r: (-r.confidence, r.target.id))
    bodies: list[tuple[CorrectionRule, np.ndarray]] = []
    for rule in ordered:
        body = np.zeros(table.n, dtype=bool)
        for cond, pair_class in rule.pairs:
            body |= conds.column(cond) & (table.pred_ids == pair_class.id)
        if correction_scope == "flagged":
            body &= flags
        bodies.append((rule, body))

    corrected_to = np.full(table.n, -1, dtype=np.int64)
    has_correction = np.zeros(table.n, dtype=bool)
    fired: list[list[str]] = [[] for _ in range(table.n)]
    for rule, body in bodies:
        for idx in np.nonzero(body)[0]:
            fired[idx].append(rule.target.name)
        newly = body & ~has_correction
        corrected_to[newly] = rule.target.id
        has_correction |= newly

    labels_by_id = {label.id: label for label in table.classes}
    revised: list[ClassLabel] = []
    for idx in range(table.n):
        if has_correction[idx]:
            revised.append(labels_by_id[int(corrected_to[idx])])
        elif flags[idx]:
            revised.append(UNKNOWN)
        else:
            revised.append(table.predicted[idx])

    trace = tuple(
        SampleTrace(
            sample_id=table.sample_ids[idx],
            original=table.predicted[idx].name,
            flagged=bool(flags[idx]),
            fired=tuple(fired[idx]),
            final=revised[idx].name,
        )
        for idx in range(table.n)
    )
    return table.with_predictions(revised), trace
