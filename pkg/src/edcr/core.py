"""Immutable tabular model for predictions, boolean conditions, and confusion stats.

A :class:`PredictionTable` holds one predicted class per sample (plus optional
ground truth), a :class:`ConditionMatrix` holds boolean per-sample signals, and
the counting helpers below are the primitives every rule learner and theorem
check consumes.  All types are frozen after construction and the counting
operations are pure functions, so everything here is safe to share across
threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

#: Reserved output label for samples flagged as errors but not re-classified.
#: Never a member of a class set and never a ground-truth value.
UNKNOWN_NAME = "__unknown__"


class EdcrError(Exception):
    """Base class for every error raised by this package."""


class ContractError(EdcrError):
    """A precondition, configuration, or contract violation (CLI exit 2)."""


class UnknownConditionError(ContractError):
    """A condition name is not present in the condition matrix."""


class UnknownClassError(ContractError):
    """A class name or label is not part of the class set in use."""


class DegenerateStatsError(ContractError):
    """Statistics fall outside the domain of a closed-form quantity."""


class DataError(EdcrError):
    """Malformed input data or files (CLI exit 3)."""


class VerificationError(EdcrError):
    """An invariant or theorem check failed (CLI exit 4)."""


@dataclass(frozen=True)
class ClassLabel:
    """A class name plus its dense index within the owning class set.

    Labels outside the predictable set carry ``id == -1``: the reserved
    UNKNOWN output and any novel ground-truth classes seen only at
    evaluation time.
    """

    id: int
    name: str

    @property
    def is_unknown(self) -> bool:
        return self.name == UNKNOWN_NAME

    @property
    def in_set(self) -> bool:
        return self.id >= 0


UNKNOWN = ClassLabel(-1, UNKNOWN_NAME)


@dataclass(frozen=True)
class ClassSet:
    """Ordered universe of predictable classes; ids are dense 0..n-1 by position."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise ContractError("class set must not be empty")
        if len(set(self.names)) != len(self.names):
            raise ContractError(f"duplicate class names in {self.names}")
        if UNKNOWN_NAME in self.names:
            raise ContractError(f"{UNKNOWN_NAME!r} is reserved and cannot be a class name")

    @cached_property
    def labels(self) -> tuple[ClassLabel, ...]:
        return tuple(ClassLabel(i, name) for i, name in enumerate(self.names))

    @cached_property
    def _by_name(self) -> dict[str, ClassLabel]:
        return {label.name: label for label in self.labels}

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, item) -> bool:
        if isinstance(item, ClassLabel):
            return self._by_name.get(item.name) == item
        return item in self._by_name

    def label(self, name: str) -> ClassLabel:
        """In-set label for ``name``; raises :class:`UnknownClassError` otherwise."""
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownClassError(
                f"unknown class {name!r}; known classes: {', '.join(self.names)}"
            ) from None

    def resolve(self, name: str) -> ClassLabel:
        """Label for ``name``: in-set if declared, UNKNOWN for the reserved name,
        else an outside label (id -1) for novel ground-truth classes."""
        if name == UNKNOWN_NAME:
            return UNKNOWN
        found = self._by_name.get(name)
        return found if found is not None else ClassLabel(-1, name)


def _check_member(label: ClassLabel, classes: ClassSet, role: str) -> None:
    if label.in_set or label.name in classes:
        if classes._by_name.get(label.name) != label:
            raise ContractError(
                f"{role} label {label} is inconsistent with the class set {classes.names}"
            )


@dataclass(frozen=True)
class PredictionTable:
    """Per-sample predicted class, and optionally ground truth, over a sample set.

    Predicted labels are drawn from the class set plus UNKNOWN (UNKNOWN only
    appears in post-rule tables).  Ground-truth labels are never UNKNOWN but
    may lie outside the class set, which models evaluation corpora containing
    classes the base model cannot predict.
    """

    classes: ClassSet
    sample_ids: tuple[str, ...]
    predicted: tuple[ClassLabel, ...]
    ground_truth: tuple[ClassLabel, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "predicted", tuple(self.predicted))
        if self.ground_truth is not None:
            object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        n = len(self.sample_ids)
        if len(self.predicted) != n:
            raise ContractError(
                f"predicted has {len(self.predicted)} entries for {n} sample ids"
            )
        if self.ground_truth is not None and len(self.ground_truth) != n:
            raise ContractError(
                f"ground_truth has {len(self.ground_truth)} entries for {n} sample ids"
            )
        if len(set(self.sample_ids)) != n:
            raise ContractError("sample ids must be unique")
        for label in self.predicted:
            if not label.is_unknown and label not in self.classes:
                raise ContractError(
                    f"predicted label {label} is neither UNKNOWN nor in {self.classes.names}"
                )
        if self.ground_truth is not None:
            for label in self.ground_truth:
                if label.is_unknown:
                    raise ContractError("ground truth may never be UNKNOWN")
                _check_member(label, self.classes, "ground-truth")

    @property
    def n(self) -> int:
        return len(self.sample_ids)

    @property
    def has_ground_truth(self) -> bool:
        return self.ground_truth is not None

    def require_ground_truth(self) -> None:
        if self.ground_truth is None:
            raise ContractError("operation requires a table with ground truth")

    @cached_property
    def pred_ids(self) -> np.ndarray:
        """Predicted class ids (int64), -1 for UNKNOWN."""
        arr = np.array([label.id for label in self.predicted], dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def gt_ids(self) -> np.ndarray:
        """Ground-truth class ids (int64), -1 for classes outside the class set."""
        self.require_ground_truth()
        arr = np.array([label.id for label in self.ground_truth], dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @classmethod
    def from_names(
        cls,
        classes: ClassSet,
        sample_ids: Sequence[str],
        predicted: Sequence[str],
        ground_truth: Sequence[str] | None = None,
    ) -> "PredictionTable":
        pred = tuple(classes.resolve(name) for name in predicted)
        gt = None
        if ground_truth is not None:
            gt = tuple(classes.resolve(name) for name in ground_truth)
        return cls(classes, tuple(sample_ids), pred, gt)

    def with_predictions(self, predicted: Sequence[ClassLabel]) -> "PredictionTable":
        return PredictionTable(self.classes, self.sample_ids, tuple(predicted), self.ground_truth)

    def subset(self, indices: Sequence[int]) -> "PredictionTable":
        idx = list(indices)
        gt = None
        if self.ground_truth is not None:
            gt = tuple(self.ground_truth[i] for i in idx)
        return PredictionTable(
            self.classes,
            tuple(self.sample_ids[i] for i in idx),
            tuple(self.predicted[i] for i in idx),
            gt,
        )


@dataclass(frozen=True, eq=False)
class ConditionMatrix:
    """Named boolean condition columns, row-aligned to a prediction table."""

    condition_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "condition_names", tuple(self.condition_names))
        vals = np.array(self.values, dtype=bool)
        if vals.ndim != 2:
            raise ContractError(f"condition values must be 2-D, got shape {vals.shape}")
        if vals.shape[1] != len(self.condition_names):
            raise ContractError(
                f"{len(self.condition_names)} condition names for {vals.shape[1]} columns"
            )
        if len(set(self.condition_names)) != len(self.condition_names):
            raise ContractError(f"duplicate condition names in {self.condition_names}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_conditions(self) -> int:
        return self.values.shape[1]

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: j for j, name in enumerate(self.condition_names)}

    def column_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownConditionError(
                f"unknown condition {name!r}; known conditions: {', '.join(self.condition_names)}"
            ) from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def any_of(self, names: Iterable[str]) -> np.ndarray:
        """Row-wise disjunction of the named columns (all-False for no names)."""
        cols = [self.column_index(name) for name in names]
        if not cols:
            return np.zeros(self.n_rows, dtype=bool)
        return self.values[:, cols].any(axis=1)

    def rows(self, indices: Sequence[int]) -> "ConditionMatrix":
        return ConditionMatrix(self.condition_names, self.values[list(indices), :])


@dataclass(frozen=True, eq=False)
class ClassStats:
    """Per-class confusion counts over a table, with derived ratios.

    ``precision[i]`` is defined as 0 when the class was never predicted and
    ``recall[i]`` as 0 when the class never occurs in ground truth; learners
    skip such classes rather than divide by zero.
    """

    classes: ClassSet
    total: int
    tp: np.ndarray
    fp: np.ndarray
    tn: np.ndarray
    fn: np.ndarray

    def __post_init__(self) -> None:
        for field_name in ("tp", "fp", "tn", "fn"):
            arr = np.array(getattr(self, field_name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, field_name, arr)

    @cached_property
    def n_predicted(self) -> np.ndarray:
        arr = self.tp + self.fp
        arr.setflags(write=False)
        return arr

    @cached_property
    def n_actual(self) -> np.ndarray:
        arr = self.tp + self.fn
        arr.setflags(write=False)
        return arr

    @cached_property
    def precision(self) -> np.ndarray:
        out = np.zeros(len(self.classes), dtype=float)
        np.divide(self.tp, self.n_predicted, out=out, where=self.n_predicted > 0)
        out.setflags(write=False)
        return out

    @cached_property
    def recall(self) -> np.ndarray:
        out = np.zeros(len(self.classes), dtype=float)
        np.divide(self.tp, self.n_actual, out=out, where=self.n_actual > 0)
        out.setflags(write=False)
        return out

    @cached_property
    def prior(self) -> np.ndarray:
        """Fraction of all samples predicted as each class."""
        out = np.zeros(len(self.classes), dtype=float)
        if self.total > 0:
            out = self.n_predicted / self.total
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class DetectionCounts:
    """Counts for a detection-rule body over a table: body&head, body&not-head,
    body, class support s_i = bod/N_i, and confidence c = pos/bod."""

    pos: int
    neg: int
    bod: int
    class_support: float
    confidence: float


@dataclass(frozen=True)
class CorrectionCounts:
    """Counts for a correction-rule body: body&head, body, support s = bod/N,
    and confidence c = pos/bod."""

    pos: int
    bod: int
    support: float
    confidence: float


def _resolve_target(classes: ClassSet, class_i) -> ClassLabel:
    if isinstance(class_i, ClassLabel):
        if class_i not in classes:
            raise UnknownClassError(f"label {class_i} is not in the class set {classes.names}")
        return class_i
    return classes.label(class_i)


def _require_aligned(table: PredictionTable, conds: ConditionMatrix) -> None:
    if conds.n_rows != table.n:
        raise ContractError(
            f"condition matrix has {conds.n_rows} rows for a table of {table.n} samples"
        )


def compute_class_stats(table: PredictionTable) -> ClassStats:
    """Confusion counts per declared class.

    UNKNOWN predictions count as not-class-i for every class (they land in
    TN or FN), and ground-truth classes outside the class set count as
    gt != i for every i, so post-rule and novel-class tables score with the
    same code path.
    """
    table.require_ground_truth()
    pred = table.pred_ids
    gt = table.gt_ids
    n = table.n
    n_classes = len(table.classes)
    tp = np.zeros(n_classes, dtype=np.int64)
    fp = np.zeros(n_classes, dtype=np.int64)
    fn = np.zeros(n_classes, dtype=np.int64)
    for i in range(n_classes):
        pred_i = pred == i
        gt_i = gt == i
        tp[i] = np.count_nonzero(pred_i & gt_i)
        fp[i] = np.count_nonzero(pred_i & ~gt_i)
        fn[i] = np.count_nonzero(~pred_i & gt_i)
    tn = n - tp - fp - fn
    return ClassStats(table.classes, n, tp, fp, tn, fn)


def detection_counts(
    table: PredictionTable,
    conds: ConditionMatrix,
    class_i,
    dc: Iterable[str],
) -> DetectionCounts:
    """Evaluate a detection body ``pred_i AND any(dc)`` row by row.

    Support and confidence are both defined as zero for an empty condition
    set, and the disjunction is a set union over rows: a row satisfying
    several conditions counts once.
    """
    table.require_ground_truth()
    _require_aligned(table, conds)
    target = _resolve_target(table.classes, class_i)
    names = sorted(set(dc))
    pred_i = table.pred_ids == target.id
    n_i = int(np.count_nonzero(pred_i))
    if not names:
        return DetectionCounts(0, 0, 0, 0.0, 0.0)
    body = pred_i & conds.any_of(names)
    bod = int(np.count_nonzero(body))
    pos = int(np.count_nonzero(body & (table.gt_ids != target.id)))
    neg = bod - pos
    class_support = bod / n_i if n_i > 0 else 0.0
    confidence = pos / bod if bod > 0 else 0.0
    return DetectionCounts(pos, neg, bod, class_support, confidence)


def correction_counts(
    table: PredictionTable,
    conds: ConditionMatrix,
    class_i,
    cc: Iterable[tuple[str, object]],
) -> CorrectionCounts:
    """Evaluate a correction body ``OR over (q, r) of cond_q AND pred_r``.

    The head holds on a row when its ground truth equals the target class.
    Support is measured over the whole table; empty pair sets yield all
    zeros, matching the empty-body convention.
    """
    table.require_ground_truth()
    _require_aligned(table, conds)
    target = _resolve_target(table.classes, class_i)
    pairs = list(cc)
    if not pairs:
        return CorrectionCounts(0, 0, 0.0, 0.0)
    body = np.zeros(table.n, dtype=bool)
    for cond_name, pair_class in pairs:
        pair_label = _resolve_target(table.classes, pair_class)
        body |= conds.column(cond_name) & (table.pred_ids == pair_label.id)
    bod = int(np.count_nonzero(body))
    pos = int(np.count_nonzero(body & (table.gt_ids == target.id)))
    support = bod / table.n if table.n > 0 else 0.0
    confidence = pos / bod if bod > 0 else 0.0
    return CorrectionCounts(pos, bod, support, confidence)
