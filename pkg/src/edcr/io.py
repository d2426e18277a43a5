"""File formats and persistence: predictions/conditions/trajectories CSV,
YAML rule sets, result tables, and run manifests.

All writers are atomic (temp file + rename in the target directory) so a
failed run never leaves a partial artifact, and all output is deterministic
given the same inputs.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .core import (
    UNKNOWN_NAME,
    ClassSet,
    ConditionMatrix,
    ContractError,
    DataError,
    PredictionTable,
)
from .conditions import TrajectoryRecord
from .evaluate import MetricsReport, SweepResult, UnseenResult
from .rules import CorrectionRule, DetectionRule, RuleSet, SampleTrace
from .theory import TheoremReport

RULESET_FORMAT_VERSION = 1


def atomic_write_text(path: Path | str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def sha256_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parse_error(path, line_no: int, message: str) -> DataError:
    return DataError(f"{path}:{line_no}: {message}")


# ---------------------------------------------------------------------------
# Predictions: sample_id,pred[,gt]
# ---------------------------------------------------------------------------


def read_predictions(path, classes: ClassSet | None = None) -> PredictionTable:
    """Read a predictions CSV (header ``sample_id,pred`` or
    ``sample_id,pred,gt``).  Without an explicit class set, the classes are
    the sorted distinct predicted names (UNKNOWN excluded)."""
    path = Path(path)
    ids: list[str] = []
    preds: list[str] = []
    gts: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise _parse_error(path, 1, "empty file") from None
        if header[:2] != ["sample_id", "pred"] or len(header) > 3 or (
            len(header) == 3 and header[2] != "gt"
        ):
            raise _parse_error(path, 1, f"expected header sample_id,pred[,gt]; got {','.join(header)}")
        has_gt = len(header) == 3
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise _parse_error(path, line_no, f"expected {len(header)} fields, got {len(row)}")
            if not row[0]:
                raise _parse_error(path, line_no, "empty sample id")
            ids.append(row[0])
            preds.append(row[1])
            if has_gt:
                if not row[2]:
                    raise _parse_error(path, line_no, "empty ground-truth value")
                gts.append(row[2])
    if len(set(ids)) != len(ids):
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        raise DataError(f"{path}: duplicate sample ids: {dupes[:5]}")
    if classes is None:
        names = sorted({p for p in preds if p != UNKNOWN_NAME})
        if not names:
            raise DataError(f"{path}: no predictable classes found in pred column")
        classes = ClassSet(tuple(names))
    else:
        bad = sorted({p for p in preds if p != UNKNOWN_NAME and p not in classes})
        if bad:
            raise ContractError(
                f"{path}: predicted classes {bad} are not in the declared class set {classes.names}"
            )
    return PredictionTable.from_names(classes, ids, preds, gts if gts else None)


def write_predictions(path, table: PredictionTable) -> None:
    lines = ["sample_id,pred,gt" if table.has_ground_truth else "sample_id,pred"]
    for k in range(table.n):
        row = [table.sample_ids[k], table.predicted[k].name]
        if table.has_ground_truth:
            row.append(table.ground_truth[k].name)
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Conditions: sample_id,<cond1>,<cond2>,... with 0/1 values
# ---------------------------------------------------------------------------


def read_conditions(path, table: PredictionTable) -> ConditionMatrix:
    """Read a conditions CSV and align rows to the table's sample order.

    Every table sample must appear exactly once; unknown or duplicated ids and
    non-0/1 values are data errors naming the offending line."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise _parse_error(path, 1, "empty file") from None
        if not header or header[0] != "sample_id" or len(header) < 2:
            raise _parse_error(path, 1, "expected header sample_id,<condition>,...")
        names = tuple(header[1:])
        by_id: dict[str, list[bool]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise _parse_error(path, line_no, f"expected {len(header)} fields, got {len(row)}")
            sample_id = row[0]
            if sample_id in by_id:
                raise _parse_error(path, line_no, f"duplicate sample id {sample_id!r}")
            values = []
            for name, text in zip(names, row[1:]):
                if text not in ("0", "1"):
                    raise _parse_error(path, line_no, f"condition {name!r} must be 0 or 1, got {text!r}")
                values.append(text == "1")
            by_id[sample_id] = values
    known = set(table.sample_ids)
    extra = sorted(set(by_id) - known)
    if extra:
        raise DataError(f"{path}: sample id {extra[0]!r} is absent from the prediction table")
    missing = [s for s in table.sample_ids if s not in by_id]
    if missing:
        raise DataError(f"{path}: no condition row for sample id {missing[0]!r}")
    matrix = np.array([by_id[s] for s in table.sample_ids], dtype=bool)
    return ConditionMatrix(names, matrix)


def write_conditions(path, table: PredictionTable, conds: ConditionMatrix) -> None:
    if conds.n_rows != table.n:
        raise ContractError("condition matrix and table row counts differ")
    lines = ["sample_id," + ",".join(conds.condition_names)]
    for k in range(table.n):
        bits = ",".join("1" if v else "0" for v in conds.values[k])
        lines.append(f"{table.sample_ids[k]},{bits}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Trajectories: sample_id,idx,t,lat,lon
# ---------------------------------------------------------------------------


def read_trajectories(path) -> tuple[TrajectoryRecord, ...]:
    """Read a trajectory CSV; points of one sample must be contiguous with
    idx counting up from 0."""
    path = Path(path)
    records: list[TrajectoryRecord] = []
    current_id: str | None = None
    points: list[tuple[float, float, float]] = []
    seen: set[str] = set()

    def flush(line_no: int) -> None:
        nonlocal points, current_id
        if current_id is None:
            return
        try:
            records.append(TrajectoryRecord(current_id, tuple(points)))
        except DataError as err:
            raise _parse_error(path, line_no, str(err)) from None
        points = []

    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise _parse_error(path, 1, "empty file") from None
        if header != ["sample_id", "idx", "t", "lat", "lon"]:
            raise _parse_error(path, 1, f"expected header sample_id,idx,t,lat,lon; got {','.join(header)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise _parse_error(path, line_no, f"expected 5 fields, got {len(row)}")
            sample_id = row[0]
            try:
                idx = int(row[1])
                t, lat, lon = float(row[2]), float(row[3]), float(row[4])
            except ValueError as err:
                raise _parse_error(path, line_no, str(err)) from None
            if sample_id != current_id:
                flush(line_no)
                if sample_id in seen:
                    raise _parse_error(path, line_no, f"sample {sample_id!r} rows are not contiguous")
                seen.add(sample_id)
                current_id = sample_id
                if idx != 0:
                    raise _parse_error(path, line_no, f"first point of {sample_id!r} must have idx 0")
            elif idx != len(points):
                raise _parse_error(path, line_no, f"expected idx {len(points)} for {sample_id!r}, got {idx}")
            points.append((t, lat, lon))
        flush(-1)
    return tuple(records)


def write_trajectories(path, records: Sequence[TrajectoryRecord]) -> None:
    lines = ["sample_id,idx,t,lat,lon"]
    for record in records:
        for idx, (t, lat, lon) in enumerate(record.points):
            lines.append(f"{record.sample_id},{idx},{t!r},{lat!r},{lon!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Rule sets (YAML)
# ---------------------------------------------------------------------------


def ruleset_to_dict(rule_set: RuleSet) -> dict:
    return {
        "format_version": RULESET_FORMAT_VERSION,
        "classes": list(rule_set.classes.names),
        "conditions": list(rule_set.condition_names),
        "epsilon": rule_set.epsilon,
        "detection_rules": [
            {
                "class": rule.target.name,
                "conditions": list(rule.conditions),
                "class_support": rule.class_support,
                "confidence": rule.confidence,
            }
            for rule in rule_set.detection_rules
        ],
        "correction_rules": [
            {
                "class": rule.target.name,
                "pairs": [[cond, cls.name] for cond, cls in rule.pairs],
                "support": rule.support,
                "confidence": rule.confidence,
            }
            for rule in rule_set.correction_rules
        ],
    }


def ruleset_from_dict(data: Mapping) -> RuleSet:
    try:
        version = data["format_version"]
        if version != RULESET_FORMAT_VERSION:
            raise DataError(f"unsupported ruleset format version {version}")
        classes = ClassSet(tuple(data["classes"]))
        epsilon = data["epsilon"]
        detection = tuple(
            DetectionRule(
                target=classes.label(entry["class"]),
                conditions=tuple(entry["conditions"]),
                class_support=float(entry["class_support"]),
                confidence=float(entry["confidence"]),
            )
            for entry in data.get("detection_rules", [])
        )
        correction = tuple(
            CorrectionRule(
                target=classes.label(entry["class"]),
                pairs=tuple((cond, classes.label(cls)) for cond, cls in entry["pairs"]),
                support=float(entry["support"]),
                confidence=float(entry["confidence"]),
            )
            for entry in data.get("correction_rules", [])
        )
        return RuleSet(
            classes=classes,
            condition_names=tuple(data["conditions"]),
            epsilon=float(epsilon) if isinstance(epsilon, (int, float)) else dict(epsilon),
            detection_rules=detection,
            correction_rules=correction,
        )
    except (KeyError, TypeError, ValueError) as err:
        raise DataError(f"malformed ruleset document: {err}") from None


def save_ruleset(path, rule_set: RuleSet) -> None:
    text = yaml.safe_dump(ruleset_to_dict(rule_set), sort_keys=False, default_flow_style=False)
    atomic_write_text(path, text)


def load_ruleset(path) -> RuleSet:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as err:
        raise DataError(f"{path}: invalid YAML: {err}") from None
    if not isinstance(data, dict):
        raise DataError(f"{path}: ruleset document must be a mapping")
    return ruleset_from_dict(data)


# ---------------------------------------------------------------------------
# Traces and result tables
# ---------------------------------------------------------------------------


def write_trace(path, trace: Sequence[SampleTrace]) -> None:
    lines = ["sample_id,original,flagged,fired,final"]
    for entry in trace:
        fired = ";".join(entry.fired)
        lines.append(
            f"{entry.sample_id},{entry.original},{1 if entry.flagged else 0},{fired},{entry.final}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trace(path) -> tuple[SampleTrace, ...]:
    path = Path(path)
    out: list[SampleTrace] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["sample_id", "original", "flagged", "fired", "final"]:
            raise _parse_error(path, 1, "expected header sample_id,original,flagged,fired,final")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5 or row[2] not in ("0", "1"):
                raise _parse_error(path, line_no, "malformed trace row")
            fired = tuple(part for part in row[3].split(";") if part)
            out.append(SampleTrace(row[0], row[1], row[2] == "1", fired, row[4]))
    return tuple(out)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_metrics(path, report: MetricsReport) -> None:
    rows: list[tuple] = [
        ("n_samples", "", report.n_samples),
        ("scoring_mode", "", report.mode.value),
        ("accuracy", "", report.accuracy),
        ("accuracy_strict", "", report.accuracy_strict),
        ("accuracy_novel_aware", "", report.accuracy_novel_aware),
    ]
    for entry in report.per_class:
        rows.append(("precision", entry.class_name, entry.precision))
        rows.append(("recall", entry.class_name, entry.recall))
        rows.append(("f1", entry.class_name, entry.f1))
        rows.append(("n_predicted", entry.class_name, entry.n_predicted))
        rows.append(("n_actual", entry.class_name, entry.n_actual))
    if report.error_detection is not None:
        rows.append(("error_precision", "", report.error_detection.precision))
        rows.append(("error_recall", "", report.error_detection.recall))
        rows.append(("error_f1", "", report.error_detection.f1))
    write_csv_rows(path, ("metric", "class", "value"), rows)


def write_sweep(path, result: SweepResult) -> None:
    write_csv_rows(
        path,
        (
            "epsilon",
            "class",
            "split",
            "precision_before",
            "recall_before",
            "f1_before",
            "precision_after",
            "recall_after",
            "f1_after",
            "theoretical_recall_reduction",
        ),
        (
            (
                row.epsilon,
                row.class_name,
                row.split,
                row.precision_before,
                row.recall_before,
                row.f1_before,
                row.precision_after,
                row.recall_after,
                row.f1_after,
                row.theoretical_recall_reduction,
            )
            for row in result.rows
        ),
    )


def write_unseen(path, result: UnseenResult) -> None:
    write_csv_rows(
        path,
        ("fraction", "baseline_accuracy", "edcr_accuracy", "delta"),
        ((row.fraction, row.baseline_accuracy, row.edcr_accuracy, row.delta) for row in result.rows),
    )


def write_theorem_reports(path, reports: Sequence[TheoremReport]) -> None:
    write_csv_rows(
        path,
        (
            "class",
            "class_support",
            "confidence",
            "precision_initial",
            "recall_initial",
            "predicted_delta_precision",
            "bound_c_times_support",
            "predicted_delta_recall",
            "empirical_delta_precision",
            "empirical_delta_recall",
            "tolerance",
            "passed",
            "note",
        ),
        (
            (
                r.class_name,
                r.class_support,
                r.confidence,
                r.precision_initial,
                r.recall_initial,
                r.predicted_delta_precision,
                r.bound_c_times_support,
                r.predicted_delta_recall,
                r.empirical_delta_precision,
                r.empirical_delta_recall,
                r.tolerance,
                int(r.passed),
                r.note,
            )
            for r in reports
        ),
    )


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record written once per output directory."""

    command: str
    version: str
    timestamp: str
    seed: int | None
    config: dict
    inputs: dict[str, str]
    outputs: dict[str, str]


def write_manifest(
    out_dir,
    command: str,
    config: Mapping,
    input_paths: Sequence[Path | str] = (),
    output_paths: Sequence[Path | str] = (),
    seed: int | None = None,
) -> Path:
    from . import __version__

    out_dir = Path(out_dir)
    manifest = RunManifest(
        command=command,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        seed=seed,
        config=dict(config),
        inputs={Path(p).name: sha256_file(p) for p in input_paths},
        outputs={Path(p).name: sha256_file(p) for p in output_paths},
    )
    path = out_dir / "manifest.json"
    atomic_write_text(path, json.dumps(manifest.__dict__, indent=2, sort_keys=True) + "\n")
    return path
