"""Shared fixtures for randomized instances and independent counting oracles.

The oracle functions re-evaluate rule bodies row by row with plain Python so
the vectorized production counting has something independent to agree with.
"""
from __future__ import annotations

import numpy as np

from edcr import ClassSet, ConditionMatrix, PredictionTable


def make_table(class_names, pred, gt=None, ids=None):
    classes = ClassSet(tuple(class_names))
    ids = ids or [f"s{i}" for i in range(len(pred))]
    return PredictionTable.from_names(classes, ids, pred, gt)


def make_conds(names, columns):
    return ConditionMatrix(tuple(names), np.array(columns, dtype=bool).T)


def random_instance(rng, n_max=500, max_classes=4, max_conditions=8, noise_range=(0.1, 0.4)):
    """A random labeled table plus conditions with error-correlated columns."""
    n = int(rng.integers(20, n_max + 1))
    k = int(rng.integers(2, max_classes + 1))
    m = int(rng.integers(1, max_conditions + 1))
    names = [f"k{j}" for j in range(k)]
    gt = rng.integers(0, k, size=n)
    noise = float(rng.uniform(*noise_range))
    pred = gt.copy()
    flips = rng.random(n) < noise
    pred[flips] = (gt[flips] + rng.integers(1, k, size=int(flips.sum()))) % k
    error = pred != gt

    cols = np.zeros((n, m), dtype=bool)
    for j in range(m):
        hit = float(rng.uniform(0.3, 0.9))
        miss = float(rng.uniform(0.0, 0.25))
        cols[:, j] = np.where(error, rng.random(n) < hit, rng.random(n) < miss)
    classes = ClassSet(tuple(names))
    table = PredictionTable.from_names(
        classes,
        [f"s{i:05d}" for i in range(n)],
        [names[i] for i in pred],
        [names[i] for i in gt],
    )
    conds = ConditionMatrix(tuple(f"c{j}" for j in range(m)), cols)
    return table, conds


def oracle_detection_counts(table, conds, class_name, dc):
    """Row-by-row re-evaluation of the detection body and head."""
    dc = set(dc)
    pos = neg = bod = 0
    n_i = 0
    for row in range(table.n):
        pred = table.predicted[row].name
        if pred == class_name:
            n_i += 1
        body = pred == class_name and any(
            bool(conds.values[row][conds.condition_names.index(c)]) for c in dc
        )
        if body:
            bod += 1
            if table.ground_truth[row].name != class_name:
                pos += 1
            else:
                neg += 1
    s_i = bod / n_i if n_i and dc else 0.0
    c = pos / bod if bod else 0.0
    if not dc:
        pos = neg = bod = 0
        s_i = c = 0.0
    return pos, neg, bod, s_i, c


def oracle_correction_counts(table, conds, class_name, pairs):
    """Row-by-row re-evaluation of the correction body and head."""
    pairs = list(pairs)
    pos = bod = 0
    for row in range(table.n):
        body = any(
            bool(conds.values[row][conds.condition_names.index(cond)])
            and table.predicted[row].name == cls
            for cond, cls in pairs
        )
        if body:
            bod += 1
            if table.ground_truth[row].name == class_name:
                pos += 1
    s = bod / table.n if pairs else 0.0
    c = pos / bod if bod else 0.0
    return pos, bod, s, c
