"""Fold-safe preprocessing: missingness filter, imputation, one-hot
encoding, zero-variance pruning, and standardization.

A plan is fitted on training rows only and then applied unchanged to any
table with the same schema, so no statistic ever leaks from held-out
rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllColumnsDroppedError, SchemaMismatchError
from .ingest import CATEGORICAL, NUMERIC, Table

_MISSING_TOKEN = "__missing__"


@dataclass(frozen=True)
class ColumnPlan:
    name: str
    kind: str
    median: float | None = None
    mode: str | None = None
    vocab: tuple[str, ...] = ()


@dataclass(frozen=True)
class PreprocessPlan:
    missingness_threshold: float
    kept_columns: tuple[ColumnPlan, ...]
    feature_names: tuple[str, ...]
    kept_feature_indices: np.ndarray  # into the pre-pruning encoded order
    standardize_mean: np.ndarray
    standardize_scale: np.ndarray

    def to_dict(self) -> dict:
        return {
            "missingness_threshold": self.missingness_threshold,
            "kept_columns": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "median": c.median,
                    "mode": c.mode,
                    "vocab": list(c.vocab),
                }
                for c in self.kept_columns
            ],
            "feature_names": list(self.feature_names),
            "kept_feature_indices": self.kept_feature_indices.tolist(),
            "standardize_mean": self.standardize_mean.tolist(),
            "standardize_scale": self.standardize_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessPlan":
        return cls(
            missingness_threshold=d["missingness_threshold"],
            kept_columns=tuple(
                ColumnPlan(
                    name=c["name"],
                    kind=c["kind"],
                    median=c["median"],
                    mode=c["mode"],
                    vocab=tuple(c["vocab"]),
                )
                for c in d["kept_columns"]
            ),
            feature_names=tuple(d["feature_names"]),
            kept_feature_indices=np.asarray(d["kept_feature_indices"], dtype=np.intp),
            standardize_mean=np.asarray(d["standardize_mean"], dtype=np.float64),
            standardize_scale=np.asarray(d["standardize_scale"], dtype=np.float64),
        )


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def restrict(self, indices) -> "DesignMatrix":
        idx = np.asarray(indices, dtype=np.intp)
        return DesignMatrix(
            self.values[:, idx].copy(),
            self.labels,
            tuple(self.feature_names[i] for i in idx),
        )


def _mode(cells) -> str:
    """Most frequent category; ties broken by lexicographic order."""
    counts: dict[str, int] = {}
    for v in cells:
        counts[v] = counts.get(v, 0) + 1
    best = None
    for cat in sorted(counts):
        if best is None or counts[cat] > counts[best]:
            best = cat
    return best


def _encode_column(plan: ColumnPlan, col) -> np.ndarray:
    """Impute and encode one column to a (rows, width) float block."""
    missing = col.missing_mask()
    if plan.kind == NUMERIC:
        if col.kind != NUMERIC:
            raise SchemaMismatchError(f"column {plan.name!r} expected numeric cells")
        v = np.where(missing, plan.median, col.values)
        return v.reshape(-1, 1)
    cats = [plan.mode if missing[i] else str(v) for i, v in enumerate(col.values)]
    block = np.zeros((len(cats), len(plan.vocab)), dtype=np.float64)
    pos = {c: j for j, c in enumerate(plan.vocab)}
    for i, c in enumerate(cats):
        j = pos.get(c)
        if j is not None:
            block[i, j] = 1.0
    return block


def fit_plan(table: Table, threshold: float = 0.5) -> PreprocessPlan:
    """Fit the preprocessing plan on the given (training) rows.

    Columns whose missing fraction strictly exceeds threshold are
    dropped, as are columns with no observed cells at all. Numeric
    medians use the mean of the two middle values for even counts; mode
    ties go to the lexicographically smallest category. Zero-variance
    columns of the encoded matrix are pruned before the per-feature mean
    and population standard deviation are recorded.
    """
    n = table.row_count
    if n == 0:
        raise AllColumnsDroppedError("cannot fit a plan on an empty table")

    col_plans = []
    for col in table.columns:
        missing = col.missing_mask()
        n_missing = int(missing.sum())
        if n_missing == n or n_missing / n > threshold:
            continue
        if col.kind == NUMERIC:
            median = float(np.median(col.values[~missing]))
            col_plans.append(ColumnPlan(col.name, NUMERIC, median=median))
        else:
            observed = [str(v) for v in col.values[~missing]]
            mode = _mode(observed)
            vocab = tuple(sorted(set(observed)))
            col_plans.append(ColumnPlan(col.name, CATEGORICAL, mode=mode, vocab=vocab))
    if not col_plans:
        raise AllColumnsDroppedError(f"threshold {threshold} dropped every column")

    blocks = []
    encoded_names = []
    for cp in col_plans:
        col = table.column(cp.name)
        blocks.append(_encode_column(cp, col))
        if cp.kind == NUMERIC:
            encoded_names.append(cp.name)
        else:
            encoded_names.extend(f"{cp.name}_{c}" for c in cp.vocab)
    encoded = np.hstack(blocks)

    variances = encoded.var(axis=0)
    kept = np.flatnonzero(variances > 0.0).astype(np.intp)
    if kept.size == 0:
        raise AllColumnsDroppedError("every encoded feature has zero variance")

    sub = encoded[:, kept]
    mean = sub.mean(axis=0)
    scale = sub.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    return PreprocessPlan(
        missingness_threshold=threshold,
        kept_columns=tuple(col_plans),
        feature_names=tuple(encoded_names[i] for i in kept),
        kept_feature_indices=kept,
        standardize_mean=mean,
        standardize_scale=scale,
    )


def apply_plan(
    plan: PreprocessPlan,
    table: Table,
    labels: np.ndarray | None = None,
    standardize: bool = True,
) -> DesignMatrix:
    """Apply a fitted plan to a table with the same schema.

    Unseen categories encode to all-zero indicator blocks. The output
    never contains missing or non-finite entries and always has exactly
    len(plan.feature_names) columns.
    """
    blocks = []
    for cp in plan.kept_columns:
        if not table.has_column(cp.name):
            raise SchemaMismatchError(f"table lacks kept column {cp.name!r}")
        col = table.column(cp.name)
        blocks.append(_encode_column(cp, col))
    encoded = np.hstack(blocks)
    values = encoded[:, plan.kept_feature_indices]
    if standardize:
        values = (values - plan.standardize_mean) / plan.standardize_scale
    if labels is None:
        labels = np.zeros(values.shape[0], dtype=np.int64)
    return DesignMatrix(
        np.ascontiguousarray(values, dtype=np.float64),
        np.asarray(labels, dtype=np.int64),
        plan.feature_names,
    )
