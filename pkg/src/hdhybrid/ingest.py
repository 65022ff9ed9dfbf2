"""CSV loading, keyed merging, subsampling, and label derivation.

Tables are column-oriented and immutable: numeric columns are float64
arrays with NaN marking missing cells, categorical columns are object
arrays of strings with None marking missing cells. All operations return
new tables and are safe to call concurrently.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyIntersectionError,
    MalformedCsvError,
    MissingKeyColumnError,
    MissingLabelColumnError,
    NoValidRowsError,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        self.values.flags.writeable = False

    def missing_mask(self) -> np.ndarray:
        if self.kind == NUMERIC:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)

    def take(self, indices) -> "Column":
        return Column(self.name, self.kind, self.values[indices].copy())


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise MalformedCsvError(f"table {self.name!r}: duplicate column names")
        counts = {len(c.values) for c in self.columns}
        if len(counts) > 1:
            raise MalformedCsvError(f"table {self.name!r}: ragged columns {counts}")

    @property
    def row_count(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def take(self, indices) -> "Table":
        return Table(self.name, tuple(c.take(indices) for c in self.columns))

    def drop_columns(self, names) -> "Table":
        drop = set(names)
        return Table(self.name, tuple(c for c in self.columns if c.name not in drop))


@dataclass(frozen=True)
class LabelRule:
    mode: str = "refined"  # "prototype" or "refined"
    glucose_threshold: float = 126.0
    hba1c_threshold: float = 6.5
    self_report_column: str = "DIQ010"
    glucose_column: str = "LBXGLU"
    hba1c_column: str = "LBXGH"
    positive_code: float = 1.0
    negative_code: float = 2.0


@dataclass(frozen=True)
class SampleSpec:
    max_rows_per_table: int | None = None
    keep_fraction: float = 1.0
    seed: int = 0


def _parse_cell(raw: str, sentinels: frozenset) -> tuple[object, bool]:
    """Returns (value, is_numeric). Missing cells come back as None."""
    token = raw.strip()
    if token in sentinels:
        return None, True
    try:
        v = float(token)
    except ValueError:
        return token, False
    if not math.isfinite(v):
        return token, False
    return v, True


def load_csv(path, key_column: str, missing_sentinels=("",), table_name: str | None = None) -> Table:
    """Parse a header-first CSV into a Table.

    A column is numeric when every non-missing cell parses as a finite
    real number, categorical otherwise. Cells matching one of
    ``missing_sentinels`` (compared after stripping whitespace) are
    treated as missing.
    """
    sentinels = frozenset(s.strip() for s in missing_sentinels)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsvError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if key_column not in header:
            raise MissingKeyColumnError(f"{path}: key column {key_column!r} not in header")
        if len(set(header)) != len(header):
            raise MalformedCsvError(f"{path}: duplicate column names in header")
        raw_rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedCsvError(
                    f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}"
                )
            raw_rows.append(row)

    name = table_name
    if name is None:
        stem = str(path).replace("\\", "/").rsplit("/", 1)[-1]
        name = stem.rsplit(".", 1)[0]

    columns = []
    for j, col_name in enumerate(header):
        parsed = [_parse_cell(r[j], sentinels) for r in raw_rows]
        if all(ok for _, ok in parsed):
            values = np.array(
                [np.nan if v is None else v for v, _ in parsed], dtype=np.float64
            )
            columns.append(Column(col_name, NUMERIC, values))
        else:
            cells = [None if r[j].strip() in sentinels else r[j].strip() for r in raw_rows]
            columns.append(Column(col_name, CATEGORICAL, np.array(cells, dtype=object)))
    return Table(name, tuple(columns))


def truncate(table: Table, max_rows: int | None) -> Table:
    """Keep only the first max_rows rows; None is a no-op."""
    if max_rows is None or table.row_count <= max_rows:
        return table
    return table.take(np.arange(max_rows))


def _dedup_first(table: Table, key_column: str) -> Table:
    """Keep the first row for each key; rows with a missing key are dropped."""
    key = table.column(key_column)
    missing = key.missing_mask()
    seen = set()
    keep = []
    for i, v in enumerate(key.values):
        if missing[i]:
            continue
        if v not in seen:
            seen.add(v)
            keep.append(i)
    return table.take(np.array(keep, dtype=np.intp))


def merge_on_key(tables, key_column: str, join: str = "inner") -> Table:
    """Inner-join tables on key_column, keeping the first row per key.

    Column names appearing in more than one table are suffixed with the
    source table name (``AGE`` -> ``AGE.demo``). The output row order
    follows the first table's key order restricted to the intersection.
    """
    if join != "inner":
        raise ValueError(f"unsupported join {join!r}")
    tables = list(tables)
    if not tables:
        raise EmptyIntersectionError("no tables to merge")
    for t in tables:
        if not t.has_column(key_column):
            raise MissingKeyColumnError(f"table {t.name!r} lacks key column {key_column!r}")
    deduped = [_dedup_first(t, key_column) for t in tables]

    key_sets = [set(t.column(key_column).values.tolist()) for t in deduped]
    shared = set.intersection(*key_sets)
    if not shared:
        raise EmptyIntersectionError("zero shared keys across tables")
    ordered_keys = [k for k in deduped[0].column(key_column).values.tolist() if k in shared]

    seen_names: dict[str, int] = {}
    for t in deduped:
        for c in t.columns:
            if c.name != key_column:
                seen_names[c.name] = seen_names.get(c.name, 0) + 1

    key_col = deduped[0].column(key_column)
    out_columns = [
        Column(key_column, key_col.kind, np.array(ordered_keys, dtype=key_col.values.dtype))
    ]
    for t in deduped:
        key_to_row = {v: i for i, v in enumerate(t.column(key_column).values.tolist())}
        rows = np.array([key_to_row[k] for k in ordered_keys], dtype=np.intp)
        for c in t.columns:
            if c.name == key_column:
                continue
            out_name = f"{c.name}.{t.name}" if seen_names[c.name] > 1 else c.name
            out_columns.append(Column(out_name, c.kind, c.values[rows].copy()))
    return Table("merged", tuple(out_columns))


def pivot_indicators(table: Table, key_column: str, value_column: str) -> Table:
    """Pivot repeated key rows into one-hot indicator columns.

    Each distinct non-missing value v of value_column becomes a numeric
    column ``<value_column>_<v>`` that is 1.0 for keys having at least one
    row with that value. Output has one row per key, in first-occurrence
    order.
    """
    if not table.has_column(key_column):
        raise MissingKeyColumnError(f"table {table.name!r} lacks key column {key_column!r}")
    key = table.column(key_column)
    val = table.column(value_column)
    key_missing = key.missing_mask()
    val_missing = val.missing_mask()

    keys_in_order = []
    seen = set()
    for i, k in enumerate(key.values):
        if key_missing[i]:
            continue
        if k not in seen:
            seen.add(k)
            keys_in_order.append(k)
    key_pos = {k: i for i, k in enumerate(keys_in_order)}

    values = sorted({str(v) for i, v in enumerate(val.values) if not val_missing[i] and not key_missing[i]})
    mat = np.zeros((len(keys_in_order), len(values)), dtype=np.float64)
    val_pos = {v: j for j, v in enumerate(values)}
    for i, k in enumerate(key.values):
        if key_missing[i] or val_missing[i]:
            continue
        mat[key_pos[k], val_pos[str(val.values[i])]] = 1.0

    columns = [Column(key_column, key.kind, np.array(keys_in_order, dtype=key.values.dtype))]
    for j, v in enumerate(values):
        columns.append(Column(f"{value_column}_{v}", NUMERIC, mat[:, j].copy()))
    return Table(table.name, tuple(columns))


def collapse_with_pivot(table: Table, key_column: str, pivot_columns) -> Table:
    """Collapse a repeated-key table to one row per key.

    Listed pivot_columns become one-hot indicators; all other columns keep
    their first-occurrence value per key.
    """
    pivots = [pivot_indicators(table, key_column, col) for col in pivot_columns]
    rest = _dedup_first(table.drop_columns(pivot_columns), key_column)
    merged = rest
    for p in pivots:
        pv = Table(p.name + "_pivot", p.columns)
        merged = merge_on_key([merged, pv], key_column)
    return Table(table.name, merged.columns)


def subsample(table: Table, spec: SampleSpec) -> Table:
    """Retain floor(keep_fraction * rows) rows uniformly without replacement.

    Deterministic for a fixed seed; row order of the survivors is
    preserved. keep_fraction 1.0 returns the table unchanged.
    """
    if not 0.0 < spec.keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction {spec.keep_fraction} outside (0, 1]")
    if spec.keep_fraction == 1.0:
        return table
    n = table.row_count
    m = int(math.floor(spec.keep_fraction * n))
    rng = np.random.default_rng(spec.seed)
    chosen = np.sort(rng.choice(n, size=m, replace=False))
    return table.take(chosen)


def _numeric_view(col: Column) -> np.ndarray:
    """Column cells as float64 with NaN for missing/unparseable cells."""
    if col.kind == NUMERIC:
        return col.values
    out = np.full(len(col.values), np.nan)
    for i, v in enumerate(col.values):
        if v is None:
            continue
        try:
            f = float(v)
        except ValueError:
            continue
        if math.isfinite(f):
            out[i] = f
    return out


def derive_label(table: Table, rule: LabelRule) -> tuple[Table, np.ndarray]:
    """Derive the binary outcome and strip label-source columns.

    prototype mode keeps only rows whose self-report cell equals the
    positive or negative code; the label is equality with the positive
    code. refined mode labels a row positive when any of self-report ==
    positive_code, glucose >= glucose_threshold, or hba1c >=
    hba1c_threshold holds, and drops rows missing both lab values that
    also lack a valid self-report code.
    """
    if rule.mode == "prototype":
        if not table.has_column(rule.self_report_column):
            raise MissingLabelColumnError(f"missing label column {rule.self_report_column!r}")
        sr = _numeric_view(table.column(rule.self_report_column))
        keep = (sr == rule.positive_code) | (sr == rule.negative_code)
        if not keep.any():
            raise NoValidRowsError("no rows with a valid self-report code")
        idx = np.flatnonzero(keep)
        labels = (sr[idx] == rule.positive_code).astype(np.int64)
        features = table.take(idx).drop_columns([rule.self_report_column])
        return features, labels

    if rule.mode != "refined":
        raise ValueError(f"unknown label mode {rule.mode!r}")
    for col in (rule.self_report_column, rule.glucose_column, rule.hba1c_column):
        if not table.has_column(col):
            raise MissingLabelColumnError(f"missing label column {col!r}")
    sr = _numeric_view(table.column(rule.self_report_column))
    glu = _numeric_view(table.column(rule.glucose_column))
    a1c = _numeric_view(table.column(rule.hba1c_column))

    valid_sr = (sr == rule.positive_code) | (sr == rule.negative_code)
    has_lab = ~np.isnan(glu) | ~np.isnan(a1c)
    keep = has_lab | valid_sr
    if not keep.any():
        raise NoValidRowsError("every row lacks both lab values and a valid self-report code")
    idx = np.flatnonzero(keep)
    with np.errstate(invalid="ignore"):
        positive = (
            (sr[idx] == rule.positive_code)
            | (glu[idx] >= rule.glucose_threshold)
            | (a1c[idx] >= rule.hba1c_threshold)
        )
    labels = positive.astype(np.int64)
    features = table.take(idx).drop_columns(
        [rule.self_report_column, rule.glucose_column, rule.hba1c_column]
    )
    return features, labels


def load_and_merge(
    data_dir,
    file_names,
    key_column: str,
    missing_sentinels=("",),
    max_rows_per_table: int | None = None,
    pivot: dict | None = None,
) -> Table:
    """Load, truncate, optionally pivot, and merge the component CSVs."""
    tables = []
    for fname in file_names:
        t = load_csv(f"{data_dir}/{fname}", key_column, missing_sentinels)
        t = truncate(t, max_rows_per_table)
        if pivot and fname in pivot:
            t = collapse_with_pivot(t, key_column, pivot[fname])
        tables.append(t)
    return merge_on_key(tables, key_column)
