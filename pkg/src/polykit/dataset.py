"""Tabular ingestion: column typing, dummy encoding, train/test splitting.

A :class:`Dataset` is an immutable table of fully-populated columns plus a
:class:`Schema` that types each column. Categorical columns are expanded
into 0/1 indicator ("dummy") columns by :func:`encode_design`, dropping one
reference level per source column; :class:`DummyGroups` records which design
columns came from which source so downstream term enumeration can apply the
indicator degeneracy rules.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

COLUMN_KINDS = ("numeric", "categorical", "response_numeric", "response_class")
RESPONSE_KINDS = ("response_numeric", "response_class")

#: Cell values (lowercased) treated as missing during ingestion.
MISSING_TOKENS = frozenset({"", "na", "nan", "n/a", "null"})

#: A feature column whose distinct-value count is at or below this is
#: treated as categorical even when every value parses as a number.
DEFAULT_CATEGORICAL_THRESHOLD = 12


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class ColumnSpec:
    """Name, kind and (for categoricals) the observed level set of a column."""

    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise DataError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if self.kind == "categorical" and len(self.levels) < 1:
            raise DataError(f"categorical column {self.name!r} must list >= 1 level")
        if self.kind != "categorical" and self.levels:
            raise DataError(f"only categorical columns carry levels ({self.name!r})")


@dataclass(frozen=True)
class Schema:
    """Typed column layout with exactly one response column."""

    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in schema")
        n_resp = sum(c.kind in RESPONSE_KINDS for c in self.columns)
        if n_resp != 1:
            raise DataError(f"schema must have exactly one response column, got {n_resp}")

    @property
    def response(self) -> ColumnSpec:
        return next(c for c in self.columns if c.kind in RESPONSE_KINDS)

    @property
    def features(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.kind not in RESPONSE_KINDS)

    @property
    def is_classification(self) -> bool:
        return self.response.kind == "response_class"

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class Dataset:
    """Immutable table: one array per schema column, no missing values.

    Numeric (and numeric-response) columns hold float64; categorical and
    class-response columns hold strings. ``dropped_rows`` records how many
    incomplete rows ingestion discarded.
    """

    schema: Schema
    columns: dict[str, np.ndarray]
    dropped_rows: int = 0

    def __post_init__(self):
        lengths = set()
        for spec in self.schema.columns:
            if spec.name not in self.columns:
                raise DataError(f"dataset missing column {spec.name!r}")
            arr = self.columns[spec.name]
            lengths.add(len(arr))
            if spec.kind in ("numeric", "response_numeric") and not np.all(
                np.isfinite(arr.astype(float))
            ):
                raise DataError(f"non-finite values in numeric column {spec.name!r}")
        if len(lengths) != 1:
            raise DataError("dataset columns have unequal lengths")
        if self.n < 1:
            raise DataError("dataset must contain at least one row")

    @property
    def n(self) -> int:
        return len(self.columns[self.schema.columns[0].name])

    def response_values(self) -> np.ndarray:
        """Response column: float64 for regression, labels for classification."""
        resp = self.schema.response
        arr = self.columns[resp.name]
        if resp.kind == "response_numeric":
            return arr.astype(np.float64)
        return arr

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset in the given order (shares the schema)."""
        cols = {name: arr[indices] for name, arr in self.columns.items()}
        return Dataset(self.schema, cols)


@dataclass(frozen=True)
class DummyGroups:
    """Bookkeeping for a design matrix produced by :func:`encode_design`.

    ``groups`` maps each categorical source column to the design-column
    indices of its indicator block; ``numeric_indices`` lists the columns
    that passed through unchanged. Every design column belongs to exactly
    one of the two.
    """

    groups: tuple[tuple[str, tuple[int, ...]], ...] = ()
    numeric_indices: tuple[int, ...] = ()
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        seen: set[int] = set(self.numeric_indices)
        for _, idxs in self.groups:
            for i in idxs:
                if i in seen:
                    raise DataError(f"design column {i} assigned twice")
                seen.add(i)
        if self.column_names and seen != set(range(len(self.column_names))):
            raise DataError("dummy-group indices do not cover the design width")

    @property
    def width(self) -> int:
        return len(self.column_names)

    def group_of(self) -> dict[int, int]:
        """Map design-column index -> ordinal of its dummy group."""
        out: dict[int, int] = {}
        for g, (_, idxs) in enumerate(self.groups):
            for i in idxs:
                out[i] = g
        return out

    @classmethod
    def all_numeric(cls, width: int, names: tuple[str, ...] | None = None) -> "DummyGroups":
        if names is None:
            names = tuple(f"x{i}" for i in range(width))
        return cls(groups=(), numeric_indices=tuple(range(width)), column_names=names)


def parse_schema_sidecar(path) -> dict[str, str]:
    """Read a schema sidecar file: one ``column = kind`` line per column.

    Blank lines and ``#`` comments are ignored. Kinds are the four column
    kinds; categorical level sets are always inferred from the data.
    """
    hints: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected 'column = kind'")
                name, kind = (part.strip() for part in line.split("=", 1))
                if kind not in COLUMN_KINDS:
                    raise DataError(f"{path}:{lineno}: unknown kind {kind!r}")
                hints[name] = kind
    except OSError as exc:
        raise DataError(f"cannot read schema file {path}: {exc}") from exc
    return hints


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return [h.strip() for h in header], rows


def load_csv(
    path,
    schema: Schema | None = None,
    *,
    kind_hints: dict[str, str] | None = None,
    response: str | None = None,
    categorical_threshold: int = DEFAULT_CATEGORICAL_THRESHOLD,
) -> Dataset:
    """Load a comma-delimited UTF-8 file with a header row into a Dataset.

    Column typing, in order of precedence: an explicit ``schema``; per-column
    ``kind_hints`` (e.g. from :func:`parse_schema_sidecar`); inference. An
    inferred feature column is categorical iff a non-numeric value occurs or
    its distinct-value count is <= ``categorical_threshold``. The response
    column is named by ``response`` (default: last header column) and is
    inferred as a class response iff it holds non-numeric values.

    Rows with any missing cell (or the wrong field count) are dropped; the
    count is reported as a warning and on ``Dataset.dropped_rows``.
    """
    header, raw_rows = _read_rows(path)
    if schema is not None:
        missing = [c.name for c in schema.columns if c.name not in header]
        if missing:
            raise DataError(f"{path}: columns {missing} required by schema are absent")
        wanted = [c.name for c in schema.columns]
    else:
        hints = dict(kind_hints or {})
        unknown = [name for name in hints if name not in header]
        if unknown:
            raise DataError(f"{path}: schema names columns {unknown} absent from header")
        resp_name = response
        if resp_name is None:
            resp_name = next((n for n, k in hints.items() if k in RESPONSE_KINDS), None)
        if resp_name is None:
            resp_name = header[-1]
        if resp_name not in header:
            raise DataError(f"{path}: response column {resp_name!r} absent")
        wanted = header

    positions = {name: header.index(name) for name in wanted}

    kept: list[list[str]] = []
    dropped = 0
    for row in raw_rows:
        if len(row) != len(header):
            dropped += 1
            continue
        cells = [row[positions[name]].strip() for name in wanted]
        if any(c.lower() in MISSING_TOKENS for c in cells):
            dropped += 1
            continue
        kept.append(cells)
    if not kept:
        raise DataError(f"{path}: no usable rows after dropping incomplete ones")
    if dropped:
        warnings.warn(f"{path}: {dropped} row(s) dropped (missing or malformed cells)")

    col_values = {name: [r[i] for r in kept] for i, name in enumerate(wanted)}

    if schema is None:
        specs = []
        for name in wanted:
            values = col_values[name]
            numeric = all(_is_number(v) for v in values)
            if name == resp_name:
                kind = "response_numeric" if numeric else "response_class"
                specs.append(ColumnSpec(name, kind))
            elif not numeric or len(set(values)) <= categorical_threshold:
                levels = tuple(sorted(set(values)))
                specs.append(ColumnSpec(name, "categorical", levels))
            else:
                specs.append(ColumnSpec(name, "numeric"))
        # apply explicit kind hints on top of inference
        for i, spec in enumerate(specs):
            hint = (kind_hints or {}).get(spec.name)
            if hint is None or hint == spec.kind:
                continue
            levels = tuple(sorted(set(col_values[spec.name]))) if hint == "categorical" else ()
            specs[i] = ColumnSpec(spec.name, hint, levels)
        schema = Schema(tuple(specs))

    columns: dict[str, np.ndarray] = {}
    for spec in schema.columns:
        values = col_values[spec.name]
        if spec.kind in ("numeric", "response_numeric"):
            bad = next((v for v in values if not _is_number(v)), None)
            if bad is not None:
                raise DataError(
                    f"{path}: non-numeric value {bad!r} in numeric column {spec.name!r}"
                )
            columns[spec.name] = np.array([float(v) for v in values])
        else:
            columns[spec.name] = np.array(values, dtype=str)

    return Dataset(schema, columns, dropped_rows=dropped)


def encode_design(ds: Dataset, schema: Schema | None = None) -> tuple[np.ndarray, DummyGroups]:
    """Build the numeric design matrix: numerics pass through, categoricals
    become k-1 indicator columns (lexicographically first level dropped).

    Column order is all numeric features in schema order, then one indicator
    block per categorical feature in schema order. Passing a training
    ``schema`` encodes new data against the training level sets; values
    outside them map to the all-zero reference encoding with a warning.
    """
    enc = schema if schema is not None else ds.schema
    absent = [c.name for c in enc.features if c.name not in ds.columns]
    if absent:
        raise DataError(f"dataset lacks feature columns {absent} named by the schema")
    arrays: list[np.ndarray] = []
    names: list[str] = []
    numeric_indices: list[int] = []
    groups: list[tuple[str, tuple[int, ...]]] = []

    for spec in enc.features:
        if spec.kind != "numeric":
            continue
        numeric_indices.append(len(names))
        names.append(spec.name)
        arrays.append(ds.columns[spec.name].astype(np.float64))

    unseen = 0
    for spec in enc.features:
        if spec.kind != "categorical":
            continue
        if len(spec.levels) == 1:
            warnings.warn(
                f"categorical column {spec.name!r} has a single level; contributes no columns"
            )
            groups.append((spec.name, ()))
            continue
        values = ds.columns[spec.name]
        unseen += int(np.sum(~np.isin(values, spec.levels)))
        idxs = []
        for level in spec.levels[1:]:
            idxs.append(len(names))
            names.append(f"{spec.name}={level}")
            arrays.append((values == level).astype(np.float64))
        groups.append((spec.name, tuple(idxs)))

    if unseen:
        warnings.warn(f"{unseen} value(s) outside the schema level sets mapped to reference")

    n = ds.n
    design = np.column_stack(arrays) if arrays else np.empty((n, 0))
    info = DummyGroups(
        groups=tuple(groups),
        numeric_indices=tuple(numeric_indices),
        column_names=tuple(names),
    )
    return design, info


def split(ds: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic train/test split.

    Test size is min(10000, n) when n > 20000, otherwise floor(n/5); rows
    are sampled uniformly without replacement under ``seed`` and the train
    set is the complement. Both halves keep the original row order.
    """
    n = ds.n
    if n < 2:
        raise DataError("need at least two rows to split")
    test_n = min(10000, n) if n > 20000 else n // 5
    rng = np.random.default_rng(seed)
    test_idx = np.sort(rng.choice(n, size=test_n, replace=False))
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)
    return ds.take(train_idx), ds.take(test_idx)


def load_design_for_predict(path, schema: Schema) -> np.ndarray:
    """Encode a CSV of feature rows against a training schema.

    The response column need not be present. Rows must be complete: unlike
    training ingestion, nothing is dropped, so the output keeps one row
    per input row. A file with no data rows yields a (0, width) matrix.
    """
    header, raw_rows = _read_rows(path)
    feats = schema.features
    missing = [c.name for c in feats if c.name not in header]
    if missing:
        raise DataError(f"{path}: feature columns {missing} are absent")
    positions = {c.name: header.index(c.name) for c in feats}

    values: dict[str, list[str]] = {c.name: [] for c in feats}
    for rownum, row in enumerate(raw_rows, 2):
        if len(row) != len(header):
            raise DataError(f"{path}:{rownum}: wrong field count")
        for c in feats:
            cell = row[positions[c.name]].strip()
            if cell.lower() in MISSING_TOKENS:
                raise DataError(f"{path}:{rownum}: missing value in column {c.name!r}")
            values[c.name].append(cell)

    n = len(raw_rows)
    width = sum(
        1 if c.kind == "numeric" else max(0, len(c.levels) - 1) for c in feats
    )
    if n == 0:
        return np.empty((0, width))

    columns: dict[str, np.ndarray] = {}
    for c in feats:
        if c.kind == "numeric":
            bad = next((v for v in values[c.name] if not _is_number(v)), None)
            if bad is not None:
                raise DataError(f"{path}: non-numeric value {bad!r} in column {c.name!r}")
            columns[c.name] = np.array([float(v) for v in values[c.name]])
        else:
            columns[c.name] = np.array(values[c.name], dtype=str)
    resp = schema.response
    columns[resp.name] = (
        np.zeros(n) if resp.kind == "response_numeric" else np.array(["?"] * n, dtype=str)
    )
    ds = Dataset(schema, columns)
    design, _ = encode_design(ds, schema)
    return design


def dataset_from_arrays(
    X: np.ndarray,
    y: np.ndarray,
    *,
    classification: bool = False,
    feature_names: tuple[str, ...] | None = None,
    response_name: str = "y",
) -> Dataset:
    """Wrap an all-numeric feature matrix and response vector as a Dataset."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("feature matrix must be 2-D")
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(X.shape[1]))
    kind = "response_class" if classification else "response_numeric"
    specs = [ColumnSpec(name, "numeric") for name in feature_names]
    specs.append(ColumnSpec(response_name, kind))
    columns = {name: X[:, i].copy() for i, name in enumerate(feature_names)}
    y = np.asarray(y)
    columns[response_name] = y.astype(str) if classification else y.astype(np.float64)
    return Dataset(Schema(tuple(specs)), columns)
