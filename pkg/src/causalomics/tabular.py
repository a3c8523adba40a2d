"""Typed columnar tables for mixed categorical/continuous multi-omics data.

Columns follow the multi-omics naming convention: ``cn_``/``mu_`` prefixes
mark categorical copy-number and mutation calls, ``rs_``/``pp_`` mark
continuous expression and protein measurements.  The declared target column
is always categorical.  Everything else is inferred from the cell contents
unless an explicit override is given.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class Family(enum.Enum):
    """Measurement family, derived from the column-name prefix."""

    COPY_NUMBER = "copy_number"
    MUTATION = "mutation"
    GENE_EXPRESSION = "gene_expression"
    PROTEIN_LEVEL = "protein_level"
    TARGET = "target"
    OTHER = "other"


_PREFIX_FAMILY = {
    "cn_": Family.COPY_NUMBER,
    "mu_": Family.MUTATION,
    "rs_": Family.GENE_EXPRESSION,
    "pp_": Family.PROTEIN_LEVEL,
}

_CATEGORICAL_PREFIXES = ("cn_", "mu_")
_CONTINUOUS_PREFIXES = ("rs_", "pp_")


@dataclass(frozen=True)
class Categorical:
    """Categorical kind; cells are integer codes in ``[0, cardinality)``."""

    cardinality: int


@dataclass(frozen=True)
class Continuous:
    """Continuous kind; cells are finite floats."""


VariableKind = Categorical | Continuous


@dataclass(frozen=True)
class VariableMeta:
    """Per-column metadata: name, kind, family and (for categoricals) the
    original level labels in code order."""

    name: str
    kind: VariableKind
    family: Family
    levels: tuple[str, ...] = ()

    @property
    def is_categorical(self) -> bool:
        return isinstance(self.kind, Categorical)

    def gene_symbol(self) -> str:
        """Column name with any family prefix stripped."""
        for prefix in _PREFIX_FAMILY:
            if self.name.startswith(prefix):
                return self.name[len(prefix):]
        return self.name


class TableError(ValueError):
    """Raised for malformed input tables."""


def family_for_name(name: str, target_name: str | None = None) -> Family:
    if target_name is not None and name == target_name:
        return Family.TARGET
    for prefix, family in _PREFIX_FAMILY.items():
        if name.startswith(prefix):
            return family
    return Family.OTHER


class DataTable:
    """Immutable columnar table; categorical cells are integer codes,
    continuous cells are finite floats.

    Construction validates that every column has the same length, that
    categorical codes stay below the declared cardinality and that
    continuous values are finite.  Arrays are marked read-only so the
    table can be shared across threads.
    """

    def __init__(self, metas: Sequence[VariableMeta],
                 columns: Sequence[np.ndarray], n_dropped: int = 0):
        if len(metas) != len(columns):
            raise TableError("metas and columns must align")
        if not columns:
            raise TableError("empty table")
        n_rows = len(columns[0])
        cols = []
        for meta, col in zip(metas, columns):
            arr = np.asarray(col)
            if len(arr) != n_rows:
                raise TableError(f"column {meta.name!r} has length {len(arr)}, "
                                 f"expected {n_rows}")
            if meta.is_categorical:
                arr = arr.astype(np.int64)
                if n_rows and (arr.min() < 0 or arr.max() >= meta.kind.cardinality):
                    raise TableError(f"column {meta.name!r} has codes outside "
                                     f"[0, {meta.kind.cardinality})")
            else:
                arr = arr.astype(np.float64)
                if n_rows and not np.all(np.isfinite(arr)):
                    raise TableError(f"column {meta.name!r} has non-finite values")
            arr.setflags(write=False)
            cols.append(arr)
        if n_rows == 0:
            raise TableError("empty table")
        self._metas = tuple(metas)
        self._columns = tuple(cols)
        self._index = {m.name: i for i, m in enumerate(self._metas)}
        if len(self._index) != len(self._metas):
            raise TableError("duplicate column names")
        self.n_rows = n_rows
        self.n_dropped = n_dropped

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self._metas)

    @property
    def metas(self) -> tuple[VariableMeta, ...]:
        return self._metas

    def meta(self, name: str) -> VariableMeta:
        return self._metas[self._column_index(name)]

    def column(self, name: str) -> np.ndarray:
        return self._columns[self._column_index(name)]

    def is_categorical(self, name: str) -> bool:
        return self.meta(name).is_categorical

    def cardinality(self, name: str) -> int:
        kind = self.meta(name).kind
        if not isinstance(kind, Categorical):
            raise TableError(f"column {name!r} is not categorical")
        return kind.cardinality

    def subset(self, names: Iterable[str]) -> "DataTable":
        """New table holding the given columns (in the given order)."""
        names = list(names)
        metas = [self.meta(n) for n in names]
        cols = [self.column(n) for n in names]
        return DataTable(metas, cols, n_dropped=self.n_dropped)

    def _column_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise TableError(f"unknown column {name!r}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataTable):
            return NotImplemented
        return (self._metas == other._metas
                and all(np.array_equal(a, b)
                        for a, b in zip(self._columns, other._columns)))

    def __repr__(self) -> str:
        return f"DataTable({len(self._metas)} columns, {self.n_rows} rows)"

    def to_csv(self, path) -> None:
        """Write the table back out; reloading yields an identical table."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            decoded = []
            for meta, col in zip(self._metas, self._columns):
                if meta.is_categorical:
                    decoded.append([meta.levels[c] for c in col])
                else:
                    decoded.append([repr(float(v)) for v in col])
            for row in zip(*decoded):
                writer.writerow(row)


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, target_name: str,
             kind_overrides: Mapping[str, VariableKind] | None = None) -> DataTable:
    """Load a mixed-type CSV (header row, empty cell = missing).

    Kinds are assigned by the prefix rule (``cn_``/``mu_`` categorical,
    ``rs_``/``pp_`` continuous); the target column is always categorical;
    unprefixed columns are continuous when every cell parses as a number
    and categorical otherwise.  ``kind_overrides`` wins over all of this.
    Categorical levels are coded by first appearance in file order.  Rows
    with any missing cell are dropped; the drop count is kept on the table.
    """
    overrides = dict(kind_overrides or {})
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError("empty table") from None
        rows = [row for row in reader]

    if target_name not in header:
        raise TableError(f"target column {target_name!r} not in header")
    if not rows:
        raise TableError("empty table")
    width = len(header)
    for row in rows:
        if len(row) != width:
            raise TableError("ragged row in CSV")

    kept = [row for row in rows if all(cell != "" for cell in row)]
    n_dropped = len(rows) - len(kept)
    if n_dropped:
        logger.info("dropped %d row(s) with missing cells", n_dropped)
    if not kept:
        raise TableError("empty table after dropping incomplete rows")

    cells = list(zip(*kept))  # column-major
    metas: list[VariableMeta] = []
    columns: list[np.ndarray] = []
    for name, col in zip(header, cells):
        kind = overrides.get(name)
        if kind is None:
            if name.startswith(_CATEGORICAL_PREFIXES) or name == target_name:
                categorical = True
            elif name.startswith(_CONTINUOUS_PREFIXES):
                categorical = False
            else:
                categorical = not all(_parses_as_float(c) for c in col)
        else:
            categorical = isinstance(kind, Categorical)

        if categorical:
            codes = {}
            coded = np.empty(len(col), dtype=np.int64)
            for i, cell in enumerate(col):
                coded[i] = codes.setdefault(cell, len(codes))
            levels = tuple(codes)
            if len(levels) == 1:
                logger.warning("column %r is constant (single level %r)",
                               name, levels[0])
            meta = VariableMeta(name, Categorical(len(levels)),
                                family_for_name(name, target_name), levels)
            columns.append(coded)
        else:
            try:
                values = np.array([float(c) for c in col], dtype=np.float64)
            except ValueError:
                bad = next(c for c in col if not _parses_as_float(c))
                raise TableError(f"non-numeric cell {bad!r} in continuous "
                                 f"column {name!r}") from None
            if not np.all(np.isfinite(values)):
                raise TableError(f"non-finite value in continuous column {name!r}")
            if values.size and values.min() == values.max():
                logger.warning("column %r is constant", name)
            meta = VariableMeta(name, Continuous(),
                                family_for_name(name, target_name))
            columns.append(values)
        metas.append(meta)

    return DataTable(metas, columns, n_dropped=n_dropped)


@dataclass
class Summary:
    """Per-column summary; categorical columns get level counts, continuous
    columns get mean/sd/min/max.  ``by_target`` holds the same statistics
    split by target level."""

    name: str
    kind: str
    counts: dict[str, int] | None = None
    stats: dict[str, float] | None = None
    by_target: dict[str, dict] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out: dict = {"name": self.name, "kind": self.kind}
        if self.counts is not None:
            out["counts"] = self.counts
        if self.stats is not None:
            out["stats"] = self.stats
        if self.by_target:
            out["by_target"] = self.by_target
        return out


def _continuous_stats(values: np.ndarray) -> dict[str, float]:
    return {
        "mean": float(np.mean(values)),
        "sd": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
        "min": float(np.min(values)),
        "max": float(np.max(values)),
    }


def column_summary(table: DataTable, name: str,
                   by_target: str | None = None) -> Summary:
    """Summarize one column, optionally split by the levels of ``by_target``."""
    meta = table.meta(name)
    col = table.column(name)
    if by_target is not None:
        tmeta = table.meta(by_target)
        if not tmeta.is_categorical:
            raise TableError(f"split column {by_target!r} must be categorical")
        tcol = table.column(by_target)

    if meta.is_categorical:
        counts = np.bincount(col, minlength=meta.kind.cardinality)
        summary = Summary(name, "categorical",
                          counts={meta.levels[i]: int(c)
                                  for i, c in enumerate(counts)})
        if by_target is not None:
            for code, level in enumerate(tmeta.levels):
                sub = col[tcol == code]
                sub_counts = np.bincount(sub, minlength=meta.kind.cardinality)
                summary.by_target[level] = {
                    meta.levels[i]: int(c) for i, c in enumerate(sub_counts)}
        return summary

    summary = Summary(name, "continuous", stats=_continuous_stats(col))
    if by_target is not None:
        for code, level in enumerate(tmeta.levels):
            sub = col[tcol == code]
            summary.by_target[level] = (_continuous_stats(sub)
                                        if len(sub) else {})
    return summary
