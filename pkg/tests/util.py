"""Shared helpers for building small in-memory tables in tests."""

import numpy as np

from causalomics.tabular import (Categorical, Continuous, DataTable, Family,
                                 VariableMeta)


def build_table(**columns) -> DataTable:
    """Table from keyword arrays: integer arrays become categorical
    columns (cardinality = max + 1), float arrays continuous."""
    metas, data = [], []
    for name, arr in columns.items():
        arr = np.asarray(arr)
        if arr.dtype.kind in "iu":
            card = int(arr.max()) + 1
            metas.append(VariableMeta(
                name, Categorical(card), Family.OTHER,
                tuple(f"l{i}" for i in range(card))))
        else:
            metas.append(VariableMeta(name, Continuous(), Family.OTHER))
        data.append(arr)
    return DataTable(metas, data)
