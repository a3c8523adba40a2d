"""Causal structure search: constraint-based and score-based algorithms."""

from .common import (
    DATA_MAX_COND_DEFAULT,
    PcOptions,
    SearchError,
    SearchResult,
    make_tester,
)
from .fci import fci, possible_dsep
from .ges import fges, ges
from .pc import pc, pc_on_skeleton

__all__ = [
    "DATA_MAX_COND_DEFAULT",
    "PcOptions",
    "SearchError",
    "SearchResult",
    "make_tester",
    "fci",
    "possible_dsep",
    "fges",
    "ges",
    "pc",
    "pc_on_skeleton",
]
