"""Shared options, result type and test dispatch for the discovery algorithms."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..citests import (
    ChiSquareTester,
    CgLrtTester,
    CITester,
    DsepOracle,
    RcitTester,
    TableTester,
)
from ..graphs import MixedGraph, SepSetMap
from ..tabular import DataTable

DATA_MAX_COND_DEFAULT = 3


class SearchError(ValueError):
    """Invalid search input or configuration."""


@dataclass(frozen=True)
class PcOptions:
    """Settings for constraint-based structure search.

    ``max_cond_set_size`` of None applies the default policy: unlimited
    when answering from a graph oracle, 3 otherwise.  ``test`` of "auto"
    picks the chi-square test when every variable is categorical and the
    conditional-Gaussian likelihood-ratio test otherwise.
    """

    alpha: float = 0.05
    max_cond_set_size: int | None = None
    stable: bool = True
    test: str = "auto"

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise SearchError("alpha must be in (0, 1)")
        if self.max_cond_set_size is not None and self.max_cond_set_size < 0:
            raise SearchError("max_cond_set_size must be >= 0")


@dataclass
class SearchResult:
    """Graph estimate plus everything needed to replay how it was reached.

    ``sepsets`` is populated by constraint-based runs, ``score_total`` by
    score-based runs.  ``log`` records every test, removal, operator and
    orientation in execution order.
    """

    graph: MixedGraph
    sepsets: SepSetMap | None = None
    score_total: float | None = None
    log: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "graph": self.graph.to_json_dict(),
            "sepsets": None if self.sepsets is None else self.sepsets.to_json_dict(),
            "score_total": self.score_total,
            "log": list(self.log),
        }


_TESTERS = {
    ChiSquareTester.name: ChiSquareTester,
    CgLrtTester.name: CgLrtTester,
    RcitTester.name: RcitTester,
}


def make_tester(data_or_oracle, opts: PcOptions) -> CITester:
    """Build (or pass through) the independence tester for a search run.

    Accepts a data table, a DAG used as a d-separation oracle, or an
    already-constructed tester.
    """
    if isinstance(data_or_oracle, CITester):
        return data_or_oracle
    if isinstance(data_or_oracle, MixedGraph):
        return DsepOracle(data_or_oracle, alpha=opts.alpha)
    if isinstance(data_or_oracle, DataTable):
        table = data_or_oracle
        name = opts.test
        if name == "auto":
            all_cat = all(table.is_categorical(n) for n in table.names)
            name = ChiSquareTester.name if all_cat else CgLrtTester.name
        cls = _TESTERS.get(name)
        if cls is None:
            known = ", ".join(sorted(_TESTERS))
            raise SearchError(f"unknown test {name!r}; known tests: {known}")
        return cls(table, alpha=opts.alpha)
    raise SearchError(
        f"expected a DataTable, MixedGraph or CITester, got {type(data_or_oracle).__name__}")


def resolve_variables(tester: CITester, variables) -> list[str]:
    """Variable list for a run, defaulting to everything the tester covers."""
    if variables is not None:
        names = list(variables)
        if len(set(names)) != len(names):
            raise SearchError("duplicate variables")
    elif isinstance(tester, TableTester):
        names = list(tester.table.names)
    elif isinstance(tester, DsepOracle):
        names = list(tester.dag.nodes)
    else:
        raise SearchError("variables must be given for a custom tester")
    if len(names) < 2:
        raise SearchError("need at least 2 variables")
    if isinstance(tester, TableTester):
        unknown = [n for n in names if n not in tester.table.names]
        if unknown:
            raise SearchError(f"variables not in the data: {unknown}")
        if tester.name == ChiSquareTester.name:
            bad = [n for n in names if not tester.table.is_categorical(n)]
            if bad:
                raise SearchError(
                    f"test {tester.name!r} requires categorical variables; "
                    f"continuous: {bad}")
    elif isinstance(tester, DsepOracle):
        unknown = [n for n in names if n not in tester.dag.nodes]
        if unknown:
            raise SearchError(f"variables not in the oracle graph: {unknown}")
    return names


def resolve_max_cond(tester: CITester, opts: PcOptions) -> int | None:
    """Conditioning-set cap: explicit setting, else per-tester policy."""
    if opts.max_cond_set_size is not None:
        return opts.max_cond_set_size
    return None if isinstance(tester, DsepOracle) else DATA_MAX_COND_DEFAULT
