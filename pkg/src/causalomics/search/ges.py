"""Greedy equivalence-class search with optional parallel scoring.

The state is always a CPDAG.  A forward sweep repeatedly applies the
best edge-insertion operator with a positive score gain, then a
backward sweep applies edge deletions the same way.  Candidate deltas
are pure reads and may be evaluated concurrently; the winning operator
is chosen by highest delta with ties broken by the lowest enumeration
key, so results do not depend on the degree of parallelism.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

from ..graphs import MixedGraph, dag_to_cpdag, pdag_to_dag
from ..scores import BdeuScore, CgBicScore, DecomposableScore, DiscreteBicScore
from ..tabular import DataTable
from .common import SearchError, SearchResult

__all__ = ["ges", "fges"]

_SCORES = {
    "discrete_bic": DiscreteBicScore,
    "bdeu": BdeuScore,
    "cg_bic": CgBicScore,
}
_SCORE_NAMES = {cls: name for name, cls in _SCORES.items()}

_CATEGORICAL_ONLY = ("discrete_bic", "bdeu")


def _make_scorer(data, score) -> tuple[DecomposableScore, str]:
    if isinstance(score, DecomposableScore):
        return score, _SCORE_NAMES.get(type(score), type(score).__name__)
    if not isinstance(data, DataTable):
        raise SearchError(
            f"expected a DataTable, got {type(data).__name__}")
    if score == "auto":
        all_cat = all(data.is_categorical(n) for n in data.names)
        score = "discrete_bic" if all_cat else "cg_bic"
    cls = _SCORES.get(score)
    if cls is None:
        known = ", ".join(sorted(_SCORES))
        raise SearchError(f"unknown score {score!r}; known scores: {known}")
    return cls(data), score


@dataclass(frozen=True)
class _Operator:
    """One Insert or Delete candidate with its enumeration key."""

    kind: str
    x: str
    y: str
    subset: tuple[str, ...]
    key: tuple


def _is_clique(g: MixedGraph, nodes) -> bool:
    return all(g.has_edge(a, b) for a, b in combinations(sorted(nodes), 2))


def _blocks_all_semidirected(g: MixedGraph, start: str, goal: str,
                             blocked: set) -> bool:
    """True iff every path start ~> goal made of undirected or forward
    edges passes through ``blocked``."""
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in g.children(v) + g.undirected_neighbors(v):
            if w in seen or w in blocked:
                continue
            if w == goal:
                return False
            seen.add(w)
            stack.append(w)
    return True


def _subsets(pool):
    """Subsets ordered by size then position, as (tuple, index tuple)."""
    items = list(pool)
    for size in range(len(items) + 1):
        for idx in combinations(range(len(items)), size):
            yield tuple(items[i] for i in idx), idx


def _insert_candidates(g: MixedGraph, names) -> list[_Operator]:
    out = []
    for ix, x in enumerate(names):
        for iy, y in enumerate(names):
            if x == y or g.has_edge(x, y):
                continue
            pool = [n for n in g.undirected_neighbors(y) if not g.has_edge(n, x)]
            for t, idx in _subsets(pool):
                out.append(_Operator("insert", x, y, t, (ix, iy, idx)))
    return out


def _delete_candidates(g: MixedGraph, names) -> list[_Operator]:
    out = []
    for ix, x in enumerate(names):
        for iy, y in enumerate(names):
            if x == y:
                continue
            if not (g.is_undirected_edge(x, y) or g.is_directed_edge(x, y)):
                continue
            pool = [n for n in g.undirected_neighbors(y)
                    if n != x and g.has_edge(n, x)]
            for h, idx in _subsets(pool):
                out.append(_Operator("delete", x, y, h, (ix, iy, idx)))
    return out


def _na_set(g: MixedGraph, x: str, y: str) -> set:
    """Undirected neighbours of y that are also adjacent to x."""
    return {n for n in g.undirected_neighbors(y)
            if n != x and g.has_edge(n, x)}


def _insert_delta(g: MixedGraph, scorer: DecomposableScore,
                  op: _Operator) -> float | None:
    na = _na_set(g, op.x, op.y)
    grown = na | set(op.subset)
    if not _is_clique(g, grown):
        return None
    if not _blocks_all_semidirected(g, op.y, op.x, grown):
        return None
    base = sorted(grown | set(g.parents(op.y)))
    return (scorer.value(op.y, base + [op.x]) - scorer.value(op.y, base))


def _delete_delta(g: MixedGraph, scorer: DecomposableScore,
                  op: _Operator) -> float | None:
    na = _na_set(g, op.x, op.y)
    kept = na - set(op.subset)
    if not _is_clique(g, kept):
        return None
    parents = set(g.parents(op.y))
    rest = sorted(kept | (parents - {op.x}))
    return (scorer.value(op.y, rest) - scorer.value(op.y, rest + [op.x]))


def _apply_insert(g: MixedGraph, op: _Operator) -> MixedGraph:
    work = g.copy(kind="pdag")
    work.add_directed(op.x, op.y)
    for t in op.subset:
        work.orient(t, op.y)
    return dag_to_cpdag(pdag_to_dag(work))


def _apply_delete(g: MixedGraph, op: _Operator) -> MixedGraph:
    work = g.copy(kind="pdag")
    work.remove_edge(op.x, op.y)
    for h in op.subset:
        if work.is_undirected_edge(op.y, h):
            work.orient(op.y, h)
        if work.has_edge(op.x, h) and work.is_undirected_edge(op.x, h):
            work.orient(op.x, h)
    return dag_to_cpdag(pdag_to_dag(work))


def _best_operator(g, scorer, candidates, evaluate, pool) -> tuple:
    if pool is None:
        deltas = [evaluate(g, scorer, op) for op in candidates]
    else:
        deltas = list(pool.map(lambda op: evaluate(g, scorer, op),
                               candidates, chunksize=16))
    best = None
    best_delta = 0.0
    for op, delta in zip(candidates, deltas):
        if delta is None or delta <= 0.0:
            continue
        if best is None or delta > best_delta or (delta == best_delta
                                                  and op.key < best.key):
            best, best_delta = op, delta
    return best, best_delta


def _phase(g, scorer, names, kind, pool, log) -> MixedGraph:
    gen = _insert_candidates if kind == "insert" else _delete_candidates
    eva = _insert_delta if kind == "insert" else _delete_delta
    app = _apply_insert if kind == "insert" else _apply_delete
    while True:
        best, delta = _best_operator(g, scorer, gen(g, names), eva, pool)
        if best is None:
            return g
        g = app(g, best)
        log.append({"event": kind, "x": best.x, "y": best.y,
                    "subset": list(best.subset), "delta": delta})


def _run(data, variables, score, parallelism: int, algorithm: str) -> SearchResult:
    if parallelism < 1:
        raise SearchError("parallelism must be >= 1")
    scorer, score_name = _make_scorer(data, score)
    table = scorer.table
    names = list(variables) if variables is not None else list(table.names)
    if len(names) < 2:
        raise SearchError("need at least 2 variables")
    unknown = [n for n in names if n not in table.names]
    if unknown:
        raise SearchError(f"variables not in the data: {unknown}")
    if score_name in _CATEGORICAL_ONLY:
        bad = [n for n in names if not table.is_categorical(n)]
        if bad:
            raise SearchError(
                f"score {score_name!r} requires categorical variables; "
                f"continuous: {bad}")

    log: list = []
    g = MixedGraph(names, kind="cpdag")
    pool = ThreadPoolExecutor(max_workers=parallelism) if parallelism > 1 else None
    try:
        log.append({"event": "phase", "name": "forward"})
        g = _phase(g, scorer, names, "insert", pool, log)
        log.append({"event": "phase", "name": "backward"})
        g = _phase(g, scorer, names, "delete", pool, log)
    finally:
        if pool is not None:
            pool.shutdown()

    total = scorer.total(pdag_to_dag(g))
    return SearchResult(graph=g.copy(kind="cpdag"), score_total=total,
                        log=log, params={
                            "algorithm": algorithm, "score": score_name,
                            "parallelism": parallelism, "variables": names,
                        })


def ges(data, variables=None, score="auto") -> SearchResult:
    """Two-phase greedy search returning the best-scoring CPDAG."""
    return _run(data, variables, score, 1, "ges")


def fges(data, variables=None, score="auto", parallelism: int = 1) -> SearchResult:
    """Greedy search with concurrent candidate scoring.

    Output is identical to :func:`ges` for every parallelism level; only
    wall-clock time changes.
    """
    return _run(data, variables, score, parallelism, "fges")
