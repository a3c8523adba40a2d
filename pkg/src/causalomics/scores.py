"""Decomposable local scores for score-based structure search.

A graph's total score is the sum over nodes of a local score that
depends only on the node and its parents, so search operators can be
priced by rescoring one family.  Three scores are provided: BIC for the
all-categorical case, BDeu marginal likelihood, and a BIC under the
conditional-Gaussian model for mixed columns.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .cglik import CgError, cg_loglik, config_index
from .graphs import MixedGraph
from .tabular import DataTable


class ScoreError(ValueError):
    """Raised for invalid scoring requests."""


@dataclass(frozen=True)
class LocalScore:
    """Score of one node given one parent set; higher is better."""

    value: float
    node: str
    parents: tuple[str, ...]
    params_used: int


class DecomposableScore:
    """Base class handling canonicalization and the memo cache.

    The cache is keyed by (node, sorted parents) and safe under
    concurrent insert; scoring is pure so duplicated computation under a
    race is harmless.
    """

    name = "base"

    def __init__(self, table: DataTable, cache: bool = True):
        self.table = table
        self._pos = {n: i for i, n in enumerate(table.names)}
        self._cache: dict | None = {} if cache else None
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    def _canonical(self, node: str, parents) -> tuple[str, tuple[str, ...]]:
        if node not in self._pos:
            raise ScoreError(f"unknown variable {node!r}")
        out = []
        for p in set(parents):
            if p not in self._pos:
                raise ScoreError(f"unknown variable {p!r}")
            if p == node:
                raise ScoreError(f"{node!r} cannot be its own parent")
            out.append(p)
        return node, tuple(sorted(out, key=self._pos.__getitem__))

    def local(self, node: str, parents=()) -> LocalScore:
        node, parents = self._canonical(node, parents)
        if self._cache is None:
            return self._compute(node, parents)
        key = (node, parents)
        with self._lock:
            found = self._cache.get(key)
            if found is not None:
                self._hits += 1
        if found is not None:
            return found
        result = self._compute(node, parents)
        with self._lock:
            self._misses += 1
            self._cache.setdefault(key, result)
        return result

    def value(self, node: str, parents=()) -> float:
        return self.local(node, parents).value

    def total(self, dag: MixedGraph) -> float:
        """Sum of local scores over a DAG's families."""
        dag.require_dag()
        return sum(self.value(node, dag.parents(node)) for node in dag.nodes)

    def cache_stats(self) -> dict:
        with self._lock:
            return {
                "hits": self._hits,
                "misses": self._misses,
                "size": len(self._cache) if self._cache is not None else 0,
            }

    def _compute(self, node: str, parents: tuple[str, ...]) -> LocalScore:
        raise NotImplementedError


def _categorical_counts(table: DataTable, node: str,
                        parents: tuple[str, ...]) -> np.ndarray:
    """Counts indexed (parent configuration, node level)."""
    for name in (node, *parents):
        if not table.is_categorical(name):
            raise ScoreError(f"{name!r} is not categorical")
    r = table.cardinality(node)
    cards = [table.cardinality(p) for p in parents]
    q = int(np.prod(cards, dtype=np.int64)) if parents else 1
    cfg = config_index([table.column(p) for p in parents], cards,
                       table.n_rows)
    flat = np.bincount(cfg * r + table.column(node), minlength=q * r)
    return flat.reshape(q, r).astype(float)


class DiscreteBicScore(DecomposableScore):
    """Multinomial log-likelihood penalized by (k/2)·ln n with
    k = (card(node) − 1) × product of parent cardinalities."""

    name = "discrete_bic"

    def __init__(self, table: DataTable, penalty_discount: float = 1.0,
                 cache: bool = True):
        super().__init__(table, cache)
        self.penalty_discount = float(penalty_discount)

    def _compute(self, node, parents):
        counts = _categorical_counts(self.table, node, parents)
        row_totals = counts.sum(axis=1, keepdims=True)
        nz = counts > 0
        ll = float(np.sum(counts[nz]
                          * np.log(counts[nz]
                                   / np.broadcast_to(row_totals,
                                                     counts.shape)[nz])))
        q, r = counts.shape
        k = (r - 1) * q
        value = ll - self.penalty_discount * 0.5 * k * np.log(self.table.n_rows)
        return LocalScore(float(value), node, parents, k)


class BdeuScore(DecomposableScore):
    """Bayesian-Dirichlet equivalent uniform marginal likelihood."""

    name = "bdeu"

    def __init__(self, table: DataTable, ess: float = 1.0,
                 cache: bool = True):
        super().__init__(table, cache)
        if ess <= 0:
            raise ScoreError("ess must be positive")
        self.ess = float(ess)

    def _compute(self, node, parents):
        counts = _categorical_counts(self.table, node, parents)
        q, r = counts.shape
        a_config = self.ess / q
        a_cell = self.ess / (q * r)
        row_totals = counts.sum(axis=1)
        value = float(
            np.sum(gammaln(a_config) - gammaln(a_config + row_totals))
            + np.sum(gammaln(a_cell + counts) - gammaln(a_cell)))
        return LocalScore(value, node, parents, (r - 1) * q)


class CgBicScore(DecomposableScore):
    """BIC under the conditional-Gaussian model for mixed columns: the
    node's conditional log-likelihood is the block likelihood of
    {node} ∪ parents minus the block likelihood of the parents alone."""

    name = "cg_bic"

    def __init__(self, table: DataTable, penalty_discount: float = 1.0,
                 cache: bool = True):
        super().__init__(table, cache)
        self.penalty_discount = float(penalty_discount)

    def _compute(self, node, parents):
        try:
            ll_full, k_full = cg_loglik(self.table, (node, *parents))
            ll_pa, k_pa = cg_loglik(self.table, parents)
        except CgError as exc:
            raise ScoreError(str(exc)) from None
        k = k_full - k_pa
        value = (ll_full - ll_pa
                 - self.penalty_discount * 0.5 * k * np.log(self.table.n_rows))
        return LocalScore(float(value), node, parents, k)


def discrete_bic(table: DataTable, node: str, parents=(),
                 penalty_discount: float = 1.0) -> LocalScore:
    return DiscreteBicScore(table, penalty_discount,
                            cache=False).local(node, parents)


def bdeu(table: DataTable, node: str, parents=(),
         ess: float = 1.0) -> LocalScore:
    return BdeuScore(table, ess, cache=False).local(node, parents)


def cg_bic(table: DataTable, node: str, parents=(),
           penalty_discount: float = 1.0) -> LocalScore:
    return CgBicScore(table, penalty_discount,
                      cache=False).local(node, parents)
