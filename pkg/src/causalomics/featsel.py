"""Two feature-selection routes: mutual-information ranking for mixed
data and Markov-blanket discovery for categorical data.

The ranking route scores every feature against the target and keeps the
top of the list.  The blanket route grows a parents-and-children set
with the max-min heuristic, confirms each member from its own side,
extends the set with the parents and children of each member, then
filters the extension down to true spouses.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from sklearn.feature_selection import mutual_info_classif, mutual_info_regression
from sklearn.metrics import mutual_info_score

from .citests import CITester
from .graphs import SepSetMap
from .search.common import PcOptions, make_tester, resolve_variables
from .tabular import DataTable

logger = logging.getLogger(__name__)

__all__ = [
    "FeatselError",
    "MarkovBlanket",
    "RankedFeatures",
    "mi_select",
    "mmmb",
    "mmpc",
    "mutual_information",
]


class FeatselError(ValueError):
    """Invalid feature-selection input."""


@dataclass(frozen=True)
class RankedFeatures:
    """Features ordered by estimated dependence on the target.

    ``ranking`` holds every non-target feature with its score, strongest
    first; ``selected`` is the top of the list plus the target itself,
    sized so that ``len(selected) == k``.
    """

    target: str
    k: int
    ranking: tuple[tuple[str, float], ...]
    selected: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "method": "mi",
            "target": self.target,
            "alpha_or_k": self.k,
            "selected": list(self.selected),
            "scores": {name: value for name, value in self.ranking},
        }


@dataclass(frozen=True)
class MarkovBlanket:
    """Parents/children of the target, surviving spouses, and their union."""

    target: str
    alpha: float
    pc_set: tuple[str, ...]
    spouses: tuple[str, ...]
    full: tuple[str, ...]
    scores: dict

    def to_json_dict(self) -> dict:
        return {
            "method": "mmmb",
            "target": self.target,
            "alpha_or_k": self.alpha,
            "selected": list(self.full) + [self.target],
            "scores": dict(self.scores),
        }


def _is_constant(values: np.ndarray) -> bool:
    return np.unique(values).size <= 1


def mutual_information(table: DataTable, x: str, y: str,
                       n_neighbors: int = 3, seed: int = 0) -> float:
    """Estimated mutual information between two columns, in nats.

    Categorical pairs use the plug-in estimate from the contingency
    table, so the self-pair gives the empirical entropy.  Any pair with
    a continuous member uses a nearest-neighbour estimator with its
    mixed variant when only one member is continuous; those estimates
    are clamped at zero.  A constant column yields 0 with a warning.
    """
    for name in (x, y):
        if name not in table.names:
            raise FeatselError(f"unknown variable {name!r}")
    x_cat = table.is_categorical(x)
    y_cat = table.is_categorical(y)
    if x == y and not x_cat:
        raise FeatselError("x and y must differ for continuous variables")
    xv = table.column(x)
    yv = table.column(y)
    if _is_constant(xv) or _is_constant(yv):
        constant = x if _is_constant(xv) else y
        logger.warning("column %r is constant; mutual information is 0",
                       constant)
        return 0.0
    if x_cat and y_cat:
        return float(mutual_info_score(xv.astype(int), yv.astype(int)))
    if x_cat or y_cat:
        cont, cat = (yv, xv) if x_cat else (xv, yv)
        value = mutual_info_classif(
            cont.reshape(-1, 1), cat.astype(int), discrete_features=[False],
            n_neighbors=n_neighbors, random_state=seed)[0]
    else:
        value = mutual_info_regression(
            xv.reshape(-1, 1), yv, discrete_features=[False],
            n_neighbors=n_neighbors, random_state=seed)[0]
    return max(0.0, float(value))


def mi_select(table: DataTable, target: str, k: int,
              n_neighbors: int = 3, seed: int = 0) -> RankedFeatures:
    """Keep the ``k - 1`` features most informative about the target.

    The returned subset always contains the target, so ``k`` counts it
    too.  Ties are broken by column order.
    """
    if target not in table.names:
        raise FeatselError(f"unknown target {target!r}")
    if k < 1:
        raise FeatselError("k must be >= 1")
    if k > len(table.names):
        raise FeatselError(
            f"k={k} exceeds the {len(table.names)} available variables")
    features = [n for n in table.names if n != target]
    scored = [(n, mutual_information(table, n, target,
                                     n_neighbors=n_neighbors, seed=seed))
              for n in features]
    order = {n: i for i, n in enumerate(table.names)}
    scored.sort(key=lambda item: (-item[1], order[item[0]]))
    selected = tuple(n for n, _ in scored[:k - 1]) + (target,)
    return RankedFeatures(target=target, k=k, ranking=tuple(scored),
                          selected=selected)


def _min_association(tester: CITester, x: str, target: str,
                     conditioning_pool: list[str]) -> tuple[float, tuple | None]:
    """Worst-case association of ``x`` with the target over all subsets
    of the pool, plus the first separating subset if one exists.

    Association is 1 - p.  Subsets are visited smallest first, in
    column order within a size.
    """
    worst = 1.0
    sepset = None
    for size in range(len(conditioning_pool) + 1):
        for sub in combinations(conditioning_pool, size):
            res = tester.test(x, target, sub)
            worst = min(worst, 1.0 - res.p_value)
            if sepset is None and res.independent:
                sepset = sub
    return worst, sepset


def _mmpc(tester: CITester, names: list[str], target: str,
          alpha: float) -> tuple[list[str], SepSetMap, dict]:
    """Max-min forward growth then backward pruning, from the target's
    side only.

    The output can still contain variables that are not parents or
    children of the target: a variable whose separating set lies outside
    the target's neighbourhood survives both phases.  Callers remove
    those with the reverse-direction check in :func:`_symmetric_pc`.
    """
    sepsets = SepSetMap()
    added_at: dict[str, float] = {}
    cpc: list[str] = []
    remaining = [n for n in names if n != target]
    while remaining:
        best = None
        best_assoc = -1.0
        for x in remaining:
            assoc, sepset = _min_association(tester, x, target, cpc)
            if sepset is not None:
                sepsets.set(x, target, sepset)
            elif best is None or assoc > best_assoc:
                best, best_assoc = x, assoc
        if best is None or best_assoc < 1.0 - alpha:
            break
        cpc.append(best)
        added_at[best] = best_assoc
        remaining.remove(best)

    for x in list(cpc):
        pool = [n for n in cpc if n != x]
        _, sepset = _min_association(tester, x, target, pool)
        if sepset is not None:
            sepsets.set(x, target, sepset)
            cpc.remove(x)
            added_at.pop(x, None)
    order = {n: i for i, n in enumerate(names)}
    return sorted(cpc, key=order.get), sepsets, added_at


def _one_sided(memo: dict, tester: CITester, names: list[str], target: str,
               alpha: float) -> tuple[list[str], SepSetMap, dict]:
    """Memoized one-sided run; each variable is searched at most once."""
    if target not in memo:
        memo[target] = _mmpc(tester, names, target, alpha)
    return memo[target]


def _symmetric_pc(memo: dict, tester: CITester, names: list[str], target: str,
                  alpha: float) -> tuple[list[str], SepSetMap, dict]:
    """One-sided run for the target, keeping only members whose own
    one-sided run finds the target in return.

    The reverse-direction check removes the false positives of the
    one-sided search: a variable that cannot be separated from the
    target inside the target's neighbourhood, yet is separated easily
    inside its own.
    """
    cpc, sepsets, added_at = _one_sided(memo, tester, names, target, alpha)
    kept = [x for x in cpc
            if target in _one_sided(memo, tester, names, x, alpha)[0]]
    return kept, sepsets, added_at


def mmpc(data_or_oracle, target: str, test: str = "auto",
         alpha: float = 0.05) -> list[str]:
    """Parents-and-children set of the target via the max-min heuristic.

    Forward growth and backward pruning run from the target's side;
    each surviving member is then confirmed from its own side, which
    discards variables separable only within their own neighbourhood.
    """
    tester = make_tester(data_or_oracle, PcOptions(alpha=alpha, test=test))
    names = resolve_variables(tester, None)
    if target not in names:
        raise FeatselError(f"unknown target {target!r}")
    pc_set, _, _ = _symmetric_pc({}, tester, names, target, alpha)
    return pc_set


def mmmb(data_or_oracle, target: str, test: str = "auto",
         alpha: float = 0.05) -> MarkovBlanket:
    """Markov blanket of the target: its PC set plus surviving spouses.

    The candidate blanket is the PC set of the target united with the
    PC set of each of its members.  A candidate spouse survives only if
    it is dependent on the target given its separating set extended by
    a PC member through which it entered the candidate blanket — such a
    member is a potential common child, and conditioning on it is what
    unblocks a genuine spouse.  A candidate the target's own search
    never separated gets its separating set from a search over its own
    neighbourhood instead, where one is guaranteed to live.
    """
    tester = make_tester(data_or_oracle, PcOptions(alpha=alpha, test=test))
    names = resolve_variables(tester, None)
    if target not in names:
        raise FeatselError(f"unknown target {target!r}")
    memo: dict[str, tuple] = {}
    pc_set, sepsets, added_at = _symmetric_pc(memo, tester, names, target,
                                              alpha)

    candidates: set[str] = set()
    member_pc_sets: dict[str, set[str]] = {}
    for member in pc_set:
        member_pc, _, _ = _symmetric_pc(memo, tester, names, member, alpha)
        member_pc_sets[member] = set(member_pc)
        candidates.update(member_pc)
    candidates -= set(pc_set)
    candidates.discard(target)

    scores = {x: added_at[x] for x in pc_set}
    spouses = []
    for x in sorted(candidates, key=names.index):
        base = sepsets.get(x, target)
        if base is None:
            own_pc, _, _ = _one_sided(memo, tester, names, x, alpha)
            pool = [n for n in own_pc if n != target]
            _, base = _min_association(tester, x, target, pool)
            base = base or ()
        for member in pc_set:
            if x not in member_pc_sets[member]:
                continue
            if member in base:
                conditioning = base
            else:
                conditioning = tuple(base) + (member,)
            res = tester.test(x, target, conditioning)
            if not res.independent:
                spouses.append(x)
                scores[x] = 1.0 - res.p_value
                break

    order = {n: i for i, n in enumerate(names)}
    full = sorted(set(pc_set) | set(spouses), key=order.get)
    return MarkovBlanket(target=target, alpha=alpha,
                         pc_set=tuple(pc_set), spouses=tuple(spouses),
                         full=tuple(full), scores=scores)
