"""Constraint-based structure search over observed variables.

The skeleton phase removes edges level by level, conditioning only on
current neighbours of one endpoint, then unshielded colliders are
oriented from the recorded separating sets and the orientation closure
is applied.  A variant accepts a precomputed undirected skeleton and
only ever shrinks it.
"""

from __future__ import annotations

from itertools import combinations

from ..citests import CITester
from ..graphs import MixedGraph, SepSetMap, apply_meek_rules, orient_v_structures
from .common import (
    PcOptions,
    SearchError,
    SearchResult,
    make_tester,
    resolve_max_cond,
    resolve_variables,
)

__all__ = ["pc", "pc_on_skeleton"]


def _log_test(log: list, a: str, b: str, z, res, level) -> None:
    log.append({
        "event": "test", "x": a, "y": b, "z": list(z),
        "p_value": res.p_value, "independent": res.independent,
        "level": level,
    })


def _max_open_level(g: MixedGraph) -> int:
    """Largest conditioning-set size any remaining edge could still supply."""
    best = -1
    for a, b, _, _ in g.edges():
        best = max(best, len(g.adjacent(a)) - 1, len(g.adjacent(b)) - 1)
    return best


def _skeleton_phase(g: MixedGraph, tester: CITester, sepsets: SepSetMap,
                    stable: bool, max_cond: int | None, log: list) -> None:
    """Level-wise edge elimination; mutates ``g`` in place.

    With ``stable`` the conditioning-set candidates at each level come
    from the adjacencies as they stood when the level began, so results
    do not depend on the order edges are visited within a level.
    """
    level = 0
    while max_cond is None or level <= max_cond:
        snapshot = {v: g.adjacent(v) for v in g.nodes} if stable else None

        def neighbours(v: str) -> list[str]:
            return snapshot[v] if snapshot is not None else g.adjacent(v)

        for a, b, _, _ in list(g.edges()):
            if not g.has_edge(a, b):
                continue
            tried: set[frozenset] = set()
            removed = False
            for base in ([v for v in neighbours(a) if v != b],
                         [v for v in neighbours(b) if v != a]):
                if removed or len(base) < level:
                    continue
                for sub in combinations(base, level):
                    key = frozenset(sub)
                    if key in tried:
                        continue
                    tried.add(key)
                    res = tester.test(a, b, sub)
                    _log_test(log, a, b, sub, res, level)
                    if res.independent:
                        g.remove_edge(a, b)
                        sepsets.set(a, b, sub)
                        log.append({"event": "remove_edge", "x": a, "y": b,
                                    "sepset": list(sub), "level": level})
                        removed = True
                        break
        level += 1
        if _max_open_level(g) < level:
            break


def _unshielded_pairs(g: MixedGraph) -> list[tuple[str, str]]:
    """Nonadjacent endpoint pairs of unshielded triples, in canonical order."""
    pairs = set()
    for b in g.nodes:
        for a, c in combinations(g.adjacent(b), 2):
            if not g.has_edge(a, c):
                pairs.add((a, c))
    return sorted(pairs)


def _find_missing_sepsets(g: MixedGraph, tester: CITester, sepsets: SepSetMap,
                          max_cond: int | None, log: list) -> None:
    """Search separating sets for unshielded pairs that were never tested.

    Needed when the run starts from a given skeleton: pairs nonadjacent
    from the outset have no recorded sepset, yet collider orientation
    needs one.  Subsets of either endpoint's neighbourhood are tried in
    the same order as the elimination phase; pairs that cannot be
    separated are logged and left unoriented.
    """
    for a, c in _unshielded_pairs(g):
        if sepsets.get(a, c) is not None:
            continue
        cap = max(len(g.adjacent(a)), len(g.adjacent(c)))
        if max_cond is not None:
            cap = min(cap, max_cond)
        found = False
        tried: set[frozenset] = set()
        for level in range(cap + 1):
            for base in ([v for v in g.adjacent(a) if v != c],
                         [v for v in g.adjacent(c) if v != a]):
                if found or len(base) < level:
                    continue
                for sub in combinations(base, level):
                    key = frozenset(sub)
                    if key in tried:
                        continue
                    tried.add(key)
                    res = tester.test(a, c, sub)
                    _log_test(log, a, c, sub, res, "sepset_search")
                    if res.independent:
                        sepsets.set(a, c, sub)
                        log.append({"event": "sepset_found", "x": a, "y": c,
                                    "sepset": list(sub)})
                        found = True
                        break
            if found:
                break
        if not found:
            log.append({"event": "sepset_not_found", "x": a, "y": c})


def _orient(g: MixedGraph, sepsets: SepSetMap, log: list) -> MixedGraph:
    out = orient_v_structures(g, sepsets, log=log)
    out = apply_meek_rules(out, log=log)
    return out.copy(kind="cpdag")


def pc(data_or_oracle, variables=None, opts: PcOptions | None = None) -> SearchResult:
    """Estimate a CPDAG from data, an oracle graph or a custom tester."""
    opts = opts if opts is not None else PcOptions()
    tester = make_tester(data_or_oracle, opts)
    names = resolve_variables(tester, variables)
    max_cond = resolve_max_cond(tester, opts)

    log: list = []
    sepsets = SepSetMap()
    g = MixedGraph.complete(names, kind="skeleton")
    _skeleton_phase(g, tester, sepsets, opts.stable, max_cond, log)
    graph = _orient(g, sepsets, log)
    return SearchResult(graph=graph, sepsets=sepsets, log=log, params={
        "algorithm": "pc", "alpha": tester.alpha, "test": tester.name,
        "max_cond_set_size": max_cond, "stable": opts.stable,
        "variables": names,
    })


def pc_on_skeleton(skeleton: MixedGraph, data_or_oracle,
                   opts: PcOptions | None = None) -> SearchResult:
    """Run the constraint search with a given undirected graph as the start.

    Edge removals only ever shrink the given skeleton.  Unshielded pairs
    that were nonadjacent from the outset get a separating-set search
    before orientation.
    """
    opts = opts if opts is not None else PcOptions()
    tester = make_tester(data_or_oracle, opts)
    names = resolve_variables(tester, list(skeleton.nodes))
    max_cond = resolve_max_cond(tester, opts)

    g = MixedGraph(names, kind="skeleton")
    for a, b, _, _ in skeleton.edges():
        if not skeleton.is_undirected_edge(a, b):
            raise SearchError(f"skeleton edge {a!r}-{b!r} is not undirected")
        g.add_undirected(a, b)

    log: list = []
    sepsets = SepSetMap()
    _skeleton_phase(g, tester, sepsets, opts.stable, max_cond, log)
    _find_missing_sepsets(g, tester, sepsets, max_cond, log)
    graph = _orient(g, sepsets, log)
    return SearchResult(graph=graph, sepsets=sepsets, log=log, params={
        "algorithm": "pc_on_skeleton", "alpha": tester.alpha,
        "test": tester.name, "max_cond_set_size": max_cond,
        "stable": opts.stable, "variables": names,
    })
