"""Structure search that stays sound when latent confounders may exist.

After the usual skeleton phase, surviving edges are re-tested against
subsets drawn from each endpoint's Possible-D-SEP set, all endpoint
marks are reset to circles, colliders are re-oriented from the final
separating sets, and four orientation rules run to a fixed point.  A
bidirected edge in the output flags an unmeasured common cause; marks
left as circles are undecided.
"""

from __future__ import annotations

from collections import deque
from itertools import combinations

from ..graphs import Mark, MixedGraph, SepSetMap
from .common import (
    PcOptions,
    SearchResult,
    make_tester,
    resolve_max_cond,
    resolve_variables,
)
from .pc import _log_test, _skeleton_phase

__all__ = ["fci", "possible_dsep"]


def possible_dsep(g: MixedGraph, a: str, b: str) -> list[str]:
    """Nodes reachable from ``a`` along paths whose every inner node is
    either a collider on the path or part of a triangle with its path
    neighbours.  ``a`` and ``b`` are excluded from the result."""
    reachable: set[str] = set()
    # state: (previous node, current node) to judge the next inner triple
    seen: set[tuple[str, str]] = set()
    queue = deque((a, v) for v in g.adjacent(a))
    while queue:
        prev, cur = queue.popleft()
        if (prev, cur) in seen:
            continue
        seen.add((prev, cur))
        reachable.add(cur)
        for nxt in g.adjacent(cur):
            if nxt == prev or nxt == a:
                continue
            collider = g.arrowhead_at(cur, prev) and g.arrowhead_at(cur, nxt)
            triangle = g.has_edge(prev, nxt)
            if collider or triangle:
                queue.append((cur, nxt))
    reachable.discard(a)
    reachable.discard(b)
    return sorted(reachable, key=g.nodes.index)


def _pds_prune(g: MixedGraph, tester, sepsets: SepSetMap,
               max_cond: int | None, log: list) -> None:
    """Re-test every remaining edge against Possible-D-SEP subsets.

    Reachability is judged on a provisional copy with arrowheads into
    unshielded colliders; both heads of a mutual collider pair stay, so
    no conflict can arise here.
    """
    oriented = g.copy()
    _orient_colliders(oriented, sepsets, [])
    for a, b, _, _ in list(g.edges()):
        if not g.has_edge(a, b):
            continue
        tried: set[frozenset] = set()
        removed = False
        for base in (possible_dsep(oriented, a, b),
                     possible_dsep(oriented, b, a)):
            if removed:
                break
            cap = len(base) if max_cond is None else min(max_cond, len(base))
            for size in range(cap + 1):
                if removed:
                    break
                for sub in combinations(base, size):
                    key = frozenset(sub)
                    if key in tried:
                        continue
                    tried.add(key)
                    res = tester.test(a, b, sub)
                    _log_test(log, a, b, sub, res, "possible_dsep")
                    if res.independent:
                        g.remove_edge(a, b)
                        oriented.remove_edge(a, b)
                        sepsets.set(a, b, sub)
                        log.append({"event": "remove_edge", "x": a, "y": b,
                                    "sepset": list(sub),
                                    "level": "possible_dsep"})
                        removed = True
                        break


def _set_mark(g: MixedGraph, at: str, other: str, mark: Mark,
              rule: str, log: list) -> None:
    g.set_mark(at, other, mark)
    log.append({"event": "set_mark", "at": at, "other": other,
                "mark": mark.name.lower(), "rule": rule})


def _orient_colliders(g: MixedGraph, sepsets: SepSetMap, log: list) -> None:
    """Arrowheads into the middle of each unshielded noncollider-excluded
    triple; outer endpoint marks are left as they are."""
    triples = []
    for b in g.nodes:
        for a, c in combinations(sorted(g.adjacent(b)), 2):
            if not g.has_edge(a, c):
                triples.append((a, b, c))
    triples.sort()
    for a, b, c in triples:
        sep = sepsets.get(a, c)
        if sep is None or b in sep:
            continue
        for outer in (a, c):
            if g.mark_at(b, outer) is not Mark.ARROW:
                _set_mark(g, b, outer, Mark.ARROW, "collider", log)


def _rule_r1(g: MixedGraph, log: list) -> bool:
    """a *-> b o-* c with a, c nonadjacent: orient b -> c."""
    changed = False
    for b in g.nodes:
        for a in g.adjacent(b):
            if not g.arrowhead_at(b, a):
                continue
            for c in g.adjacent(b):
                if c == a or g.has_edge(a, c):
                    continue
                if g.mark_at(b, c) is Mark.CIRCLE:
                    _set_mark(g, b, c, Mark.TAIL, "R1", log)
                    if g.mark_at(c, b) is not Mark.ARROW:
                        _set_mark(g, c, b, Mark.ARROW, "R1", log)
                    changed = True
    return changed


def _rule_r2(g: MixedGraph, log: list) -> bool:
    """a -> b *-> c or a *-> b -> c, with a *-o c: arrowhead at c."""
    changed = False
    for a in g.nodes:
        for c in g.adjacent(a):
            if g.mark_at(c, a) is not Mark.CIRCLE:
                continue
            for b in g.adjacent(a):
                if b == c or not g.has_edge(b, c):
                    continue
                chain = ((g.is_directed_edge(a, b) and g.arrowhead_at(c, b))
                         or (g.arrowhead_at(b, a) and g.is_directed_edge(b, c)))
                if chain:
                    _set_mark(g, c, a, Mark.ARROW, "R2", log)
                    changed = True
                    break
    return changed


def _rule_r3(g: MixedGraph, log: list) -> bool:
    """a *-> b <-* c, a *-o d o-* c, a, c nonadjacent, d *-o b:
    arrowhead at b on the d-b edge."""
    changed = False
    for b in g.nodes:
        into_b = [a for a in g.adjacent(b) if g.arrowhead_at(b, a)]
        for a, c in combinations(into_b, 2):
            if g.has_edge(a, c):
                continue
            for d in g.adjacent(b):
                if d in (a, c) or g.mark_at(b, d) is not Mark.CIRCLE:
                    continue
                if not (g.has_edge(a, d) and g.mark_at(d, a) is Mark.CIRCLE):
                    continue
                if not (g.has_edge(c, d) and g.mark_at(d, c) is Mark.CIRCLE):
                    continue
                _set_mark(g, b, d, Mark.ARROW, "R3", log)
                changed = True
    return changed


def _discriminating_source(g: MixedGraph, a: str, b: str, c: str) -> str | None:
    """Far endpoint of a discriminating path ending <..., a, b, c>.

    Walks backwards from ``a`` through nodes that are colliders on the
    path and parents of ``c``; the first node found that is not adjacent
    to ``c`` closes the path.
    """
    if not (g.arrowhead_at(a, b) and g.is_directed_edge(a, c)):
        return None
    visited = {a, b, c}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        for v in g.adjacent(u):
            if v in visited or not g.arrowhead_at(u, v):
                continue
            if not g.has_edge(v, c):
                return v
            if g.is_directed_edge(v, c) and g.arrowhead_at(v, u):
                visited.add(v)
                queue.append(v)
    return None


def _rule_r4(g: MixedGraph, sepsets: SepSetMap, log: list) -> bool:
    """Discriminating-path rule: settle the circle at b on the b-c edge."""
    changed = False
    for b in g.nodes:
        for c in g.adjacent(b):
            if g.mark_at(b, c) is not Mark.CIRCLE:
                continue
            for a in g.adjacent(b):
                if a == c or not g.arrowhead_at(b, a):
                    continue
                d = _discriminating_source(g, a, b, c)
                if d is None:
                    continue
                sep = sepsets.get(d, c)
                if sep is None:
                    continue
                if b in sep:
                    _set_mark(g, b, c, Mark.TAIL, "R4", log)
                    if g.mark_at(c, b) is not Mark.ARROW:
                        _set_mark(g, c, b, Mark.ARROW, "R4", log)
                else:
                    for x, y in ((a, b), (b, c)):
                        for at, other in ((x, y), (y, x)):
                            if g.mark_at(at, other) is not Mark.ARROW:
                                _set_mark(g, at, other, Mark.ARROW, "R4", log)
                changed = True
                break
    return changed


def _apply_rules(g: MixedGraph, sepsets: SepSetMap, log: list) -> None:
    changed = True
    while changed:
        changed = False
        changed |= _rule_r1(g, log)
        changed |= _rule_r2(g, log)
        changed |= _rule_r3(g, log)
        changed |= _rule_r4(g, sepsets, log)


def fci(data_or_oracle, variables=None, opts: PcOptions | None = None) -> SearchResult:
    """Estimate a partial ancestral graph from data or an oracle."""
    opts = opts if opts is not None else PcOptions()
    tester = make_tester(data_or_oracle, opts)
    names = resolve_variables(tester, variables)
    max_cond = resolve_max_cond(tester, opts)

    log: list = []
    sepsets = SepSetMap()
    g = MixedGraph.complete(names, kind="skeleton")
    _skeleton_phase(g, tester, sepsets, opts.stable, max_cond, log)
    log.append({"event": "stage", "name": "possible_dsep"})
    _pds_prune(g, tester, sepsets, max_cond, log)

    pag = MixedGraph(names, kind="pag")
    for a, b, _, _ in g.edges():
        pag.add_edge(a, b, Mark.CIRCLE, Mark.CIRCLE)
    log.append({"event": "stage", "name": "orientation"})
    _orient_colliders(pag, sepsets, log)
    _apply_rules(pag, sepsets, log)

    return SearchResult(graph=pag, sepsets=sepsets, log=log, params={
        "algorithm": "fci", "alpha": tester.alpha, "test": tester.name,
        "max_cond_set_size": max_cond, "stable": opts.stable,
        "variables": names,
    })
