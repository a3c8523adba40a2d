"""Mixed-endpoint graphs: DAGs, CPDAGs, PAGs and undirected skeletons.

An edge stores one mark per endpoint (tail / arrow / circle).  A directed
edge a -> b is tail-at-a, arrow-at-b; an undirected edge is tail-tail; PAG
edges may carry circles.  Node order is canonical (dataset column order)
and all iteration follows it, so every operation here is deterministic.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Sequence

logger = logging.getLogger(__name__)


class Mark(enum.Enum):
    TAIL = "tail"
    ARROW = "arrow"
    CIRCLE = "circle"


class GraphError(ValueError):
    """Raised for malformed graphs or invalid graph operations."""


class MixedGraph:
    """Node list plus a set of edges with per-endpoint marks.

    ``kind`` is informational ("dag", "cpdag", "pag", "skeleton", "pdag");
    equality ignores it.  Edges are stored once per unordered pair, keyed
    by canonical node-index order.
    """

    def __init__(self, nodes: Sequence[str], kind: str = "pdag"):
        self.nodes = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("duplicate node names")
        self._index = {n: i for i, n in enumerate(self.nodes)}
        # (i, j) with i < j -> (mark at i-end, mark at j-end)
        self._edges: dict[tuple[int, int], tuple[Mark, Mark]] = {}
        self.kind = kind

    # -- construction helpers -------------------------------------------------

    @classmethod
    def complete(cls, nodes: Sequence[str], mark: Mark = Mark.TAIL,
                 kind: str = "skeleton") -> "MixedGraph":
        g = cls(nodes, kind=kind)
        for a, b in combinations(g.nodes, 2):
            g.add_edge(a, b, mark, mark)
        return g

    @classmethod
    def from_edges(cls, nodes: Sequence[str],
                   directed: Iterable[tuple[str, str]] = (),
                   undirected: Iterable[tuple[str, str]] = (),
                   kind: str = "pdag") -> "MixedGraph":
        g = cls(nodes, kind=kind)
        for a, b in directed:
            g.add_directed(a, b)
        for a, b in undirected:
            g.add_undirected(a, b)
        return g

    def copy(self, kind: str | None = None) -> "MixedGraph":
        g = MixedGraph(self.nodes, kind=kind or self.kind)
        g._edges = dict(self._edges)
        return g

    # -- basic edge access ----------------------------------------------------

    def _key(self, a: str, b: str) -> tuple[int, int]:
        ia, ib = self._index_of(a), self._index_of(b)
        if ia == ib:
            raise GraphError(f"self-loop at {a!r}")
        return (ia, ib) if ia < ib else (ib, ia)

    def _index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise GraphError(f"unknown node {name!r}") from None

    def has_edge(self, a: str, b: str) -> bool:
        return self._key(a, b) in self._edges

    def add_edge(self, a: str, b: str, mark_a: Mark, mark_b: Mark) -> None:
        key = self._key(a, b)
        if key in self._edges:
            raise GraphError(f"edge {a!r}-{b!r} already present")
        if self._index[a] > self._index[b]:
            mark_a, mark_b = mark_b, mark_a
        self._edges[key] = (mark_a, mark_b)

    def add_directed(self, a: str, b: str) -> None:
        """Add a -> b."""
        self.add_edge(a, b, Mark.TAIL, Mark.ARROW)

    def add_undirected(self, a: str, b: str) -> None:
        self.add_edge(a, b, Mark.TAIL, Mark.TAIL)

    def remove_edge(self, a: str, b: str) -> None:
        key = self._key(a, b)
        if key not in self._edges:
            raise GraphError(f"no edge {a!r}-{b!r}")
        del self._edges[key]

    def mark_at(self, a: str, b: str) -> Mark:
        """Mark at the ``a`` end of the a-b edge."""
        key = self._key(a, b)
        marks = self._edges[key]
        return marks[0] if self._index[a] < self._index[b] else marks[1]

    def set_mark(self, a: str, b: str, mark: Mark) -> None:
        """Set the mark at the ``a`` end of the a-b edge."""
        key = self._key(a, b)
        old = self._edges[key]
        if self._index[a] < self._index[b]:
            self._edges[key] = (mark, old[1])
        else:
            self._edges[key] = (old[0], mark)

    def orient(self, a: str, b: str) -> None:
        """Turn the a-b edge into a -> b."""
        self.set_mark(a, b, Mark.TAIL)
        self.set_mark(b, a, Mark.ARROW)

    # -- queries --------------------------------------------------------------

    def edges(self) -> Iterator[tuple[str, str, Mark, Mark]]:
        """Edges in canonical order as (a, b, mark_a, mark_b) with a < b."""
        for (ia, ib), (ma, mb) in sorted(self._edges.items()):
            yield self.nodes[ia], self.nodes[ib], ma, mb

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    def adjacent(self, a: str) -> list[str]:
        ia = self._index_of(a)
        out = []
        for (i, j) in self._edges:
            if i == ia:
                out.append(j)
            elif j == ia:
                out.append(i)
        return [self.nodes[i] for i in sorted(out)]

    def is_directed_edge(self, a: str, b: str) -> bool:
        """True iff a -> b."""
        return (self.has_edge(a, b)
                and self.mark_at(a, b) is Mark.TAIL
                and self.mark_at(b, a) is Mark.ARROW)

    def is_undirected_edge(self, a: str, b: str) -> bool:
        return (self.has_edge(a, b)
                and self.mark_at(a, b) is Mark.TAIL
                and self.mark_at(b, a) is Mark.TAIL)

    def parents(self, v: str) -> list[str]:
        return [u for u in self.adjacent(v) if self.is_directed_edge(u, v)]

    def children(self, v: str) -> list[str]:
        return [u for u in self.adjacent(v) if self.is_directed_edge(v, u)]

    def undirected_neighbors(self, v: str) -> list[str]:
        return [u for u in self.adjacent(v) if self.is_undirected_edge(u, v)]

    def arrowhead_at(self, a: str, b: str) -> bool:
        """True iff the a-b edge carries an arrow at the ``a`` end."""
        return self.has_edge(a, b) and self.mark_at(a, b) is Mark.ARROW

    def directed_part_has_cycle(self) -> bool:
        color = {n: 0 for n in self.nodes}  # 0 white, 1 grey, 2 black

        def visit(v: str) -> bool:
            color[v] = 1
            for c in self.children(v):
                if color[c] == 1 or (color[c] == 0 and visit(c)):
                    return True
            color[v] = 2
            return False

        return any(color[n] == 0 and visit(n) for n in self.nodes)

    def is_dag(self) -> bool:
        for _, _, ma, mb in self.edges():
            if {ma, mb} != {Mark.TAIL, Mark.ARROW}:
                return False
        return not self.directed_part_has_cycle()

    def require_dag(self) -> None:
        if not self.is_dag():
            raise GraphError("expected a DAG (fully directed and acyclic)")

    def topological_order(self) -> list[str]:
        self.require_dag()
        indeg = {n: len(self.parents(n)) for n in self.nodes}
        order, ready = [], [n for n in self.nodes if indeg[n] == 0]
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in self.children(v):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return order

    def v_structures(self) -> set[tuple[str, str, str]]:
        """Unshielded colliders as (a, b, c) with a < c, arrows at b."""
        found = set()
        for b in self.nodes:
            into_b = [u for u in self.adjacent(b) if self.arrowhead_at(b, u)]
            for a, c in combinations(sorted(into_b), 2):
                if not self.has_edge(a, c):
                    found.add((a, b, c))
        return found

    def skeleton_pairs(self) -> set[tuple[str, str]]:
        return {(a, b) for a, b, _, _ in self.edges()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self.nodes == other.nodes and self._edges == other._edges

    def __repr__(self) -> str:
        return (f"MixedGraph({len(self.nodes)} nodes, "
                f"{len(self._edges)} edges, kind={self.kind!r})")

    # -- serialization --------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "nodes": list(self.nodes),
            "edges": [{"a": a, "b": b, "mark_a": ma.value, "mark_b": mb.value}
                      for a, b, ma, mb in self.edges()],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "MixedGraph":
        g = cls(data["nodes"], kind=data.get("kind", "pdag"))
        for e in data["edges"]:
            g.add_edge(e["a"], e["b"], Mark(e["mark_a"]), Mark(e["mark_b"]))
        return g


class SepSetMap:
    """Conditioning sets that rendered node pairs independent."""

    def __init__(self) -> None:
        self._sets: dict[frozenset[str], tuple[str, ...]] = {}

    def set(self, a: str, b: str, sepset: Iterable[str]) -> None:
        self._sets[frozenset((a, b))] = tuple(sorted(sepset))

    def get(self, a: str, b: str) -> tuple[str, ...] | None:
        return self._sets.get(frozenset((a, b)))

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return frozenset(pair) in self._sets

    def __len__(self) -> int:
        return len(self._sets)

    def items(self):
        return self._sets.items()

    def to_json_dict(self) -> dict:
        return {"|".join(sorted(pair)): list(s)
                for pair, s in sorted(self._sets.items(),
                                      key=lambda kv: sorted(kv[0]))}


# -- d-separation -------------------------------------------------------------

def d_separated(dag: MixedGraph, x: str, y: str, z: Iterable[str]) -> bool:
    """True iff every path between x and y is blocked by z in the DAG.

    Reachability formulation: walk the graph remembering whether each node
    was entered through an arrowhead; a collider passes the trail only if
    it is in z or has a descendant in z, a non-collider only if it is not
    in z.
    """
    dag.require_dag()
    zset = set(z)
    for n in (x, y, *zset):
        dag._index_of(n)
    if x == y:
        raise GraphError("x and y must differ")
    if x in zset or y in zset:
        raise GraphError("x and y must not be in the conditioning set")

    # ancestors of z (including z)
    anc = set(zset)
    frontier = list(zset)
    while frontier:
        v = frontier.pop()
        for p in dag.parents(v):
            if p not in anc:
                anc.add(p)
                frontier.append(p)

    # states: (node, came_through_arrowhead)
    visited = set()
    frontier = [(x, False)]
    while frontier:
        v, through_head = frontier.pop()
        if (v, through_head) in visited:
            continue
        visited.add((v, through_head))
        if v == y:
            return False
        if not through_head:
            # entered from a tail (or start): v passes unless conditioned on
            if v not in zset:
                for p in dag.parents(v):
                    frontier.append((p, False))
                for c in dag.children(v):
                    frontier.append((c, True))
        else:
            # entered through an arrowhead: collider continuation needs
            # v ancestral to z, chain continuation needs v unconditioned
            if v in anc:
                for p in dag.parents(v):
                    frontier.append((p, False))
            if v not in zset:
                for c in dag.children(v):
                    frontier.append((c, True))
    return True


# -- orientation machinery ----------------------------------------------------

def orient_v_structures(skeleton: MixedGraph, sepsets: SepSetMap,
                        log: list | None = None) -> MixedGraph:
    """Orient unshielded triples a - b - c with b outside sepset(a, c) as
    colliders a -> b <- c.

    Triples are processed in canonical order.  An attempt to place a mark
    that contradicts one placed by an earlier triple is skipped and logged
    as a conflict.
    """
    g = skeleton.copy(kind="pdag")
    triples = []
    for b in g.nodes:
        adj = g.adjacent(b)
        for a, c in combinations(sorted(adj), 2):
            if not g.has_edge(a, c):
                triples.append((a, b, c))
    triples.sort()

    for a, b, c in triples:
        sep = sepsets.get(a, c)
        if sep is None:
            continue
        if b in sep:
            continue
        for outer in (a, c):
            if g.mark_at(b, outer) is Mark.ARROW and g.mark_at(outer, b) is Mark.TAIL:
                continue  # already oriented outer -> b
            if g.mark_at(outer, b) is Mark.ARROW:
                msg = (f"collider conflict at {b!r}: edge {outer!r}-{b!r} "
                       f"already points to {outer!r}")
                logger.warning(msg)
                if log is not None:
                    log.append({"event": "collider_conflict", "edge": [outer, b],
                                "triple": [a, b, c]})
                continue
            g.orient(outer, b)
            if log is not None:
                log.append({"event": "orient", "from": outer, "to": b,
                            "rule": "collider", "triple": [a, b, c]})
    return g


def _meek_pass(g: MixedGraph, log: list | None) -> bool:
    """One sweep of Meek rules R1-R4; returns True if anything oriented."""
    changed = False

    def try_orient(a: str, b: str, rule: str) -> None:
        nonlocal changed
        g.orient(a, b)
        changed = True
        if log is not None:
            log.append({"event": "orient", "from": a, "to": b, "rule": rule})

    for a, b, _, _ in list(g.edges()):
        for u, v in ((a, b), (b, a)):
            if not g.is_undirected_edge(u, v):
                break
            # R1: w -> u - v with w, v nonadjacent  =>  u -> v
            done = False
            for w in g.parents(u):
                if w != v and not g.has_edge(w, v):
                    try_orient(u, v, "meek1")
                    done = True
                    break
            if done:
                continue
            # R2: u -> w -> v with u - v  =>  u -> v
            for w in g.children(u):
                if w != v and g.is_directed_edge(w, v):
                    try_orient(u, v, "meek2")
                    done = True
                    break
            if done:
                continue
            # R3: u - c, u - d, c -> v, d -> v, c and d nonadjacent  =>  u -> v
            into_v = [w for w in g.parents(v) if w != u]
            for c, d in combinations(into_v, 2):
                if (g.is_undirected_edge(u, c) and g.is_undirected_edge(u, d)
                        and not g.has_edge(c, d)):
                    try_orient(u, v, "meek3")
                    done = True
                    break
            if done:
                continue
            # R4: u - c, c -> d, d -> v, c and v nonadjacent  =>  u -> v
            for c in g.undirected_neighbors(u):
                if c == v or g.has_edge(c, v):
                    continue
                if any(g.is_directed_edge(d, v) for d in g.children(c) if d != u):
                    try_orient(u, v, "meek4")
                    break
    return changed


def apply_meek_rules(pdag: MixedGraph, log: list | None = None) -> MixedGraph:
    """Close a PDAG under Meek rules R1-R4, orienting undirected edges whose
    direction is compelled.  The input's directed part must be acyclic."""
    if pdag.directed_part_has_cycle():
        raise GraphError("directed part of the input is cyclic")
    g = pdag.copy()
    while _meek_pass(g, log):
        pass
    return g


def dag_to_cpdag(dag: MixedGraph) -> MixedGraph:
    """Pattern of the Markov equivalence class of a DAG: v-structures stay
    directed, everything else is oriented only when compelled."""
    dag.require_dag()
    g = MixedGraph(dag.nodes, kind="cpdag")
    for a, b, _, _ in dag.edges():
        g.add_undirected(a, b)
    for a, b, c in dag.v_structures():
        for outer in (a, c):
            if not g.is_directed_edge(outer, b):
                g.orient(outer, b)
    return apply_meek_rules(g).copy(kind="cpdag")


def pdag_to_dag(pdag: MixedGraph) -> MixedGraph:
    """A consistent DAG extension of a PDAG (Dor-Tarsi); raises GraphError
    when none exists."""
    work = pdag.copy()
    out = pdag.copy(kind="dag")
    remaining = list(work.nodes)
    while remaining:
        found = None
        for v in remaining:
            if work.children(v):
                continue
            nbrs = work.undirected_neighbors(v)
            adj_v = set(work.adjacent(v))
            if all(all(u == w or work.has_edge(u, w) for w in adj_v if w != u)
                   for u in nbrs):
                found = v
                break
        if found is None:
            raise GraphError("PDAG admits no consistent DAG extension")
        for u in work.undirected_neighbors(found):
            work.orient(u, found)
            out.orient(u, found)
        for u in list(work.adjacent(found)):
            work.remove_edge(u, found)
        remaining.remove(found)
    out.require_dag()
    return out


# -- comparison ---------------------------------------------------------------

@dataclass
class GraphComparison:
    """Edge-level agreement between two graphs on the same node set."""

    shd: int
    adjacency_precision: float
    adjacency_recall: float
    adjacency_f1: float
    orientation_accuracy: float
    flags: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "shd": self.shd,
            "adjacency_precision": self.adjacency_precision,
            "adjacency_recall": self.adjacency_recall,
            "adjacency_f1": self.adjacency_f1,
            "orientation_accuracy": self.orientation_accuracy,
            "flags": list(self.flags),
        }


def compare_graphs(g1: MixedGraph, g2: MixedGraph) -> GraphComparison:
    """SHD plus adjacency precision/recall/F1 (g1 against g2 as reference)
    and exact-mark accuracy over shared adjacencies.

    SHD counts node pairs whose (presence, marks) differ.  An absent
    reference (or estimate) makes precision (recall) 1.0 by convention,
    with a flag.
    """
    if g1.nodes != g2.nodes:
        raise GraphError("graphs have different node sets")
    adj1, adj2 = g1.skeleton_pairs(), g2.skeleton_pairs()
    distance = len(adj1 ^ adj2)
    same_marks = 0
    shared = adj1 & adj2
    for a, b in shared:
        if (g1.mark_at(a, b) is g2.mark_at(a, b)
                and g1.mark_at(b, a) is g2.mark_at(b, a)):
            same_marks += 1
        else:
            distance += 1

    flags = []
    if adj1:
        precision = len(shared) / len(adj1)
    else:
        precision = 1.0
        flags.append("no_estimated_edges")
    if adj2:
        recall = len(shared) / len(adj2)
    else:
        recall = 1.0
        flags.append("no_reference_edges")
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    if shared:
        orientation = same_marks / len(shared)
    else:
        orientation = 1.0
        flags.append("no_shared_edges")
    return GraphComparison(distance, precision, recall, f1, orientation, flags)


def shd(g1: MixedGraph, g2: MixedGraph) -> int:
    """Structural Hamming distance; zero iff the graphs are identical."""
    return compare_graphs(g1, g2).shd


# -- export -------------------------------------------------------------------

_DOT_HEAD = {Mark.TAIL: "none", Mark.ARROW: "normal", Mark.CIRCLE: "odot"}


def to_dot(g: MixedGraph, name: str = "g") -> str:
    """Deterministic DOT text; arrow marks render as normal heads, circles
    as open dots, tails as no head."""
    lines = [f"digraph {name} {{"]
    for n in g.nodes:
        lines.append(f'  "{n}";')
    for a, b, ma, mb in g.edges():
        lines.append(f'  "{a}" -> "{b}" [dir=both, '
                     f'arrowtail={_DOT_HEAD[ma]}, arrowhead={_DOT_HEAD[mb]}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
