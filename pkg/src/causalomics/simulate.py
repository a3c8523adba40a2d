"""Synthetic ground truth: random DAGs, categorical and mixed simulation,
and grading of estimated graphs against the true pattern.

Everything is a pure function of its arguments; the same spec and seed
reproduce the same bytes.  Latent-variable setups are produced by
simulating the full graph and dropping the hidden columns with
``DataTable.subset``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graphs import MixedGraph, compare_graphs, dag_to_cpdag
from .tabular import (Categorical, Continuous, DataTable, VariableKind,
                      VariableMeta, family_for_name)


class SimulationError(ValueError):
    """Raised for invalid simulation specifications."""


@dataclass(frozen=True)
class SimSpec:
    """Recipe for one synthetic instance.

    Exactly one of ``expected_degree`` and ``edge_density`` must be set;
    the first fixes the mean number of neighbors per node, the second the
    probability of each node pair being adjacent.
    """

    n_nodes: int
    expected_degree: float | None = None
    edge_density: float | None = None
    n_rows: int = 1000
    seed: int = 0


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a seeded sweep."""
    return np.random.default_rng((seed, index))


def _edge_probability(spec: SimSpec) -> float:
    if (spec.expected_degree is None) == (spec.edge_density is None):
        raise SimulationError(
            "set exactly one of expected_degree and edge_density")
    if spec.edge_density is not None:
        p = float(spec.edge_density)
    elif spec.n_nodes > 1:
        p = float(spec.expected_degree) / (spec.n_nodes - 1)
    else:
        p = 0.0
    if not 0.0 <= p <= 1.0:
        raise SimulationError(f"edge probability {p:.3f} outside [0, 1]")
    return p


def random_dag(spec: SimSpec, names: Sequence[str] | None = None) -> MixedGraph:
    """Random DAG: uniform random topological order, each lower-to-higher
    node pair edged independently with the probability the spec implies."""
    if spec.n_nodes < 1:
        raise SimulationError("n_nodes must be at least 1")
    p = _edge_probability(spec)
    if names is None:
        names = [f"x{i}" for i in range(spec.n_nodes)]
    elif len(names) != spec.n_nodes:
        raise SimulationError("names must match n_nodes")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(spec.n_nodes)
    g = MixedGraph(names, kind="dag")
    for i in range(spec.n_nodes):
        for j in range(i + 1, spec.n_nodes):
            if rng.random() < p:
                g.add_directed(names[order[i]], names[order[j]])
    return g


def _draw_weight(rng: np.random.Generator) -> float:
    """Magnitude uniform on [0.5, 1.5], random sign; bounded away from zero
    so simulated effects stay detectable."""
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5))


def _sample_rows(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row from per-row probability vectors."""
    u = rng.random(len(probs))
    return (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1).astype(np.int64)


def _config_index(codes: list[np.ndarray], cards: list[int],
                  n_rows: int) -> np.ndarray:
    idx = np.zeros(n_rows, dtype=np.int64)
    for col, card in zip(codes, cards):
        idx = idx * card + col
    return idx


def simulate_discrete(dag: MixedGraph, cardinalities: int | Mapping[str, int],
                      n_rows: int, seed: int) -> DataTable:
    """Ancestral sampling from random CPTs.

    Each node's conditional table has one row per parent configuration,
    drawn from a symmetric Dirichlet with concentration 0.5 so that most
    rows are far from uniform.
    """
    dag.require_dag()
    if n_rows < 1:
        raise SimulationError("n_rows must be positive")
    if isinstance(cardinalities, int):
        cards = {n: cardinalities for n in dag.nodes}
    else:
        cards = dict(cardinalities)
    for n in dag.nodes:
        if cards.get(n, 0) < 2:
            raise SimulationError(f"node {n!r} needs cardinality >= 2")

    rng = np.random.default_rng(seed)
    cpts = {}
    for node in dag.nodes:
        parents = dag.parents(node)
        n_configs = int(np.prod([cards[p] for p in parents], dtype=np.int64)) \
            if parents else 1
        cpts[node] = rng.dirichlet([0.5] * cards[node], size=n_configs)

    data: dict[str, np.ndarray] = {}
    for node in dag.topological_order():
        parents = dag.parents(node)
        cfg = _config_index([data[p] for p in parents],
                            [cards[p] for p in parents], n_rows)
        data[node] = _sample_rows(rng, cpts[node][cfg])

    metas, columns = [], []
    for name in dag.nodes:
        levels = tuple(f"l{i}" for i in range(cards[name]))
        metas.append(VariableMeta(name, Categorical(cards[name]),
                                  family_for_name(name), levels))
        columns.append(data[name])
    return DataTable(metas, columns)


def simulate_cg(dag: MixedGraph, kinds: Mapping[str, VariableKind],
                n_rows: int, seed: int) -> DataTable:
    """Mixed simulation: continuous children are linear in continuous
    parents with one intercept per discrete-parent configuration plus unit
    Gaussian noise; discrete children are drawn from a softmax whose logits
    are linear in the parent values."""
    dag.require_dag()
    if n_rows < 1:
        raise SimulationError("n_rows must be positive")
    for n in dag.nodes:
        if n not in kinds:
            raise SimulationError(f"no kind given for node {n!r}")

    def card(n: str) -> int:
        kind = kinds[n]
        if not isinstance(kind, Categorical):
            raise SimulationError(f"node {n!r} is not categorical")
        if kind.cardinality < 2:
            raise SimulationError(f"node {n!r} needs cardinality >= 2")
        return kind.cardinality

    rng = np.random.default_rng(seed)
    params = {}
    for node in dag.nodes:
        parents = dag.parents(node)
        disc = [p for p in parents if isinstance(kinds[p], Categorical)]
        cont = [p for p in parents if not isinstance(kinds[p], Categorical)]
        n_configs = int(np.prod([card(p) for p in disc], dtype=np.int64)) \
            if disc else 1
        if isinstance(kinds[node], Categorical):
            k = card(node)
            params[node] = {
                "disc": disc, "cont": cont,
                "bias": rng.uniform(-1.0, 1.0, size=k),
                "cfg_logit": np.array(
                    [[_draw_weight(rng) for _ in range(k)]
                     for _ in range(n_configs)]) if disc else np.zeros((1, k)),
                "weights": np.array(
                    [[_draw_weight(rng) for _ in range(k)]
                     for _ in cont]).reshape(len(cont), k),
            }
        else:
            params[node] = {
                "disc": disc, "cont": cont,
                "intercepts": rng.uniform(-1.5, 1.5, size=n_configs)
                if disc else np.zeros(1),
                "weights": np.array([_draw_weight(rng) for _ in cont]),
            }

    data: dict[str, np.ndarray] = {}
    for node in dag.topological_order():
        par = params[node]
        cfg = _config_index([data[p] for p in par["disc"]],
                            [card(p) for p in par["disc"]], n_rows)
        if isinstance(kinds[node], Categorical):
            logits = par["bias"][None, :] + par["cfg_logit"][cfg]
            for w, p in zip(par["weights"], par["cont"]):
                logits = logits + np.outer(data[p], w)
            logits -= logits.max(axis=1, keepdims=True)
            probs = np.exp(logits)
            probs /= probs.sum(axis=1, keepdims=True)
            data[node] = _sample_rows(rng, probs)
        else:
            mean = par["intercepts"][cfg]
            for w, p in zip(par["weights"], par["cont"]):
                mean = mean + w * data[p]
            data[node] = mean + rng.standard_normal(n_rows)

    metas, columns = [], []
    for name in dag.nodes:
        kind = kinds[name]
        if isinstance(kind, Categorical):
            levels = tuple(f"l{i}" for i in range(kind.cardinality))
            metas.append(VariableMeta(name, kind, family_for_name(name),
                                      levels))
        else:
            metas.append(VariableMeta(name, Continuous(),
                                      family_for_name(name)))
        columns.append(data[name])
    return DataTable(metas, columns)


@dataclass
class MetricsReport:
    """Grades of an estimated graph against the pattern of the true DAG."""

    shd: int
    adjacency_precision: float
    adjacency_recall: float
    adjacency_f1: float
    orientation_accuracy: float
    flags: list[str] = field(default_factory=list)

    CSV_FIELDS = ("shd", "adjacency_precision", "adjacency_recall",
                  "adjacency_f1", "orientation_accuracy", "flags")

    def to_json_dict(self) -> dict:
        return {
            "shd": self.shd,
            "adjacency_precision": self.adjacency_precision,
            "adjacency_recall": self.adjacency_recall,
            "adjacency_f1": self.adjacency_f1,
            "orientation_accuracy": self.orientation_accuracy,
            "flags": list(self.flags),
        }

    def to_csv_row(self) -> list[str]:
        d = self.to_json_dict()
        d["flags"] = ";".join(self.flags)
        return [str(d[k]) for k in self.CSV_FIELDS]


def evaluate(estimated: MixedGraph, truth: MixedGraph) -> MetricsReport:
    """Compare an estimate with dag_to_cpdag(truth).

    When the estimate has no edges, precision is reported as 1.0 with a
    flag rather than NaN.
    """
    cmp = compare_graphs(estimated, dag_to_cpdag(truth))
    return MetricsReport(cmp.shd, cmp.adjacency_precision,
                         cmp.adjacency_recall, cmp.adjacency_f1,
                         cmp.orientation_accuracy, cmp.flags)
