import json

import numpy as np
import pytest

from causalomics.graphs import Mark, MixedGraph, dag_to_cpdag
from causalomics.search import PcOptions, SearchError, pc, pc_on_skeleton
from causalomics.simulate import SimSpec, random_dag, simulate_discrete
from util import build_table


def edge_set(g):
    """Edges with endpoint order normalized, for cross-graph comparison."""
    out = set()
    for a, b, ma, mb in g.edges():
        if a > b:
            a, b, ma, mb = b, a, mb, ma
        out.add((a, b, ma.name, mb.name))
    return out


class TestPcOracle:
    def test_collider(self):
        dag = MixedGraph.from_edges("xyz",
                                    directed=[("x", "z"), ("y", "z")],
                                    kind="dag")
        got = pc(dag).graph
        assert got.is_directed_edge("x", "z")
        assert got.is_directed_edge("y", "z")
        assert got.n_edges == 2

    def test_chain_stays_undirected(self):
        dag = MixedGraph.from_edges("abc",
                                    directed=[("a", "b"), ("b", "c")],
                                    kind="dag")
        got = pc(dag).graph
        assert got.is_undirected_edge("a", "b")
        assert got.is_undirected_edge("b", "c")
        assert got.n_edges == 2

    def test_recovers_pattern_on_random_dags(self):
        for i in range(200):
            n = 2 + i % 7
            spec = SimSpec(n_nodes=n, expected_degree=min(2.0, n - 1),
                           seed=(97, i))
            dag = random_dag(spec)
            assert pc(dag).graph == dag_to_cpdag(dag), f"instance {i}"

    def test_sepsets_recorded(self):
        dag = MixedGraph.from_edges("abc",
                                    directed=[("a", "b"), ("b", "c")],
                                    kind="dag")
        res = pc(dag)
        assert res.sepsets.get("a", "c") == ("b",)

    def test_result_shape(self):
        dag = MixedGraph.from_edges("xy", directed=[("x", "y")], kind="dag")
        res = pc(dag)
        assert res.graph.kind == "cpdag"
        assert res.score_total is None
        assert res.params["algorithm"] == "pc"
        assert res.params["test"] == "dsep"
        assert res.params["max_cond_set_size"] is None

    def test_log_justifies_every_removal(self):
        dag = random_dag(SimSpec(n_nodes=6, expected_degree=1.5, seed=5))
        res = pc(dag)
        last_test = None
        for event in res.log:
            if event["event"] == "test":
                last_test = event
            elif event["event"] == "remove_edge":
                assert last_test["x"] == event["x"]
                assert last_test["y"] == event["y"]
                assert last_test["z"] == event["sepset"]
                assert last_test["independent"]

    def test_json_round_trip(self):
        dag = MixedGraph.from_edges("xyz",
                                    directed=[("x", "z"), ("y", "z")],
                                    kind="dag")
        res = pc(dag)
        blob = json.loads(json.dumps(res.to_json_dict()))
        assert MixedGraph.from_json_dict(blob["graph"]) == res.graph
        assert blob["sepsets"]["x|y"] == []


@pytest.fixture(scope="module")
def collider_table():
    dag = MixedGraph.from_edges("xyz",
                                directed=[("x", "z"), ("y", "z")],
                                kind="dag")
    return simulate_discrete(dag, 2, n_rows=2000, seed=2)


class TestPcData:

    def test_recovers_collider(self, collider_table):
        got = pc(collider_table).graph
        assert got.is_directed_edge("x", "z")
        assert got.is_directed_edge("y", "z")
        assert got.n_edges == 2

    def test_row_order_invariance(self, collider_table):
        rng = np.random.default_rng(0)
        perm = rng.permutation(collider_table.n_rows)
        shuffled = build_table(**{
            n: collider_table.column(n).astype(int)[perm]
            for n in collider_table.names})
        assert pc(shuffled).graph == pc(collider_table).graph

    def test_column_order_invariance_when_stable(self, collider_table):
        cols = {n: collider_table.column(n).astype(int)
                for n in collider_table.names}
        reversed_table = build_table(**dict(reversed(list(cols.items()))))
        assert (edge_set(pc(collider_table).graph)
                == edge_set(pc(reversed_table).graph))

    def test_data_default_cond_set_cap(self, collider_table):
        res = pc(collider_table)
        assert res.params["max_cond_set_size"] == 3

    def test_max_cond_zero_runs_marginal_only(self, collider_table):
        res = pc(collider_table, opts=PcOptions(max_cond_set_size=0))
        levels = {e["level"] for e in res.log if e["event"] == "test"}
        assert levels == {0}

    def test_chi_square_rejects_continuous(self):
        t = build_table(a=np.arange(100.0),
                        b=np.repeat([0, 1], 50))
        with pytest.raises(SearchError, match="continuous"):
            pc(t, opts=PcOptions(test="chi_square"))

    def test_unknown_test_name(self, collider_table):
        with pytest.raises(SearchError, match="unknown test"):
            pc(collider_table, opts=PcOptions(test="mystery"))

    def test_option_validation(self):
        with pytest.raises(SearchError, match="alpha"):
            PcOptions(alpha=1.5)
        with pytest.raises(SearchError, match="max_cond_set_size"):
            PcOptions(max_cond_set_size=-1)

    def test_needs_two_variables(self):
        t = build_table(a=np.array([0, 1, 0, 1]))
        with pytest.raises(SearchError, match="at least 2"):
            pc(t)


class TestPcOnSkeleton:
    def test_complete_skeleton_reduces_to_pc(self):
        dag = MixedGraph.from_edges("xyz",
                                    directed=[("x", "z"), ("y", "z")],
                                    kind="dag")
        table = simulate_discrete(dag, 2, n_rows=2000, seed=2)
        complete = MixedGraph.complete(["x", "y", "z"])
        direct = pc(table)
        seeded = pc_on_skeleton(complete, table)
        assert seeded.graph == direct.graph
        assert dict(seeded.sepsets.items()) == dict(direct.sepsets.items())

    def test_true_skeleton_oracle_recovers_pattern(self):
        dag = MixedGraph.from_edges("xyz",
                                    directed=[("x", "z"), ("y", "z")],
                                    kind="dag")
        skeleton = MixedGraph.from_edges(
            "xyz", undirected=[("x", "z"), ("y", "z")], kind="skeleton")
        res = pc_on_skeleton(skeleton, dag)
        assert res.graph == dag_to_cpdag(dag)
        assert any(e["event"] == "sepset_found" for e in res.log)

    def test_empty_skeleton_runs_zero_tests(self):
        dag = MixedGraph.from_edges("abc",
                                    directed=[("a", "b"), ("b", "c")],
                                    kind="dag")
        res = pc_on_skeleton(MixedGraph(["a", "b", "c"]), dag)
        assert res.graph.n_edges == 0
        assert not any(e["event"] == "test" for e in res.log)

    def test_only_ever_shrinks_the_skeleton(self):
        dag = MixedGraph.from_edges("abc",
                                    directed=[("a", "b"), ("b", "c")],
                                    kind="dag")
        table = simulate_discrete(dag, 2, n_rows=1500, seed=2)
        skeleton = MixedGraph.from_edges("abc", undirected=[("a", "b")],
                                         kind="skeleton")
        res = pc_on_skeleton(skeleton, table)
        assert res.graph.skeleton_pairs() <= {("a", "b")}

    def test_rejects_directed_skeleton_edges(self):
        bad = MixedGraph.from_edges("ab", directed=[("a", "b")])
        t = build_table(a=np.repeat([0, 1], 20), b=np.tile([0, 1], 20))
        with pytest.raises(SearchError, match="not undirected"):
            pc_on_skeleton(bad, t)

    def test_rejects_unknown_skeleton_nodes(self):
        skeleton = MixedGraph.from_edges("aq", undirected=[("a", "q")])
        t = build_table(a=np.repeat([0, 1], 20), b=np.tile([0, 1], 20))
        with pytest.raises(SearchError, match="not in the data"):
            pc_on_skeleton(skeleton, t)
