import numpy as np
import pytest

from causalomics.graphs import Mark, MixedGraph, SepSetMap
from causalomics.search import PcOptions, fci, pc, possible_dsep
from causalomics.search.fci import _rule_r4
from causalomics.simulate import simulate_discrete
from util import build_table


class TestFciOracle:
    def test_collider_keeps_circle_tails(self):
        dag = MixedGraph.from_edges("xyz",
                                    directed=[("x", "z"), ("y", "z")],
                                    kind="dag")
        got = fci(dag).graph
        assert got.kind == "pag"
        assert got.n_edges == 2
        for outer in ("x", "y"):
            assert got.mark_at("z", outer) is Mark.ARROW
            assert got.mark_at(outer, "z") is Mark.CIRCLE

    def test_chain_is_all_circles(self):
        dag = MixedGraph.from_edges("abc",
                                    directed=[("a", "b"), ("b", "c")],
                                    kind="dag")
        got = fci(dag).graph
        assert got.skeleton_pairs() == {("a", "b"), ("b", "c")}
        for a, b, ma, mb in got.edges():
            assert ma is Mark.CIRCLE and mb is Mark.CIRCLE

    def test_latent_confounder_yields_bidirected_edge(self):
        # l is hidden; only a, b, x, y are offered to the search
        full = MixedGraph.from_edges(
            ["a", "l", "x", "y", "b"],
            directed=[("a", "x"), ("l", "x"), ("l", "y"), ("b", "y")],
            kind="dag")
        got = fci(full, variables=["a", "b", "x", "y"]).graph
        assert got.skeleton_pairs() == {("a", "x"), ("b", "y"), ("x", "y")}
        assert got.mark_at("x", "y") is Mark.ARROW
        assert got.mark_at("y", "x") is Mark.ARROW
        assert got.mark_at("x", "a") is Mark.ARROW
        assert got.mark_at("a", "x") is Mark.CIRCLE
        assert got.mark_at("y", "b") is Mark.ARROW
        assert got.mark_at("b", "y") is Mark.CIRCLE

    def test_isolated_variables_give_empty_pag(self):
        dag = MixedGraph(["u", "v"], kind="dag")
        res = fci(dag)
        assert res.graph.n_edges == 0
        assert res.graph.kind == "pag"

    def test_result_shape_and_stages(self):
        dag = MixedGraph.from_edges("xyz",
                                    directed=[("x", "z"), ("y", "z")],
                                    kind="dag")
        res = fci(dag)
        assert res.score_total is None
        assert res.params["algorithm"] == "fci"
        stages = [e["name"] for e in res.log if e["event"] == "stage"]
        assert stages == ["possible_dsep", "orientation"]


class TestPossibleDsep:
    def test_collider_extends_reach(self):
        g = MixedGraph(["a", "b", "c"], kind="pag")
        g.add_edge("a", "b", Mark.CIRCLE, Mark.ARROW)
        g.add_edge("b", "c", Mark.ARROW, Mark.CIRCLE)
        assert possible_dsep(g, "a", "b") == ["c"]

    def test_noncollider_blocks_unless_triangle(self):
        g = MixedGraph(["a", "b", "c"], kind="pag")
        g.add_edge("a", "b", Mark.CIRCLE, Mark.CIRCLE)
        g.add_edge("b", "c", Mark.CIRCLE, Mark.CIRCLE)
        assert possible_dsep(g, "a", "c") == ["b"]
        g.add_edge("a", "c", Mark.CIRCLE, Mark.CIRCLE)
        # now a-b-c is a triangle, so c is reachable through b as well
        assert possible_dsep(g, "a", "b") == ["c"]


def r4_fixture():
    """d o-> a, a <-> b, a -> c, b o-o c, with d and c nonadjacent."""
    g = MixedGraph(["d", "a", "b", "c"], kind="pag")
    g.add_edge("d", "a", Mark.CIRCLE, Mark.ARROW)
    g.add_edge("a", "b", Mark.ARROW, Mark.ARROW)
    g.add_edge("a", "c", Mark.TAIL, Mark.ARROW)
    g.add_edge("b", "c", Mark.CIRCLE, Mark.CIRCLE)
    return g


class TestDiscriminatingPathRule:
    def test_separator_member_becomes_tail(self):
        g = r4_fixture()
        sepsets = SepSetMap()
        sepsets.set("d", "c", ("b",))
        assert _rule_r4(g, sepsets, [])
        assert g.mark_at("b", "c") is Mark.TAIL
        assert g.mark_at("c", "b") is Mark.ARROW

    def test_nonmember_becomes_bidirected(self):
        g = r4_fixture()
        sepsets = SepSetMap()
        sepsets.set("d", "c", ())
        assert _rule_r4(g, sepsets, [])
        assert g.mark_at("b", "c") is Mark.ARROW
        assert g.mark_at("c", "b") is Mark.ARROW
        assert g.mark_at("a", "b") is Mark.ARROW
        assert g.mark_at("b", "a") is Mark.ARROW

    def test_inert_without_a_path(self):
        g = r4_fixture()
        g.remove_edge("d", "a")
        sepsets = SepSetMap()
        sepsets.set("d", "c", ("b",))
        assert not _rule_r4(g, sepsets, [])
        assert g.mark_at("b", "c") is Mark.CIRCLE


class TestFciOnData:
    def test_adjacencies_subset_of_pc(self):
        dag = MixedGraph.from_edges(
            "abcde",
            directed=[("a", "b"), ("b", "c"), ("c", "d"), ("b", "e")],
            kind="dag")
        table = simulate_discrete(dag, 2, n_rows=600, seed=4)
        opts = PcOptions(alpha=0.05)
        fci_pairs = fci(table, opts=opts).graph.skeleton_pairs()
        pc_pairs = pc(table, opts=opts).graph.skeleton_pairs()
        assert fci_pairs <= pc_pairs

    def test_runs_on_mixed_data(self):
        rng = np.random.default_rng(6)
        d = rng.integers(0, 2, 500)
        x = rng.standard_normal(500) + 1.5 * d
        y = 0.8 * x + rng.standard_normal(500)
        res = fci(build_table(d=d, x=x, y=y))
        assert res.graph.kind == "pag"
        assert res.params["test"] == "cg_lrt"
