import itertools
import math
import random

import networkx as nx
import pytest

from helpers import figure_td
from slimkc.compile import count_via_compilation
from slimkc.core import ContractError, brute_force_count, figure_system, incidence_graph, serialize_system
from slimkc.toolkit import BRUTE_LIMIT, check_all, clique_instance, gen_random_system, obdd_width_report
from slimkc.treedecomp import validate_td

# frozen output of the generator for seed 1, 8 variables, 5 constraints, clause/xor mix
GOLDEN_SEED1 = "p csys 8 5\n2 3 1 4 -5 0\nxe -1 6 -4 -3 0\n-1 0\nx 7 6 0\nxe -4 -3 2 -6 -8 0\n"


def ordered_cliques(G, k):
    return sum(1 for c in itertools.permutations(G.nodes, k)
               if all(G.has_edge(u, v) for i, u in enumerate(c) for v in c[i + 1:]))


class TestClique:
    @pytest.mark.parametrize("n,k", [(4, 2), (5, 2), (5, 3), (6, 3)])
    def test_complete_graph_counts(self, n, k):
        inst = clique_instance(nx.complete_graph(n), k)
        want = math.perm(n, k)
        assert inst.expected_count_complete() == want
        assert count_via_compilation(inst.system, inst.td) == want

    def test_triangle_free(self):
        G = nx.cycle_graph(5)
        inst = clique_instance(G, 3)
        assert count_via_compilation(inst.system, inst.td) == 0

    def test_non_complete_graph(self):
        G = nx.Graph([(0, 1), (1, 2), (0, 2), (2, 3)])
        inst = clique_instance(G, 2)
        assert count_via_compilation(inst.system, inst.td) == ordered_cliques(G, 2) == 8

    @pytest.mark.parametrize("n,k", [(4, 2), (5, 3), (6, 3)])
    def test_sizes_and_decomposition(self, n, k):
        G = nx.complete_graph(n)
        inst = clique_instance(G, k)
        E = G.number_of_edges()
        assert inst.system.num_vars == 2 * k * E
        assert len(inst.system) == k + E
        rep = validate_td(incidence_graph(inst.system), inst.td)
        assert rep.ok and inst.td.width <= k + 1

    def test_width_report(self):
        inst = clique_instance(nx.complete_graph(4), 2)
        rep = obdd_width_report(inst)
        assert rep.ok and rep.pair_bound == 8 and rep.vertex_bound == 4 * 2 + 2
        assert len(rep.vertex_widths) == 2 and len(rep.pair_widths) == 6

    def test_width_report_path(self):
        rep = obdd_width_report(clique_instance(nx.path_graph(3), 2))
        assert rep.ok and max(rep.pair_widths) <= 8 and max(rep.vertex_widths) <= 3 * 2 + 2


class TestRandom:
    def test_golden(self):
        assert serialize_system(gen_random_system(1, 8, 5, ("clause", "xor"))) == GOLDEN_SEED1

    def test_deterministic(self):
        mix = ("clause", "xor", "mod", "card", "threshold", "table")
        a = serialize_system(gen_random_system(42, 10, 7, mix))
        assert a == serialize_system(gen_random_system(42, 10, 7, mix))

    def test_no_constraints(self):
        F = gen_random_system(0, 6, 0)
        assert len(F) == 0 and brute_force_count(F) == 64

    def test_fixed_modulus(self):
        F = gen_random_system(3, 8, 6, ("mod5",))
        assert all(c.kind == "mod" and c.modulus == 5 for c in F.constraints)

    def test_distinct_scope(self):
        for s in range(30):
            for c in gen_random_system(s, 9, 4, ("clause", "xor", "card")).constraints:
                assert len(set(c.variables)) == len(c.variables)

    @pytest.mark.parametrize("mix", [("nope",), ("mod1",)])
    def test_bad_mix(self, mix):
        with pytest.raises(ContractError):
            gen_random_system(0, 4, 2, mix)


class TestCheckAll:
    def test_figure(self):
        v = check_all(figure_system(), figure_td())
        assert v.agree and set(v.counts.values()) == {38}
        assert {"brute", "compiled", "dp-naive", "dp-auto"} <= set(v.counts)

    def test_clique_skips_dp(self):
        inst = clique_instance(nx.complete_graph(4), 2)
        v = check_all(inst.system, inst.td)
        assert v.agree and v.counts == {"compiled": 12}
        assert "brute" in v.skipped and "dp" in v.skipped

    def test_summary(self):
        v = check_all(figure_system(), engines=("brute", "compiled"))
        assert v.summary() == "AGREE brute=38; compiled=38"

    def test_unknown_engine(self):
        with pytest.raises(ContractError):
            check_all(figure_system(), engines=("magic",))

    def test_brute_limit(self):
        F = gen_random_system(0, BRUTE_LIMIT + 1, 3)
        assert "brute" in check_all(F, engines=("brute", "dp")).skipped

    def test_corpus(self):
        mix = ("clause", "xor", "mod", "card", "threshold", "table")
        for s in range(100):
            r = random.Random(s)
            F = gen_random_system(s, r.randint(1, 12), r.randint(0, 8), mix)
            v = check_all(F)
            assert v.agree, (s, v.summary())
