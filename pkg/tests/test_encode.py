import itertools
import random

import pytest

from helpers import FIG_EDGES, figure_circuit, figure_td, figure_vtree_bags
from slimkc.core import Clause, ConstraintSystem, ContractError, brute_force_count, figure_system, incidence_graph
from slimkc.encode import Cnf, encode_system, td_of_encoding, tseitin_encode
from slimkc.sdnnf import AND, OR, CircuitBuilder, Vtree
from slimkc.toolkit import gen_random_system
from slimkc.treedecomp import TreeDecomposition, heuristic_td, validate_td

ALL_KINDS = ("clause", "xor", "mod", "card", "threshold", "table")
C_PRIME = 8  # phi(s) holds at most 6 vertices per gate plus the leaf variable


def extensions(enc, xs, a):
    """Number of Z assignments extending ``a`` to a model of the encoding."""
    cnf = Cnf(enc.next_var - 1, enc.clauses)
    n = 0
    for bits in itertools.product((0, 1), repeat=len(enc.zvars)):
        full = dict(a)
        full.update(zip(enc.zvars, bits))
        for x in range(1, cnf.num_vars + 1):
            full.setdefault(x, 0)
        n += cnf.evaluate(full)
    return n


class TestTseitin:
    def test_single_and(self):
        cb = CircuitBuilder()
        D = cb.build(cb.conj(cb.lit(1), cb.lit(2)))
        enc = tseitin_encode(D)
        assert enc.zvars == [3]
        assert sorted(enc.clauses[:3]) == sorted([(-3, 1), (-3, 2), (3, -1, -2)])
        assert enc.clauses[-1] == (3,) and len(enc.clauses) == 4

    def test_three_per_gate(self):
        hand, _ = figure_circuit()
        enc = tseitin_encode(hand)
        gates = [g for g in hand.reachable() if hand.op[g] in (AND, OR)]
        assert len(gates) == hand.num_gates == 15
        assert len(enc.clauses) == 3 * 15 + 1

    def test_projection_equivalence(self):
        cb = CircuitBuilder()
        D = cb.build(cb.disj(cb.conj(cb.lit(1), cb.lit(2)), cb.conj(cb.lit(-1), cb.lit(-2))))
        enc = tseitin_encode(D)
        for x1, x2 in itertools.product((0, 1), repeat=2):
            a = {1: x1, 2: x2}
            assert extensions(enc, [1, 2], a) == D.evaluate(a)

    def test_unique_extension_on_figure_circuit(self):
        hand, _ = figure_circuit()
        enc = tseitin_encode(hand, first_var=6)
        for bits in itertools.product((0, 1), repeat=4):
            a = {1: 0, **dict(zip((2, 3, 4, 5), bits))}
            assert extensions(enc, [2, 3, 4, 5], a) == hand.evaluate(a)

    def test_constants(self):
        cb = CircuitBuilder()
        assert tseitin_encode(cb.build(cb.const(0))).clauses == [()]
        cb = CircuitBuilder()
        assert tseitin_encode(cb.build(cb.const(1))).clauses == []

    def test_constant_input_rejected(self):
        cb = CircuitBuilder()
        D = cb.build(cb.conj(cb.lit(1), cb.const(1)))
        with pytest.raises(ContractError):
            tseitin_encode(D)


class TestTdOfEncoding:
    def test_figure(self):
        hand, vt = figure_circuit()
        enc = tseitin_encode(hand, first_var=6)
        ov = TreeDecomposition(figure_vtree_bags(vt), FIG_EDGES)
        td = td_of_encoding(hand, enc, ov)
        G = Cnf(enc.next_var - 1, enc.clauses).incidence_graph()
        G.remove_node(1)  # x1 does not occur in the circuit
        assert validate_td(G, td).ok
        # bag-size convention: each vtree node expands to at most C_PRIME * width vertices
        assert td.max_bag_size <= C_PRIME * hand.width() * ov.max_bag_size

    def test_single_gate(self):
        vt = Vtree.from_nested((1, 2))
        cb = CircuitBuilder(vt)
        D = cb.build(cb.conj(cb.lit(1), cb.lit(2), vt.root))
        enc = tseitin_encode(D)
        td = td_of_encoding(D, enc, TreeDecomposition({0: {vt.root}}, []))
        (bag,) = td.bags.values()
        clause_vertices = {v for v in bag if v > enc.next_var - 1}
        assert len(clause_vertices) == 4  # three gate clauses and the output unit
        assert bag - clause_vertices == {1, 2, 3}
        assert validate_td(Cnf(3, enc.clauses).incidence_graph(), td).ok

    def test_empty_bags_stay_empty(self):
        hand, vt = figure_circuit()
        enc = tseitin_encode(hand, first_var=6)
        bags = figure_vtree_bags(vt)
        td = td_of_encoding(hand, enc, TreeDecomposition(bags, FIG_EDGES))
        assert all(not td.bags[t] for t, b in bags.items() if not b)

    def test_incomplete_rejected(self):
        vt = Vtree.from_nested((1, (2, 3)))
        cb = CircuitBuilder(vt)
        D = cb.build(cb.conj(cb.lit(1), cb.lit(2), vt.root))
        with pytest.raises(ContractError):
            td_of_encoding(D, tseitin_encode(D), TreeDecomposition({0: set(vt.nodes())}, []))


class TestEncodeSystem:
    def test_figure(self):
        F = figure_system()
        E = encode_system(F, figure_td(), validate=True)
        assert len(E.zsets) == 3
        Z = [set(z) for z in E.zsets]
        assert all(not (Z[i] & Z[j]) for i in range(3) for j in range(i + 1, 3))
        assert all(z > F.num_vars for zs in Z for z in zs)
        assert validate_td(E.cnf.incidence_graph(), E.td).ok

    def test_projection_matches_system(self):
        F = figure_system()
        E = encode_system(F, figure_td())
        for bits in itertools.product((0, 1), repeat=7):
            a = dict(zip(range(1, 8), bits))
            want = F.evaluate(a)
            got = all(D.evaluate(a) for D in E.circuits)
            assert got == want

    def test_pure_cnf(self):
        F = ConstraintSystem(4, [Clause((1, -2)), Clause((2, 3, -4)), Clause((-1, 4))])
        td = heuristic_td(incidence_graph(F))
        E = encode_system(F, td, validate=True)
        assert E.cnf.count_brute() == brute_force_count(F) == 6  # Z is determined by X
        assert E.td.max_bag_size <= 16 * max(E.obdd_widths) * td.max_bag_size

    @pytest.mark.parametrize("seed", range(25))
    def test_extension_count(self, seed):
        r = random.Random(seed)
        F = gen_random_system(seed, r.randint(1, 8), r.randint(1, 4), ALL_KINDS, max_arity=4)
        E = encode_system(F, heuristic_td(incidence_graph(F)), validate=True)
        if E.cnf.num_vars <= 22:
            assert E.cnf.count_brute() == brute_force_count(F)
        flat = [z for zs in E.zsets for z in zs]
        assert len(flat) == len(set(flat))

    def test_zmap_and_dimacs(self):
        E = encode_system(figure_system(), figure_td())
        assert E.zmap().startswith("zmap 3\n")
        back = Cnf.from_dimacs(E.cnf.to_dimacs())
        assert back.clauses == E.cnf.clauses


class TestDimacs:
    def test_bad_header(self):
        with pytest.raises(ValueError):
            Cnf.from_dimacs("p cnf 2\n1 0\n")

    def test_clause_count(self):
        with pytest.raises(ValueError):
            Cnf.from_dimacs("p cnf 2 2\n1 0\n")
