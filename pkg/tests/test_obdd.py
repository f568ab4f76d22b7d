import itertools
import random

import pytest

from slimkc.core import Cardinality, Clause, ContractError, SmallScope, SumModulo, Threshold, Xor
from slimkc.obdd import (
    CompleteObdd,
    build_obdd,
    commutative_quotient,
    constant_obdd,
    find_modulo_pattern,
    is_commutative,
    is_symmetric,
    obdd_apply,
    obdd_count,
    obdd_to_csts,
)
from slimkc.toolkit import gen_random_system

ALL_KINDS = ("clause", "xor", "mod", "card", "threshold", "table")


def agrees(B, c):
    for bits in itertools.product((0, 1), repeat=len(B.order)):
        a = dict(zip(B.order, bits))
        if B.evaluate(a) != c.evaluate(a):
            return False
    return True


def width_bound(c):
    n = c.arity
    if c.kind in ("clause", "xor"):
        return 2
    if c.kind == "mod":
        return c.modulus
    if c.kind == "card":
        return min(c.k + 1, n - c.k + 2)
    if c.kind == "threshold":
        return 2 * c.total_weight + 1
    return 2 ** n


class TestBuild:
    @pytest.mark.parametrize("seed", range(50))
    def test_equivalence_and_bound(self, seed):
        rng = random.Random(seed)
        F = gen_random_system(seed, 10, 1, ALL_KINDS, max_arity=10)
        c = F.constraints[0]
        order = rng.sample(list(c.variables), c.arity)
        B = build_obdd(c, order)
        assert agrees(B, c)
        assert B.width <= width_bound(c)

    @pytest.mark.parametrize("n", range(1, 9))
    def test_clause_width_two(self, n):
        c = Clause(tuple(range(1, n + 1)))
        for order in itertools.islice(itertools.permutations(range(1, n + 1)), 200):
            assert build_obdd(c, order).width <= 2

    def test_xor_reversed(self):
        B = build_obdd(Xor((1, 2, 3, 4, 5), 1), [5, 4, 3, 2, 1])
        assert B.width == 2

    def test_modulo_three(self):
        c = SumModulo((1, -2, 3, 4), 3, 1)
        for order in itertools.permutations(range(1, 5)):
            assert build_obdd(c, order).width <= 3

    def test_bad_ordering(self):
        with pytest.raises(ContractError):
            build_obdd(Clause((1, 2)), [1, 3])
        with pytest.raises(ContractError):
            build_obdd(Clause((1, 2)), [1, 1])

    def test_complete_paths(self):
        B = build_obdd(Threshold((1, 2, 3), (2, -1, 1), 1), [3, 1, 2])
        assert len(B.levels) == 3 and len(B.levels[0]) == 1

    def test_malformed_levels(self):
        with pytest.raises(ContractError):
            CompleteObdd((1,), (((0, 2),),))


class TestApply:
    def test_idempotent_and(self):
        c = Clause((1, -2, 3))
        B = build_obdd(c, [1, 2, 3])
        A = obdd_apply("AND", B, B)
        assert agrees(A, c) and A.width <= 2

    def test_contradiction(self):
        B1 = build_obdd(Clause((1,)), [1])
        B2 = build_obdd(Clause((-1,)), [1])
        A = obdd_apply("and", B1, B2)
        assert obdd_count(A) == 0 and A.width == 1

    def test_inclusion_exclusion(self):
        rng = random.Random(4)
        for s in range(30):
            F = gen_random_system(s, 6, 2, ALL_KINDS, max_arity=6)
            order = rng.sample(range(1, 7), 6)
            # pad each constraint to the full ordering with a tautology
            B1, B2 = (obdd_apply("OR", build_full(c, order), constant_obdd(order, 0)) for c in F.constraints)
            both, either = obdd_apply("AND", B1, B2), obdd_apply("OR", B1, B2)
            assert obdd_count(either) == obdd_count(B1) + obdd_count(B2) - obdd_count(both)
            assert both.width <= B1.width * B2.width

    def test_ordering_mismatch(self):
        with pytest.raises(ContractError):
            obdd_apply("AND", build_obdd(Clause((1, 2)), [1, 2]), build_obdd(Clause((1, 2)), [2, 1]))


def build_full(c, order):
    """OBDD of c over a larger ordering (untouched variables are don't-cares)."""
    from slimkc.obdd import obdd_from_automaton

    pos = {x: c.position(x) for x in c.variables}
    return obdd_from_automaton(
        order,
        c.initial_state(),
        lambda s, i, b: c.step(s, pos[order[i]], b) if order[i] in pos else s,
        c.accepts,
    )


class TestCount:
    def test_xor(self):
        assert obdd_count(build_obdd(Xor((1, 2, 3, 4), 0))) == 8

    def test_constant(self):
        assert obdd_count(constant_obdd([1, 2, 3], 1)) == 8

    def test_cardinality(self):
        assert obdd_count(build_obdd(Cardinality((1, 2, 3), 2))) == 4

    def test_matches_enumeration(self):
        for s in range(30):
            F = gen_random_system(s, 8, 1, ALL_KINDS, max_arity=8)
            c = F.constraints[0]
            B = build_obdd(c)
            want = sum(c.evaluate(dict(zip(c.variables, bits)))
                       for bits in itertools.product((0, 1), repeat=c.arity))
            assert obdd_count(B) == want


def commutes(B):
    L = B.levels
    return all(
        L[i + 1][L[i][s][1]][0] == L[i + 1][L[i][s][0]][1] for i in range(len(L) - 1) for s in range(len(L[i]))
    )


class TestQuotient:
    def test_xor_already_commutative(self):
        B = build_obdd(Xor((1, 2, 3, 4), 1))
        assert is_commutative(B)
        Q = commutative_quotient(B)
        assert Q.width == 2 and commutes(Q)

    def test_cardinality_any_order(self):
        c = Cardinality((1, 2, 3, 4), 2)
        for order in itertools.permutations(range(1, 5)):
            Q = commutative_quotient(build_obdd(c, order))
            assert Q.width <= 3 and commutes(Q) and agrees(Q, c)

    def test_constant(self):
        Q = commutative_quotient(constant_obdd([1, 2, 3], 1))
        assert Q.width == 1 and commutes(Q)

    def test_non_symmetric_rejected(self):
        B = build_obdd(SmallScope((1, 2, 3), 0b00000010))
        assert not is_symmetric(B)
        with pytest.raises(ContractError):
            commutative_quotient(B)

    def test_non_commutative_input(self):
        # symmetric function built through a redundant, non-commuting OBDD
        B = CompleteObdd(
            (1, 2, 3),
            (((0, 1),), ((0, 1), (2, 1)), ((0, 1), (1, 1), (1, 1))),
        )
        assert is_symmetric(B)
        Q = commutative_quotient(B)
        assert commutes(Q) and Q.width <= B.width
        assert (Q.truth_table() == B.truth_table()).all()

    @pytest.mark.parametrize("seed", range(20))
    def test_random_symmetric(self, seed):
        F = gen_random_system(seed, 7, 1, ("clause", "xor", "mod", "card"), max_arity=7)
        c = positive(F.constraints[0])
        order = random.Random(seed).sample(list(c.variables), c.arity)
        Q = commutative_quotient(build_obdd(c, order))
        assert commutes(Q) and agrees(Q, c)


class TestPattern:
    def test_xor(self):
        assert find_modulo_pattern(build_obdd(Xor((1, 2, 3, 4), 0))) == (0, 2, 0)

    def test_or(self):
        assert find_modulo_pattern(build_obdd(Clause((1, 2, 3, 4)))) == (1, 1, 0)

    def test_degenerate(self):
        B = build_obdd(Cardinality((1, 2), 1))
        assert B.num_vars == B.width
        assert find_modulo_pattern(B, B.width)[1] == 0

    def test_sum_of_parts(self):
        for m in (2, 3, 4):
            B = build_obdd(SumModulo(tuple(range(1, 8)), m, 1))
            a, mm, b = find_modulo_pattern(B)
            assert a + mm + b == B.width


def positive(c):
    """The all-positive version of a literal-symmetric constraint."""
    lits = tuple(abs(l) for l in c.lits)
    if c.kind == "clause":
        return Clause(lits)
    if c.kind == "xor":
        return Xor(lits, c.parity)
    if c.kind == "mod":
        return SumModulo(lits, c.modulus, c.residue)
    return Cardinality(lits, c.k)


def accepts_counts(cs, q1, q0):
    return cs.delta_counts(q1, q0) in cs.accepting


class TestToCsts:
    def test_xor_two_states(self):
        cs = obdd_to_csts(build_obdd(Xor((1, 2, 3), 1)))
        assert cs.num_states == 2
        assert cs.f0 == (0, 1) and sorted(cs.f1) == [0, 1] and cs.f1 != cs.f0

    def test_cardinality_three_states(self):
        cs = obdd_to_csts(build_obdd(Cardinality((1, 2, 3, 4, 5), 2)))
        assert cs.num_states == 3
        assert [accepts_counts(cs, q1, 5 - q1) for q1 in range(6)] == [False, False, True, True, True, True]

    def test_state_bound(self):
        for s in range(40):
            F = gen_random_system(s, 9, 1, ("xor", "mod", "card", "clause"), max_arity=9)
            c = F.constraints[0]
            B = commutative_quotient(build_obdd(positive(c)))
            w = B.width
            flips = {abs(l): l < 0 for l in c.lits}
            fc = obdd_to_csts(B, flip=flips)
            # one variable: width 1 but a non-constant function needs two states
            bound = 2 if c.arity == 1 else (w + 1) ** 2 // 4
            assert fc.csts.num_states <= bound
            n = c.arity
            for bits in itertools.product((0, 1), repeat=n):
                a = dict(zip(c.variables, bits))
                assert fc.evaluate(a) == c.evaluate(a)

    def test_width_three_bound(self):
        B = build_obdd(SumModulo((1, 2, 3, 4, 5), 3, 0))
        assert B.width == 3
        assert obdd_to_csts(B).num_states <= (3 + 1) ** 2 // 4
