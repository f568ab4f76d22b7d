import itertools
import random

import numpy as np
import pytest

from helpers import figure_td, random_table_pair
from slimkc.core import (
    Cardinality,
    Clause,
    ConstraintSystem,
    ContractError,
    SumModulo,
    Threshold,
    Xor,
    brute_force_count,
    figure_system,
    incidence_graph,
)
from slimkc.csts import state_add
from slimkc.dpcount import (
    SUBSET_LIMIT,
    DpContext,
    DpTable,
    convolve_nd,
    count_cnf_xor,
    dp_count,
    dp_tables,
    group_convolve,
    join_clause_modulo,
    join_naive,
    join_onesided,
    subset_moebius,
    subset_zeta,
    table_transition,
    union_product,
)
from slimkc.toolkit import gen_random_system
from slimkc.treedecomp import heuristic_td, make_nice

DP_KINDS = ("clause", "xor", "mod", "card")


def lists(a):
    return [int(v) for v in np.asarray(a, dtype=object).flat]


class TestCounts:
    def test_xor_five(self):
        F = ConstraintSystem(5, [Xor((1, 2, 3, 4, 5), 1)])
        assert dp_count(F) == 16

    def test_figure(self):
        assert dp_count(figure_system(), figure_td(), check=True) == 38

    @pytest.mark.parametrize("mode", ["naive", "onesided", "clause_modulo", "auto"])
    def test_two_disjoint_clauses(self, mode):
        F = ConstraintSystem(4, [Clause((1, 2)), Clause((3, 4))])
        assert dp_count(F, join_mode=mode) == 9

    def test_free_variables_double(self):
        F = ConstraintSystem(6, [Clause((1, 2))])
        assert dp_count(F) == 3 * 16

    def test_empty(self):
        assert dp_count(ConstraintSystem(3, [])) == 8

    @pytest.mark.parametrize("seed", range(40))
    def test_random(self, seed):
        r = random.Random(seed)
        F = gen_random_system(seed, r.randint(1, 12), r.randint(0, 8), DP_KINDS)
        want = brute_force_count(F)
        for mode in ("naive", "auto"):
            assert dp_count(F, join_mode=mode, check=True) == want


class TestTransitions:
    def setup_method(self):
        self.F = ConstraintSystem(2, [Clause((1, 2))])
        self.ctx = DpContext.for_system(self.F)
        self.c = 3  # incidence vertex of the clause

    def test_leaf(self):
        M = table_transition(self.ctx, ("leaf",), {1, self.c}, [])
        assert M.rows == {((0,), (0,)): 1, ((1,), (0,)): 1}

    def test_introduce_variable(self):
        M = table_transition(self.ctx, ("leaf",), {self.c}, [])
        M = table_transition(self.ctx, ("introduce", 2), {2, self.c}, [M])
        assert M.vars == (2,) and M.total() == 2

    def test_forget_variable_advances_state(self):
        M = table_transition(self.ctx, ("leaf",), {1, self.c}, [])
        M = table_transition(self.ctx, ("forget", 1), {self.c}, [M])
        assert M.rows == {((), (0,)): 1, ((), (1,)): 1}

    def test_forget_constraint_filters(self):
        M = table_transition(self.ctx, ("leaf",), {1, 2, self.c}, [])
        M = table_transition(self.ctx, ("forget", self.c), {1, 2}, [M])
        assert sorted(a for a, _ in M.rows) == [(0, 1), (1, 0), (1, 1)]

    def test_join_multiplies(self):
        M = table_transition(self.ctx, ("leaf",), {1, self.c}, [])
        J = table_transition(self.ctx, ("join",), {1, self.c}, [M, M])
        assert J.rows == M.rows

    def test_bad_arity(self):
        M = table_transition(self.ctx, ("leaf",), {1}, [])
        with pytest.raises(ContractError):
            table_transition(self.ctx, ("join",), {1}, [M])
        with pytest.raises(ContractError):
            table_transition(self.ctx, ("introduce", 1), {1}, [M])


def _subtree(ntd, t):
    out, stack = [], [t]
    while stack:
        u = stack.pop()
        out.append(u)
        stack.extend(ntd.children[u])
    return out


def oracle_rows(F, ctx, ntd, t):
    """N(t, alpha, s) by enumerating the variables forgotten below t."""
    n = F.num_vars
    seen = set().union(*(ntd.bags[u] for u in _subtree(ntd, t)))
    bag = ntd.bags[t]
    vs = sorted(v for v in bag if v <= n)
    cs = sorted(v - n - 1 for v in bag if v > n)
    below = sorted(v for v in seen - bag if v <= n)
    done = [v - n - 1 for v in seen - bag if v > n]
    rows: dict = {}
    for alpha in itertools.product((0, 1), repeat=len(vs)):
        for beta in itertools.product((0, 1), repeat=len(below)):
            a = dict(zip(vs, alpha))
            a.update(zip(below, beta))
            if not all(F.constraints[ci].evaluate(a) for ci in done):
                continue
            st = []
            for ci in cs:
                m = ctx.machines[ci]
                q = [x for x in below if x in m.scope]
                q1 = sum(m.literal_value(x, a[x]) for x in q)
                st.append(m.csts.delta_counts(q1, len(q) - q1))
            key = (alpha, tuple(st))
            rows[key] = rows.get(key, 0) + 1
    return rows


class TestSemantics:
    @pytest.mark.parametrize("seed", range(25))
    def test_every_table_counts_partial_solutions(self, seed):
        r = random.Random(seed)
        F = gen_random_system(seed, r.randint(1, 7), r.randint(1, 5), DP_KINDS, max_arity=4)
        ntd = make_nice(heuristic_td(incidence_graph(F)))
        ctx = DpContext.for_system(F)
        for mode in ("naive", "auto"):
            tables = dp_tables(F, ntd, mode)
            for t, M in tables.items():
                assert M.rows == oracle_rows(F, ctx, ntd, t), (mode, t, ntd.kinds[t])

    @pytest.mark.parametrize("seed", range(15))
    def test_join_states_add(self, seed):
        # a join row's state is the sum of the children's states
        r = random.Random(seed)
        F = gen_random_system(seed, r.randint(2, 7), r.randint(2, 5), DP_KINDS, max_arity=4)
        ntd = make_nice(heuristic_td(incidence_graph(F)))
        tables = dp_tables(F, ntd, "naive")
        for t, kind in ntd.kinds.items():
            if kind[0] != "join":
                continue
            M1, M2 = (tables[c] for c in ntd.children[t])
            want: dict = {}
            for (a1, s1), n1 in M1.rows.items():
                for (a2, s2), n2 in M2.rows.items():
                    if a1 == a2:
                        st = tuple(state_add(m.csts, x, y) for m, x, y in zip(M1.machines, s1, s2))
                        want[(a1, st)] = want.get((a1, st), 0) + n1 * n2
            assert tables[t].rows == want


class TestConvolution:
    def test_one_dimensional(self):
        assert lists(convolve_nd([1, 1], [1, 1])) == [1, 2, 1]

    def test_delta_identity(self):
        A = np.array([[3, 0, 2], [1, 5, 7]], dtype=object)
        D = np.zeros((1, 1), dtype=object)
        D[0, 0] = 1
        assert lists(convolve_nd(A, D)) == lists(A)

    def test_against_numpy(self):
        rng = np.random.default_rng(1)
        A = rng.integers(0, 100, size=(3, 4))
        B = rng.integers(0, 100, size=(2, 5))
        want = np.zeros((4, 8), dtype=np.int64)
        for i, j in np.ndindex(A.shape):
            want[i:i + 2, j:j + 5] += A[i, j] * B
        assert lists(convolve_nd(A, B)) == [int(v) for v in want.flat]

    def test_big_integers(self):
        big = 1 << 200
        assert lists(convolve_nd([big, 1], [big, 1])) == [big * big, 2 * big, 1]

    def test_rank_mismatch(self):
        with pytest.raises(ContractError):
            convolve_nd(np.zeros((2,)), np.zeros((2, 2)))


class TestGroupConvolve:
    def test_z2(self):
        assert lists(group_convolve([1, 2], [3, 4], (2,))) == [11, 10]

    def test_identity(self):
        f = np.array([[1, 2, 3], [4, 5, 6]], dtype=object)
        d = np.zeros((2, 3), dtype=object)
        d[0, 0] = 1
        assert lists(group_convolve(f, d, (2, 3))) == lists(f)

    def test_commutative_and_associative(self):
        rng = np.random.default_rng(2)
        mods = (3, 2)
        f, g, h = (np.array(rng.integers(-9, 9, size=mods), dtype=object) for _ in range(3))
        assert lists(group_convolve(f, g, mods)) == lists(group_convolve(g, f, mods))
        left = group_convolve(group_convolve(f, g, mods), h, mods)
        right = group_convolve(f, group_convolve(g, h, mods), mods)
        assert lists(left) == lists(right)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            group_convolve([1, 2], [1, 2, 3], (2,))


class TestSubsetTransforms:
    def test_zeta(self):
        assert lists(subset_zeta([1, 2])) == [1, 3]

    def test_union_product(self):
        assert lists(union_product([1, 1], [1, 1])) == [1, 3]

    def test_union_product_brute(self):
        rng = random.Random(3)
        f = [rng.randint(0, 9) for _ in range(8)]
        g = [rng.randint(0, 9) for _ in range(8)]
        want = [0] * 8
        for a, b in itertools.product(range(8), repeat=2):
            want[a | b] += f[a] * g[b]
        assert lists(union_product(f, g)) == want

    def test_inverse(self):
        f = [5, -3, 7, 0, 2, 2, -8, 1]
        assert lists(subset_moebius(subset_zeta(f))) == f

    def test_input_unchanged(self):
        f = np.array([1, 2, 3, 4], dtype=object)
        subset_zeta(f)
        assert lists(f) == [1, 2, 3, 4]

    def test_not_power_of_two(self):
        with pytest.raises(ContractError):
            subset_zeta([1, 2, 3])

    def test_limit(self):
        with pytest.raises(ContractError):
            subset_zeta(np.zeros(1 << (SUBSET_LIMIT + 1), dtype=np.int8))


class TestFastJoins:
    @pytest.mark.parametrize("seed", range(30))
    def test_onesided(self, seed):
        a, b = random_table_pair(seed)
        assert join_onesided(a, b).rows == join_naive(a, b).rows

    @pytest.mark.parametrize("seed", range(30))
    def test_clause_modulo(self, seed):
        a, b = random_table_pair(seed, kinds=("clause", "xor", "mod"))
        assert join_clause_modulo(a, b).rows == join_naive(a, b).rows

    def test_clause_modulo_rejects_cardinality(self):
        ctx = DpContext.for_system(ConstraintSystem(3, [Cardinality((1, 2, 3), 2)]))
        M = DpTable((), (0,), (ctx.machines[0],), {((), (0,)): 1})
        with pytest.raises(ContractError):
            join_clause_modulo(M, M)

    def test_incompatible_bags(self):
        a, _ = random_table_pair(0)
        b = DpTable(a.vars + (99,), a.cons, a.machines, {})
        with pytest.raises(ContractError):
            join_naive(a, b)


class TestCnfXor:
    def test_small(self):
        F = ConstraintSystem(3, [Clause((1, 2)), Xor((1, 2, 3), 1)])
        assert count_cnf_xor(F) == 3

    def test_chain(self):
        F = ConstraintSystem(30, [Xor((i, i + 1), 0) for i in range(1, 30)])
        assert count_cnf_xor(F) == 2

    def test_rejects_other_kinds(self):
        with pytest.raises(ContractError):
            count_cnf_xor(ConstraintSystem(3, [SumModulo((1, 2, 3), 3, 0)]))


class TestErrors:
    def test_unsupported_kind(self):
        F = ConstraintSystem(2, [Threshold((1, 2), (2, -1), 1)])
        with pytest.raises(ContractError, match="literal-symmetric"):
            dp_count(F)

    def test_bad_join_mode(self):
        with pytest.raises(ContractError):
            dp_count(figure_system(), join_mode="fft")

    def test_vertex_outside_graph(self):
        ctx = DpContext.for_system(ConstraintSystem(2, [Clause((1, 2))]))
        with pytest.raises(ContractError):
            ctx.split(17)
