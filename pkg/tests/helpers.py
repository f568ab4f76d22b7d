"""Seeded generators shared by several test files."""
from __future__ import annotations

import random

from slimkc.core import Cardinality, Clause, SumModulo, Xor
from slimkc.csts import csts_for_constraint
from slimkc.dpcount import DpTable
from slimkc.sdnnf import CircuitBuilder, Vtree


def random_vtree(order, rng: random.Random) -> Vtree:
    """Vtree with the given leaf order and random split points."""
    def build(lo, hi):
        if hi - lo == 1:
            return order[lo]
        mid = rng.randint(lo + 1, hi - 1)
        return (build(lo, mid), build(mid, hi))

    return Vtree.from_nested(build(0, len(order)))


def random_machine(rng: random.Random, scope, kinds=("clause", "xor", "mod", "card")):
    lits = [v if rng.random() < 0.5 else -v for v in scope]
    kind = rng.choice(kinds)
    if kind == "clause":
        c = Clause(lits)
    elif kind == "xor":
        c = Xor(lits, rng.randint(0, 1))
    elif kind == "mod":
        q = rng.randint(2, 4)
        c = SumModulo(lits, q, rng.randrange(q))
    else:
        c = Cardinality(lits, rng.randint(0, len(lits)))
    return csts_for_constraint(c)


def random_table_pair(seed: int, kinds=("clause", "xor", "mod", "card"), max_vars=3, max_cons=3,
                      density=0.6, big=False):
    """Two join-compatible tables with random rows over reachable states."""
    rng = random.Random(seed)
    nv = rng.randint(0, max_vars)
    nc = rng.randint(1, max_cons)
    vs = tuple(range(1, nv + 1))
    pool = list(range(1, nv + 4))
    machines = tuple(random_machine(rng, rng.sample(pool, rng.randint(1, 3)), kinds) for _ in range(nc))
    cons = tuple(range(nc))
    top = 1 << 80 if big else 5

    def table():
        rows = {}
        alphas = [tuple((a >> i) & 1 for i in range(nv)) for a in range(1 << nv)]
        for alpha in alphas:
            for _ in range(rng.randint(0, 4)):
                if rng.random() > density:
                    continue
                st = tuple(rng.randrange(m.csts.num_states) for m in machines)
                rows[(alpha, st)] = rows.get((alpha, st), 0) + rng.randint(1, top)
        return DpTable(vs, cons, machines, rows)

    return table(), table()


# incidence vertices of the running example: x1..x7 are 1..7, c1, c2, c3 are 8, 9, 10
C1, C2, C3 = 8, 9, 10
FIG_BAGS = {
    0: {C2},
    1: {C2, C3},
    2: {C2, C3},
    3: {C2, 4, C3},
    4: {C2, 5, C3},
    5: {C3, 6},
    6: {C3, 7},
    7: {C2, C3},
    8: {C2, 3, C3},
    9: {C2, 3, 2},
    10: {C1, 3, 2},
    11: {C1, 1},
}
FIG_EDGES = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (1, 7), (7, 8), (8, 9), (9, 10), (10, 11)]


def figure_td():
    from slimkc.treedecomp import TreeDecomposition

    return TreeDecomposition({t: frozenset(b) for t, b in FIG_BAGS.items()}, list(FIG_EDGES))


def figure_circuit():
    """Hand-built circuit of the running example's XOR: even/odd halves recombined."""
    vt = Vtree.from_nested(((2, 3), (4, 5)))
    cb = CircuitBuilder(vt)
    n23 = next(t for t, k in vt.kids.items() if set(k) == {2, 3})
    n45 = next(t for t, k in vt.kids.items() if set(k) == {4, 5})

    def half(x, y, node, odd):
        p = cb.conj(cb.lit(x), cb.lit(-y if odd else y), node)
        q = cb.conj(cb.lit(-x), cb.lit(y if odd else -y), node)
        return cb.disj(p, q, node)

    a1 = cb.conj(half(2, 3, n23, False), half(4, 5, n45, False), vt.root)
    a2 = cb.conj(half(2, 3, n23, True), half(4, 5, n45, True), vt.root)
    return cb.build(cb.disj(a1, a2, vt.root), deterministic=True), vt


def figure_vtree_bags(vt):
    """Hand bag map of the running example's c2 vtree over the figure's tree."""
    n23 = next(t for t, k in vt.kids.items() if set(k) == {2, 3})
    n45 = next(t for t, k in vt.kids.items() if set(k) == {4, 5})
    a = vt.root
    hand = {1: {a}, 2: {a, n45}, 3: {n45, 4}, 4: {n45, 5}, 7: {a, n23}, 8: {n23, 3}, 9: {n23, 2}}
    return {t: frozenset(hand.get(t, ())) for t in FIG_BAGS}
