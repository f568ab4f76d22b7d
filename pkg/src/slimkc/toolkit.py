"""Instance generators, the cross-engine checker and OBDD width reports."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx

from .core import (
    Cardinality,
    Clause,
    ConstraintSystem,
    ContractError,
    GroupExact,
    PairExact,
    SmallScope,
    SumModulo,
    Threshold,
    Xor,
    brute_force_count,
    incidence_graph,
)
from .obdd import build_obdd, obdd_apply, obdd_from_automaton
from .treedecomp import TreeDecomposition


# ---------------------------------------------------------------- k-clique systems


@dataclass
class CliqueInstance:
    graph: nx.Graph
    k: int
    system: ConstraintSystem
    td: TreeDecomposition
    var_of: dict  # (i, u, v) -> variable for x_i[uv]
    edges: list[tuple]

    def expected_count_complete(self) -> int:
        n = self.graph.number_of_nodes()
        return math.comb(n, self.k) * math.factorial(self.k)


def gen_clique_system(G: nx.Graph, k: int) -> tuple[ConstraintSystem, TreeDecomposition]:
    inst = clique_instance(G, k)
    return inst.system, inst.td


def clique_instance(G: nx.Graph, k: int) -> CliqueInstance:
    """System whose models are the ordered k-cliques of G.

    Variables x_i[uv] and x_i[vu] exist for every edge and every i.  The vertex
    selector of position i says all its true variables leave one vertex and
    there are exactly k-1 of them; the edge selector of uv says either exactly
    one x_.[uv] and one x_.[vu] are true, or none.  The emitted decomposition is
    a path with one bag per variable: all vertex selectors, the selector of that
    variable's edge, and the variable.
    """
    if k < 2:
        raise ContractError("k must be at least 2")
    if any(u == v for u, v in G.edges):
        raise ContractError("graph must be simple")
    nodes = sorted(G.nodes)
    edges = sorted(tuple(sorted(e)) for e in G.edges)
    var = {}
    nxt = 1
    for u, v in edges:
        for i in range(1, k + 1):
            var[(i, u, v)] = nxt
            var[(i, v, u)] = nxt + 1
            nxt += 2
    n = nxt - 1
    cons = []
    for i in range(1, k + 1):
        groups = []
        for u in nodes:
            g = tuple(var[(i, u, w)] for w in sorted(G.neighbors(u)))
            if g:
                groups.append(g)
        cons.append(GroupExact(tuple(groups), k - 1))
    for u, v in edges:
        cons.append(PairExact(tuple(var[(i, u, v)] for i in range(1, k + 1)), tuple(var[(i, v, u)] for i in range(1, k + 1))))
    F = ConstraintSystem(n, cons)
    chis = [F.constraint_vertex(i) for i in range(k)]
    bags: dict[int, frozenset] = {}
    tedges = []
    t = 0
    for e, (u, v) in enumerate(edges):
        cuv = F.constraint_vertex(k + e)
        for i in range(1, k + 1):
            for x in (var[(i, u, v)], var[(i, v, u)]):
                bags[t] = frozenset(chis + [cuv, x])
                if t:
                    tedges.append((t - 1, t))
                t += 1
    if not bags:
        bags[0] = frozenset(chis)
    return CliqueInstance(G, k, F, TreeDecomposition(bags, tedges), var, edges)


# ---------------------------------------------------------------- OBDD width report


@dataclass
class WidthReport:
    pair_widths: list[int]
    vertex_widths: list[int]
    pair_bound: int
    vertex_bound: int

    @property
    def ok(self) -> bool:
        return all(w <= self.pair_bound for w in self.pair_widths) and all(
            w <= self.vertex_bound for w in self.vertex_widths
        )


def obdd_width_report(inst: CliqueInstance, orderings: int = 20, seed: int = 0) -> WidthReport:
    """Complete-OBDD widths of the edge and vertex selectors over random orderings.

    The edge selectors must stay within width 8 and the vertex selectors within
    n*k + 2 for n vertices.  The first ordering of every constraint is its scope
    order; the rest are seeded shuffles.
    """
    rng = random.Random(seed)
    k = inst.k
    pair, vertex = [], []
    for ci, c in enumerate(inst.system.constraints):
        scope = list(c.variables)
        best = 0
        for r in range(orderings):
            order = scope[:] if r == 0 else rng.sample(scope, len(scope))
            best = max(best, build_obdd(c, order).width)
        (vertex if ci < k else pair).append(best)
    n = inst.graph.number_of_nodes()
    return WidthReport(pair, vertex, 8, n * k + 2)


# ---------------------------------------------------------------- random systems

KINDS = ("clause", "xor", "mod", "card", "threshold", "table")


def _kind_of(name: str) -> tuple[str, int | None]:
    if name.startswith("mod") and name[3:].isdigit():
        m = int(name[3:])
        if m < 2:
            raise ContractError("modulus must be at least 2")
        return "mod", m
    if name not in KINDS:
        raise ContractError(f"unknown constraint kind '{name}'; choose from {KINDS} or modM")
    return name, None


def gen_random_system(seed: int, n: int, m: int, mix: Sequence[str] = ("clause", "xor"),
                      max_arity: int = 5) -> ConstraintSystem:
    """Seeded random system; scopes are drawn without replacement.

    ``mix`` names the kinds to draw from uniformly: clause, xor, mod (random
    modulus 2..4), modM (fixed modulus M), card, threshold, table.
    """
    if m < 0 or n < 0:
        raise ContractError("sizes must be nonnegative")
    if m and n == 0:
        raise ContractError("constraints need at least one variable")
    if max_arity < 1:
        raise ContractError("max_arity must be positive")
    kinds = [_kind_of(k) for k in mix]
    if m and not kinds:
        raise ContractError("empty kind mix")
    rng = random.Random(seed)
    cons = []
    for _ in range(m):
        kind, mod = kinds[rng.randrange(len(kinds))]
        r = rng.randint(1, min(n, max_arity))
        vs = rng.sample(range(1, n + 1), r)
        lits = tuple(v if rng.random() < 0.5 else -v for v in vs)
        if kind == "clause":
            cons.append(Clause(lits))
        elif kind == "xor":
            cons.append(Xor(lits, rng.randint(0, 1)))
        elif kind == "mod":
            q = mod or rng.randint(2, 4)
            cons.append(SumModulo(lits, q, rng.randrange(q)))
        elif kind == "card":
            cons.append(Cardinality(lits, rng.randint(0, r)))
        elif kind == "threshold":
            ws = tuple(rng.choice((-3, -2, -1, 1, 2, 3)) for _ in lits)
            lo = -sum(abs(w) for w in ws)
            cons.append(Threshold(lits, ws, rng.randint(lo // 2, sum(abs(w) for w in ws))))
        else:
            cons.append(SmallScope(tuple(sorted(vs)), rng.getrandbits(1 << r)))
    return ConstraintSystem(n, cons)


# ---------------------------------------------------------------- cross-engine check


@dataclass
class Verdict:
    counts: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    @property
    def agree(self) -> bool:
        return not self.errors and len(set(self.counts.values())) <= 1 and bool(self.counts)

    def summary(self) -> str:
        parts = [f"{k}={v}" for k, v in self.counts.items()]
        parts += [f"{k}: ERROR {e}" for k, e in self.errors.items()]
        parts += [f"{k}: skipped ({why})" for k, why in self.skipped.items()]
        return ("AGREE " if self.agree else "DISAGREE ") + "; ".join(parts)


ENGINES = ("brute", "compiled", "dp")
BRUTE_LIMIT = 20


def check_all(F: ConstraintSystem, td: TreeDecomposition | None = None, engines: Sequence[str] = ENGINES) -> Verdict:
    """Count with every requested engine (every applicable join mode for dp)."""
    from .compile import count_via_compilation
    from .csts import csts_for_constraint
    from .dpcount import _is_clause_machine, _modulus, dp_count

    v = Verdict()
    for e in engines:
        if e not in ENGINES:
            raise ContractError(f"unknown engine '{e}'")
    if "brute" in engines:
        if F.num_vars <= BRUTE_LIMIT:
            v.counts["brute"] = brute_force_count(F)
        else:
            v.skipped["brute"] = f"more than {BRUTE_LIMIT} variables"
    if "compiled" in engines:
        try:
            v.counts["compiled"] = count_via_compilation(F, td)
        except Exception as ex:  # diagnostics, not control flow
            v.errors["compiled"] = f"{type(ex).__name__}: {ex}"
    if "dp" in engines:
        try:
            ms = [csts_for_constraint(c) for c in F.constraints]
        except ContractError as ex:
            v.skipped["dp"] = str(ex)
            ms = None
        if ms is not None:
            modes = ["naive", "auto"]
            if all(m.csts.one_sided for m in ms):
                modes.append("onesided")
            if all(_is_clause_machine(m) or _modulus(m) for m in ms):
                modes.append("clause_modulo")
            for mode in modes:
                try:
                    v.counts[f"dp-{mode}"] = dp_count(F, td, join_mode=mode)
                except Exception as ex:
                    v.errors[f"dp-{mode}"] = f"{type(ex).__name__}: {ex}"
    return v
