"""Tseitin encoding of structured circuits and the system-level CNF encoder.

The encoding of a system keeps the original variables 1..n, numbers the
auxiliary gate variables from n+1 in children-first order per constraint, and
carries a tree decomposition of the CNF's incidence graph built from the
per-constraint vtree decompositions.  In that incidence graph variables are
vertices 1..N and clause ``i`` (0-based) is vertex N+1+i.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx

from .core import ConstraintSystem, ContractError
from .obdd import build_obdd
from .sdnnf import AND, CONST, LIT, OR, SdnnfCircuit, Vtree, obdd_to_sdnnf
from .treedecomp import TreeDecomposition, extract_vtrees, merge_tds, validate_td


@dataclass
class Cnf:
    """Clause list over variables 1..num_vars.

    Unlike ``core.Clause`` a CNF clause may repeat a variable (Tseitin
    clauses of tautology gates do) and may be empty.
    """

    num_vars: int
    clauses: list[tuple[int, ...]] = field(default_factory=list)

    def __post_init__(self):
        self.clauses = [tuple(int(l) for l in c) for c in self.clauses]
        for c in self.clauses:
            for l in c:
                if l == 0 or abs(l) > self.num_vars:
                    raise ContractError(f"literal {l} out of range 1..{self.num_vars}")

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def clause_vertex(self, i: int) -> int:
        return self.num_vars + 1 + i

    def evaluate(self, assignment) -> int:
        for c in self.clauses:
            if not any((assignment[abs(l)] if l > 0 else 1 - assignment[abs(l)]) for l in c):
                return 0
        return 1

    def incidence_graph(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(1, self.num_vars + 1))
        for i, c in enumerate(self.clauses):
            cv = self.clause_vertex(i)
            G.add_node(cv)
            for l in c:
                G.add_edge(cv, abs(l))
        return G

    def count_brute(self, limit: int = 24) -> int:
        from .core import Clause
        from .kernels import count_models

        if self.num_vars > limit:
            raise ContractError("too many variables to enumerate")
        # a clause with a repeated variable is either a tautology or equals its deduplication
        cons = []
        for c in self.clauses:
            lits = set(c)
            if any(-l in lits for l in lits):
                continue
            cons.append(Clause(tuple(sorted(lits, key=abs))))
        return count_models(ConstraintSystem(self.num_vars, cons))

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(str(l) for l in c) + (" 0" if c else "0") for c in self.clauses]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dimacs(cls, text: str) -> "Cnf":
        header = None
        clauses: list[tuple[int, ...]] = []
        cur: list[int] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line[0] in "c%":
                continue
            if line.startswith("p"):
                tok = line.split()
                if len(tok) != 4 or tok[1] != "cnf":
                    raise ValueError(f"line {lineno}: malformed header")
                header = (int(tok[2]), int(tok[3]))
                continue
            if header is None:
                raise ValueError(f"line {lineno}: clause before header")
            for t in line.split():
                l = int(t)
                if l == 0:
                    clauses.append(tuple(cur))
                    cur = []
                else:
                    cur.append(l)
        if header is None:
            raise ValueError("missing 'p cnf' header")
        if cur:
            clauses.append(tuple(cur))
        if len(clauses) != header[1]:
            raise ValueError(f"header announces {header[1]} clauses, found {len(clauses)}")
        return cls(header[0], clauses)


@dataclass
class TseitinCnf:
    clauses: list[tuple[int, ...]]
    zvars: list[int]
    gate_var: dict[int, int]  # gate id -> literal standing for the gate
    gate_clauses: dict[int, list[int]]  # gate id -> indices into clauses
    output_clause: int | None
    first_var: int

    @property
    def next_var(self) -> int:
        return self.first_var + len(self.zvars)


def tseitin_encode(D: SdnnfCircuit, first_var: int | None = None) -> TseitinCnf:
    """Three clauses per AND/OR gate plus a unit clause asserting the output.

    Input literals stand for themselves.  A constant-0 circuit becomes the empty
    clause and a constant-1 circuit the empty CNF; other constant inputs must be
    propagated away first.
    """
    if first_var is None:
        first_var = D.max_var() + 1
    clauses: list[tuple[int, ...]] = []
    zvars: list[int] = []
    gate_var: dict[int, int] = {}
    gate_clauses: dict[int, list[int]] = {}
    nxt = first_var
    if D.op[D.output] == CONST:
        out_clause = None
        if not D.a[D.output]:
            clauses.append(())
            out_clause = 0
        return TseitinCnf(clauses, zvars, gate_var, gate_clauses, out_clause, first_var)
    for g in D.reachable():
        o = D.op[g]
        if o == LIT:
            gate_var[g] = D.a[g]
        elif o == CONST:
            raise ContractError(f"constant input gate {g}; propagate constants before encoding")
        else:
            z = nxt
            nxt += 1
            zvars.append(z)
            gate_var[g] = z
            z1, z2 = gate_var[D.a[g]], gate_var[D.b[g]]
            if o == AND:
                cl = [(-z, z1), (-z, z2), (z, -z1, -z2)]
            elif o == OR:
                cl = [(z, -z1), (z, -z2), (-z, z1, z2)]
            else:
                raise ContractError(f"gate {g} is not binary")
            gate_clauses[g] = list(range(len(clauses), len(clauses) + 3))
            clauses.extend(cl)
    clauses.append((gate_var[D.output],))
    return TseitinCnf(clauses, zvars, gate_var, gate_clauses, len(clauses) - 1, first_var)


def phi_map(D: SdnnfCircuit, enc: TseitinCnf, clause_vertex) -> dict:
    """Vtree node -> incidence vertices of the Tseitin pieces of its gates.

    A gate contributes its own variable, the variables of its inputs (gate
    variables or input literals) and its clause vertices.  A leaf also keeps
    its variable.  The output unit clause (or the empty clause of a constant-0
    circuit) goes to the node of the output gate, or to the vtree root.
    """
    vt = D.vtree
    if vt is None or D.lam is None:
        raise ContractError("structured circuit required")
    phi: dict = {t: set() for t in vt.nodes()}
    for t in vt.leaves():
        if not vt.dummy:
            phi[t].add(t)
    for g, cls in enc.gate_clauses.items():
        s = D.lam[g]
        if s is None:
            raise ContractError(f"gate {g} has no vtree node")
        phi[s].add(abs(enc.gate_var[g]))
        phi[s].add(abs(enc.gate_var[D.a[g]]))
        phi[s].add(abs(enc.gate_var[D.b[g]]))
        phi[s].update(clause_vertex(i) for i in cls)
    if enc.output_clause is not None:
        out = D.output
        s = D.lam[out] if D.op[out] != CONST and D.lam[out] is not None else vt.root
        phi[s].add(clause_vertex(enc.output_clause))
        if D.op[out] != CONST:
            phi[s].add(abs(enc.gate_var[out]))
    return {t: frozenset(v) for t, v in phi.items()}


def _check_complete(D: SdnnfCircuit):
    masks = D.var_masks()
    vt = D.vtree
    for g in D.reachable():
        if D.op[g] in (AND, OR, LIT):
            want = 0
            for v in vt.var(D.lam[g]):
                want |= 1 << v
            if masks[g] != want:
                raise ContractError(f"circuit is not complete at gate {g}")


def td_of_encoding(D: SdnnfCircuit, enc: TseitinCnf, td_vtree: TreeDecomposition, clause_vertex=None,
                   check: bool = True) -> TreeDecomposition:
    """Replace every vtree node in the bags by its Tseitin vertices."""
    if check:
        _check_complete(D)
    if clause_vertex is None:
        total = enc.next_var - 1
        clause_vertex = lambda i: total + 1 + i
    phi = phi_map(D, enc, clause_vertex)
    bags = {}
    for t, b in td_vtree.bags.items():
        out: set = set()
        for s in b:
            out |= phi[s]
        bags[t] = frozenset(out)
    return TreeDecomposition(bags, list(td_vtree.edges))


@dataclass
class EncodedSystem:
    cnf: Cnf
    td: TreeDecomposition
    num_x: int
    zsets: list[list[int]]
    circuits: list[SdnnfCircuit]
    clause_ranges: list[tuple[int, int]]
    extraction: object
    obdd_widths: list[int]

    @property
    def root(self):
        # the compiler must walk the decomposition from the same root the vtrees hang from
        return self.extraction.tree.root

    @property
    def x_vars(self) -> range:
        return range(1, self.num_x + 1)

    def zmap(self) -> str:
        lines = [f"zmap {len(self.zsets)}"]
        for i, zs in enumerate(self.zsets):
            lines.append(" ".join(["z", str(i)] + [str(z) for z in zs] + ["0"]))
        return "\n".join(lines) + "\n"


def encode_system(F: ConstraintSystem, td: TreeDecomposition, root: int | None = None,
                  validate: bool = False) -> EncodedSystem:
    n = F.num_vars
    ext = extract_vtrees(F, td, root)
    circuits, encs, widths = [], [], []
    nxt = n + 1
    for ci, c in enumerate(F.constraints):
        vt = ext.vtrees[ci]
        order = [] if vt.dummy else vt.leaf_order()
        B = build_obdd(c, order)
        widths.append(B.width)
        D = obdd_to_sdnnf(B, vt)
        enc = tseitin_encode(D, nxt)
        nxt = enc.next_var
        circuits.append(D)
        encs.append(enc)
    total = nxt - 1
    clauses: list[tuple[int, ...]] = []
    ranges = []
    overlays = []
    for ci, (D, enc) in enumerate(zip(circuits, encs)):
        off = len(clauses)
        clauses.extend(enc.clauses)
        ranges.append((off, len(clauses)))
        ov = ext.overlay(ci)
        overlays.append(
            td_of_encoding(D, enc, ov, clause_vertex=lambda i, off=off: total + 1 + off + i, check=validate)
        )
    base_rt = ext.tree
    base = TreeDecomposition(
        {t: frozenset(v for v in b if v <= n) for t, b in base_rt.bags.items()},
        [(p, c) for p, ch in base_rt.children.items() for c in ch],
    )
    merged = merge_tds(base, overlays)
    cnf = Cnf(total, clauses)
    if validate:
        rep = validate_td(cnf.incidence_graph(), merged)
        if not rep.ok:
            raise ContractError(f"encoding decomposition invalid: {rep.failures}")
    return EncodedSystem(cnf, merged, n, [e.zvars for e in encs], circuits, ranges, ext, widths)
