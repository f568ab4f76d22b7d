"""Tree-decomposition-guided CNF compiler and the constraint-system pipeline.

``compile_cnf`` runs a dynamic program over a rooted decomposition of the
CNF's incidence graph.  A table row is keyed by an assignment to the bag
variables and the set of bag clauses already satisfied by forgotten variables;
its value is a circuit over the forgotten variables.  Forgetting a batch of
variables conjoins each row's circuit with the literal term of the batch;
joining conjoins row circuits of the children.  Rows that can no longer satisfy
a clause are dropped as soon as every variable of the clause has been assigned.

Introduced variables start out free (unassigned in the rows).  A free variable
is given both values only when a bag clause it heads is ready, when a join
partner has assigned it, or when it or one of its clauses is forgotten.  On a
Tseitin CNF this keeps gate variables that a branch only meets as inputs from
multiplying the rows of that branch.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

from .core import ConstraintSystem, ContractError, incidence_graph
from .encode import Cnf, EncodedSystem, encode_system
from .sdnnf import CircuitBuilder, SdnnfCircuit, Vtree, constant_circuit, count_dsdnnf, exist_forget
from .treedecomp import RootedTD, TreeDecomposition, heuristic_td, validate_td


@dataclass
class _Table:
    rows: dict  # (alpha, sigma) -> gate id, or True for the empty circuit
    bag_vars: int  # bitmask over variables
    bag_clauses: int  # bitmask over clause indices
    seen: int  # variables assigned so far in this subtree
    node: object  # vtree node of the forgotten variables, or None
    free: int = 0  # bag variables not yet assigned in this subtree (their alpha bit is 0)


class _Compiler:
    def __init__(self, H: Cnf):
        self.H = H
        n = H.num_vars
        self.pos_cl = [0] * (n + 1)  # clauses containing the positive literal
        self.neg_cl = [0] * (n + 1)
        self.cl_pos = []  # per clause: bitmask of positive variables
        self.cl_neg = []
        self.cl_vars = []
        for i, c in enumerate(H.clauses):
            p = q = 0
            for l in c:
                if l > 0:
                    p |= 1 << l
                    self.pos_cl[l] |= 1 << i
                else:
                    q |= 1 << -l
                    self.neg_cl[-l] |= 1 << i
            self.cl_pos.append(p)
            self.cl_neg.append(q)
            self.cl_vars.append(p | q)
        self.var_cl = [self.pos_cl[v] | self.neg_cl[v] for v in range(n + 1)]
        self.cl_head = [1 << (m.bit_length() - 1) if m else 0 for m in self.cl_vars]
        self.cb = CircuitBuilder()
        self.kids: dict = {}
        self.counter = 0
        self.term_cache: dict = {}
        self.max_rows = 0

    # vtree bookkeeping
    def _node(self, left, right):
        if left is None:
            return right
        if right is None:
            return left
        t = ("c", self.counter)
        self.counter += 1
        self.kids[t] = (left, right)
        return t

    def _chain(self, vs: list[int]):
        if not vs:
            return None, []
        nodes = []
        cur = vs[-1]
        for v in reversed(vs[:-1]):
            t = ("c", self.counter)
            self.counter += 1
            self.kids[t] = (v, cur)
            nodes.append(t)
            cur = t
        nodes.reverse()
        return cur, nodes

    def _term(self, vs, nodes, values):
        key = (tuple(vs), values)
        g = self.term_cache.get(key)
        if g is not None:
            return g
        cb = self.cb
        g = cb.lit(vs[-1] if (values >> (len(vs) - 1)) & 1 else -vs[-1])
        for k in range(len(vs) - 2, -1, -1):
            lit = vs[k] if (values >> k) & 1 else -vs[k]
            g = cb.conj(cb.lit(lit), g, nodes[k])
        self.term_cache[key] = g
        return g

    def _prune(self, tab: _Table, candidates: int):
        """Drop rows violating a closed clause among ``candidates``."""
        closed = []
        c = candidates & tab.bag_clauses
        while c:
            low = c & -c
            i = low.bit_length() - 1
            c ^= low
            if self.cl_vars[i] & ~tab.seen == 0:
                closed.append(i)
        if not closed:
            return
        bv = tab.bag_vars
        checks = [(1 << i, self.cl_pos[i], self.cl_neg[i] & bv) for i in closed]
        rows = {}
        for key, g in tab.rows.items():
            alpha, sigma = key
            for bit, pos, neg in checks:
                if not sigma & bit and not alpha & pos and not ~alpha & neg:
                    break
            else:
                rows[key] = g
        tab.rows = rows

    def _merge(self, groups: dict, lam) -> dict:
        out = {}
        for key, gates in groups.items():
            if len(gates) == 1:
                out[key] = gates[0]
            else:
                if any(g is True for g in gates):
                    raise AssertionError("empty circuit merged with others")
                out[key] = self.cb.disj_many(gates, lam)
        return out

    def _double(self, tab: _Table, low: int):
        rows = {}
        for (alpha, sigma), g in tab.rows.items():
            rows[(alpha, sigma)] = g
            rows[(alpha | low, sigma)] = g
        tab.rows = rows
        tab.free &= ~low
        tab.seen |= low
        self._prune(tab, self.var_cl[low.bit_length() - 1])
        self.max_rows = max(self.max_rows, len(tab.rows))

    def _settle(self, tab: _Table):
        """Assign free variables whose headed bag clauses are all otherwise assigned.

        A clause's head is its highest-numbered variable.  In a Tseitin CNF the
        inputs of a gate are numbered before the gate, so a gate variable is
        assigned exactly when its inputs are known and its value is forced.  A
        variable that a branch only meets as a gate input stays free there.
        """
        changed = True
        while changed and tab.free:
            changed = False
            ready, blocked = 0, 0
            c = tab.bag_clauses
            while c:
                cl = c & -c
                i = cl.bit_length() - 1
                c ^= cl
                head = self.cl_head[i]
                if tab.free & head:
                    if self.cl_vars[i] & ~head & ~tab.seen == 0:
                        ready |= head
                    else:
                        blocked |= head
            ready &= ~blocked
            while ready:
                low = ready & -ready
                ready ^= low
                self._double(tab, low)
                changed = True

    def _assign(self, tab: _Table, mask: int):
        """Assign the free variables in ``mask`` in ascending order, settling in between."""
        while mask & tab.free:
            m = mask & tab.free
            self._double(tab, m & -m)
            self._settle(tab)

    def forget(self, tab: _Table, vars_mask: int, clauses_mask: int) -> _Table:
        if tab.free:
            # forgotten variables and the variables of forgotten clauses must be assigned first
            need = vars_mask
            c = clauses_mask
            while c:
                low = c & -c
                c ^= low
                need |= self.cl_vars[low.bit_length() - 1]
            if need & tab.free:
                tab = _Table(dict(tab.rows), tab.bag_vars, tab.bag_clauses, tab.seen, tab.node, tab.free)
                self._assign(tab, need)
        vs = [v for v in range(vars_mask.bit_length()) if vars_mask >> v & 1]
        chain_root, chain_nodes = self._chain(vs)
        node = self._node(tab.node, chain_root)
        keep_clauses = tab.bag_clauses & ~clauses_mask
        new_bag = tab.bag_vars & ~vars_mask
        groups: dict = {}
        for (alpha, sigma), g in tab.rows.items():
            if vs:
                values = 0
                sat = 0
                for k, v in enumerate(vs):
                    if alpha >> v & 1:
                        values |= 1 << k
                        sat |= self.pos_cl[v]
                    else:
                        sat |= self.neg_cl[v]
                sigma |= sat & tab.bag_clauses
                alpha &= ~vars_mask
            # a forgotten clause was closed earlier, so pruning already enforced it
            sigma &= ~clauses_mask
            if vs:
                t = self._term(vs, chain_nodes, values)
                g = t if g is True else self.cb.conj(g, t, node)
            groups.setdefault((alpha, sigma), []).append(g)
        rows = self._merge(groups, node)
        return _Table(rows, new_bag, keep_clauses, tab.seen, node, tab.free & new_bag)

    def introduce(self, tab: _Table, vars_mask: int, clauses_mask: int) -> _Table:
        tab = _Table(dict(tab.rows), tab.bag_vars | vars_mask, tab.bag_clauses | clauses_mask, tab.seen, tab.node,
                     tab.free | vars_mask)
        if clauses_mask:
            self._prune(tab, clauses_mask)
        self._settle(tab)
        self.max_rows = max(self.max_rows, len(tab.rows))
        return tab

    def join(self, t1: _Table, t2: _Table) -> _Table:
        node = self._node(t1.node, t2.node)
        shared = t1.bag_vars & ~t1.free & ~t2.free
        by_alpha: dict = {}
        for (alpha, sigma), g in t2.rows.items():
            by_alpha.setdefault(alpha & shared, []).append((alpha, sigma, g))
        groups: dict = {}
        for (a1, s1), g1 in t1.rows.items():
            for a2, s2, g2 in by_alpha.get(a1 & shared, ()):
                if g1 is True:
                    g = g2
                elif g2 is True:
                    g = g1
                else:
                    g = self.cb.conj(g1, g2, node)
                groups.setdefault((a1 | a2, s1 | s2), []).append(g)
        rows = self._merge(groups, node)
        tab = _Table(rows, t1.bag_vars, t1.bag_clauses, t1.seen | t2.seen, node, t1.free & t2.free)
        self._prune(tab, tab.bag_clauses)
        self._settle(tab)
        self.max_rows = max(self.max_rows, len(tab.rows))
        return tab


def _split(H: Cnf, bag) -> tuple[int, int]:
    n = H.num_vars
    vm = cm = 0
    for v in bag:
        if 1 <= v <= n:
            vm |= 1 << v
        elif n < v <= n + len(H.clauses):
            cm |= 1 << (v - n - 1)
        else:
            raise ContractError(f"bag vertex {v} is not in the incidence graph")
    return vm, cm


@dataclass
class CnfCompileInfo:
    max_rows: int
    gates: int
    vtree_nodes: int
    seconds: float


def compile_cnf(H: Cnf, td: TreeDecomposition | RootedTD, root: int | None = None, check_td: bool = True,
                info: dict | None = None) -> SdnnfCircuit:
    """Deterministic structured circuit equivalent to ``H``.

    Every variable of ``H`` must occur in some bag; the output vtree has one
    leaf per variable.
    """
    t0 = time.perf_counter()
    if check_td:
        td_plain = td.as_td() if isinstance(td, RootedTD) else td
        rep = validate_td(H.incidence_graph(), td_plain)
        if not rep.ok:
            raise ContractError(f"invalid tree decomposition: {rep.failures}")
    rt = td if isinstance(td, RootedTD) else td.rooted(root)
    comp = _Compiler(H)
    masks = {t: _split(H, b) for t, b in rt.bags.items()}
    tables: dict = {}
    empty = _Table({(0, 0): True}, 0, 0, 0, None)
    for t in rt.postorder():
        vm, cm = masks[t]
        parts = []
        for u in rt.children[t]:
            tab = tables.pop(u)
            uvm, ucm = masks[u]
            tab = comp.forget(tab, uvm & ~vm, ucm & ~cm)
            tab = comp.introduce(tab, vm & ~uvm, cm & ~ucm)
            parts.append(tab)
        if not parts:
            parts = [comp.introduce(empty, vm, cm)]
        cur = parts[0]
        for other in parts[1:]:
            cur = comp.join(cur, other)
        tables[t] = cur
    final = comp.forget(tables[rt.root], masks[rt.root][0], masks[rt.root][1])
    covered = final.seen
    for v in range(1, H.num_vars + 1):
        if not covered >> v & 1:
            raise ContractError(f"variable {v} occurs in no bag")
    if not final.rows:
        D = constant_circuit(0, Vtree(final.node, comp.kids) if final.node is not None else None)
    else:
        g = final.rows[(0, 0)]
        vt = Vtree(final.node, comp.kids) if final.node is not None else None
        if g is True:
            D = constant_circuit(1, vt)
        else:
            comp.cb.vtree = vt
            D = comp.cb.build(g, deterministic=True)
    if info is not None:
        info.update(max_rows=comp.max_rows, gates=D.num_gates, seconds=time.perf_counter() - t0)
    return D


# ---------------------------------------------------------------- pipeline


@dataclass
class CompileStats:
    num_vars: int
    num_constraints: int
    td_width: int
    obdd_widths: list[int] = field(default_factory=list)
    sdnnf_widths: list[int] = field(default_factory=list)
    sdnnf_sizes: list[int] = field(default_factory=list)
    cnf_vars: int = 0
    cnf_clauses: int = 0
    td_h_width: int = 0
    max_rows: int = 0
    circuit_gates: int = 0
    circuit_width: int = 0
    seconds_encode: float = 0.0
    seconds_compile: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def compile_system(F: ConstraintSystem, td: TreeDecomposition | None = None, root: int | None = None,
                   validate: bool = False) -> tuple[SdnnfCircuit, CompileStats]:
    """Encode, compile, then forget the auxiliary variables."""
    if td is None:
        td = heuristic_td(incidence_graph(F))
    t0 = time.perf_counter()
    E: EncodedSystem = encode_system(F, td, root=root, validate=validate)
    t1 = time.perf_counter()
    info: dict = {}
    D = compile_cnf(E.cnf, E.td, root=E.root, check_td=validate, info=info)
    t2 = time.perf_counter()
    Z = [z for zs in E.zsets for z in zs]
    out = exist_forget(D, Z)
    stats = CompileStats(
        num_vars=F.num_vars,
        num_constraints=len(F),
        td_width=td.width,
        obdd_widths=list(E.obdd_widths),
        sdnnf_widths=[c.width() if c.lam is not None else 0 for c in E.circuits],
        sdnnf_sizes=[c.num_gates for c in E.circuits],
        cnf_vars=E.cnf.num_vars,
        cnf_clauses=E.cnf.num_clauses,
        td_h_width=E.td.width,
        max_rows=info.get("max_rows", 0),
        circuit_gates=D.num_gates,
        circuit_width=D.width() if D.lam is not None else 0,
        seconds_encode=t1 - t0,
        seconds_compile=t2 - t1,
    )
    return out, stats


def count_via_compilation(F: ConstraintSystem, td: TreeDecomposition | None = None, root: int | None = None) -> int:
    D, _ = compile_system(F, td, root)
    return count_dsdnnf(D, F.variables())
