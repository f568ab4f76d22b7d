"""Model counting by dynamic programming over a nice tree decomposition.

A table at node t maps (alpha, states) to a count, where alpha assigns the bag
variables (in the table's variable order) and ``states`` holds one CSTS state
per bag constraint.  The count is the number of assignments to the variables
forgotten below t that satisfy every constraint forgotten below t and drive
each bag constraint's machine to the listed state.  A bag variable's literal is
only fed to the machines when the variable is forgotten, and a constraint is
checked when it is forgotten by feeding it the bag variables still pending.

Joins combine states by state addition.  Besides the direct quadratic join
there are two exact fast joins: a multi-dimensional convolution for one-sided
machines and a zeta/Moebius plus cyclic-group convolution for bags holding only
clauses and modulo constraints.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import Clause, ConstraintSystem, ContractError, SumModulo, Xor, incidence_graph
from .csts import FlippedCsts, csts_for_constraint
from .treedecomp import NiceTreeDecomposition, TreeDecomposition, heuristic_td, make_nice, validate_nice

JOIN_MODES = ("naive", "onesided", "clause_modulo", "auto")
SUBSET_LIMIT = 24


@dataclass
class DpTable:
    vars: tuple[int, ...]
    cons: tuple[int, ...]  # constraint indices
    machines: tuple[FlippedCsts, ...]  # aligned with cons
    rows: dict = field(default_factory=dict)  # (alpha tuple, state tuple) -> int

    def total(self) -> int:
        return sum(self.rows.values())

    def by_alpha(self) -> dict:
        out: dict = {}
        for (alpha, states), n in self.rows.items():
            out.setdefault(alpha, {})[states] = n
        return out


@dataclass
class DpContext:
    F: ConstraintSystem
    machines: list[FlippedCsts]

    @classmethod
    def for_system(cls, F: ConstraintSystem) -> "DpContext":
        machines = []
        for c in F.constraints:
            try:
                machines.append(csts_for_constraint(c))
            except ContractError as e:
                raise ContractError(f"{e}; the DP engine needs literal-symmetric constraints") from None
        return cls(F, machines)

    def split(self, v):
        """('var', x) or ('con', index) for an incidence-graph vertex."""
        n = self.F.num_vars
        if 1 <= v <= n:
            return "var", v
        if n < v <= n + len(self.F):
            return "con", v - n - 1
        raise ContractError(f"vertex {v} is not in the incidence graph")


def _add(rows: dict, key, n: int):
    if n:
        rows[key] = rows.get(key, 0) + n


# ---------------------------------------------------------------- transitions


def _leaf(ctx: DpContext, bag: Iterable) -> DpTable:
    vs, cs = [], []
    for v in bag:
        kind, x = ctx.split(v)
        (vs if kind == "var" else cs).append(x)
    vs.sort()
    cs.sort()
    ms = tuple(ctx.machines[i] for i in cs)
    s0 = tuple(m.csts.s0 for m in ms)
    rows = {(alpha, s0): 1 for alpha in itertools.product((0, 1), repeat=len(vs))}
    return DpTable(tuple(vs), tuple(cs), ms, rows)


def _introduce_var(M: DpTable, x: int) -> DpTable:
    if x in M.vars:
        raise ContractError(f"variable {x} already in the bag")
    vs = tuple(sorted(M.vars + (x,)))
    j = vs.index(x)
    rows = {}
    for (alpha, st), n in M.rows.items():
        for b in (0, 1):
            rows[(alpha[:j] + (b,) + alpha[j:], st)] = n
    return DpTable(vs, M.cons, M.machines, rows)


def _introduce_con(ctx: DpContext, M: DpTable, ci: int) -> DpTable:
    if ci in M.cons:
        raise ContractError(f"constraint {ci} already in the bag")
    cs = tuple(sorted(M.cons + (ci,)))
    j = cs.index(ci)
    ms = M.machines[:j] + (ctx.machines[ci],) + M.machines[j:]
    s0 = ctx.machines[ci].csts.s0
    rows = {(alpha, st[:j] + (s0,) + st[j:]): n for (alpha, st), n in M.rows.items()}
    return DpTable(M.vars, cs, ms, rows)


def _forget_var(M: DpTable, x: int) -> DpTable:
    if x not in M.vars:
        raise ContractError(f"variable {x} not in the bag")
    j = M.vars.index(x)
    touched = []
    for k, m in enumerate(M.machines):
        if x in m.scope:
            touched.append((k, m.csts.f0, m.csts.f1, x in m.flipped))
    rows: dict = {}
    for (alpha, st), n in M.rows.items():
        b = alpha[j]
        if touched:
            st = list(st)
            for k, f0, f1, flip in touched:
                st[k] = (f1 if b ^ flip else f0)[st[k]]
            st = tuple(st)
        _add(rows, (alpha[:j] + alpha[j + 1:], st), n)
    return DpTable(M.vars[:j] + M.vars[j + 1:], M.cons, M.machines, rows)


def _forget_con(M: DpTable, ci: int) -> DpTable:
    if ci not in M.cons:
        raise ContractError(f"constraint {ci} not in the bag")
    j = M.cons.index(ci)
    m = M.machines[j]
    f0, f1 = m.csts.f0, m.csts.f1
    pending = [(k, x in m.flipped) for k, x in enumerate(M.vars) if x in m.scope]
    rows: dict = {}
    for (alpha, st), n in M.rows.items():
        s = st[j]
        for k, flip in pending:
            s = (f1 if alpha[k] ^ flip else f0)[s]
        if s in m.csts.accepting:
            _add(rows, (alpha, st[:j] + st[j + 1:]), n)
    return DpTable(M.vars, M.cons[:j] + M.cons[j + 1:], M.machines[:j] + M.machines[j + 1:], rows)


def _check_compatible(M1: DpTable, M2: DpTable):
    if M1.vars != M2.vars or M1.cons != M2.cons:
        raise ContractError("join children must have equal bags")


def join_naive(M1: DpTable, M2: DpTable) -> DpTable:
    """Sum of n1*n2 over state tuples adding up to each target tuple."""
    _check_compatible(M1, M2)
    adds = [m.csts.add_table.tolist() for m in M1.machines]
    g2 = M2.by_alpha()
    rows: dict = {}
    for alpha, r1 in M1.by_alpha().items():
        r2 = g2.get(alpha)
        if not r2:
            continue
        for s1, n1 in r1.items():
            for s2, n2 in r2.items():
                st = tuple(adds[k][a][b] for k, (a, b) in enumerate(zip(s1, s2)))
                if any(s < 0 for s in st):
                    raise ContractError("unreachable state in a DP table")
                _add(rows, (alpha, st), n1 * n2)
    return DpTable(M1.vars, M1.cons, M1.machines, rows)


# ---------------------------------------------------------------- exact convolution


def _pack(values: Sequence[int], width: int) -> int:
    nbytes = width // 8
    return int.from_bytes(b"".join(int(v).to_bytes(nbytes, "little") for v in values), "little")


def _unpack(x: int, width: int, count: int) -> list[int]:
    nbytes = width // 8
    raw = x.to_bytes(nbytes * count, "little")
    return [int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") for i in range(count)]


def convolve_nd(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Exact linear convolution of nonnegative integer tensors.

    Kronecker substitution: both tensors are laid out in the output's strides,
    packed into one big integer each with a coefficient width that cannot
    overflow, multiplied once, and unpacked.
    """
    A = np.asarray(A, dtype=object)
    B = np.asarray(B, dtype=object)
    if A.ndim != B.ndim:
        raise ContractError("tensor ranks differ")
    if A.ndim == 0:
        return np.array(A.item() * B.item(), dtype=object)
    if any(int(v) < 0 for v in itertools.chain(A.flat, B.flat)):
        raise ContractError("Kronecker packing needs nonnegative entries")
    out_shape = tuple(a + b - 1 for a, b in zip(A.shape, B.shape))
    size = int(np.prod(out_shape))

    def spread(T):
        flat = np.zeros(out_shape, dtype=object)
        flat[tuple(slice(0, s) for s in T.shape)] = T
        return flat.reshape(-1)

    sa, sb = sum(int(v) for v in A.flat), sum(int(v) for v in B.flat)
    if sa == 0 or sb == 0:
        return np.zeros(out_shape, dtype=object)
    width = (sa * sb).bit_length() + 1
    width = (width + 7) // 8 * 8
    prod = _pack(spread(A), width) * _pack(spread(B), width)
    return np.array(_unpack(prod, width, size), dtype=object).reshape(out_shape)


def group_convolve(f, g, moduli: Sequence[int]) -> np.ndarray:
    """(f*g)(x) = sum over a+b=x of f(a)g(b) in the product of cyclic groups."""
    moduli = tuple(int(m) for m in moduli)
    f = np.asarray(f, dtype=object)
    g = np.asarray(g, dtype=object)
    if f.shape != moduli or g.shape != moduli:
        raise ContractError(f"tables of shape {f.shape} and {g.shape} do not match moduli {moduli}")
    if any(m < 1 for m in moduli):
        raise ContractError("moduli must be positive")
    if not moduli:
        return np.array(f.item() * g.item(), dtype=object)
    if any(v < 0 for v in itertools.chain(f.flat, g.flat)):
        # signed inputs: split into positive and negative parts
        fp, fn = np.where(f > 0, f, 0), np.where(f < 0, -f, 0)
        gp, gn = np.where(g > 0, g, 0), np.where(g < 0, -g, 0)
        return (group_convolve(fp, gp, moduli) + group_convolve(fn, gn, moduli)
                - group_convolve(fp, gn, moduli) - group_convolve(fn, gp, moduli))
    lin = convolve_nd(f, g)
    out = np.zeros(moduli, dtype=object)
    for idx in np.ndindex(lin.shape):
        v = lin[idx]
        if v:
            out[tuple(i % m for i, m in zip(idx, moduli))] += v
    return out


def _subset_steps(f, inverse: bool) -> np.ndarray:
    f = np.array(f, dtype=object)
    size = f.shape[0]
    k = size.bit_length() - 1
    if size != 1 << k:
        raise ContractError("subset tables need length 2^|V|")
    if k > SUBSET_LIMIT:
        raise ContractError(f"ground sets above {SUBSET_LIMIT} elements are refused")
    rest = f.shape[1:]
    for i in range(k):
        v = f.reshape((size >> (i + 1), 2, 1 << i) + rest)
        if inverse:
            v[:, 1] -= v[:, 0]
        else:
            v[:, 1] += v[:, 0]
    return f


def subset_zeta(f) -> np.ndarray:
    """zeta f(X) = sum of f(Y) over Y subset of X; bit i of the index is element i."""
    return _subset_steps(f, inverse=False)


def subset_moebius(f) -> np.ndarray:
    return _subset_steps(f, inverse=True)


def union_product(f, g) -> np.ndarray:
    f = np.asarray(f, dtype=object)
    g = np.asarray(g, dtype=object)
    if f.shape != g.shape:
        raise ContractError("union product needs tables over the same ground set")
    return subset_moebius(subset_zeta(f) * subset_zeta(g))


# ---------------------------------------------------------------- fast joins


def join_onesided(M1: DpTable, M2: DpTable) -> DpTable:
    """Join for bags whose machines all have an identity transition.

    Such a machine's reachable states are c(0), c(1), ... along the moving
    transition, and c(i) + c(j) = c(i + j); the join is then a convolution of
    progress-indexed tensors.
    """
    _check_compatible(M1, M2)
    for m in M1.machines:
        if m.csts.one_sided is None:
            raise ContractError("join_onesided needs one-sided machines")
    idx = [m.csts.progress_index for m in M1.machines]
    shape = tuple(len(m.csts.progress) for m in M1.machines)

    def tensor(r):
        T = np.zeros(shape, dtype=object)
        for st, n in r.items():
            T[tuple(ix[s] for ix, s in zip(idx, st))] += n
        return T

    g2 = M2.by_alpha()
    rows: dict = {}
    for alpha, r1 in M1.by_alpha().items():
        r2 = g2.get(alpha)
        if not r2:
            continue
        C = convolve_nd(tensor(r1), tensor(r2))
        if C.ndim == 0:
            _add(rows, (alpha, ()), int(C))
            continue
        for pos in zip(*np.nonzero(C != 0)):
            st = tuple(m.csts.progress_state(int(p)) for m, p in zip(M1.machines, pos))
            _add(rows, (alpha, st), int(C[pos]))
    return DpTable(M1.vars, M1.cons, M1.machines, rows)


def _modulus(ci_machine: FlippedCsts) -> int | None:
    """Group order if the machine is the canonical residue counter."""
    cs = ci_machine.csts
    m = cs.num_states
    if cs.s0 == 0 and cs.f0 == tuple(range(m)) and cs.f1 == tuple((r + 1) % m for r in range(m)) and m >= 2:
        return m
    return None


def _is_clause_machine(m: FlippedCsts) -> bool:
    cs = m.csts
    return cs.s0 == 0 and cs.f0 == (0, 1) and cs.f1 == (1, 1)


def join_clause_modulo(M1: DpTable, M2: DpTable) -> DpTable:
    """Join for bags of clauses and modulo constraints.

    The clause states form a subset of the bag clauses (the satisfied ones) and
    combine by union; the modulo states are residues and combine by addition.
    Per bag assignment the tables become arrays over (subset, residues), the
    union is handled by zeta/Moebius and the residues by group convolution.
    """
    _check_compatible(M1, M2)
    clauses, mods, moduli = [], [], []
    for k, m in enumerate(M1.machines):
        if _is_clause_machine(m):
            clauses.append(k)
        else:
            q = _modulus(m)
            if q is None:
                raise ContractError("join_clause_modulo needs clause and modulo machines only")
            mods.append(k)
            moduli.append(q)
    if len(clauses) > SUBSET_LIMIT:
        raise ContractError(f"more than {SUBSET_LIMIT} clauses in a bag")
    shape = (1 << len(clauses),) + tuple(moduli)
    d = len(M1.machines)

    def array(r):
        T = np.zeros(shape, dtype=object)
        for st, n in r.items():
            sub = 0
            for b, k in enumerate(clauses):
                sub |= st[k] << b
            T[(sub,) + tuple(st[k] for k in mods)] += n
        return T

    g2 = M2.by_alpha()
    rows: dict = {}
    for alpha, r1 in M1.by_alpha().items():
        r2 = g2.get(alpha)
        if not r2:
            continue
        Z1, Z2 = subset_zeta(array(r1)), subset_zeta(array(r2))
        P = np.zeros(shape, dtype=object)
        for X in range(shape[0]):
            P[X] = group_convolve(Z1[X], Z2[X], moduli)
        R = subset_moebius(P)
        for pos in zip(*np.nonzero(R != 0)):
            st = [0] * d
            for b, k in enumerate(clauses):
                st[k] = (int(pos[0]) >> b) & 1
            for k, p in zip(mods, pos[1:]):
                st[k] = int(p)
            _add(rows, (alpha, tuple(st)), int(R[pos]))
    return DpTable(M1.vars, M1.cons, M1.machines, rows)


def _auto_join(M1: DpTable, M2: DpTable) -> DpTable:
    ms = M1.machines
    if ms and all(_is_clause_machine(m) or _modulus(m) for m in ms):
        return join_clause_modulo(M1, M2)
    if ms and all(m.csts.one_sided for m in ms):
        return join_onesided(M1, M2)
    return join_naive(M1, M2)


_JOINS = {"naive": join_naive, "onesided": join_onesided, "clause_modulo": join_clause_modulo, "auto": _auto_join}


def table_transition(ctx: DpContext, kind: tuple, bag, children: Sequence[DpTable], join: str = "naive") -> DpTable:
    """Table of a nice node from its children's tables."""
    tag = kind[0]
    if tag == "leaf":
        if children:
            raise ContractError("a leaf has no children")
        return _leaf(ctx, bag)
    if tag == "join":
        if len(children) != 2:
            raise ContractError("a join node has two children")
        return _JOINS[join](children[0], children[1])
    if len(children) != 1:
        raise ContractError(f"{tag} node needs one child")
    what, x = ctx.split(kind[1])
    M = children[0]
    if tag == "introduce":
        return _introduce_var(M, x) if what == "var" else _introduce_con(ctx, M, x)
    if tag == "forget":
        return _forget_var(M, x) if what == "var" else _forget_con(M, x)
    raise ContractError(f"unknown node kind {kind}")


# ---------------------------------------------------------------- drivers


def _nice_for(F: ConstraintSystem, td, check: bool) -> NiceTreeDecomposition:
    G = incidence_graph(F)
    if td is None:
        td = heuristic_td(G)
    ntd = td if isinstance(td, NiceTreeDecomposition) else make_nice(td)
    if check:
        rep = validate_nice(G, ntd)
        if not rep.ok:
            raise ContractError(f"invalid nice tree decomposition: {rep.failures}")
    return ntd


def dp_tables(F: ConstraintSystem, ntd: NiceTreeDecomposition, join_mode: str = "auto", keep: bool = True) -> dict:
    """All node tables (only the root's when ``keep`` is false)."""
    if join_mode not in _JOINS:
        raise ContractError(f"join mode must be one of {JOIN_MODES}")
    ctx = DpContext.for_system(F)
    tables: dict = {}
    out: dict = {}
    for t in ntd.postorder():
        kids = [tables.pop(c) if not keep else tables[c] for c in ntd.children[t]]
        tables[t] = table_transition(ctx, ntd.kinds[t], ntd.bags[t], kids, join_mode)
    if not keep:
        out[ntd.root] = tables[ntd.root]
        return out
    return tables


def dp_count(F: ConstraintSystem, ntd: NiceTreeDecomposition | TreeDecomposition | None = None,
             join_mode: str = "auto", check: bool = False) -> int:
    """Number of models of ``F``.

    Without a decomposition a heuristic one of the incidence graph is made
    nice.  Variables that occur in no bag are free and double the count.
    """
    ntd = _nice_for(F, ntd, check)
    root = dp_tables(F, ntd, join_mode, keep=False)[ntd.root]
    if root.vars or root.cons:
        raise ContractError("the root bag of a nice decomposition must be empty")
    seen = set()
    for b in ntd.bags.values():
        seen.update(v for v in b if 1 <= v <= F.num_vars)
    free = F.num_vars - len(seen)
    return root.rows.get(((), ()), 0) << free


def count_cnf_xor(F: ConstraintSystem, td=None, check: bool = False) -> int:
    for c in F.constraints:
        if not isinstance(c, (Clause, Xor)):
            raise ContractError(f"count_cnf_xor takes clauses and XORs only, got '{c.kind}'")
    return dp_count(F, td, join_mode="clause_modulo", check=check)
