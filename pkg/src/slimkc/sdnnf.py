"""Vtrees and structured d-DNNF circuits.

Covers the OBDD-to-SDNNF slice construction, structural validation with exact or
sampled determinism checks, gap-smoothed model counting and forgetting of
Tseitin variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from . import kernels
from .core import ContractError


class Vtree:
    """Rooted binary tree whose leaves are variables.

    Leaves are the variable labels themselves (normally positive ints); internal
    nodes are any other hashable ids, typically tuples.  ``kids[node]`` is the
    ordered (left, right) pair.
    """

    def __init__(self, root: Hashable, kids: dict | None = None, dummy: bool = False):
        self.root = root
        self.kids: dict = dict(kids or {})
        self.dummy = dummy
        self.parent: dict = {}
        order, stack = [], [root]
        while stack:
            t = stack.pop()
            order.append(t)
            for c in self.kids.get(t, ()):
                if c in self.parent or c == root:
                    raise ContractError(f"vtree node {c!r} has two parents")
                self.parent[c] = t
                stack.append(c)
        for t, ch in self.kids.items():
            if len(ch) != 2:
                raise ContractError(f"internal vtree node {t!r} must have two children")
        self._pre = order
        self._var: dict = {}
        for t in reversed(order):
            if t in self.kids:
                l, r = self.kids[t]
                self._var[t] = self._var[l] | self._var[r]
            else:
                self._var[t] = frozenset() if dummy else frozenset([t])

    # construction helpers
    @classmethod
    def leaf(cls, x) -> "Vtree":
        return cls(x, {})

    @classmethod
    def right_linear(cls, order: Sequence, tag="r") -> "Vtree":
        order = list(order)
        if not order:
            raise ContractError("empty vtree")
        kids, cur = {}, order[-1]
        for i in range(len(order) - 2, -1, -1):
            node = (tag, i)
            kids[node] = (order[i], cur)
            cur = node
        return cls(cur, kids)

    @classmethod
    def balanced(cls, order: Sequence, tag="b") -> "Vtree":
        order = list(order)
        if not order:
            raise ContractError("empty vtree")
        kids: dict = {}

        def build(lo, hi):
            if hi - lo == 1:
                return order[lo]
            mid = (lo + hi + 1) // 2
            node = (tag, lo, hi)
            kids[node] = (build(lo, mid), build(mid, hi))
            return node

        return cls(build(0, len(order)), kids)

    @classmethod
    def from_nested(cls, nested, tag="n") -> "Vtree":
        """Build from nested pairs, e.g. ``((2, 3), (4, 5))``."""
        kids: dict = {}
        counter = [0]

        def build(s):
            if isinstance(s, tuple):
                l, r = build(s[0]), build(s[1])
                node = (tag, counter[0])
                counter[0] += 1
                kids[node] = (l, r)
                return node
            return s

        return cls(build(nested), kids)

    # queries
    def is_leaf(self, t) -> bool:
        return t not in self.kids

    def nodes(self) -> list:
        return list(self._pre)

    def postorder(self) -> list:
        return list(reversed(self._pre))

    def internal_nodes(self) -> list:
        return [t for t in self._pre if t in self.kids]

    def leaves(self) -> list:
        return [t for t in self.leaf_order()]

    def leaf_order(self) -> list:
        out, stack = [], [self.root]
        while stack:
            t = stack.pop()
            if t in self.kids:
                l, r = self.kids[t]
                stack.append(r)
                stack.append(l)
            else:
                out.append(t)
        return out

    def var(self, t) -> frozenset:
        return self._var[t]

    @property
    def variables(self) -> frozenset:
        return self._var[self.root]

    def __contains__(self, t) -> bool:
        return t in self._var

    def is_below(self, t, anc) -> bool:
        while t is not None:
            if t == anc:
                return True
            t = self.parent.get(t)
        return False

    def is_right_linear(self, t) -> bool:
        while t in self.kids:
            l, r = self.kids[t]
            if l in self.kids:
                return False
            t = r
        return True

    def edges(self) -> list[tuple]:
        return [(t, c) for t, ch in self.kids.items() for c in ch]

    def as_graph(self):
        import networkx as nx

        G = nx.Graph()
        G.add_nodes_from(self._pre)
        G.add_edges_from(self.edges())
        return G

    def nested(self):
        def rec(t):
            if t in self.kids:
                return tuple(rec(c) for c in self.kids[t])
            return t

        return rec(self.root)

    def __repr__(self) -> str:
        return f"Vtree({self.nested()!r})"


# ---------------------------------------------------------------- circuits

LIT, CONST, AND, OR = kernels.OP_LIT, kernels.OP_CONST, kernels.OP_AND, kernels.OP_OR


@dataclass
class SdnnfCircuit:
    """Binary AND/OR circuit over literal and constant inputs.

    Gates are stored in topological order (children before parents).  For
    ``LIT`` gates ``a`` is a signed literal, for ``CONST`` gates ``a`` is 0 or 1,
    otherwise ``a`` and ``b`` are child gate ids.  ``lam[g]`` is the vtree node
    structuring gate ``g`` (``None`` for unstructured circuits).
    """

    op: list[int]
    a: list[int]
    b: list[int]
    output: int
    vtree: Vtree | None = None
    lam: list | None = None
    deterministic: bool = False

    def __len__(self) -> int:
        return len(self.op)

    @property
    def num_gates(self) -> int:
        return sum(1 for o in self.op if o in (AND, OR))

    @property
    def num_edges(self) -> int:
        return 2 * self.num_gates

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.op, dtype=np.int64),
            np.asarray(self.a, dtype=np.int64),
            np.asarray(self.b, dtype=np.int64),
        )

    def var_masks(self) -> list[int]:
        """Bitmask (bit v) of the variables below each gate."""
        out = [0] * len(self.op)
        for g, o in enumerate(self.op):
            if o == LIT:
                out[g] = 1 << abs(self.a[g])
            elif o in (AND, OR):
                out[g] = out[self.a[g]] | out[self.b[g]]
        return out

    def variables(self) -> frozenset:
        m = self.var_masks()[self.output]
        return frozenset(v for v in range(m.bit_length()) if m >> v & 1)

    def reachable(self) -> list[int]:
        seen = [False] * len(self.op)
        seen[self.output] = True
        for g in range(self.output, -1, -1):
            if seen[g] and self.op[g] in (AND, OR):
                seen[self.a[g]] = seen[self.b[g]] = True
        return [g for g in range(len(self.op)) if seen[g]]

    def evaluate(self, assignment) -> int:
        val = [0] * len(self.op)
        for g, o in enumerate(self.op):
            if o == LIT:
                x = assignment[abs(self.a[g])]
                val[g] = int(x) if self.a[g] > 0 else 1 - int(x)
            elif o == CONST:
                val[g] = self.a[g]
            elif o == AND:
                val[g] = val[self.a[g]] & val[self.b[g]]
            else:
                val[g] = val[self.a[g]] | val[self.b[g]]
        return val[self.output]

    def max_var(self) -> int:
        return max((abs(x) for o, x in zip(self.op, self.a) if o == LIT), default=0)

    def width(self) -> int:
        """Max number of gates (AND/OR) mapped to one vtree node."""
        if self.lam is None:
            raise ContractError("unstructured circuit has no width")
        counts: dict = {}
        for g in self.reachable():
            if self.op[g] in (AND, OR):
                counts[self.lam[g]] = counts.get(self.lam[g], 0) + 1
        return max(counts.values(), default=0)

    def gates_per_node(self) -> dict:
        counts: dict = {}
        for g in self.reachable():
            if self.op[g] in (AND, OR):
                counts[self.lam[g]] = counts.get(self.lam[g], 0) + 1
        return counts


class CircuitBuilder:
    """Hash-consing construction of structured circuits."""

    def __init__(self, vtree: Vtree | None = None):
        self.vtree = vtree
        self.op: list[int] = []
        self.a: list[int] = []
        self.b: list[int] = []
        self.lam: list = []
        self._cache: dict = {}

    def _add(self, op, a, b, lam):
        key = (op, a, b, lam)
        g = self._cache.get(key)
        if g is None:
            g = len(self.op)
            self.op.append(op)
            self.a.append(a)
            self.b.append(b)
            self.lam.append(lam)
            self._cache[key] = g
        return g

    def lit(self, lit: int) -> int:
        return self._add(LIT, int(lit), 0, abs(int(lit)))

    def const(self, value: int, lam=None) -> int:
        return self._add(CONST, int(bool(value)), 0, lam)

    def conj(self, g1: int, g2: int, lam=None) -> int:
        return self._add(AND, g1, g2, lam)

    def disj(self, g1: int, g2: int, lam=None) -> int:
        return self._add(OR, g1, g2, lam)

    def disj_many(self, gates: Sequence[int], lam=None) -> int | None:
        if not gates:
            return None
        cur = gates[0]
        for g in gates[1:]:
            cur = self.disj(cur, g, lam)
        return cur

    def build(self, output: int, deterministic: bool = False) -> SdnnfCircuit:
        lam = self.lam if self.vtree is not None else None
        return SdnnfCircuit(list(self.op), list(self.a), list(self.b), output, self.vtree, list(lam) if lam else lam, deterministic)


def constant_circuit(value: int, vtree: Vtree | None = None) -> SdnnfCircuit:
    cb = CircuitBuilder(vtree)
    return cb.build(cb.const(value), deterministic=True)


# ---------------------------------------------------------------- OBDD -> SDNNF


def obdd_to_sdnnf(B, vtree: Vtree) -> SdnnfCircuit:
    """Structured d-DNNF equivalent to the complete OBDD ``B``.

    Right-linear subtrees of the vtree get the classical decision rewriting;
    every other node recombines the slice circuits of its two children through
    the middle level (an OR over the OBDD nodes of that level).
    """
    order = list(B.order)
    if not (vtree.dummy and not order) and vtree.leaf_order() != order:
        raise ContractError(f"vtree leaf order {vtree.leaf_order()} differs from OBDD order {order}")
    if not order:
        return constant_circuit(B.constant, vtree)
    n = len(order)
    L = B.levels
    cb = CircuitBuilder(vtree)
    level = {x: i for i, x in enumerate(order)}
    span = {}
    for t in vtree.postorder():
        if vtree.is_leaf(t):
            span[t] = (level[t], level[t] + 1)
        else:
            l, r = vtree.kids[t]
            span[t] = (span[l][0], span[r][1])
    chain_node = {}  # level -> right-linear vtree node whose left child is that leaf
    for t, (l, r) in vtree.kids.items():
        if vtree.is_leaf(l):
            chain_node[level[l]] = t

    memo_chain: dict = {}
    memo_slice: dict = {}
    FALSE = None

    def chain(p: int, v: int, end: int, target: int):
        """Assignments to levels p..end-1 leading from node v to ``target`` at level ``end``."""
        key = (p, v, end, target)
        if key in memo_chain:
            return memo_chain[key]
        x = order[p]
        lo, hi = L[p][v]
        if p == end - 1:
            neg, pos = lo == target, hi == target
            if neg and pos:
                g = cb.disj(cb.lit(-x), cb.lit(x), x)
            elif pos:
                g = cb.lit(x)
            elif neg:
                g = cb.lit(-x)
            else:
                g = FALSE
        else:
            t = chain_node[p]
            parts = []
            for lit, succ in ((-x, lo), (x, hi)):
                sub = chain(p + 1, succ, end, target)
                if sub is not FALSE:
                    parts.append(cb.conj(cb.lit(lit), sub, t))
            g = cb.disj_many(parts, t) if parts else FALSE
        memo_chain[key] = g
        return g

    def slice_(t, k: int, target: int):
        key = (t, k, target)
        if key in memo_slice:
            return memo_slice[key]
        i, j = span[t]
        if vtree.is_right_linear(t):
            g = chain(i, k, j, target)
        else:
            l, r = vtree.kids[t]
            mid = span[l][1]
            parts = []
            for h in range(len(L[mid])):
                g1 = slice_(l, k, h)
                if g1 is FALSE:
                    continue
                g2 = slice_(r, h, target)
                if g2 is FALSE:
                    continue
                parts.append(cb.conj(g1, g2, t))
            g = cb.disj_many(parts, t) if parts else FALSE
        memo_slice[key] = g
        return g

    out = slice_(vtree.root, 0, 1)
    if out is FALSE:
        return constant_circuit(0, vtree)
    return cb.build(out, deterministic=True)


# ---------------------------------------------------------------- validation


@dataclass
class SdnnfReport:
    decomposable: bool
    structured: bool | None
    complete: bool | None
    deterministic: bool
    determinism_mode: str  # "exact", "sampled" or "mixed"
    width: int | None
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.decomposable and self.deterministic and self.structured is not False

    @property
    def ok_complete(self) -> bool:
        return self.ok and self.complete is not False


EXACT_VARS = 16
SAMPLES = 10_000
_CHUNK_BITS = 12


def _chunked_planes(variables: list[int], num_vars: int):
    """Yield plane blocks enumerating all assignments of ``variables`` in chunks."""
    k = len(variables)
    lo_vars, hi_vars = variables[:_CHUNK_BITS], variables[_CHUNK_BITS:]
    base, total = kernels.enumeration_planes(lo_vars, num_vars)
    mask = kernels.valid_mask(total, base.shape[1])
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    for hi in range(1 << len(hi_vars)):
        planes = base.copy()
        for j, v in enumerate(hi_vars):
            planes[v] = full if (hi >> j) & 1 else np.uint64(0)
        yield planes, mask


def _subcircuit(D: SdnnfCircuit, roots: Iterable[int]):
    keep = set(roots)
    for g in range(max(keep), -1, -1):
        if g in keep and D.op[g] in (AND, OR):
            keep.add(D.a[g])
            keep.add(D.b[g])
    ids = sorted(keep)
    pos = {g: i for i, g in enumerate(ids)}
    op = np.asarray([D.op[g] for g in ids], dtype=np.int64)
    a = np.asarray([pos[D.a[g]] if D.op[g] in (AND, OR) else D.a[g] for g in ids], dtype=np.int64)
    b = np.asarray([pos[D.b[g]] if D.op[g] in (AND, OR) else 0 for g in ids], dtype=np.int64)
    return op, a, b, pos


def _overlaps(D, ors, pos, out, mask) -> list[int]:
    bad = []
    for g in ors:
        x = out[pos[D.a[g]]] & out[pos[D.b[g]]] & mask
        if x.any():
            bad.append(g)
    return bad


def check_determinism(D: SdnnfCircuit, seed: int = 0, exact_vars: int = EXACT_VARS, samples: int = SAMPLES,
                      cone_budget: int = 2_000_000):
    """Return (deterministic, mode, offending OR gates)."""
    reach = D.reachable()
    ors = [g for g in reach if D.op[g] == OR]
    if not ors:
        return True, "exact", []
    masks = D.var_masks()
    nv = D.max_var()
    allvars = [v for v in range(1, nv + 1) if masks[D.output] >> v & 1]
    if len(allvars) <= exact_vars:
        bad: list[int] = []
        op, a, b, pos = _subcircuit(D, [D.output])
        for planes, mask in _chunked_planes(allvars, nv):
            out = kernels.evaluate_gates(op, a, b, planes)
            bad.extend(_overlaps(D, ors, pos, out, mask))
            if bad:
                break
        return not bad, "exact", sorted(set(bad))
    groups: dict[int, list[int]] = {}
    for g in ors:
        groups.setdefault(masks[g], []).append(g)
    bad = []
    sampled: list[int] = []
    budget = cone_budget
    exact_done = 0
    for m, gs in sorted(groups.items(), key=lambda kv: bin(kv[0]).count("1")):
        k = bin(m).count("1")
        if k > exact_vars:
            sampled.extend(gs)
            continue
        op, a, b, pos = _subcircuit(D, gs)
        cost = len(op) * max(1, (1 << k) // 64)
        if cost > budget:
            sampled.extend(gs)
            continue
        budget -= cost
        vs = [v for v in range(1, nv + 1) if m >> v & 1]
        for planes, mask in _chunked_planes(vs, nv):
            out = kernels.evaluate_gates(op, a, b, planes)
            bad.extend(_overlaps(D, gs, pos, out, mask))
        exact_done += len(gs)
    if sampled:
        rng = np.random.default_rng(seed)
        planes = kernels.random_planes(allvars, nv, samples, rng)
        mask = kernels.valid_mask(samples, planes.shape[1])
        op, a, b, pos = _subcircuit(D, sampled)
        out = kernels.evaluate_gates(op, a, b, planes)
        bad.extend(_overlaps(D, sampled, pos, out, mask))
    mode = "exact" if not sampled else ("sampled" if not exact_done else "mixed")
    return not bad, mode, sorted(set(bad))


def validate_sdnnf(D: SdnnfCircuit, vtree: Vtree | None = None, lam=None, seed: int = 0) -> SdnnfReport:
    vtree = vtree if vtree is not None else D.vtree
    lam = lam if lam is not None else D.lam
    fails: list[str] = []
    masks = D.var_masks()
    reach = D.reachable()
    decomposable = True
    for g in reach:
        if D.op[g] == AND and masks[D.a[g]] & masks[D.b[g]]:
            decomposable = False
            fails.append(f"AND gate {g} shares variables between its inputs")
            break
    structured = complete = None
    if vtree is not None and lam is not None:
        structured = complete = True
        vmask = {}
        for t in vtree.nodes():
            m = 0
            for v in vtree.var(t):
                m |= 1 << v
            vmask[t] = m
        for g in reach:
            o = D.op[g]
            t = lam[g]
            if o == CONST:
                if t is not None and t not in vtree:
                    structured = False
                    fails.append(f"constant gate {g} mapped outside the vtree")
                continue
            if t not in vtree:
                structured = False
                fails.append(f"gate {g} has no vtree node")
                break
            if masks[g] & ~vmask[t]:
                structured = False
                fails.append(f"gate {g} reads variables outside its vtree node")
                break
            if masks[g] != vmask[t]:
                complete = False
            if o == OR:
                if not (lam[D.a[g]] == t == lam[D.b[g]]):
                    structured = False
                    fails.append(f"OR gate {g} and its inputs sit at different vtree nodes")
                    break
            elif o == AND:
                if vtree.is_leaf(t):
                    structured = False
                    fails.append(f"AND gate {g} mapped to a leaf")
                    break
                l, r = vtree.kids[t]
                t1, t2 = lam[D.a[g]], lam[D.b[g]]
                ok = all(
                    tt is None and D.op[c] == CONST or tt is not None and vtree.is_below(tt, side)
                    for c, tt, side in ((D.a[g], t1, l), (D.b[g], t2, r))
                )
                if not ok:
                    structured = False
                    fails.append(f"AND gate {g} inputs are not split across the children of its node")
                    break
            elif o == LIT:
                if t != abs(D.a[g]):
                    structured = False
                    fails.append(f"literal gate {g} is not mapped to its leaf")
                    break
    det, mode, bad = check_determinism(D, seed=seed)
    if not det:
        fails.append(f"OR gates with overlapping inputs: {bad[:5]}")
    width = D.width() if lam is not None else None
    return SdnnfReport(decomposable, structured, complete, det, mode, width, fails)


# ---------------------------------------------------------------- counting and forgetting


def count_dsdnnf(D: SdnnfCircuit, over: Iterable[int] | None = None, trust: bool = False) -> int:
    """Model count over ``over`` (default: the circuit's variables).

    OR inputs are smoothed by powers of two for the variables one side misses.
    """
    if not (D.deterministic or trust):
        raise ContractError("circuit is not flagged deterministic; validate it or pass trust=True")
    masks = D.var_masks()
    if over is None:
        X = masks[D.output]
    else:
        X = 0
        for v in over:
            X |= 1 << v
    if masks[D.output] & ~X:
        raise ContractError("counting set misses circuit variables")
    use_lam = D.lam is not None and D.vtree is not None
    if use_lam:
        vmask = {}
        for t in D.vtree.nodes():
            m = 0
            for v in D.vtree.var(t):
                m |= 1 << v
            vmask[t] = m & X
    scope = [0] * len(D.op)
    cnt = [0] * len(D.op)
    for g in D.reachable():
        o = D.op[g]
        if use_lam and D.lam[g] is not None:
            scope[g] = vmask[D.lam[g]]
        else:
            scope[g] = masks[g] & X
        if o == LIT:
            cnt[g] = 1
        elif o == CONST:
            cnt[g] = D.a[g] << bin(scope[g]).count("1")
        else:
            c1, c2 = cnt[D.a[g]], cnt[D.b[g]]
            s1, s2 = scope[D.a[g]], scope[D.b[g]]
            if o == AND:
                if use_lam and D.lam[g] is not None:
                    # smooth each input up to its own child subtree
                    l, r = D.vtree.kids[D.lam[g]]
                    c1 <<= bin(vmask[l] & ~s1).count("1")
                    c2 <<= bin(vmask[r] & ~s2).count("1")
                else:
                    scope[g] = s1 | s2
                cnt[g] = c1 * c2
            else:
                if not (use_lam and D.lam[g] is not None):
                    scope[g] = s1 | s2
                cnt[g] = (c1 << bin(scope[g] & ~s1).count("1")) + (c2 << bin(scope[g] & ~s2).count("1"))
    out = D.output
    return cnt[out] << bin(X & ~scope[out]).count("1")


def exist_forget(D: SdnnfCircuit, Z: Iterable[int]) -> SdnnfCircuit:
    """Replace every literal on a variable of Z by the constant 1 (ids and λ kept)."""
    Z = set(Z)
    op, a = list(D.op), list(D.a)
    for g, o in enumerate(op):
        if o == LIT and abs(a[g]) in Z:
            op[g] = CONST
            a[g] = 1
    return SdnnfCircuit(op, a, list(D.b), D.output, D.vtree, list(D.lam) if D.lam is not None else None, D.deterministic)


def propagate_constants(D: SdnnfCircuit) -> SdnnfCircuit:
    """Remove constant inputs; the result is unstructured unless nothing changed."""
    cb = CircuitBuilder()
    new: dict[int, object] = {}
    changed = False
    for g in D.reachable():
        o = D.op[g]
        if o == LIT:
            new[g] = cb.lit(D.a[g])
        elif o == CONST:
            new[g] = bool(D.a[g])
            changed = True
        else:
            x, y = new[D.a[g]], new[D.b[g]]
            if o == AND:
                if x is False or y is False:
                    new[g] = False
                elif x is True:
                    new[g] = y
                elif y is True:
                    new[g] = x
                else:
                    new[g] = cb.conj(x, y)
            else:
                if x is True or y is True:
                    new[g] = True
                elif x is False:
                    new[g] = y
                elif y is False:
                    new[g] = x
                else:
                    new[g] = cb.disj(x, y)
    if not changed:
        return D
    out = new[D.output]
    if isinstance(out, bool):
        return constant_circuit(int(out))
    return cb.build(out, deterministic=D.deterministic)


# ---------------------------------------------------------------- files


def _decision_var(D: SdnnfCircuit, g: int) -> int:
    kids = (D.a[g], D.b[g])
    lits = []
    for c in kids:
        if D.op[c] == LIT:
            lits.append(D.a[c])
        elif D.op[c] == AND:
            for cc in (D.a[c], D.b[c]):
                if D.op[cc] == LIT:
                    lits.append(D.a[cc])
                    break
            else:
                return 0
        else:
            return 0
    if len(lits) == 2 and lits[0] == -lits[1]:
        return abs(lits[0])
    return 0


def write_nnf(D: SdnnfCircuit, num_vars: int | None = None) -> str:
    reach = D.reachable()
    pos = {g: i for i, g in enumerate(reach)}
    nv = num_vars if num_vars is not None else D.max_var()
    lines = []
    edges = 0
    for g in reach:
        o = D.op[g]
        if o == LIT:
            lines.append(f"L {D.a[g]}")
        elif o == CONST:
            lines.append("A 0" if D.a[g] else "O 0 0")
        elif o == AND:
            lines.append(f"A 2 {pos[D.a[g]]} {pos[D.b[g]]}")
            edges += 2
        else:
            lines.append(f"O {_decision_var(D, g)} 2 {pos[D.a[g]]} {pos[D.b[g]]}")
            edges += 2
    return "\n".join([f"nnf {len(reach)} {edges} {nv}"] + lines) + "\n"


def read_nnf(text: str) -> SdnnfCircuit:
    op, a, b = [], [], []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tok = raw.split()
        if not tok or tok[0] == "c":
            continue
        try:
            if tok[0] == "nnf":
                header = tuple(int(x) for x in tok[1:4])
            elif tok[0] == "L":
                op.append(LIT), a.append(int(tok[1])), b.append(0)
            elif tok[0] == "A":
                if int(tok[1]) == 0:
                    op.append(CONST), a.append(1), b.append(0)
                else:
                    if int(tok[1]) != 2:
                        raise ValueError("only binary gates are supported")
                    op.append(AND), a.append(int(tok[2])), b.append(int(tok[3]))
            elif tok[0] == "O":
                if int(tok[2]) == 0:
                    op.append(CONST), a.append(0), b.append(0)
                else:
                    if int(tok[2]) != 2:
                        raise ValueError("only binary gates are supported")
                    op.append(OR), a.append(int(tok[3])), b.append(int(tok[4]))
            else:
                raise ValueError(f"unknown node type {tok[0]!r}")
        except (ValueError, IndexError) as e:
            raise ValueError(f"line {lineno}: {e}") from None
    if header is None:
        raise ValueError("missing nnf header")
    if header[0] != len(op):
        raise ValueError(f"header announces {header[0]} nodes, found {len(op)}")
    return SdnnfCircuit(op, a, b, len(op) - 1)


def vtree_ids(vtree: Vtree) -> dict:
    return {t: i for i, t in enumerate(vtree.postorder())}


def write_vtree(vtree: Vtree) -> str:
    ids = vtree_ids(vtree)
    lines = [f"vtree {len(ids)}"]
    for t in vtree.postorder():
        if vtree.is_leaf(t):
            lines.append(f"L {ids[t]} {0 if vtree.dummy else t}")
        else:
            l, r = vtree.kids[t]
            lines.append(f"I {ids[t]} {ids[l]} {ids[r]}")
    return "\n".join(lines) + "\n"


def read_vtree(text: str) -> Vtree:
    kids: dict = {}
    leaves: dict[int, int] = {}
    last = None
    for raw in text.splitlines():
        tok = raw.split()
        if not tok or tok[0] in ("c", "vtree"):
            continue
        if tok[0] == "L":
            leaves[int(tok[1])] = int(tok[2])
            last = int(tok[1])
        elif tok[0] == "I":
            kids[int(tok[1])] = (int(tok[2]), int(tok[3]))
            last = int(tok[1])
    label = lambda i: leaves[i] if i in leaves else ("v", i)
    return Vtree(label(last), {label(i): (label(l), label(r)) for i, (l, r) in kids.items()})


def write_map(D: SdnnfCircuit) -> str:
    if D.lam is None or D.vtree is None:
        raise ContractError("circuit has no vtree mapping")
    ids = vtree_ids(D.vtree)
    reach = D.reachable()
    pos = {g: i for i, g in enumerate(reach)}
    lines = [f"map {pos[g]} {ids[D.lam[g]]}" for g in reach if D.lam[g] is not None]
    return "\n".join(lines) + "\n"
