"""Complete (leveled) OBDDs.

Every root-to-sink path reads all variables of the ordering, so level ``i`` holds
exactly the decision nodes for ``order[i]``.  Nodes are stored as ``(lo, hi)``
pairs indexing the next level; successors of the last level are the sinks 0 and 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

import numpy as np

from .core import Constraint, ContractError
from .csts import Csts


@dataclass(frozen=True)
class CompleteObdd:
    order: tuple[int, ...]
    levels: tuple[tuple[tuple[int, int], ...], ...]
    constant: int | None = None  # value when the ordering is empty

    def __post_init__(self):
        if not self.order and self.constant is None:
            raise ContractError("an OBDD without variables needs a constant value")
        if len(self.levels) != len(self.order):
            raise ContractError("one level per variable")
        for i, lev in enumerate(self.levels):
            if not lev:
                raise ContractError(f"level {i} is empty")
            bound = len(self.levels[i + 1]) if i + 1 < len(self.levels) else 2
            for lo, hi in lev:
                if not (0 <= lo < bound and 0 <= hi < bound):
                    raise ContractError(f"successor out of range at level {i}")
        if self.levels and len(self.levels[0]) != 1:
            raise ContractError("exactly one root")

    @property
    def num_vars(self) -> int:
        return len(self.order)

    @property
    def width(self) -> int:
        if not self.levels:
            return 1
        return max(len(l) for l in self.levels)

    def level_sizes(self) -> list[int]:
        return [len(l) for l in self.levels]

    def f(self, level: int, node: int, bit: int) -> int:
        return self.levels[level][node][bit]

    def evaluate(self, assignment) -> int:
        if not self.order:
            return int(self.constant)
        s = 0
        for i, x in enumerate(self.order):
            s = self.levels[i][s][int(assignment[x])]
        return s

    def evaluate_bits(self, bits: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; ``bits[:, i]`` is the value of ``order[i]``."""
        bits = np.asarray(bits, dtype=np.int64)
        if not self.order:
            return np.full(bits.shape[0], int(self.constant), dtype=np.int64)
        s = np.zeros(bits.shape[0], dtype=np.int64)
        for i, lev in enumerate(self.levels):
            tab = np.asarray(lev, dtype=np.int64)
            s = tab[s, bits[:, i]]
        return s

    def truth_table(self) -> np.ndarray:
        """Outputs on all inputs; bit ``i`` of the row index is ``order[i]``."""
        n = len(self.order)
        idx = np.arange(1 << n, dtype=np.int64)
        bits = (idx[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1
        return self.evaluate_bits(bits)

    def delta(self, word: Sequence[int]) -> int:
        """Node reached after reading ``word`` from the root (sink if complete)."""
        s = 0
        for i, b in enumerate(word):
            s = self.levels[i][s][b]
        return s

    def dump(self) -> str:
        lines = [f"obdd {len(self.order)} width {self.width}"]
        if not self.order:
            lines.append(f"const {self.constant}")
        for i, (x, lev) in enumerate(zip(self.order, self.levels)):
            lines.append(f"level {i} var {x} nodes {len(lev)}")
            for j, (lo, hi) in enumerate(lev):
                lines.append(f"  {j} lo {lo} hi {hi}")
        return "\n".join(lines) + "\n"


def _reduce(order, levels, constant=None) -> CompleteObdd:
    """Bottom-up level-wise merge of nodes with identical successors, then prune."""
    levels = [list(l) for l in levels]
    n = len(levels)
    remap: dict[int, int] | None = None
    for i in range(n - 1, -1, -1):
        seen: dict[tuple[int, int], int] = {}
        new_map: dict[int, int] = {}
        new_level = []
        for j, (lo, hi) in enumerate(levels[i]):
            if remap is not None:
                lo, hi = remap[lo], remap[hi]
            key = (lo, hi)
            if key not in seen:
                seen[key] = len(new_level)
                new_level.append(key)
            new_map[j] = seen[key]
        levels[i] = new_level
        remap = new_map
    # drop nodes unreachable from the root (old root maps to some node)
    if n:
        root = remap[0]
        keep = {root}
        out_levels = []
        for i in range(n):
            ids = sorted(keep)
            pos = {j: k for k, j in enumerate(ids)}
            lev = [levels[i][j] for j in ids]
            out_levels.append((lev, pos))
            keep = {s for pair in lev for s in pair}
        final = []
        for i, (lev, _) in enumerate(out_levels):
            if i + 1 < n:
                nxt = out_levels[i + 1][1]
                final.append(tuple((nxt[lo], nxt[hi]) for lo, hi in lev))
            else:
                final.append(tuple(lev))
        # root must be index 0 at level 0
        return CompleteObdd(tuple(order), tuple(final), None)
    return CompleteObdd((), (), int(constant))


def obdd_from_automaton(order: Sequence[int], init: Hashable, step: Callable, accept: Callable) -> CompleteObdd:
    """Forward state exploration followed by level-wise reduction.

    ``step(state, level, bit)`` returns the successor state; ``accept(state)``
    decides the sink reached after the last level.
    """
    order = tuple(order)
    n = len(order)
    if n == 0:
        return CompleteObdd((), (), int(bool(accept(init))))
    frontier: dict[Hashable, int] = {init: 0}
    levels = []
    for i in range(n):
        nxt: dict[Hashable, int] = {}
        lev = []
        for s in frontier:  # dicts keep insertion order, so ids are stable
            pair = []
            for bit in (0, 1):
                t = step(s, i, bit)
                if i == n - 1:
                    pair.append(int(bool(accept(t))))
                else:
                    if t not in nxt:
                        nxt[t] = len(nxt)
                    pair.append(nxt[t])
            lev.append(tuple(pair))
        levels.append(lev)
        frontier = nxt
    return _reduce(order, levels)


def build_obdd(c: Constraint, order: Sequence[int] | None = None) -> CompleteObdd:
    """Complete OBDD of ``c`` for the given ordering of its scope."""
    if order is None:
        order = c.variables
    order = tuple(order)
    if sorted(order) != sorted(c.variables) or len(set(order)) != len(order):
        raise ContractError(f"ordering {order} is not a permutation of the scope {c.variables}")
    pos = [c.position(x) for x in order]
    return obdd_from_automaton(
        order, c.initial_state(), lambda s, i, b: c.step(s, pos[i], b), c.accepts
    )


def constant_obdd(order: Sequence[int], value: int) -> CompleteObdd:
    return obdd_from_automaton(order, 0, lambda s, i, b: 0, lambda s: value)


def obdd_apply(op: str, B1: CompleteObdd, B2: CompleteObdd) -> CompleteObdd:
    if B1.order != B2.order:
        raise ContractError("obdd_apply needs identical orderings")
    op = op.upper()
    if op == "AND":
        fn = lambda a, b: a & b
    elif op == "OR":
        fn = lambda a, b: a | b
    else:
        raise ContractError(f"unsupported operation {op}")
    if not B1.order:
        return CompleteObdd((), (), fn(B1.constant, B2.constant))
    L1, L2 = B1.levels, B2.levels
    return obdd_from_automaton(
        B1.order,
        (0, 0),
        lambda s, i, b: (L1[i][s[0]][b], L2[i][s[1]][b]),
        lambda s: fn(s[0], s[1]),
    )


def obdd_count(B: CompleteObdd) -> int:
    if not B.order:
        return int(B.constant)
    cnt = [0, 1]
    for lev in reversed(B.levels):
        cnt = [cnt[lo] + cnt[hi] for lo, hi in lev]
    return cnt[0]


# ---------------------------------------------------------------- symmetric functions

SYMMETRY_ENUM_LIMIT = 12


def is_symmetric(B: CompleteObdd) -> bool:
    n = B.num_vars
    if n > SYMMETRY_ENUM_LIMIT:
        raise ContractError("symmetry check by enumeration is limited to 12 variables")
    tt = B.truth_table()
    weight = np.bitwise_count(np.arange(1 << n, dtype=np.uint64)).astype(np.int64)
    for k in range(n + 1):
        vals = tt[weight == k]
        if vals.size and vals.min() != vals.max():
            return False
    return True


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a != b:
            self.p[max(a, b)] = min(a, b)
            return True
        return False


def is_commutative(B: CompleteObdd) -> bool:
    L = B.levels
    for i in range(len(L) - 1):
        for s in range(len(L[i])):
            if L[i + 1][L[i][s][1]][0] != L[i + 1][L[i][s][0]][1]:
                return False
    return True


def commutative_quotient(B: CompleteObdd, trusted: bool = False) -> CompleteObdd:
    """Quotient by the level relations generated from f0∘f1 ~ f1∘f0.

    Works on any OBDD of a symmetric function; symmetry is checked by
    enumeration up to 12 variables, and must be asserted with ``trusted``
    beyond that.
    """
    n = B.num_vars
    if n <= SYMMETRY_ENUM_LIMIT:
        if not is_symmetric(B):
            raise ContractError("OBDD does not compute a symmetric function")
    elif not trusted:
        raise ContractError("symmetry of a large OBDD must be asserted with trusted=True")
    if n <= 2:
        return B
    L = B.levels
    ufs = [_UnionFind(len(l)) for l in L]
    # propagate level by level; the relation at level i+2 depends on levels i, i+1
    for i in range(n - 2):
        uf_next2 = ufs[i + 2]
        for x in range(len(L[i])):
            a = L[i + 1][L[i][x][1]][0]
            for y in range(len(L[i])):
                if ufs[i].find(x) == ufs[i].find(y):
                    b = L[i + 1][L[i][y][0]][1]
                    uf_next2.union(a, b)
        for x in range(len(L[i + 1])):
            for y in range(len(L[i + 1])):
                if ufs[i + 1].find(x) == ufs[i + 1].find(y):
                    uf_next2.union(L[i + 1][x][0], L[i + 1][y][0])
                    uf_next2.union(L[i + 1][x][1], L[i + 1][y][1])
    # class representatives -> new ids
    ids = []
    for i in range(n):
        reps = sorted({ufs[i].find(s) for s in range(len(L[i]))})
        ids.append({r: k for k, r in enumerate(reps)})
    levels = []
    for i in range(n):
        lev: dict[int, tuple[int, int]] = {}
        for s in range(len(L[i])):
            k = ids[i][ufs[i].find(s)]
            lo, hi = L[i][s]
            if i + 1 < n:
                pair = (ids[i + 1][ufs[i + 1].find(lo)], ids[i + 1][ufs[i + 1].find(hi)])
            else:
                pair = (lo, hi)
            if lev.setdefault(k, pair) != pair:
                raise ContractError(f"quotient is not well defined at level {i}")
        levels.append([lev[k] for k in range(len(lev))])
    Q = _reduce(B.order, levels)
    if n <= SYMMETRY_ENUM_LIMIT and not np.array_equal(Q.truth_table(), B.truth_table()):
        raise ContractError("quotient changed the function")
    return Q


def _pattern_csts(B: CompleteObdd, a: int, m: int, b: int) -> Csts | None:
    """CSTS over (zeros capped at b, ones wrapping mod m above a), or None if inconsistent."""
    n = B.num_vars
    top = a + m - 1
    states = [(i, j) for i in range(b + 1) for j in range(top + 1)]
    sid = {s: k for k, s in enumerate(states)}
    f0 = [sid[(min(i + 1, b), j)] for i, j in states]
    f1 = [sid[(i, j + 1 if j < top else a)] for i, j in states]
    accept: dict[int, int] = {}
    for q1 in range(n + 1):
        q0 = n - q1
        j = q1 if q1 <= top else a + (q1 - a) % m
        s = sid[(min(q0, b), j)]
        v = B.delta([1] * q1 + [0] * q0) if n else B.constant
        if accept.setdefault(s, v) != v:
            return None
    T = frozenset(s for s, v in accept.items() if v)
    return Csts(f0=tuple(f0), f1=tuple(f1), s0=sid[(0, 0)], accepting=T, labels=tuple(states))


def find_modulo_pattern(B: CompleteObdd, w: int | None = None) -> tuple[int, int, int]:
    """Smallest-m triple (a, m, b) with a+m+b = w and δ(1^a 0^m 0^b) = δ(1^a 1^m 0^b).

    The triple is accepted only if the induced counting machine reproduces B on
    every input weight.  Returns m = 0 when no triple works (in particular when
    n equals the width).
    """
    if w is None:
        w = B.width
    if B.num_vars > w:
        hit = _search_pattern(B, w)
        if hit is not None:
            return hit
    return w, 0, 0


def _search_pattern(B: CompleteObdd, w: int):
    n = B.num_vars
    for m in range(1, min(w, n) + 1):
        for a in range(0, w - m + 1):
            b = w - m - a
            if a + m + b > n:
                continue
            if B.delta([1] * a + [0] * (m + b)) != B.delta([1] * (a + m) + [0] * b):
                continue
            if _pattern_csts(B, a, m, b) is not None:
                return a, m, b
    return None


def _counting_csts(B: CompleteObdd) -> Csts:
    n = B.num_vars
    f0 = tuple(range(n + 1))
    f1 = tuple(min(j + 1, n) for j in range(n + 1))
    T = frozenset(q1 for q1 in range(n + 1) if (B.delta([1] * q1 + [0] * (n - q1)) if n else B.constant))
    return Csts(f0=f0, f1=f1, s0=0, accepting=T, labels=tuple((0, j) for j in range(n + 1)))


def obdd_to_csts(B: CompleteObdd, w: int | None = None, flip=None):
    """CSTS from a commutative OBDD via its modulo pattern.

    Returns a FlippedCsts when ``flip`` (variable -> bool) is given, else a Csts.
    """
    from .csts import FlippedCsts

    if w is None:
        w = B.width
    a, m, b = find_modulo_pattern(B, w)
    if not m:
        # n = w: the pigeonhole witness may still exist; otherwise count ones exactly
        a, m, b = _search_pattern(B, w) or (w, 0, 0)
    cs = _pattern_csts(B, a, m, b) if m else _counting_csts(B).minimized()
    cs = cs.trimmed()
    if flip is None:
        return cs
    return FlippedCsts(cs, tuple(B.order), frozenset(x for x in B.order if flip.get(x, False)))
