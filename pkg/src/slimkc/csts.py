"""Commutative state-transition systems (CSTS).

A CSTS reads a word of literal values; because ``f0`` and ``f1`` commute, the
state after a word depends only on its numbers of ones and zeros.  A
``FlippedCsts`` attaches the set of variables whose value is negated before
reading, which is how negative literals are handled.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import Cardinality, Clause, Constraint, ContractError, SumModulo, Xor, var_of


@dataclass(frozen=True)
class Csts:
    f0: tuple[int, ...]
    f1: tuple[int, ...]
    s0: int = 0
    accepting: frozenset = frozenset()
    labels: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "f0", tuple(int(s) for s in self.f0))
        object.__setattr__(self, "f1", tuple(int(s) for s in self.f1))
        object.__setattr__(self, "accepting", frozenset(int(s) for s in self.accepting))
        n = len(self.f0)
        if len(self.f1) != n or n == 0:
            raise ContractError("f0 and f1 must be total on a nonempty state set")
        if not all(0 <= s < n for s in self.f0 + self.f1) or not 0 <= self.s0 < n:
            raise ContractError("transition target out of range")
        if not self.accepting <= set(range(n)):
            raise ContractError("accepting state out of range")

    @property
    def num_states(self) -> int:
        return len(self.f0)

    def step(self, s: int, bit: int) -> int:
        return self.f1[s] if bit else self.f0[s]

    def is_commutative(self) -> bool:
        return all(self.f0[self.f1[s]] == self.f1[self.f0[s]] for s in range(self.num_states))

    def delta_word(self, word) -> int:
        s = self.s0
        for b in word:
            s = self.f1[s] if b else self.f0[s]
        return s

    def delta_counts(self, q1: int, q0: int, start: int | None = None) -> int:
        s = self.s0 if start is None else start
        for _ in range(q1):
            s = self.f1[s]
        for _ in range(q0):
            s = self.f0[s]
        return s

    @cached_property
    def witnesses(self) -> dict[int, tuple[int, int]]:
        """Shortest (q1, q0) reaching each reachable state, found by BFS."""
        wit = {self.s0: (0, 0)}
        queue = deque([self.s0])
        while queue:
            s = queue.popleft()
            q1, q0 = wit[s]
            for t, w in ((self.f1[s], (q1 + 1, q0)), (self.f0[s], (q1, q0 + 1))):
                if t not in wit:
                    wit[t] = w
                    queue.append(t)
        return wit

    def reachable(self) -> list[int]:
        return sorted(self.witnesses)

    @cached_property
    def add_table(self) -> np.ndarray:
        n = self.num_states
        tab = np.full((n, n), -1, dtype=np.int64)
        wit = self.witnesses
        for a, (a1, a0) in wit.items():
            for b, (b1, b0) in wit.items():
                tab[a, b] = self.delta_counts(a1 + b1, a0 + b0)
        return tab

    def state_add(self, a: int, b: int) -> int:
        wit = self.witnesses
        for s in (a, b):
            if s not in wit:
                raise ContractError(f"state {s} is unreachable and has no witness")
        return int(self.add_table[a, b])

    def accepts(self, s: int) -> bool:
        return s in self.accepting

    def trimmed(self) -> "Csts":
        """Restriction to reachable states, renumbered in BFS order."""
        wit = self.witnesses
        keep = sorted(wit, key=lambda s: (sum(wit[s]), -wit[s][0], s))
        new = {s: k for k, s in enumerate(keep)}
        labels = tuple(self.labels[s] for s in keep) if self.labels else None
        return Csts(
            f0=tuple(new[self.f0[s]] for s in keep),
            f1=tuple(new[self.f1[s]] for s in keep),
            s0=new[self.s0],
            accepting=frozenset(new[s] for s in keep if s in self.accepting),
            labels=labels,
        )

    def minimized(self) -> "Csts":
        """Merge states with equal futures (partition refinement)."""
        n = self.num_states
        block = [int(s in self.accepting) for s in range(n)]
        while True:
            sig = {}
            new = [sig.setdefault((block[s], block[self.f0[s]], block[self.f1[s]]), len(sig)) for s in range(n)]
            if len(sig) == len(set(block)):
                break
            block = new
        k = len(set(block))
        f0, f1 = [0] * k, [0] * k
        for s in range(n):
            f0[block[s]] = block[self.f0[s]]
            f1[block[s]] = block[self.f1[s]]
        acc = {block[s] for s in self.accepting}
        return Csts(f0=tuple(f0), f1=tuple(f1), s0=block[self.s0], accepting=acc)

    # one-sidedness and progress indexing
    @property
    def one_sided(self) -> str | None:
        """'f0' if f0 is the identity, 'f1' if f1 is, else None."""
        n = range(self.num_states)
        if all(self.f0[s] == s for s in n):
            return "f0"
        if all(self.f1[s] == s for s in n):
            return "f1"
        return None

    @cached_property
    def progress(self) -> tuple[int, ...]:
        """c(i): the state after i moves along the non-identity transition, for i < |S|."""
        side = self.one_sided
        if side is None:
            raise ContractError("progress index is defined for one-sided systems only")
        f = self.f1 if side == "f0" else self.f0
        out, s = [], self.s0
        for _ in range(self.num_states):
            out.append(s)
            s = f[s]
        return tuple(out)

    def progress_state(self, p: int) -> int:
        """f^p(s0) for the moving transition; periodic/absorbing tails handled."""
        prog = self.progress
        n = len(prog)
        if p < n:
            return prog[p]
        side = self.one_sided
        f = self.f1 if side == "f0" else self.f0
        s = prog[-1]
        for _ in range(p - n + 1):
            s = f[s]
        return s

    @cached_property
    def progress_index(self) -> dict[int, int]:
        """Smallest i with c(i) = s, for every reachable state."""
        idx: dict[int, int] = {}
        for i, s in enumerate(self.progress):
            idx.setdefault(s, i)
        return idx


@dataclass(frozen=True)
class FlippedCsts:
    csts: Csts
    scope: tuple[int, ...]
    flipped: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.flipped <= set(self.scope):
            raise ContractError("flipped variables must belong to the scope")

    @property
    def positive(self) -> frozenset:
        return frozenset(self.scope) - self.flipped

    @property
    def negative(self) -> frozenset:
        return self.flipped

    def literal_value(self, x: int, value: int) -> int:
        return 1 - value if x in self.flipped else value

    def state_of(self, assignment) -> int:
        q1 = sum(self.literal_value(x, int(assignment[x])) for x in self.scope)
        return self.csts.delta_counts(q1, len(self.scope) - q1)

    def evaluate(self, assignment) -> int:
        return int(self.csts.accepts(self.state_of(assignment)))


def _negatives(c: Constraint) -> frozenset:
    return frozenset(var_of(l) for l in c.lits if l < 0)


def csts_for_constraint(c: Constraint) -> FlippedCsts:
    """Direct CSTS for the literal-symmetric kinds."""
    n = c.arity
    if isinstance(c, Clause):
        cs = Csts(f0=(0, 1), f1=(1, 1), s0=0, accepting={1})
    elif isinstance(c, Xor):
        cs = Csts(f0=(0, 1), f1=(1, 0), s0=0, accepting={c.parity})
    elif isinstance(c, SumModulo):
        m = c.modulus
        cs = Csts(f0=tuple(range(m)), f1=tuple((r + 1) % m for r in range(m)), s0=0, accepting={c.residue})
    elif isinstance(c, Cardinality):
        k = c.k
        if k > n:
            cs = Csts(f0=(0,), f1=(0,), s0=0, accepting=())
        elif k + 1 <= n - k + 2:
            # count ones, saturating at k
            cs = Csts(
                f0=tuple(range(k + 1)),
                f1=tuple(min(i + 1, k) for i in range(k + 1)),
                s0=0,
                accepting={k},
            )
        else:
            # count zeros, saturating at n-k+1 (reject)
            cap = n - k + 1
            cs = Csts(
                f0=tuple(min(i + 1, cap) for i in range(cap + 1)),
                f1=tuple(range(cap + 1)),
                s0=0,
                accepting=set(range(cap)),
            )
    else:
        raise ContractError(
            f"no CSTS for constraint kind '{c.kind}'; count such systems with count_via_compilation"
        )
    return FlippedCsts(cs, c.variables, _negatives(c))


def delta_counts(s: Csts, q1: int, q0: int) -> int:
    return s.delta_counts(q1, q0)


def state_add(s: Csts, a: int, b: int) -> int:
    return s.state_add(a, b)


@dataclass
class CstsReport:
    commutative: bool
    describes: bool
    num_states: int
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.commutative and self.describes


ENUM_LIMIT = 12


def validate_csts(fc: FlippedCsts, c: Constraint) -> CstsReport:
    cs = fc.csts
    fails = []
    comm = cs.is_commutative()
    if not comm:
        bad = [s for s in range(cs.num_states) if cs.f0[cs.f1[s]] != cs.f1[cs.f0[s]]]
        fails.append(f"f0/f1 do not commute at states {bad[:5]}")
    scope = list(c.variables)
    if sorted(scope) != sorted(fc.scope):
        fails.append("scope mismatch")
        return CstsReport(comm, False, cs.num_states, fails)
    if len(scope) > ENUM_LIMIT:
        raise ContractError("exhaustive CSTS validation is limited to 12 variables")
    describes = True
    for bits in range(1 << len(scope)):
        a = {x: (bits >> i) & 1 for i, x in enumerate(scope)}
        word = [fc.literal_value(x, a[x]) for x in scope]
        got = int(cs.accepts(cs.delta_word(word)))
        if got != c.evaluate(a):
            describes = False
            fails.append(f"assignment {a} misclassified")
            break
    return CstsReport(comm, describes, cs.num_states, fails)
