"""Constraint data model, evaluation semantics, incidence graphs and the `.csys` format."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import networkx as nx


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


class CsysParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def var_of(lit: int) -> int:
    return lit if lit > 0 else -lit


def lit_value(lit: int, assignment) -> int:
    v = assignment[var_of(lit)]
    return v if lit > 0 else 1 - v


def _check_lits(lits: Sequence[int]) -> tuple[int, ...]:
    lits = tuple(int(l) for l in lits)
    if any(l == 0 for l in lits):
        raise ContractError("literal 0 is not a literal")
    vs = [var_of(l) for l in lits]
    if len(set(vs)) != len(vs):
        raise ContractError(f"repeated variable in scope {lits}")
    return lits


class Constraint:
    """Base class.

    Subclasses are frozen dataclasses exposing ``lits`` (the ordered scope as
    signed literals), an evaluation rule, and a small forward-state protocol used
    by the OBDD builder: ``initial_state``, ``step(state, pos, value)`` and
    ``accepts(state)``, where ``pos`` indexes the scope and ``value`` is the
    variable's value (not the literal's).
    """

    kind = "abstract"
    lits: tuple[int, ...]

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(var_of(l) for l in self.lits)

    @property
    def arity(self) -> int:
        return len(self.lits)

    def position(self, var: int) -> int:
        for i, l in enumerate(self.lits):
            if var_of(l) == var:
                return i
        raise KeyError(var)

    def literal_values(self, assignment) -> list[int]:
        out = []
        for l in self.lits:
            try:
                out.append(lit_value(l, assignment))
            except (KeyError, IndexError):
                raise ContractError(f"variable {var_of(l)} unassigned") from None
        return out

    def evaluate(self, assignment) -> int:
        state = self.initial_state()
        for i, l in enumerate(self.lits):
            try:
                v = assignment[var_of(l)]
            except (KeyError, IndexError):
                raise ContractError(f"variable {var_of(l)} unassigned") from None
            if v is None:
                raise ContractError(f"variable {var_of(l)} unassigned")
            state = self.step(state, i, int(v))
        return int(self.accepts(state))

    def _lit(self, pos: int, value: int) -> int:
        return value if self.lits[pos] > 0 else 1 - value

    # subclasses override
    def initial_state(self) -> Hashable:
        raise NotImplementedError

    def step(self, state, pos: int, value: int):
        raise NotImplementedError

    def accepts(self, state) -> bool:
        raise NotImplementedError

    def renamed(self, mapping: Mapping[int, int]) -> "Constraint":
        raise NotImplementedError


def _rename(lits, mapping):
    return tuple(mapping[var_of(l)] * (1 if l > 0 else -1) for l in lits)


@dataclass(frozen=True)
class Clause(Constraint):
    lits: tuple[int, ...]
    kind = "clause"

    def __post_init__(self):
        object.__setattr__(self, "lits", _check_lits(self.lits))

    def initial_state(self):
        return 0

    def step(self, state, pos, value):
        return state | self._lit(pos, value)

    def accepts(self, state):
        return state == 1

    def renamed(self, mapping):
        return Clause(_rename(self.lits, mapping))


@dataclass(frozen=True)
class Xor(Constraint):
    lits: tuple[int, ...]
    parity: int = 1
    kind = "xor"

    def __post_init__(self):
        object.__setattr__(self, "lits", _check_lits(self.lits))
        if self.parity not in (0, 1):
            raise ContractError("parity must be 0 or 1")

    def initial_state(self):
        return 0

    def step(self, state, pos, value):
        return state ^ self._lit(pos, value)

    def accepts(self, state):
        return state == self.parity

    def renamed(self, mapping):
        return Xor(_rename(self.lits, mapping), self.parity)


@dataclass(frozen=True)
class SumModulo(Constraint):
    lits: tuple[int, ...]
    modulus: int
    residue: int
    kind = "mod"

    def __post_init__(self):
        object.__setattr__(self, "lits", _check_lits(self.lits))
        if self.modulus < 2:
            raise ContractError("modulus must be at least 2")
        if not 0 <= self.residue < self.modulus:
            raise ContractError("residue must lie in [0, modulus)")

    def initial_state(self):
        return 0

    def step(self, state, pos, value):
        return (state + self._lit(pos, value)) % self.modulus

    def accepts(self, state):
        return state == self.residue

    def renamed(self, mapping):
        return SumModulo(_rename(self.lits, mapping), self.modulus, self.residue)


@dataclass(frozen=True)
class Cardinality(Constraint):
    lits: tuple[int, ...]
    k: int
    kind = "card"

    def __post_init__(self):
        object.__setattr__(self, "lits", _check_lits(self.lits))
        if self.k < 0:
            raise ContractError("cardinality bound must be nonnegative")

    def initial_state(self):
        return 0

    def step(self, state, pos, value):
        return min(state + self._lit(pos, value), self.k)

    def accepts(self, state):
        return state >= self.k

    def renamed(self, mapping):
        return Cardinality(_rename(self.lits, mapping), self.k)


@dataclass(frozen=True)
class Threshold(Constraint):
    lits: tuple[int, ...]
    weights: tuple[int, ...]
    theta: int
    kind = "threshold"

    def __post_init__(self):
        object.__setattr__(self, "lits", _check_lits(self.lits))
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        if len(self.weights) != len(self.lits):
            raise ContractError("one weight per literal")
        if any(w == 0 for w in self.weights):
            raise ContractError("threshold weights must be nonzero")

    @property
    def total_weight(self) -> int:
        return sum(abs(w) for w in self.weights)

    def initial_state(self):
        return 0

    def step(self, state, pos, value):
        return state + self.weights[pos] * self._lit(pos, value)

    def accepts(self, state):
        return state >= self.theta

    def renamed(self, mapping):
        return Threshold(_rename(self.lits, mapping), self.weights, self.theta)


MAX_TABLE_ARITY = 20


@dataclass(frozen=True)
class SmallScope(Constraint):
    """Truth table over positive variables; bit ``sum(v_j << j)`` is the value."""

    lits: tuple[int, ...]
    table: int
    kind = "table"

    def __post_init__(self):
        object.__setattr__(self, "lits", _check_lits(self.lits))
        if any(l < 0 for l in self.lits):
            raise ContractError("small-scope constraints take variables, not literals")
        if len(self.lits) > MAX_TABLE_ARITY:
            raise ContractError(f"arity {len(self.lits)} exceeds {MAX_TABLE_ARITY}")
        if not 0 <= self.table < (1 << (1 << len(self.lits))):
            raise ContractError("truth table has bits beyond 2^arity")

    def initial_state(self):
        return 0

    def step(self, state, pos, value):
        return state | (value << pos)

    def accepts(self, state):
        return (self.table >> state) & 1 == 1

    def renamed(self, mapping):
        return SmallScope(_rename(self.lits, mapping), self.table)


@dataclass(frozen=True)
class GroupExact(Constraint):
    """Exactly ``target`` literals are true and, if any, all of them lie in one group.

    With groups ``{x_i[uv] : v in N(u)}`` and target ``k-1`` this is the vertex
    selector of the k-clique systems.
    """

    groups: tuple[tuple[int, ...], ...]
    target: int
    lits: tuple[int, ...] = field(init=False)
    kind = "group"

    def __post_init__(self):
        groups = tuple(tuple(int(l) for l in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "lits", _check_lits([l for g in groups for l in g]))
        gid = []
        for i, g in enumerate(groups):
            gid.extend([i] * len(g))
        object.__setattr__(self, "_gid", tuple(gid))
        if self.target < 0:
            raise ContractError("target must be nonnegative")

    def group_of(self, pos: int) -> int:
        return self._gid[pos]

    # states: ("z",) nothing seen, ("g", group, count) with count capped at target+1,
    # ("x",) ones in two different groups
    def initial_state(self):
        return ("z",)

    def step(self, state, pos, value):
        if not self._lit(pos, value) or state[0] == "x":
            return state
        g = self._gid[pos]
        if state[0] == "z":
            return ("g", g, min(1, self.target + 1))
        if state[1] != g:
            return ("x",)
        return ("g", g, min(state[2] + 1, self.target + 1))

    def accepts(self, state):
        if self.target == 0:
            return state[0] == "z"
        return state[0] == "g" and state[2] == self.target

    def renamed(self, mapping):
        return GroupExact(tuple(_rename(g, mapping) for g in self.groups), self.target)


@dataclass(frozen=True)
class PairExact(Constraint):
    """(sum(left) = 1 and sum(right) = 1) or all literals false; the edge selector."""

    left: tuple[int, ...]
    right: tuple[int, ...]
    lits: tuple[int, ...] = field(init=False)
    kind = "pair"

    def __post_init__(self):
        left = tuple(int(l) for l in self.left)
        right = tuple(int(l) for l in self.right)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "lits", _check_lits(left + right))

    def initial_state(self):
        return (0, 0)

    def step(self, state, pos, value):
        if not self._lit(pos, value):
            return state
        a, b = state
        if pos < len(self.left):
            return (min(a + 1, 2), b)
        return (a, min(b + 1, 2))

    def accepts(self, state):
        return state in ((0, 0), (1, 1))

    def renamed(self, mapping):
        return PairExact(_rename(self.left, mapping), _rename(self.right, mapping))


LITERAL_SYMMETRIC_KINDS = frozenset({"clause", "xor", "mod", "card"})


@dataclass(frozen=True)
class ConstraintSystem:
    num_vars: int
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.num_vars < 0:
            raise ContractError("negative variable count")
        for c in self.constraints:
            for v in c.variables:
                if not 1 <= v <= self.num_vars:
                    raise ContractError(f"variable {v} out of range 1..{self.num_vars}")

    def __len__(self) -> int:
        return len(self.constraints)

    def variables(self) -> range:
        return range(1, self.num_vars + 1)

    def constraint_vertex(self, index: int) -> int:
        """Incidence-graph vertex id of constraint ``index`` (0-based)."""
        return self.num_vars + 1 + index

    def evaluate(self, assignment) -> int:
        return int(all(c.evaluate(assignment) for c in self.constraints))


def eval_constraint(c: Constraint, assignment) -> int:
    return c.evaluate(assignment)


def incidence_graph(F: ConstraintSystem) -> nx.Graph:
    """Bipartite graph: variables are vertices 1..n, constraints n+1..n+m."""
    G = nx.Graph(num_vars=F.num_vars, num_constraints=len(F))
    for v in F.variables():
        G.add_node(v, kind="var")
    for i, c in enumerate(F.constraints):
        cv = F.constraint_vertex(i)
        G.add_node(cv, kind="con", index=i)
        for v in c.variables:
            G.add_edge(cv, v)
    return G


BRUTE_FORCE_LIMIT = 24


def brute_force_count(F: ConstraintSystem, limit: int = BRUTE_FORCE_LIMIT) -> int:
    if F.num_vars > limit:
        raise ContractError(f"{F.num_vars} variables exceed the enumeration limit {limit}")
    from .kernels import count_models

    return count_models(F)


def iter_assignments(variables: Sequence[int]) -> Iterable[dict[int, int]]:
    variables = list(variables)
    for bits in range(1 << len(variables)):
        yield {v: (bits >> i) & 1 for i, v in enumerate(variables)}


# ---------------------------------------------------------------- .csys format


def _fmt(c: Constraint) -> str:
    lits = " ".join(str(l) for l in c.lits)
    body = f"{lits} 0" if lits else "0"
    if isinstance(c, Clause):
        return body
    if isinstance(c, Xor):
        return ("x " if c.parity else "xe ") + body
    if isinstance(c, SumModulo):
        return f"d {c.modulus} {c.residue} {body}"
    if isinstance(c, Cardinality):
        return f"g {c.k} {body}"
    if isinstance(c, Threshold):
        pairs = " ".join(f"{w} {l}" for w, l in zip(c.weights, c.lits))
        return f"w {c.theta} {pairs} 0" if pairs else f"w {c.theta} 0"
    if isinstance(c, SmallScope):
        return f"f {c.arity} {c.table:x} {body}"
    if isinstance(c, GroupExact):
        sizes = " ".join(str(len(g)) for g in c.groups)
        return f"y {c.target} {len(c.groups)} {sizes} {body}".replace("  ", " ")
    if isinstance(c, PairExact):
        return f"u {len(c.left)} {body}"
    raise ContractError(f"cannot serialize {type(c).__name__}")


def serialize_system(F: ConstraintSystem) -> str:
    lines = [f"p csys {F.num_vars} {len(F)}"]
    lines.extend(_fmt(c) for c in F.constraints)
    return "\n".join(lines) + "\n"


def _ints(tokens, lineno):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise CsysParseError(lineno, f"expected integers, got {' '.join(tokens)!r}") from None


def _terminated(nums, lineno):
    if not nums or nums[-1] != 0:
        raise CsysParseError(lineno, "constraint line must end with 0")
    body = nums[:-1]
    if 0 in body:
        raise CsysParseError(lineno, "0 inside a literal list")
    return body


def parse_system(text: str) -> ConstraintSystem:
    n = m = None
    out: list[Constraint] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        tok = line.split()
        if tok[0] == "p":
            if n is not None:
                raise CsysParseError(lineno, "duplicate header")
            if len(tok) != 4 or tok[1] != "csys":
                raise CsysParseError(lineno, "malformed header, expected 'p csys <n> <m>'")
            n, m = _ints(tok[2:], lineno)
            if n < 0 or m < 0:
                raise CsysParseError(lineno, "negative counts in header")
            continue
        if n is None:
            raise CsysParseError(lineno, "constraint before header")
        head = tok[0]
        try:
            if head in ("x", "xe"):
                body = _terminated(_ints(tok[1:], lineno), lineno)
                c = Xor(tuple(body), 1 if head == "x" else 0)
            elif head == "d":
                nums = _ints(tok[1:], lineno)
                if len(nums) < 3:
                    raise CsysParseError(lineno, "sum-modulo needs modulus and residue")
                mod, res = nums[0], nums[1]
                if not 0 <= res < mod:
                    raise CsysParseError(lineno, f"residue {res} not below modulus {mod}")
                c = SumModulo(tuple(_terminated(nums[2:], lineno)), mod, res)
            elif head == "g":
                nums = _ints(tok[1:], lineno)
                if len(nums) < 2:
                    raise CsysParseError(lineno, "cardinality needs a bound")
                c = Cardinality(tuple(_terminated(nums[1:], lineno)), nums[0])
            elif head == "w":
                nums = _ints(tok[1:], lineno)
                if len(nums) < 2:
                    raise CsysParseError(lineno, "threshold needs a bound")
                body = _terminated(nums[1:], lineno) if nums[-1] == 0 else None
                if body is None:
                    raise CsysParseError(lineno, "constraint line must end with 0")
                if len(body) % 2:
                    raise CsysParseError(lineno, "threshold terms come in (weight, literal) pairs")
                c = Threshold(tuple(body[1::2]), tuple(body[0::2]), nums[0])
            elif head == "f":
                if len(tok) < 3:
                    raise CsysParseError(lineno, "small-scope needs arity and table")
                arity = _ints(tok[1:2], lineno)[0]
                try:
                    table = int(tok[2], 16)
                except ValueError:
                    raise CsysParseError(lineno, f"bad hex truth table {tok[2]!r}") from None
                body = _terminated(_ints(tok[3:], lineno), lineno)
                if len(body) != arity:
                    raise CsysParseError(lineno, f"arity {arity} but {len(body)} variables")
                c = SmallScope(tuple(body), table)
            elif head == "y":
                nums = _ints(tok[1:], lineno)
                if len(nums) < 2:
                    raise CsysParseError(lineno, "group constraint needs target and group count")
                target, ng = nums[0], nums[1]
                sizes = nums[2 : 2 + ng]
                body = _terminated(nums[2 + ng :], lineno)
                if len(sizes) != ng or sum(sizes) != len(body):
                    raise CsysParseError(lineno, "group sizes do not match the literal list")
                groups, at = [], 0
                for s in sizes:
                    groups.append(tuple(body[at : at + s]))
                    at += s
                c = GroupExact(tuple(groups), target)
            elif head == "u":
                nums = _ints(tok[1:], lineno)
                half = nums[0] if nums else -1
                body = _terminated(nums[1:], lineno)
                if half < 0 or half > len(body):
                    raise CsysParseError(lineno, "bad split for pair constraint")
                c = PairExact(tuple(body[:half]), tuple(body[half:]))
            else:
                c = Clause(tuple(_terminated(_ints(tok, lineno), lineno)))
        except ContractError as e:
            raise CsysParseError(lineno, str(e)) from None
        for v in c.variables:
            if v > n:
                raise CsysParseError(lineno, f"literal over variable {v} exceeds n={n}")
        out.append(c)
    if n is None:
        raise CsysParseError(1, "missing header")
    if len(out) != m:
        raise CsysParseError(len(text.splitlines()), f"header announces {m} constraints, found {len(out)}")
    return ConstraintSystem(n, tuple(out))


def figure_system() -> ConstraintSystem:
    """The three-constraint running example over x1..x7."""
    return ConstraintSystem(
        7,
        (
            Clause((1, 2, 3)),
            Xor((2, 3, 4, 5), 1),
            Cardinality((4, 5, 6, 7), 2),
        ),
    )
