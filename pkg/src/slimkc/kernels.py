"""Hot loops: brute-force model enumeration and bit-parallel circuit evaluation.

Both kernels have a numba implementation and a pure-numpy fallback.  Setting
``SLIMKC_NO_NUMBA=1`` in the environment (or a failed numba import) selects the
fallback; ``set_backend`` switches at runtime for benchmarks and tests.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised indirectly
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover
    HAVE_NUMBA = False

_backend = "numpy" if (os.environ.get("SLIMKC_NO_NUMBA", "") not in ("", "0") or not HAVE_NUMBA) else "numba"


def backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(name)
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    prev, _backend = _backend, name
    return prev


# kind codes shared by packer and kernels
K_CLAUSE, K_XOR, K_MOD, K_CARD, K_THRESH, K_TABLE, K_GROUP, K_PAIR = range(8)


def pack_system(F):
    """Flatten a ConstraintSystem into integer arrays for the enumeration kernels."""
    from .core import (
        Cardinality,
        Clause,
        GroupExact,
        PairExact,
        SmallScope,
        SumModulo,
        Threshold,
        Xor,
    )

    m = len(F.constraints)
    kinds = np.zeros(m, dtype=np.int64)
    offs = np.zeros(m + 1, dtype=np.int64)
    p0 = np.zeros(m, dtype=np.int64)
    p1 = np.zeros(m, dtype=np.int64)
    lits: list[int] = []
    aux: list[int] = []
    tables: list[np.ndarray] = []
    tbl_off = np.zeros(m, dtype=np.int64)
    tpos = 0
    for i, c in enumerate(F.constraints):
        offs[i] = len(lits)
        lits.extend(c.lits)
        if isinstance(c, Clause):
            kinds[i] = K_CLAUSE
            aux.extend([0] * c.arity)
        elif isinstance(c, Xor):
            kinds[i], p0[i] = K_XOR, c.parity
            aux.extend([0] * c.arity)
        elif isinstance(c, SumModulo):
            kinds[i], p0[i], p1[i] = K_MOD, c.modulus, c.residue
            aux.extend([0] * c.arity)
        elif isinstance(c, Cardinality):
            kinds[i], p0[i] = K_CARD, c.k
            aux.extend([0] * c.arity)
        elif isinstance(c, Threshold):
            kinds[i], p0[i] = K_THRESH, c.theta
            aux.extend(c.weights)
        elif isinstance(c, SmallScope):
            kinds[i] = K_TABLE
            aux.extend([0] * c.arity)
            size = 1 << c.arity
            bits = np.zeros(size, dtype=np.uint8)
            t = c.table
            for j in range(size):
                bits[j] = (t >> j) & 1
            tables.append(bits)
            tbl_off[i] = tpos
            tpos += size
        elif isinstance(c, GroupExact):
            kinds[i], p0[i] = K_GROUP, c.target
            aux.extend(c.group_of(j) for j in range(c.arity))
        elif isinstance(c, PairExact):
            kinds[i] = K_PAIR
            aux.extend([0] * len(c.left) + [1] * len(c.right))
        else:
            raise TypeError(f"no kernel encoding for {type(c).__name__}")
    offs[m] = len(lits)
    tbl = np.concatenate(tables) if tables else np.zeros(1, dtype=np.uint8)
    return (
        kinds,
        offs,
        np.asarray(lits, dtype=np.int64),
        np.asarray(aux, dtype=np.int64),
        p0,
        p1,
        tbl_off,
        tbl,
    )


def _eval_one(kind, lo, hi, lits, aux, p0, p1, toff, tbl, a):
    # shared by the numba kernel (compiled) and nothing else; kept branch-simple
    if kind == K_CLAUSE:
        for j in range(lo, hi):
            l = lits[j]
            v = (a >> (abs(l) - 1)) & 1
            if (l > 0 and v == 1) or (l < 0 and v == 0):
                return True
        return False
    s = 0
    if kind == K_TABLE:
        for j in range(lo, hi):
            s |= ((a >> (lits[j] - 1)) & 1) << (j - lo)
        return tbl[toff + s] == 1
    if kind == K_GROUP:
        g = -1
        for j in range(lo, hi):
            l = lits[j]
            v = (a >> (abs(l) - 1)) & 1
            if l < 0:
                v = 1 - v
            if v == 1:
                if g == -1:
                    g = aux[j]
                elif g != aux[j]:
                    return False
                s += 1
        return s == p0
    if kind == K_PAIR:
        sa = 0
        sb = 0
        for j in range(lo, hi):
            l = lits[j]
            v = (a >> (abs(l) - 1)) & 1
            if l < 0:
                v = 1 - v
            if aux[j] == 0:
                sa += v
            else:
                sb += v
        return (sa == 0 and sb == 0) or (sa == 1 and sb == 1)
    for j in range(lo, hi):
        l = lits[j]
        v = (a >> (abs(l) - 1)) & 1
        if l < 0:
            v = 1 - v
        if kind == K_THRESH:
            s += aux[j] * v
        else:
            s += v
    if kind == K_XOR:
        return (s & 1) == p0
    if kind == K_MOD:
        return s % p0 == p1
    if kind == K_CARD:
        return s >= p0
    return s >= p0  # threshold


def _count_loop(n, kinds, offs, lits, aux, p0, p1, tbl_off, tbl):
    total = 0
    m = kinds.shape[0]
    for a in range(1 << n):
        ok = True
        for i in range(m):
            if not _eval_one_jit(kinds[i], offs[i], offs[i + 1], lits, aux, p0[i], p1[i], tbl_off[i], tbl, a):
                ok = False
                break
        if ok:
            total += 1
    return total


if HAVE_NUMBA:
    _eval_one_jit = njit(cache=False)(_eval_one)
    _count_numba = njit(cache=False)(_count_loop)
else:  # pragma: no cover
    _eval_one_jit = _eval_one
    _count_numba = None


def _count_numpy(n, kinds, offs, lits, aux, p0, p1, tbl_off, tbl, chunk_bits=16):
    total = 0
    chunk = 1 << min(n, chunk_bits)
    for start in range(0, 1 << n, chunk):
        a = np.arange(start, start + chunk, dtype=np.int64)
        ok = np.ones(chunk, dtype=bool)
        for i in range(kinds.shape[0]):
            lo, hi = offs[i], offs[i + 1]
            ls = lits[lo:hi]
            kind = kinds[i]
            if hi == lo:
                vals = np.zeros((chunk, 0), dtype=np.int64)
            else:
                vals = (a[:, None] >> (np.abs(ls)[None, :] - 1)) & 1
                vals = np.where(ls[None, :] > 0, vals, 1 - vals)
            if kind == K_CLAUSE:
                sat = vals.any(axis=1)
            elif kind == K_XOR:
                sat = (vals.sum(axis=1) & 1) == p0[i]
            elif kind == K_MOD:
                sat = vals.sum(axis=1) % p0[i] == p1[i]
            elif kind == K_CARD:
                sat = vals.sum(axis=1) >= p0[i]
            elif kind == K_THRESH:
                sat = vals @ aux[lo:hi] >= p0[i]
            elif kind == K_TABLE:
                idx = (vals << np.arange(hi - lo)[None, :]).sum(axis=1)
                sat = tbl[tbl_off[i] + idx] == 1
            elif kind == K_GROUP:
                cnt = vals.sum(axis=1)
                g = aux[lo:hi]
                gmax = np.where(vals == 1, g[None, :], -1).max(axis=1, initial=-1)
                gmin = np.where(vals == 1, g[None, :], 1 << 30).min(axis=1, initial=1 << 30)
                one_group = (cnt == 0) | (gmax == gmin)
                sat = (cnt == p0[i]) & one_group
            else:  # pair
                side = aux[lo:hi]
                sa = (vals * (side == 0)[None, :]).sum(axis=1)
                sb = (vals * (side == 1)[None, :]).sum(axis=1)
                sat = ((sa == 0) & (sb == 0)) | ((sa == 1) & (sb == 1))
            ok &= sat
            if not ok.any():
                break
        total += int(ok.sum())
    return total


def count_models(F) -> int:
    packed = pack_system(F)
    n = F.num_vars
    if _backend == "numba":
        return int(_count_numba(n, *packed))
    return _count_numpy(n, *packed)


# ------------------------------------------------------------ circuit evaluation
# Gate arrays: op[g] in {0 literal, 1 constant, 2 and, 3 or}; for literals a[g] is the
# signed literal, for constants a[g] is the value; internal gates read a[g], b[g].

OP_LIT, OP_CONST, OP_AND, OP_OR = 0, 1, 2, 3


def _circuit_loop(op, a, b, planes, out):
    W = planes.shape[1]
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    for g in range(op.shape[0]):
        o = op[g]
        if o == 0:
            lit = a[g]
            if lit > 0:
                for w in range(W):
                    out[g, w] = planes[lit, w]
            else:
                for w in range(W):
                    out[g, w] = planes[-lit, w] ^ full
        elif o == 1:
            val = full if a[g] != 0 else np.uint64(0)
            for w in range(W):
                out[g, w] = val
        elif o == 2:
            x = a[g]
            y = b[g]
            for w in range(W):
                out[g, w] = out[x, w] & out[y, w]
        else:
            x = a[g]
            y = b[g]
            for w in range(W):
                out[g, w] = out[x, w] | out[y, w]


if HAVE_NUMBA:
    _circuit_numba = njit(cache=False)(_circuit_loop)
else:  # pragma: no cover
    _circuit_numba = None


def _circuit_numpy(op, a, b, planes, out):
    for g in range(op.shape[0]):
        o = op[g]
        if o == OP_LIT:
            lit = a[g]
            out[g] = planes[lit] if lit > 0 else ~planes[-lit]
        elif o == OP_CONST:
            out[g] = np.uint64(0xFFFFFFFFFFFFFFFF) if a[g] else np.uint64(0)
        elif o == OP_AND:
            np.bitwise_and(out[a[g]], out[b[g]], out=out[g])
        else:
            np.bitwise_or(out[a[g]], out[b[g]], out=out[g])


def evaluate_gates(op, a, b, planes: np.ndarray) -> np.ndarray:
    """Evaluate every gate on 64 assignments per word.

    ``planes[v]`` holds the packed values of variable ``v``; returns a
    (num_gates, words) uint64 array.  Gates must be topologically ordered.
    """
    op = np.ascontiguousarray(op, dtype=np.int64)
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    planes = np.ascontiguousarray(planes, dtype=np.uint64)
    out = np.zeros((op.shape[0], planes.shape[1]), dtype=np.uint64)
    if _backend == "numba":
        _circuit_numba(op, a, b, planes, out)
    else:
        _circuit_numpy(op, a, b, planes, out)
    return out


def enumeration_planes(variables, num_vars: int) -> tuple[np.ndarray, int]:
    """Packed bit-planes enumerating all assignments of ``variables``.

    Returns (planes indexed by variable id up to ``num_vars``, number of valid
    assignments).  Variables outside the list are fixed to 0.
    """
    variables = list(variables)
    k = len(variables)
    total = 1 << k
    words = max(1, (total + 63) // 64)
    idx = np.arange(words * 64, dtype=np.uint64)
    planes = np.zeros((num_vars + 1, words), dtype=np.uint64)
    weights = np.uint64(1) << np.arange(64, dtype=np.uint64)
    for j, v in enumerate(variables):
        bits = ((idx >> np.uint64(j)) & np.uint64(1)).reshape(words, 64)
        planes[v] = (bits * weights).sum(axis=1, dtype=np.uint64)
    return planes, total


def random_planes(variables, num_vars: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    words = max(1, (samples + 63) // 64)
    planes = np.zeros((num_vars + 1, words), dtype=np.uint64)
    for v in variables:
        planes[v] = rng.integers(0, np.iinfo(np.uint64).max, size=words, dtype=np.uint64, endpoint=True)
    return planes


def valid_mask(total: int, words: int) -> np.ndarray:
    mask = np.zeros(words, dtype=np.uint64)
    full, rem = divmod(total, 64)
    mask[:full] = np.uint64(0xFFFFFFFFFFFFFFFF)
    if rem:
        mask[full] = np.uint64((1 << rem) - 1)
    return mask


def popcount_rows(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x).sum(axis=-1, dtype=np.int64)
