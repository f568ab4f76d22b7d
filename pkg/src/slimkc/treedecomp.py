"""Tree decompositions: validation, heuristics, nice form, vtree extraction and merging."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import networkx as nx
from networkx.algorithms.approximation import treewidth_min_degree, treewidth_min_fill_in

from .core import ConstraintSystem, ContractError
from .sdnnf import Vtree


@dataclass
class TreeDecomposition:
    bags: dict[int, frozenset]
    edges: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.bags = {int(k): frozenset(v) for k, v in self.bags.items()}
        self.edges = [(int(a), int(b)) for a, b in self.edges]

    @property
    def max_bag_size(self) -> int:
        return max((len(b) for b in self.bags.values()), default=0)

    @property
    def width(self) -> int:
        return self.max_bag_size - 1

    def nodes(self) -> list[int]:
        return sorted(self.bags)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {t: [] for t in self.bags}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for t in adj:
            adj[t].sort()
        return adj

    def tree(self) -> nx.Graph:
        T = nx.Graph()
        T.add_nodes_from(self.bags)
        T.add_edges_from(self.edges)
        return T

    def rooted(self, root: int | None = None) -> "RootedTD":
        if root is None:
            root = self.default_root()
        adj = self.adjacency()
        children: dict[int, tuple[int, ...]] = {}
        seen = {root}
        stack = [root]
        while stack:
            t = stack.pop()
            ch = [u for u in adj[t] if u not in seen]
            seen.update(ch)
            children[t] = tuple(ch)
            stack.extend(ch)
        if len(seen) != len(self.bags):
            raise ContractError("tree decomposition is not connected")
        return RootedTD(dict(self.bags), root, children)

    def default_root(self) -> int:
        adj = self.adjacency()
        empties = [t for t in sorted(self.bags) if not self.bags[t] and len(adj[t]) <= 1]
        return empties[0] if empties else min(self.bags)

    def vertices(self) -> set:
        out: set = set()
        for b in self.bags.values():
            out |= b
        return out


@dataclass
class RootedTD:
    bags: dict[int, frozenset]
    root: int
    children: dict[int, tuple[int, ...]]

    def __post_init__(self):
        for t in self.bags:
            self.children.setdefault(t, ())
        self.parent: dict[int, int] = {}
        for t, ch in self.children.items():
            for c in ch:
                self.parent[c] = t

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags.values()), default=0) - 1

    @property
    def max_bag_size(self) -> int:
        return max((len(b) for b in self.bags.values()), default=0)

    def preorder(self) -> list[int]:
        out, stack = [], [self.root]
        while stack:
            t = stack.pop()
            out.append(t)
            stack.extend(reversed(self.children[t]))
        return out

    def postorder(self) -> list[int]:
        out, stack = [], [(self.root, False)]
        while stack:
            t, done = stack.pop()
            if done:
                out.append(t)
                continue
            stack.append((t, True))
            for c in reversed(self.children[t]):
                stack.append((c, False))
        return out

    def as_td(self) -> TreeDecomposition:
        edges = [(p, c) for p, ch in self.children.items() for c in ch]
        return TreeDecomposition(dict(self.bags), edges)

    def top_nodes(self) -> dict:
        """Map every vertex to the highest node whose bag contains it."""
        top: dict = {}
        for t in self.preorder():
            p = self.parent.get(t)
            pb = self.bags[p] if p is not None else frozenset()
            for v in self.bags[t] - pb:
                top.setdefault(v, t)
        return top


@dataclass
class NiceTreeDecomposition(RootedTD):
    kinds: dict[int, tuple] = field(default_factory=dict)

    def kind(self, t: int) -> tuple:
        return self.kinds[t]


@dataclass
class TdReport:
    is_tree: bool
    covers: bool
    edges_covered: bool
    connected: bool
    width: int
    failures: list[str] = field(default_factory=list)
    nice: bool | None = None

    @property
    def ok(self) -> bool:
        base = self.is_tree and self.covers and self.edges_covered and self.connected
        return base and (self.nice is not False)


def validate_td(G: nx.Graph, td) -> TdReport:
    if isinstance(td, RootedTD):
        td = td.as_td()
    fails: list[str] = []
    T = td.tree()
    is_tree = T.number_of_nodes() > 0 and nx.is_tree(T)
    if not is_tree:
        fails.append("decomposition graph is not a tree")
    occ: dict = {}
    for t, b in td.bags.items():
        for v in b:
            occ.setdefault(v, []).append(t)
    missing = [v for v in G.nodes if v not in occ]
    covers = not missing
    if missing:
        fails.append(f"uncovered vertices: {sorted(map(repr, missing))[:8]}")
    edges_ok = True
    for u, v in G.edges:
        tu = occ.get(u)
        if not tu or not any(v in td.bags[t] for t in tu):
            edges_ok = False
            fails.append(f"edge ({u!r}, {v!r}) not in any bag")
            break
    connected = True
    for v, nodes in occ.items():
        if len(nodes) > 1 and not nx.is_connected(T.subgraph(nodes)):
            connected = False
            fails.append(f"occurrences of {v!r} are disconnected")
    return TdReport(is_tree, covers, edges_ok, connected, td.width, fails)


def validate_nice(G: nx.Graph, ntd: NiceTreeDecomposition) -> TdReport:
    rep = validate_td(G, ntd)
    nice = not ntd.bags[ntd.root]
    if not nice:
        rep.failures.append("root bag is not empty")
    for t in ntd.bags:
        ch = ntd.children[t]
        kind = ntd.kinds.get(t, ("?",))
        b = ntd.bags[t]
        good = False
        if kind[0] == "leaf":
            good = not ch
        elif kind[0] == "join":
            good = len(ch) == 2 and all(ntd.bags[c] == b for c in ch)
        elif kind[0] == "introduce":
            good = len(ch) == 1 and kind[1] not in ntd.bags[ch[0]] and b == ntd.bags[ch[0]] | {kind[1]}
        elif kind[0] == "forget":
            good = len(ch) == 1 and kind[1] not in b and ntd.bags[ch[0]] == b | {kind[1]}
        if not good:
            nice = False
            rep.failures.append(f"node {t} is not a valid {kind[0]} node")
            break
    rep.nice = nice
    return rep


# ---------------------------------------------------------------- heuristics

EXACT_LIMIT = 12


def td_from_elimination(G: nx.Graph, order: Sequence) -> TreeDecomposition:
    pos = {v: i for i, v in enumerate(order)}
    adj = {v: set(G.neighbors(v)) - {v} for v in G.nodes}
    bags: dict[int, frozenset] = {}
    link: dict[int, int] = {}
    for i, v in enumerate(order):
        nb = {u for u in adj[v] if pos[u] > i}
        bags[i] = frozenset(nb | {v})
        for u in nb:
            adj[u] |= nb - {u}
        if nb:
            link[i] = min(pos[u] for u in nb)
        elif i + 1 < len(order):
            link[i] = i + 1
    edges = [(i, j) for i, j in link.items()]
    if not bags:
        bags[0] = frozenset()
    return TreeDecomposition(bags, edges)


def _exact_order(G: nx.Graph) -> list:
    nodes = sorted(G.nodes, key=repr)
    n = len(nodes)
    idx = {v: i for i, v in enumerate(nodes)}
    nbr = [0] * n
    for u, v in G.edges:
        if u != v:
            nbr[idx[u]] |= 1 << idx[v]
            nbr[idx[v]] |= 1 << idx[u]
    full = (1 << n) - 1

    def q(S, v):
        # vertices outside S+v reachable from v through S
        seen = 1 << v
        frontier = 1 << v
        reach_out = 0
        while frontier:
            nxt = 0
            f = frontier
            while f:
                low = f & -f
                i = low.bit_length() - 1
                f ^= low
                nb = nbr[i] & ~seen
                reach_out |= nb & ~S
                nxt |= nb & S
            seen |= nxt
            frontier = nxt
        return bin(reach_out & ~(1 << v)).count("1")

    tw = {0: -1}
    choice: dict[int, int] = {}
    by_size: list[list[int]] = [[] for _ in range(n + 1)]
    for S in range(1 << n):
        by_size[bin(S).count("1")].append(S)
    for k in range(1, n + 1):
        for S in by_size[k]:
            best, arg = None, -1
            s = S
            while s:
                low = s & -s
                v = low.bit_length() - 1
                s ^= low
                rest = S ^ low
                val = max(tw[rest], q(rest, v))
                if best is None or val < best:
                    best, arg = val, v
            tw[S] = best
            choice[S] = arg
    order_rev = []
    S = full
    while S:
        v = choice[S]
        order_rev.append(nodes[v])
        S ^= 1 << v
    return list(reversed(order_rev))


def heuristic_td(G: nx.Graph, exact_limit: int = EXACT_LIMIT) -> TreeDecomposition:
    """Tree decomposition via exact search (small graphs) or greedy elimination.

    Greedy elimination uses networkx's min-fill-in and min-degree heuristics and
    keeps the narrower result.  Bags are relabelled with integer node ids.
    """
    if G.number_of_nodes() == 0:
        return TreeDecomposition({0: frozenset()}, [])
    if G.number_of_nodes() <= exact_limit:
        return td_from_elimination(G, _exact_order(G))
    best = None
    for heur in (treewidth_min_fill_in, treewidth_min_degree):
        w, T = heur(G)
        if best is None or w < best[0]:
            best = (w, T)
    _, T = best
    ids = {bag: i for i, bag in enumerate(sorted(T.nodes, key=lambda b: sorted(map(repr, b))))}
    bags = {i: frozenset(b) for b, i in ids.items()}
    edges = [(ids[a], ids[b]) for a, b in T.edges]
    return TreeDecomposition(bags, edges)


# ---------------------------------------------------------------- nice form


def make_nice(td, root: int | None = None, order_key: Callable | None = None) -> NiceTreeDecomposition:
    """Rooted nice decomposition with empty leaf and root bags and binary joins."""
    if isinstance(td, RootedTD):
        rt = td
    else:
        rt = td.rooted(root)
    key = order_key or (lambda v: (0, v) if isinstance(v, int) else (1, repr(v)))
    bags: dict[int, frozenset] = {}
    children: dict[int, tuple[int, ...]] = {}
    kinds: dict[int, tuple] = {}
    counter = [0]

    def new(bag, ch, kind):
        i = counter[0]
        counter[0] += 1
        bags[i] = bag
        children[i] = ch
        kinds[i] = kind
        return i

    def lift(cur, target):
        cb = bags[cur]
        for v in sorted(cb - target, key=key):
            cb = cb - {v}
            cur = new(cb, (cur,), ("forget", v))
        for v in sorted(target - cb, key=key):
            cb = cb | {v}
            cur = new(cb, (cur,), ("introduce", v))
        return cur

    top: dict[int, int] = {}
    for t in rt.postorder():
        B = rt.bags[t]
        tops = [lift(top[c], B) for c in rt.children[t]]
        if not tops:
            tops = [lift(new(frozenset(), (), ("leaf",)), B)]
        while len(tops) > 1:
            j = new(B, (tops[0], tops[1]), ("join",))
            tops = [j] + tops[2:]
        top[t] = tops[0]
    r = lift(top[rt.root], frozenset())
    return NiceTreeDecomposition(bags, r, children, kinds)


# ---------------------------------------------------------------- vtree extraction


@dataclass
class VtreeExtraction:
    tree: RootedTD
    vtrees: dict[int, Vtree]
    bag_maps: dict[int, dict[int, frozenset]]
    anchors: dict[int, dict[int, int]]
    flags: dict[int, str] = field(default_factory=dict)

    def overlay(self, ci: int) -> TreeDecomposition:
        bm = self.bag_maps[ci]
        base = self.tree.as_td()
        return TreeDecomposition({t: bm.get(t, frozenset()) for t in base.bags}, base.edges)


class _MutableTree:
    def __init__(self, rt: RootedTD):
        self.bags = dict(rt.bags)
        self.children = {t: list(ch) for t, ch in rt.children.items()}
        self.parent = dict(rt.parent)
        self.root = rt.root
        self.next_id = max(self.bags) + 1

    def insert_clone_parent(self, t: int) -> int:
        p = self.next_id
        self.next_id += 1
        self.bags[p] = self.bags[t]
        self.children[p] = [t]
        old = self.parent.get(t)
        self.parent[t] = p
        if old is None:
            self.root = p
        else:
            self.parent[p] = old
            self.children[old] = [p if c == t else c for c in self.children[old]]
        return p

    def freeze(self) -> RootedTD:
        return RootedTD(dict(self.bags), self.root, {t: tuple(c) for t, c in self.children.items()})


def extract_vtrees(F: ConstraintSystem, td, root: int | None = None) -> VtreeExtraction:
    """Clone-parent transformation and per-constraint vtrees with width-3 bag maps."""
    nice = td if isinstance(td, NiceTreeDecomposition) else make_nice(td, root)
    mt = _MutableTree(nice)
    tops = nice.top_nodes()

    def top(v):
        t = tops[v]
        while t in mt.parent and v in mt.bags[mt.parent[t]]:
            t = mt.parent[t]
        return t

    # a variable whose highest node is a join gets a clone parent
    tx: dict[int, int] = {}
    for x in F.variables():
        if x not in tops:
            continue
        t = top(x)
        if len(mt.children[t]) == 2:
            t = mt.insert_clone_parent(t)
        tx[x] = t

    anchors: dict[int, dict[int, int]] = {}
    for ci, c in enumerate(F.constraints):
        cv = F.constraint_vertex(ci)
        tc = top(cv)
        S = sorted(set(c.variables) & mt.bags[tc])
        amap: dict[int, int] = {}
        # each clone goes directly above tc, so the first variable ends up highest
        for x in S:
            amap[x] = mt.insert_clone_parent(tc)
        for x in c.variables:
            if x not in amap:
                amap[x] = tx[x]
        anchors[ci] = amap

    tree = mt.freeze()
    depth = {tree.root: 0}
    for t in tree.preorder():
        for c in tree.children[t]:
            depth[c] = depth[t] + 1

    vtrees: dict[int, Vtree] = {}
    bag_maps: dict[int, dict[int, frozenset]] = {}
    flags: dict[int, str] = {}
    for ci, c in enumerate(F.constraints):
        amap = anchors[ci]
        if not amap:
            dummy = ("dummy", ci)
            vtrees[ci] = Vtree(dummy, {}, dummy=True)
            cv = F.constraint_vertex(ci)
            bag_maps[ci] = {top(cv): frozenset([dummy])}
            flags[ci] = "empty-scope"
            continue
        vtrees[ci], bag_maps[ci] = _vtree_for(ci, amap, tree, depth)
    return VtreeExtraction(tree, vtrees, bag_maps, anchors, flags)


def _vtree_for(ci, amap, tree: RootedTD, depth):
    vc = {t: x for x, t in amap.items()}
    parent = tree.parent
    # lowest common ancestor of the anchor nodes
    nodes = list(vc)
    lca = nodes[0]
    for t in nodes[1:]:
        a, b = lca, t
        while depth[a] > depth[b]:
            a = parent[a]
        while depth[b] > depth[a]:
            b = parent[b]
        while a != b:
            a, b = parent[a], parent[b]
        lca = a
    T1: set[int] = set()
    for t in nodes:
        while t not in T1:
            T1.add(t)
            if t == lca:
                break
            t = parent[t]
    kids1 = {t: [c for c in tree.children[t] if c in T1] for t in T1}
    T2 = {t for t in T1 if t in vc or len(kids1[t]) >= 2}

    # T2 structure
    def down(t):
        # nearest T2 node at or below t along the unique T1 chain
        while t not in T2:
            (t,) = kids1[t]
        return t

    kids2 = {t: [down(c) for c in kids1[t]] for t in T2}
    par2: dict[int, int] = {}
    for t, ch in kids2.items():
        for c in ch:
            par2[c] = t

    sigma: dict[int, object] = {}
    vkids: dict = {}
    for t in sorted(T2, key=lambda u: -depth[u]):
        ch = kids2[t]
        if t in vc and not ch:
            sigma[t] = vc[t]
            continue
        node = ("t", ci, t)
        sigma[t] = node
        if t in vc:
            (u,) = ch
            vkids[node] = (vc[t], sigma[u])
        else:
            if len(ch) != 2:
                raise ContractError(f"branch node {t} has {len(ch)} children")
            vkids[node] = (sigma[ch[0]], sigma[ch[1]])
    vt = Vtree(sigma[lca], vkids)

    bm: dict[int, frozenset] = {}
    for t in T1:
        if t in T2:
            up = par2.get(t)
            bag = {sigma[t]}
            if t in vc:
                bag.add(vc[t])
            if up is not None:
                bag.add(sigma[up])
            bm[t] = frozenset(bag)
        else:
            a = parent[t]
            while a not in T2:
                a = parent[a]
            bm[t] = frozenset({sigma[a], sigma[down(t)]})
    return vt, bm


# ---------------------------------------------------------------- merging


def merge_tds(base: TreeDecomposition, overlays: Iterable[TreeDecomposition]) -> TreeDecomposition:
    """Bag-wise union of decompositions sharing one tree.

    Shared vertices must co-occur in at least one node of the base and the
    overlay, which keeps their occurrence sets connected after the union.
    """
    base_edges = {frozenset(e) for e in base.edges}
    bags = {t: set(b) for t, b in base.bags.items()}
    base_occ: dict = {}
    for t, b in base.bags.items():
        for v in b:
            base_occ.setdefault(v, set()).add(t)
    for ov in overlays:
        if set(ov.bags) != set(base.bags) or {frozenset(e) for e in ov.edges} != base_edges:
            raise ContractError("overlay does not share the base tree")
        ov_occ: dict = {}
        for t, b in ov.bags.items():
            for v in b:
                ov_occ.setdefault(v, set()).add(t)
        for v, nodes in ov_occ.items():
            if v in base_occ and not (nodes & base_occ[v]):
                t = min(nodes)
                raise ContractError(f"vertex {v!r} at overlay node {t} never meets its base occurrences")
        for t, b in ov.bags.items():
            bags[t] |= b
    return TreeDecomposition({t: frozenset(b) for t, b in bags.items()}, list(base.edges))


# ---------------------------------------------------------------- .td files


def write_td(td: TreeDecomposition, num_vertices: int) -> str:
    ids = {t: i + 1 for i, t in enumerate(sorted(td.bags))}
    lines = [f"s td {len(ids)} {td.max_bag_size} {num_vertices}"]
    for t in sorted(td.bags):
        lines.append(" ".join(["b", str(ids[t])] + [str(v) for v in sorted(td.bags[t])]))
    for a, b in td.edges:
        lines.append(f"{ids[a]} {ids[b]}")
    return "\n".join(lines) + "\n"


def read_td(text: str) -> TreeDecomposition:
    bags: dict[int, frozenset] = {}
    edges: list[tuple[int, int]] = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        tok = line.split()
        try:
            if tok[0] == "s":
                if len(tok) != 5 or tok[1] != "td":
                    raise ValueError("malformed header")
                header = tuple(int(x) for x in tok[2:])
            elif tok[0] == "b":
                bags[int(tok[1])] = frozenset(int(x) for x in tok[2:])
            else:
                a, b = tok
                edges.append((int(a), int(b)))
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from None
    if header is None:
        raise ValueError("missing 's td' header")
    if header[0] != len(bags):
        raise ValueError(f"header announces {header[0]} bags, found {len(bags)}")
    return TreeDecomposition(bags, edges)
