"""Directed mixed graphs, districts and c-components.

Nodes are dense integers ``0..d-1``.  The plain-text and JSON graph formats use
1-based labels so files line up with hand-drawn figures; translation happens in
:func:`from_text` / :func:`to_text` and the JSON helpers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised for malformed graphs, components or graph files."""


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


class Admg:
    """A directed mixed graph ``(V, E_d, E_b)``.

    Despite the name the constructor accepts cyclic graphs; use
    :func:`is_ancestral` or :func:`find_directed_cycle` to check.  Instances are
    immutable and hashable.
    """

    __slots__ = ("n_nodes", "directed", "bidirected", "_pa", "_ch", "_sp")

    def __init__(self, n_nodes: int, directed: Iterable[Sequence[int]] = (),
                 bidirected: Iterable[Sequence[int]] = ()):
        if n_nodes < 1:
            raise GraphError("a graph needs at least one node")
        d_edges: set[tuple[int, int]] = set()
        for tail, head in directed:
            tail, head = int(tail), int(head)
            self._check_nodes(n_nodes, tail, head)
            if (tail, head) in d_edges:
                raise GraphError(f"duplicate directed edge {tail}->{head}")
            d_edges.add((tail, head))
        b_edges: set[tuple[int, int]] = set()
        for a, b in bidirected:
            a, b = int(a), int(b)
            self._check_nodes(n_nodes, a, b)
            p = _pair(a, b)
            if p in b_edges:
                raise GraphError(f"duplicate bidirected edge {a}<->{b}")
            b_edges.add(p)
        object.__setattr__(self, "n_nodes", int(n_nodes))
        object.__setattr__(self, "directed", frozenset(d_edges))
        object.__setattr__(self, "bidirected", frozenset(b_edges))
        pa: list[set[int]] = [set() for _ in range(n_nodes)]
        ch: list[set[int]] = [set() for _ in range(n_nodes)]
        sp: list[set[int]] = [set() for _ in range(n_nodes)]
        for t, h in d_edges:
            pa[h].add(t)
            ch[t].add(h)
        for a, b in b_edges:
            sp[a].add(b)
            sp[b].add(a)
        object.__setattr__(self, "_pa", tuple(frozenset(s) for s in pa))
        object.__setattr__(self, "_ch", tuple(frozenset(s) for s in ch))
        object.__setattr__(self, "_sp", tuple(frozenset(s) for s in sp))

    @staticmethod
    def _check_nodes(n: int, a: int, b: int) -> None:
        if a == b:
            raise GraphError(f"self-loop on node {a}")
        if not (0 <= a < n and 0 <= b < n):
            raise GraphError(f"edge ({a}, {b}) outside node range 0..{n - 1}")

    def __setattr__(self, key, value):
        raise AttributeError("Admg is immutable")

    def __eq__(self, other):
        if not isinstance(other, Admg):
            return NotImplemented
        return (self.n_nodes == other.n_nodes and self.directed == other.directed
                and self.bidirected == other.bidirected)

    def __hash__(self):
        return hash((self.n_nodes, self.directed, self.bidirected))

    def __repr__(self):
        d = ", ".join(f"{a}->{b}" for a, b in sorted(self.directed))
        b = ", ".join(f"{a}<->{b}" for a, b in sorted(self.bidirected))
        return f"Admg(n={self.n_nodes}; {d}; {b})"

    @property
    def nodes(self) -> range:
        return range(self.n_nodes)

    @property
    def n_edges(self) -> int:
        return len(self.directed) + len(self.bidirected)

    def parents(self, i: int) -> frozenset[int]:
        return self._pa[i]

    def children(self, i: int) -> frozenset[int]:
        return self._ch[i]

    def spouses(self, i: int) -> frozenset[int]:
        return self._sp[i]

    def descendants(self, i: int) -> set[int]:
        """Nodes reachable from ``i`` along directed edges, excluding ``i``
        unless it lies on a directed cycle."""
        seen: set[int] = set()
        stack = list(self._ch[i])
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(self._ch[v] - seen)
        return seen

    def ancestors(self, i: int) -> set[int]:
        """Proper ancestors of ``i`` (``i`` itself only if on a cycle)."""
        seen: set[int] = set()
        stack = list(self._pa[i])
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(self._pa[v] - seen)
        return seen

    def edge_mark(self, i: int, j: int) -> str:
        """Mark pattern between ``i`` and ``j``: ``''``, ``'->'``, ``'<-'``,
        ``'<->'``, or a ``'+'``-joined combination for multi-edges."""
        marks = []
        if (i, j) in self.directed:
            marks.append("->")
        if (j, i) in self.directed:
            marks.append("<-")
        if _pair(i, j) in self.bidirected:
            marks.append("<->")
        return "+".join(marks)

    def adjacency_matrix(self) -> np.ndarray:
        """``A[i, j] = 1`` for ``i -> j`` and ``A[i, j] = A[j, i] = 2`` for ``i <-> j``."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=int)
        for t, h in self.directed:
            a[t, h] = 1
        for x, y in self.bidirected:
            a[x, y] = a[y, x] = 2
        return a


@dataclass(frozen=True)
class CComponent:
    """The subgraph implied by a district.

    ``district`` is sorted; ``parents[k]`` is the parent set of ``district[k]``.
    Parent sets may include other district nodes (intra-district directed
    edges), which only arise for districts of three or more nodes in ancestral
    graphs.
    """

    district: tuple[int, ...]
    bidirected: frozenset
    parents: tuple[frozenset, ...]

    def __post_init__(self):
        if not self.district:
            raise GraphError("empty district")
        if tuple(sorted(set(self.district))) != self.district:
            raise GraphError("district must be sorted and duplicate-free")
        if len(self.parents) != len(self.district):
            raise GraphError("one parent set per district node is required")
        dset = set(self.district)
        for a, b in self.bidirected:
            if a >= b or a not in dset or b not in dset:
                raise GraphError(f"bidirected pair ({a}, {b}) not inside district {self.district}")
        for i, w in zip(self.district, self.parents):
            if i in w:
                raise GraphError(f"node {i} listed as its own parent")
        if len(self.district) == 1:
            if self.bidirected:
                raise GraphError("single-node district cannot carry bidirected edges")
        elif not _connected(self.district, self.bidirected):
            raise GraphError(f"bidirected edges {sorted(self.bidirected)} do not connect {self.district}")

    @classmethod
    def make(cls, district: Iterable[int], bidirected: Iterable[Sequence[int]] = (),
             parents: Optional[Mapping[int, Iterable[int]]] = None) -> "CComponent":
        dist = tuple(sorted(set(int(v) for v in district)))
        parents = parents or {}
        unknown = set(parents) - set(dist)
        if unknown:
            raise GraphError(f"parent sets given for non-district nodes {sorted(unknown)}")
        pas = tuple(frozenset(int(w) for w in parents.get(i, ())) for i in dist)
        return cls(dist, frozenset(_pair(int(a), int(b)) for a, b in bidirected), pas)

    @classmethod
    def singleton(cls, node: int, parents: Iterable[int] = ()) -> "CComponent":
        return cls((int(node),), frozenset(), (frozenset(int(w) for w in parents),))

    def parent_set(self, i: int) -> frozenset:
        return self.parents[self.district.index(i)]

    def parent_map(self) -> dict[int, frozenset]:
        return dict(zip(self.district, self.parents))

    @property
    def size(self) -> int:
        return len(self.district)

    @property
    def n_directed(self) -> int:
        return sum(len(w) for w in self.parents)

    @property
    def n_edges(self) -> int:
        return self.n_directed + len(self.bidirected)

    @property
    def n_params(self) -> int:
        """BIC parameter count owned by this component: two per district node
        plus one per edge."""
        return 2 * self.size + self.n_edges

    @property
    def all_parents(self) -> frozenset:
        out: set[int] = set()
        for w in self.parents:
            out |= w
        return frozenset(out)

    @property
    def outside_parents(self) -> tuple[int, ...]:
        """``pa(D) \\ D`` in sorted order."""
        return tuple(sorted(self.all_parents - set(self.district)))

    @property
    def nodes(self) -> tuple[int, ...]:
        """Node set of the implied subgraph: the district followed by its
        outside parents."""
        return self.district + self.outside_parents

    def directed_edges(self) -> list[tuple[int, int]]:
        return [(w, i) for i, ws in zip(self.district, self.parents) for w in sorted(ws)]

    def is_internally_ancestral(self) -> bool:
        """Whether the component's own edges form an ancestral graph."""
        n = max(self.nodes) + 1
        return is_ancestral(Admg(n, self.directed_edges(), self.bidirected))

    def label(self, one_based: bool = False) -> str:
        off = 1 if one_based else 0
        parts = []
        for i, w in zip(self.district, self.parents):
            ws = ",".join(str(x + off) for x in sorted(w))
            parts.append(f"{{{ws}}}->{i + off}")
        s = " ".join(parts)
        if self.bidirected:
            s += " | " + " ".join(f"{a + off}<->{b + off}" for a, b in sorted(self.bidirected))
        return s

    def __repr__(self):
        return f"CComponent({self.label()})"


def _connected(nodes: Sequence[int], pairs: Iterable[tuple[int, int]]) -> bool:
    adj: dict[int, set[int]] = {v: set() for v in nodes}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    start = nodes[0]
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in adj[v] - seen:
            seen.add(u)
            stack.append(u)
    return len(seen) == len(nodes)


def districts(g: Admg) -> list[frozenset]:
    """Connected components of the bidirected part of ``g``, ordered by their
    smallest node."""
    seen = [False] * g.n_nodes
    blocks = []
    for s in g.nodes:
        if seen[s]:
            continue
        block = {s}
        seen[s] = True
        stack = [s]
        while stack:
            v = stack.pop()
            for u in g.spouses(v):
                if not seen[u]:
                    seen[u] = True
                    block.add(u)
                    stack.append(u)
        blocks.append(frozenset(block))
    return blocks


def implied_subgraph(g: Admg, district: Iterable[int]) -> CComponent:
    """The c-component implied by ``district``, which must be a district of ``g``."""
    dset = frozenset(district)
    if not dset or dset not in set(districts(g)):
        raise GraphError(f"{sorted(dset)} is not a district of the graph")
    bi = [(a, b) for a, b in g.bidirected if a in dset]
    return CComponent.make(dset, bi, {i: g.parents(i) for i in dset})


def c_components(g: Admg) -> list[CComponent]:
    return [implied_subgraph(g, block) for block in districts(g)]


def assemble(components: Iterable[CComponent], n_nodes: int) -> Admg:
    """Union of the edges of components whose districts partition ``0..n-1``."""
    covered = [False] * n_nodes
    directed: list[tuple[int, int]] = []
    bidirected: list[tuple[int, int]] = []
    for c in components:
        for i in c.district:
            if not 0 <= i < n_nodes:
                raise GraphError(f"node {i} outside 0..{n_nodes - 1}")
            if covered[i]:
                raise GraphError(f"node {i} covered by more than one district")
            covered[i] = True
        directed.extend(c.directed_edges())
        bidirected.extend(c.bidirected)
    missing = [i for i, c in enumerate(covered) if not c]
    if missing:
        raise GraphError(f"nodes {missing} not covered by any district")
    return Admg(n_nodes, directed, bidirected)


def find_directed_cycle(g: Admg) -> Optional[list[int]]:
    """Return ``[v0, ..., vk]`` with ``v0 -> v1 -> ... -> vk -> v0``, or None."""
    white, grey, black = 0, 1, 2
    color = [white] * g.n_nodes
    for root in g.nodes:
        if color[root] != white:
            continue
        path = [root]
        iters = [iter(sorted(g.children(root)))]
        color[root] = grey
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                color[path.pop()] = black
                iters.pop()
                continue
            if color[nxt] == grey:
                return path[path.index(nxt):]
            if color[nxt] == white:
                color[nxt] = grey
                path.append(nxt)
                iters.append(iter(sorted(g.children(nxt))))
    return None


def _directed_path(g: Admg, src: int, dst: int) -> Optional[list[int]]:
    prev = {src: None}
    stack = [src]
    while stack:
        v = stack.pop()
        for u in g.children(v):
            if u not in prev:
                prev[u] = v
                if u == dst:
                    path = [u]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return path[::-1]
                stack.append(u)
    return None


def find_almost_directed_cycle(g: Admg) -> Optional[tuple[list[int], tuple[int, int]]]:
    """Return ``(path, (a, b))`` where ``path`` runs along directed edges from
    one endpoint of the bidirected edge ``{a, b}`` to the other, or None."""
    for a, b in sorted(g.bidirected):
        for src, dst in ((a, b), (b, a)):
            path = _directed_path(g, src, dst)
            if path is not None:
                return path, (a, b)
    return None


def is_ancestral(g: Admg) -> bool:
    return find_directed_cycle(g) is None and find_almost_directed_cycle(g) is None


def topological_order(g: Admg) -> list[int]:
    """Kahn ordering over directed edges; raises GraphError on a cycle."""
    indeg = [len(g.parents(v)) for v in g.nodes]
    ready = sorted(v for v in g.nodes if indeg[v] == 0)
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for u in sorted(g.children(v)):
            indeg[u] -= 1
            if indeg[u] == 0:
                ready.append(u)
    if len(order) != g.n_nodes:
        raise GraphError("graph has a directed cycle")
    return order


def all_pairs(n: int):
    return combinations(range(n), 2)


# ---------------------------------------------------------------------------
# file formats

def to_text(g: Admg, comment: str = "") -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"nodes: {g.n_nodes}")
    lines.extend(f"{t + 1} -> {h + 1}" for t, h in sorted(g.directed))
    lines.extend(f"{a + 1} <-> {b + 1}" for a, b in sorted(g.bidirected))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Admg:
    n = None
    directed, bidirected = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("nodes:"):
            n = int(line.split(":", 1)[1])
            continue
        if "<->" in line:
            a, b = line.split("<->")
            bidirected.append((int(a) - 1, int(b) - 1))
        elif "->" in line:
            a, b = line.split("->")
            directed.append((int(a) - 1, int(b) - 1))
        else:
            raise GraphError(f"line {lineno}: cannot parse {raw!r}")
    if n is None:
        raise GraphError("missing 'nodes: d' header")
    return Admg(n, directed, bidirected)


def read_graph(path) -> Admg:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return from_json(text)
    return from_text(text)


def write_graph(g: Admg, path, comment: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(to_text(g, comment))


def to_json(g: Admg) -> str:
    return json.dumps({
        "nodes": g.n_nodes,
        "directed": [[t + 1, h + 1] for t, h in sorted(g.directed)],
        "bidirected": [[a + 1, b + 1] for a, b in sorted(g.bidirected)],
    })


def from_json(text: str) -> Admg:
    obj = json.loads(text)
    return Admg(obj["nodes"],
                [(t - 1, h - 1) for t, h in obj.get("directed", [])],
                [(a - 1, b - 1) for a, b in obj.get("bidirected", [])])
