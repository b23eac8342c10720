"""Integer program over candidate c-components and its cutting planes.

Variables are the active candidates; the objective is the sum of their local
scores.  Each node lies in exactly one chosen district (partition rows).
Acyclicity and ancestrality are imposed lazily by strengthened cluster and
bicluster rows, which are kept in the original variable space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .candidates import ScoredCandidate
from .graph import Admg, CComponent, assemble

CLUSTER = "cluster"
BICLUSTER = "bicluster"


def node_mask(nodes: Iterable[int]) -> int:
    m = 0
    for v in nodes:
        m |= 1 << int(v)
    return m


def mask_nodes(mask: int) -> frozenset:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return frozenset(out)


class CandidateIndex:
    """Bitmask view of a candidate list for vectorised row construction."""

    def __init__(self, comps: Sequence[CComponent]):
        self.comps = list(comps)
        n = len(self.comps)
        slots = max((c.size for c in self.comps), default=1)
        self.member_node = np.full((n, slots), -1, dtype=np.int64)
        self.member_pmask = np.zeros((n, slots), dtype=np.int64)
        self.dmask = np.zeros(n, dtype=np.int64)
        self.pair_vars: dict[tuple[int, int], np.ndarray] = {}
        pairs: dict[tuple[int, int], list[int]] = {}
        for k, c in enumerate(self.comps):
            for s, (v, w) in enumerate(zip(c.district, c.parents)):
                self.member_node[k, s] = v
                self.member_pmask[k, s] = node_mask(w)
            self.dmask[k] = node_mask(c.district)
            for e in c.bidirected:
                pairs.setdefault(e, []).append(k)
        self.pair_vars = {e: np.array(v, dtype=np.int64) for e, v in pairs.items()}
        self._valid = self.member_node >= 0
        self._shift = np.where(self._valid, self.member_node, 0)

    def __len__(self):
        return len(self.comps)

    def members_in(self, smask: int) -> np.ndarray:
        return self._valid & (((np.int64(smask) >> self._shift) & 1) == 1)

    def free_members(self, smask: int) -> np.ndarray:
        """Members inside S whose parent set avoids S."""
        return self.members_in(smask) & ((self.member_pmask & np.int64(smask)) == 0)

    def has_pair(self, i: int, j: int) -> np.ndarray:
        out = np.zeros(len(self.comps), dtype=bool)
        ids = self.pair_vars.get((min(i, j), max(i, j)))
        if ids is not None:
            out[ids] = True
        return out


@dataclass
class CutRow:
    """``sum(coef * z) >= rhs`` stored sparsely over variable ids."""

    kind: str
    nodes: frozenset
    pair: Optional[tuple[int, int]]
    indices: np.ndarray
    values: np.ndarray
    rhs: float

    @property
    def key(self):
        return (self.kind, self.nodes, self.pair)

    def dense(self, n: int) -> np.ndarray:
        row = np.zeros(n)
        row[self.indices] = self.values
        return row

    def describe(self, one_based: bool = True) -> str:
        off = 1 if one_based else 0
        s = "{" + ",".join(str(v + off) for v in sorted(self.nodes)) + "}"
        if self.kind == BICLUSTER:
            return f"bicluster S={s} pair=({self.pair[0] + off},{self.pair[1] + off})"
        return f"cluster S={s}"


def _row(kind, nodes, pair, coef: np.ndarray, rhs: float) -> CutRow:
    idx = np.flatnonzero(coef)
    return CutRow(kind, frozenset(nodes), pair, idx, coef[idx].astype(float), float(rhs))


def cluster_coefficients(index: CandidateIndex, nodes: Iterable[int], multiplicity: bool = False) -> np.ndarray:
    """Coefficient of each variable in the strengthened cluster row for S.

    By default a variable counts once if any of its district nodes in S has
    all parents outside S.  ``multiplicity=True`` counts every such node
    instead (the literal double sum); both rows are valid, the default one is
    tighter.
    """
    free = index.free_members(node_mask(nodes))
    return free.sum(axis=1).astype(float) if multiplicity else free.any(axis=1).astype(float)


def cluster_cut(nodes: Iterable[int], index: CandidateIndex, multiplicity: bool = False) -> CutRow:
    nodes = frozenset(nodes)
    if len(nodes) < 2:
        raise ValueError("cluster rows need |S| >= 2")
    return _row(CLUSTER, nodes, None, cluster_coefficients(index, nodes, multiplicity), 1.0)


def pair_compatible(index: CandidateIndex, i: int, j: int) -> np.ndarray:
    """Candidates that can be active together with the edge ``i <-> j``: those
    avoiding both nodes and those containing the edge."""
    n_in = ((index.dmask >> i) & 1) + ((index.dmask >> j) & 1)
    return (n_in == 0) | index.has_pair(i, j)


def bicluster_membership(index: CandidateIndex, nodes: Iterable[int], i: int, j: int) -> np.ndarray:
    """Indicator of the variables in C(S; {i, j}).

    Candidates that contradict the edge ``i <-> j`` (holding one of the two
    nodes, or both without the edge) are left out, since they are zero
    whenever the edge is present.
    """
    smask = node_mask(nodes)
    ij = (1 << i) | (1 << j)
    pair_members = index.members_in(ij)
    pm = np.where(pair_members, index.member_pmask, 0)
    both_out = (np.bitwise_or.reduce(pm, axis=1) & smask) == 0
    has = index.has_pair(i, j)
    first = has & both_out
    # members in S \ {i, j} whose parents avoid all of S
    others = index.members_in(smask & ~ij) & ((index.member_pmask & np.int64(smask)) == 0)
    second = pair_compatible(index, i, j) & others.any(axis=1)
    return first | second


def bicluster_cut(nodes: Iterable[int], i: int, j: int, index: CandidateIndex) -> CutRow:
    nodes = frozenset(nodes)
    if i > j:
        i, j = j, i
    if i == j or i not in nodes or j not in nodes:
        raise ValueError("bicluster rows need i < j, both in S")
    coef = bicluster_membership(index, nodes, i, j).astype(float) - index.has_pair(i, j).astype(float)
    return _row(BICLUSTER, nodes, (i, j), coef, 0.0)


def evaluate_row(row: CutRow, z: np.ndarray) -> float:
    """Left side minus right side; negative means the row is violated."""
    return float(np.dot(row.values, np.asarray(z)[row.indices]) - row.rhs)


@dataclass
class IpModel:
    candidates: list
    n_nodes: int
    objective: np.ndarray
    cover: list
    index: CandidateIndex
    cuts: list = field(default_factory=list)
    _keys: set = field(default_factory=set)
    _dense: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.candidates)

    @property
    def components(self) -> list[CComponent]:
        return self.index.comps

    def add_cut(self, row: CutRow) -> bool:
        if row.key in self._keys:
            return False
        self._keys.add(row.key)
        self.cuts.append(row)
        return True

    def partition_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_vars))
        for i, ids in enumerate(self.cover):
            a[i, ids] = 1.0
        return a

    def cut_matrix(self, start: int = 0) -> np.ndarray:
        """Dense cut rows, extended incrementally as cuts are added."""
        done = 0 if self._dense is None else self._dense.shape[0]
        if done < len(self.cuts):
            extra = np.zeros((len(self.cuts) - done, self.n_vars))
            for r, row in enumerate(self.cuts[done:]):
                extra[r, row.indices] = row.values
            self._dense = extra if self._dense is None else np.vstack([self._dense, extra])
        if self._dense is None:
            return np.zeros((0, self.n_vars))
        return self._dense[start:len(self.cuts)]

    def cut_rhs(self, start: int = 0) -> np.ndarray:
        return np.array([row.rhs for row in self.cuts[start:]], dtype=float)

    def objective_value(self, z) -> float:
        return float(np.dot(self.objective, z))

    def selected(self, z, threshold: float = 0.5) -> list[int]:
        return [k for k in range(self.n_vars) if z[k] > threshold]

    def assemble(self, z) -> Admg:
        return assemble([self.components[k] for k in self.selected(z)], self.n_nodes)

    def partition_residual(self, z) -> np.ndarray:
        z = np.asarray(z)
        return np.array([z[ids].sum() - 1.0 for ids in self.cover])

    def to_lp(self, binary: bool = True) -> str:
        """CPLEX-LP text of the current model (partition rows plus cuts)."""
        def expr(ids, coefs):
            terms = []
            for k, c in zip(ids, coefs):
                sign = "-" if c < 0 else "+"
                mag = abs(c)
                terms.append(f"{sign} {mag!r} z{k}" if mag != 1 else f"{sign} z{k}")
            s = " ".join(terms) if terms else "0 z0"
            return s[2:] if s.startswith("+ ") else s

        lines = ["\\ admgip ancestral ADMG model", "Maximize"]
        lines.append(" obj: " + expr(range(self.n_vars), self.objective))
        lines.append("Subject To")
        for i, ids in enumerate(self.cover):
            lines.append(f" part_{i + 1}: " + expr(ids, np.ones(len(ids))) + " = 1")
        for r, row in enumerate(self.cuts):
            lines.append(f" cut_{r}: " + expr(row.indices, row.values) + f" >= {row.rhs:g}")
        lines.append("Bounds")
        lines.extend(f" 0 <= z{k} <= 1" for k in range(self.n_vars))
        if binary:
            lines.append("Binaries")
            lines.append(" " + " ".join(f"z{k}" for k in range(self.n_vars)))
        lines.append("End")
        return "\n".join(lines) + "\n"


def build_model(cands: Sequence[ScoredCandidate], n_nodes: int) -> IpModel:
    """Model over the active candidates; every node must be coverable."""
    act = [sc for sc in cands if sc.active]
    comps = [sc.component for sc in act]
    cover: list[list[int]] = [[] for _ in range(n_nodes)]
    for k, c in enumerate(comps):
        for v in c.district:
            if v >= n_nodes:
                raise ValueError(f"candidate {c} uses node {v} beyond {n_nodes}")
            cover[v].append(k)
    empty = [i for i, ids in enumerate(cover) if not ids]
    if empty:
        raise ValueError(f"nodes {empty} are not covered by any candidate")
    obj = np.array([sc.score for sc in act], dtype=float)
    return IpModel(act, n_nodes, obj, [np.array(ids, dtype=np.int64) for ids in cover], CandidateIndex(comps))
