"""Separation of violated cluster and bicluster rows.

At integral points the selected graph is searched for a directed or almost
directed cycle.  At fractional points a randomised contraction heuristic
grows node sets whose cluster value ``mu(S)`` (the left side of the cluster
row) drops below one, or whose bicluster left side drops below the mass on
the bidirected edge.  Pseudonode values are always evaluated from the row
coefficients themselves, so an emitted row is violated by construction; it is
still re-checked before being returned.
"""
from __future__ import annotations

import logging
from bisect import bisect_right
from itertools import accumulate, combinations
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import Admg, find_almost_directed_cycle, find_directed_cycle
from .ipmodel import (
    BICLUSTER, CLUSTER, CandidateIndex, CutRow, IpModel, bicluster_cut,
    cluster_cut, evaluate_row, mask_nodes, pair_compatible,
)

log = logging.getLogger(__name__)

VIOLATION_EPS = 1e-6
SUPPORT_EPS = 1e-9
DEFAULT_RESTARTS = 20
BICLUSTER_PAIRS = 10


class SeparationError(ValueError):
    pass


def _check_partition(model: IpModel, z: np.ndarray, tol: float = 1e-6) -> None:
    res = model.partition_residual(z)
    if np.any(np.abs(res) > tol):
        bad = int(np.argmax(np.abs(res)))
        raise SeparationError(f"partition row of node {bad} violated by {res[bad]:.3g}")


def separate_integral(z, model: IpModel) -> list[CutRow]:
    """Rows cutting off the graph selected by an integral ``z`` (empty iff ancestral)."""
    z = np.asarray(z, dtype=float)
    g = model.assemble(z)
    cuts = []
    cycle = find_directed_cycle(g)
    if cycle is not None:
        cuts.append(cluster_cut(cycle, model.index))
    else:
        for a, b in sorted(g.bidirected):
            found = find_almost_directed_cycle(Admg(g.n_nodes, g.directed, [(a, b)]))
            if found is not None:
                path, pair = found
                cuts.append(bicluster_cut(path, pair[0], pair[1], model.index))
    out = [row for row in cuts if evaluate_row(row, z) < -VIOLATION_EPS]
    if len(out) != len(cuts):
        log.error("integral separation produced a non-violated row; dropped")
    return out


# ---------------------------------------------------------------------------
# fractional separation

class _Support:
    """The candidates carrying positive mass, with batched, memoised row
    evaluation on node masks.

    With ``pair=(i, j)`` sets containing ``i`` are scored by the bicluster left
    side for that pair and all other sets by the cluster left side.
    """

    def __init__(self, model: IpModel, z: np.ndarray, keep: Optional[np.ndarray] = None,
                 pair: Optional[tuple[int, int]] = None):
        ids = np.flatnonzero(z > SUPPORT_EPS)
        if keep is not None:
            ids = ids[keep[ids]]
        self.ids = ids
        self.z = z[ids]
        self.index = CandidateIndex([model.components[k] for k in ids])
        self.pair = pair
        self._memo: dict[int, float] = {}
        idx = self.index
        self._shift = idx._shift[None]
        self._valid = idx._valid[None]
        self._pmask = idx.member_pmask[None]
        if pair is not None:
            i, j = pair
            self._ij = (1 << i) | (1 << j)
            in_pair = idx.members_in(self._ij)
            self._pair_pm = np.bitwise_or.reduce(np.where(in_pair, idx.member_pmask, 0), axis=1)[None]
            self._has_pair = idx.has_pair(i, j)[None]
            self._compatible = pair_compatible(idx, i, j)[None]

    def _free(self, masks: np.ndarray, inner: np.ndarray) -> np.ndarray:
        m = masks[:, None, None]
        inside = self._valid & (((inner[:, None, None] >> self._shift) & 1) == 1)
        return (inside & ((self._pmask & m) == 0)).any(axis=2)

    def _cluster(self, masks: np.ndarray) -> np.ndarray:
        return self._free(masks, masks) @ self.z

    def _bicluster(self, masks: np.ndarray) -> np.ndarray:
        first = self._has_pair & ((self._pair_pm & masks[:, None]) == 0)
        second = self._compatible & self._free(masks, masks & ~np.int64(self._ij))
        return (first | second) @ self.z

    def values(self, masks: Sequence[int]) -> list[float]:
        memo = self._memo
        out = [memo.get(m) for m in masks]
        todo = [k for k, v in enumerate(out) if v is None]
        if todo:
            if not len(self.ids):
                vals = np.zeros(len(todo))
            else:
                arr = np.array([masks[k] for k in todo], dtype=np.int64)
                if self.pair is None:
                    vals = self._cluster(arr)
                else:
                    vals = np.empty(len(arr))
                    hit = ((arr >> self.pair[0]) & 1) == 1
                    if hit.any():
                        vals[hit] = self._bicluster(arr[hit])
                    if (~hit).any():
                        vals[~hit] = self._cluster(arr[~hit])
            for k, v in zip(todo, vals.tolist()):
                out[k] = memo[masks[k]] = v
        return out

    def value(self, mask: int) -> float:
        return self.values([mask])[0]


@dataclass
class ContractionState:
    """Pseudonodes (labelled by their smallest member, stored as node masks),
    their values and the pairwise weights ``w_PQ = mu(P) + mu(Q) - mu(P u Q)``."""

    pseudonodes: dict
    mu: dict
    weights: dict
    live_vars: np.ndarray
    pair: Optional[tuple[int, int]] = None
    target: float = 1.0
    _support: Optional[_Support] = field(default=None, repr=False)

    def value(self, mask: int) -> float:
        return self._support.value(mask)

    def nodes(self, label: int) -> frozenset:
        return mask_nodes(self.pseudonodes[label])

    def threshold(self, label: int) -> float:
        return self.target if self.pair is not None and label == self.pair[0] else 1.0

    def labels(self) -> list[int]:
        return sorted(self.pseudonodes)

    def total_weight(self) -> float:
        return float(sum(self.weights.values()))

    def copy(self) -> "ContractionState":
        return ContractionState(dict(self.pseudonodes), dict(self.mu), dict(self.weights), self.live_vars,
                                self.pair, self.target, self._support)

    def contract(self, a: int, b: int) -> int:
        """Merge pseudonodes ``a`` and ``b``; returns the surviving label."""
        keep, gone = min(a, b), max(a, b)
        merged = self.pseudonodes[keep] | self.pseudonodes.pop(gone)
        self.pseudonodes[keep] = merged
        del self.mu[gone]
        self.weights = {p: w for p, w in self.weights.items() if keep not in p and gone not in p}
        others = [r for r in self.pseudonodes if r != keep]
        vals = self._support.values([merged] + [merged | self.pseudonodes[r] for r in others])
        self.mu[keep] = mu_keep = vals[0]
        mu, weights = self.mu, self.weights
        for r, joint in zip(others, vals[1:]):
            w = mu_keep + mu[r] - joint
            weights[(r, keep) if r < keep else (keep, r)] = w if w > 0.0 else 0.0
        return keep

    def check_relation(self, tol: float = 1e-9) -> bool:
        """Verify ``mu(P u Q) = mu(P) + mu(Q) - w_PQ`` for all live pairs."""
        for (p, q), w in self.weights.items():
            joint = self.value(self.pseudonodes[p] | self.pseudonodes[q])
            if abs(joint - (self.mu[p] + self.mu[q] - w)) > tol:
                return False
        return True


def explicit_weight(model: IpModel, z: np.ndarray, i: int, j: int) -> float:
    """Initial weight of ``ij`` written out as the three sums over candidates."""
    total = 0.0
    for k in np.flatnonzero(z > SUPPORT_EPS):
        c = model.components[k]
        pm = c.parent_map()
        if i in pm and j in pm[i]:
            total += z[k]
        if j in pm and i in pm[j]:
            total += z[k]
        if i in pm and j in pm and i not in pm[j] and j not in pm[i]:
            total += z[k]
    return total


def _fill_weights(state: ContractionState) -> ContractionState:
    labels = sorted(state.pseudonodes)
    masks = [state.pseudonodes[v] for v in labels]
    for v, val in zip(labels, state._support.values(masks)):
        state.mu[v] = val
    pairs = [(labels[a], labels[b]) for a in range(len(labels)) for b in range(a + 1, len(labels))]
    joint = state._support.values([state.pseudonodes[p] | state.pseudonodes[q] for p, q in pairs])
    for (p, q), val in zip(pairs, joint):
        state.weights[(p, q)] = max(state.mu[p] + state.mu[q] - val, 0.0)
    return state


def initial_weights(z, model: IpModel) -> ContractionState:
    z = np.asarray(z, dtype=float)
    _check_partition(model, z)
    sup = _Support(model, z)
    state = ContractionState({v: 1 << v for v in range(model.n_nodes)}, {}, {}, sup.ids, _support=sup)
    return _fill_weights(state)


def pair_mass(z, model: IpModel, i: int, j: int) -> float:
    ids = model.index.pair_vars.get((min(i, j), max(i, j)))
    return 0.0 if ids is None else float(np.asarray(z)[ids].sum())


def bicluster_state(z, model: IpModel, i: int, j: int) -> ContractionState:
    """Contraction start with ``i`` and ``j`` already merged.

    Candidates that contradict the edge are left out of the weights (they
    cannot appear in any bicluster row for this pair).
    """
    i, j = min(i, j), max(i, j)
    z = np.asarray(z, dtype=float)
    _check_partition(model, z)
    target = pair_mass(z, model, i, j)
    if target <= SUPPORT_EPS:
        raise SeparationError(f"no mass on the bidirected edge {i}<->{j}")
    sup = _Support(model, z, keep=pair_compatible(model.index, i, j), pair=(i, j))
    nodes = {v: 1 << v for v in range(model.n_nodes) if v != j}
    nodes[i] = (1 << i) | (1 << j)
    state = ContractionState(nodes, {}, {}, sup.ids, pair=(i, j), target=target, _support=sup)
    return _fill_weights(state)


def _emit(state: ContractionState, label: int, model: IpModel, z: np.ndarray) -> Optional[CutRow]:
    nodes = state.nodes(label)
    if state.pair is not None:
        if label != state.pair[0]:
            # values of the other pseudonodes ignore part of the support
            return None
        row = bicluster_cut(nodes, state.pair[0], state.pair[1], model.index)
    elif len(nodes) >= 2:
        row = cluster_cut(nodes, model.index)
    else:
        return None
    if evaluate_row(row, z) < -VIOLATION_EPS:
        return row
    return None


def _contract_once(state: ContractionState, model: IpModel, z: np.ndarray,
                   rng: np.random.Generator) -> Optional[CutRow]:
    while len(state.pseudonodes) > 1:
        pairs = [p for p, w in state.weights.items() if w > SUPPORT_EPS]
        if not pairs:
            return None
        cum = list(accumulate(state.weights[p] for p in pairs))
        pick = bisect_right(cum, rng.random() * cum[-1])
        a, b = pairs[min(pick, len(pairs) - 1)]
        keep = state.contract(a, b)
        if state.mu[keep] < state.threshold(keep) - VIOLATION_EPS:
            row = _emit(state, keep, model, z)
            if row is not None:
                return row
    return None


def make_rng(seed: int = 0, n_nodes: int = 0, lp_iter: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(n_nodes), int(lp_iter)])


def separate_cluster_heuristic(z, model: IpModel, restarts: int = DEFAULT_RESTARTS,
                               rng=None) -> list[CutRow]:
    """Violated cluster rows found by repeated random contraction (deduplicated)."""
    z = np.asarray(z, dtype=float)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    base = initial_weights(z, model)
    found: dict = {}
    for _ in range(restarts):
        state = base.copy()
        row = _contract_once(state, model, z, rng)
        if row is not None:
            found.setdefault(row.key, row)
    return list(found.values())


def separate_bicluster_heuristic(z, model: IpModel, pair: tuple[int, int],
                                 restarts: int = DEFAULT_RESTARTS, rng=None) -> list[CutRow]:
    """Violated bicluster rows for the bidirected pair ``(i, j)``."""
    z = np.asarray(z, dtype=float)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    base = bicluster_state(z, model, *pair)
    found: dict = {}
    # the merged pair alone can already be violated
    row = _emit(base, base.pair[0], model, z) if base.mu[base.pair[0]] < base.target - VIOLATION_EPS else None
    if row is not None:
        return [row]
    for _ in range(restarts):
        state = base.copy()
        row = _contract_once(state, model, z, rng)
        if row is not None:
            found.setdefault(row.key, row)
    return list(found.values())


def top_pairs(z, model: IpModel, k: int = BICLUSTER_PAIRS) -> list[tuple[int, int]]:
    """Bidirected pairs with the largest positive mass, ties by pair order."""
    z = np.asarray(z)
    masses = [(-float(z[ids].sum()), e) for e, ids in model.index.pair_vars.items()]
    masses = [(m, e) for m, e in masses if -m > SUPPORT_EPS]
    return [e for _, e in sorted(masses)[:k]]


def separate_fractional(z, model: IpModel, restarts: int = DEFAULT_RESTARTS, rng=None,
                        n_pairs: int = BICLUSTER_PAIRS) -> list[CutRow]:
    """Cluster heuristic, then bicluster heuristic on the heaviest pairs."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    cuts = separate_cluster_heuristic(z, model, restarts, rng)
    keys = {r.key for r in cuts}
    for pair in top_pairs(z, model, n_pairs):
        for row in separate_bicluster_heuristic(z, model, pair, restarts, rng):
            if row.key not in keys:
                keys.add(row.key)
                cuts.append(row)
    return cuts


def is_integral(z, tol: float = 1e-6) -> bool:
    z = np.asarray(z)
    return bool(np.all(np.minimum(np.abs(z), np.abs(1 - z)) <= tol))


def separate(z, model: IpModel, restarts: int = DEFAULT_RESTARTS, rng=None) -> list[CutRow]:
    if is_integral(z):
        return separate_integral(np.round(z), model)
    return separate_fractional(z, model, restarts, rng)


def format_cut(row: CutRow, z) -> str:
    """One cut-log line: kind, node set (1-based), violation amount."""
    return f"{row.describe()}\tviolation={-evaluate_row(row, z):.6g}"


def exhaustive_cluster(z, model: IpModel, max_size: Optional[int] = None) -> list[CutRow]:
    """All violated cluster rows, by brute force over node subsets (small d only)."""
    z = np.asarray(z, dtype=float)
    n = model.n_nodes
    out = []
    for r in range(2, (max_size or n) + 1):
        for s in combinations(range(n), r):
            row = cluster_cut(s, model.index)
            if evaluate_row(row, z) < -VIOLATION_EPS:
                out.append(row)
    return out


def exhaustive_fractional(z, model: IpModel, max_cuts: Optional[int] = None) -> list[CutRow]:
    """Violated cluster and bicluster rows found by scanning every node subset,
    most violated first.  The scan costs about ``2**d`` row evaluations per
    bidirected pair, so it is meant for small ``d``."""
    z = np.asarray(z, dtype=float)
    n = model.n_nodes
    masks = np.arange(1, 1 << n, dtype=np.int64)
    big = masks[np.array([bin(int(m)).count("1") >= 2 for m in masks], dtype=bool)]
    found = []
    sup = _Support(model, z)
    if len(sup.ids):
        vals = np.asarray(sup.values(big.tolist()))
        for k in np.flatnonzero(vals < 1.0 - VIOLATION_EPS):
            found.append((vals[k] - 1.0, CLUSTER, int(big[k]), None))
    for (i, j), ids in model.index.pair_vars.items():
        target = float(z[ids].sum())
        if target <= SUPPORT_EPS:
            continue
        ps = _Support(model, z, keep=pair_compatible(model.index, i, j), pair=(i, j))
        ij = (1 << i) | (1 << j)
        sets = big[(big & ij) == ij]
        vals = np.asarray(ps.values(sets.tolist()))
        for k in np.flatnonzero(vals < target - VIOLATION_EPS):
            found.append((vals[k] - target, BICLUSTER, int(sets[k]), (i, j)))
    found.sort(key=lambda t: t[0])
    out = []
    for _, kind, mask, pair in found[:max_cuts]:
        nodes = mask_nodes(mask)
        row = cluster_cut(nodes, model.index) if kind == CLUSTER else bicluster_cut(nodes, pair[0], pair[1], model.index)
        if evaluate_row(row, z) < -VIOLATION_EPS:
            out.append(row)
    return out


__all__ = [
    "ContractionState", "SeparationError", "bicluster_state", "explicit_weight", "exhaustive_cluster",
    "exhaustive_fractional", "format_cut", "initial_weights", "is_integral", "make_rng", "pair_mass", "separate",
    "separate_bicluster_heuristic", "separate_cluster_heuristic", "separate_fractional",
    "separate_integral", "top_pairs", "CLUSTER", "BICLUSTER",
]
