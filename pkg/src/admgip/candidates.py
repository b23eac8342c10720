"""Candidate c-component enumeration, scoring and dominance pruning."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations, product
from math import comb
from typing import Callable, Iterable, Optional, Sequence

from .graph import CComponent, GraphError, _connected

log = logging.getLogger(__name__)

DEFAULT_CAP = 10 ** 7
CACHE_HEADER = "# admgip-candidates 1"

ACTIVE = "active"
PRUNED = "pruned"


class CandidateLimitError(ValueError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"limits allow up to {count} candidates, above the cap of {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class Limits:
    """Size limits on candidate c-components.

    ``max_parents`` bounds single-node districts, ``max_district`` the district
    size and ``max_district_parents`` each node's parent set inside larger
    districts.
    """

    max_parents: int = 3
    max_district: int = 2
    max_district_parents: int = 1

    @classmethod
    def unrestricted(cls, d: int) -> "Limits":
        return cls(d - 1, d, d - 1)

    def allows(self, c: CComponent) -> bool:
        if c.size == 1:
            return len(c.parents[0]) <= self.max_parents
        return c.size <= self.max_district and all(len(w) <= self.max_district_parents for w in c.parents)


@dataclass
class ScoredCandidate:
    component: CComponent
    score: float
    status: str = ACTIVE

    @property
    def active(self) -> bool:
        return self.status == ACTIVE


def connected_patterns(nodes: Sequence[int]) -> list[frozenset]:
    """All bidirected edge sets that connect ``nodes``."""
    pairs = list(combinations(nodes, 2))
    out = []
    for r in range(len(nodes) - 1, len(pairs) + 1):
        for edges in combinations(pairs, r):
            if _connected(nodes, edges):
                out.append(frozenset(edges))
    return out


def _subsets(pool: Sequence[int], k: int):
    for r in range(min(k, len(pool)) + 1):
        yield from (frozenset(s) for s in combinations(pool, r))


def n_connected_graphs(p: int) -> int:
    """Connected labelled graphs on ``p`` nodes (standard recurrence)."""
    c = [0, 1]
    for n in range(2, p + 1):
        total = 2 ** comb(n, 2)
        total -= sum(comb(n - 1, k - 1) * c[k] * 2 ** comb(n - k, 2) for k in range(1, n))
        c.append(total)
    return c[p]


def candidate_upper_bound(d: int, limits: Limits) -> int:
    """Enumeration size for ``limits`` (exact when districts have at most two
    nodes, an upper bound otherwise)."""
    total = d * sum(comb(d - 1, r) for r in range(min(limits.max_parents, d - 1) + 1))
    for p in range(2, min(limits.max_district, d) + 1):
        # two-node districts cannot take the partner as a parent
        pool = d - 2 if p == 2 else d - 1
        per_node = sum(comb(pool, r) for r in range(min(limits.max_district_parents, pool) + 1))
        total += comb(d, p) * n_connected_graphs(p) * per_node ** p
    return total


def enumerate_candidates(d: int, limits: Limits = Limits(), cap: int = DEFAULT_CAP) -> list[CComponent]:
    """Every internally ancestral c-component on ``d`` nodes within ``limits``."""
    if limits.max_parents < 0 or limits.max_district < 1 or limits.max_district_parents < 0:
        raise ValueError(f"invalid limits {limits}")
    bound = candidate_upper_bound(d, limits)
    if bound > cap:
        raise CandidateLimitError(bound, cap)
    out: list[CComponent] = []
    for i in range(d):
        others = [v for v in range(d) if v != i]
        for w in _subsets(others, limits.max_parents):
            out.append(CComponent.singleton(i, w))
    for p in range(2, min(limits.max_district, d) + 1):
        for dist in combinations(range(d), p):
            for pattern in connected_patterns(dist):
                spouses = {v: {a if b == v else b for a, b in pattern if v in (a, b)} for v in dist}
                choices = []
                for v in dist:
                    pool = [u for u in range(d) if u != v and u not in spouses[v]]
                    choices.append(list(_subsets(pool, limits.max_district_parents)))
                for ws in product(*choices):
                    c = CComponent(dist, pattern, tuple(ws))
                    if p > 2 and any(u in dist for w in ws for u in w) and not c.is_internally_ancestral():
                        continue
                    out.append(c)
    return out


def score_candidates(cands: Iterable[CComponent], scorer: Callable[[CComponent], float]) -> list[ScoredCandidate]:
    return [ScoredCandidate(c, float(scorer(c))) for c in cands]


# ---------------------------------------------------------------------------
# pruning

def _split(district: Sequence[int], bidirected: Iterable[tuple[int, int]],
           parents: dict[int, frozenset]) -> list[CComponent]:
    """Re-form c-components after edges inside one district changed."""
    adj = {v: set() for v in district}
    bi = list(bidirected)
    for a, b in bi:
        adj[a].add(b)
        adj[b].add(a)
    seen: set[int] = set()
    pieces = []
    for s in sorted(district):
        if s in seen:
            continue
        block = {s}
        stack = [s]
        while stack:
            v = stack.pop()
            for u in adj[v] - block:
                block.add(u)
                stack.append(u)
        seen |= block
        pieces.append(CComponent.make(block, [e for e in bi if e[0] in block], {v: parents[v] for v in block}))
    return pieces


def deletion_moves(c: CComponent) -> list[list[CComponent]]:
    """Results of deleting a single edge from ``c``."""
    moves = []
    pmap = c.parent_map()
    for i in c.district:
        for w in sorted(pmap[i]):
            new = dict(pmap)
            new[i] = pmap[i] - {w}
            moves.append(_split(c.district, c.bidirected, new))
    for e in sorted(c.bidirected):
        moves.append(_split(c.district, c.bidirected - {e}, pmap))
    return moves


def orphan_moves(c: CComponent) -> list[list[CComponent]]:
    """For each district node v: drop v's parents and turn its bidirected
    edges into edges out of v."""
    moves = []
    if c.size < 2:
        return moves
    pmap = c.parent_map()
    for v in c.district:
        spouses = {a if b == v else b for a, b in c.bidirected if v in (a, b)}
        rest = [u for u in c.district if u != v]
        new = {u: (pmap[u] | {v}) if u in spouses else pmap[u] for u in rest}
        remaining = [e for e in c.bidirected if v not in e]
        moves.append([CComponent.singleton(v)] + _split(rest, remaining, new))
    return moves


class Pruner:
    """Dominance pruning over a scored candidate pool.

    ``best(C)`` is the highest combined score reachable from ``C`` by chains
    of single-edge deletions and orphaning moves whose intermediate
    components all lie in the pool.  A candidate is pruned when some move
    sequence strictly beats it.  Moves referencing components outside the pool
    are skipped.
    """

    def __init__(self, scores: dict[CComponent, float], rel_tol: float = 1e-9):
        self.scores = scores
        self.rel_tol = rel_tol
        self._best: dict[CComponent, float] = {}
        self.skipped_moves = 0

    def _moves(self, c: CComponent):
        return deletion_moves(c) + orphan_moves(c)

    def alternative(self, c: CComponent) -> float:
        """Best combined score of any transformation of ``c`` (excluding ``c``)."""
        best_alt = float("-inf")
        for pieces in self._moves(c):
            if any(p not in self.scores for p in pieces):
                self.skipped_moves += 1
                continue
            total = sum(self.best(p) for p in pieces)
            if total > best_alt:
                best_alt = total
        return best_alt

    def best(self, c: CComponent) -> float:
        v = self._best.get(c)
        if v is None:
            v = max(self.scores[c], self.alternative(c))
            self._best[c] = v
        return v

    def dominated(self, c: CComponent) -> bool:
        s = self.scores[c]
        return self.alternative(c) > s + self.rel_tol * max(1.0, abs(s))


def prune(cands: list[ScoredCandidate], rel_tol: float = 1e-9) -> list[ScoredCandidate]:
    """Mark dominated candidates as pruned; returns new ScoredCandidate objects."""
    scores = {sc.component: sc.score for sc in cands}
    pruner = Pruner(scores, rel_tol)
    out = []
    for sc in cands:
        status = PRUNED if pruner.dominated(sc.component) else ACTIVE
        out.append(ScoredCandidate(sc.component, sc.score, status))
    if pruner.skipped_moves:
        log.info("pruning skipped %d moves leading outside the candidate pool", pruner.skipped_moves)
    return out


def active(cands: Iterable[ScoredCandidate]) -> list[ScoredCandidate]:
    return [sc for sc in cands if sc.active]


# ---------------------------------------------------------------------------
# cache file

def _fmt_component(c: CComponent) -> str:
    dist = ",".join(str(v + 1) for v in c.district)
    bi = ",".join(f"{a + 1}-{b + 1}" for a, b in sorted(c.bidirected))
    pas = ";".join(",".join(str(w + 1) for w in sorted(ws)) for ws in c.parents)
    return f"{dist}\t{bi}\t{pas}"


def _parse_component(fields: Sequence[str]) -> CComponent:
    dist = [int(v) - 1 for v in fields[0].split(",") if v]
    bi = [tuple(int(x) - 1 for x in e.split("-")) for e in fields[1].split(",") if e]
    pas = fields[2].split(";") if len(fields) > 2 else [""] * len(dist)
    if len(pas) != len(dist):
        raise GraphError(f"parent field {fields[2]!r} does not match district {fields[0]!r}")
    parents = {v: [int(w) - 1 for w in p.split(",") if w] for v, p in zip(dist, pas)}
    return CComponent.make(dist, bi, parents)


def write_cache(path, cands: Iterable[ScoredCandidate], meta: str = "") -> None:
    """One candidate per line: district, bidirected pairs, parent sets
    (aligned with the district), score, status.  Labels are 1-based."""
    with open(path, "w") as fh:
        fh.write(CACHE_HEADER + "\n")
        if meta:
            fh.write(f"# {meta}\n")
        fh.write("# district\tbidirected\tparents\tscore\tstatus\n")
        for sc in cands:
            fh.write(f"{_fmt_component(sc.component)}\t{sc.score!r}\t{sc.status}\n")


def read_cache(path) -> list[ScoredCandidate]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != CACHE_HEADER:
        raise ValueError(f"{path}: not a candidate cache (expected header {CACHE_HEADER!r})")
    out = []
    for raw in lines[1:]:
        if not raw.strip() or raw.startswith("#"):
            continue
        fields = raw.split("\t")
        c = _parse_component(fields)
        score = float(fields[3])
        status = fields[4].strip() if len(fields) > 4 else ACTIVE
        out.append(ScoredCandidate(c, score, status))
    return out


def read_component_list(path) -> list[CComponent]:
    """Components listed one per line (district, bidirected, parents); extra
    columns and ``#`` comments are ignored."""
    out = []
    with open(path) as fh:
        for raw in fh:
            if not raw.strip() or raw.startswith("#"):
                continue
            out.append(_parse_component(raw.rstrip("\n").split("\t")))
    return out


def build_pool(d: int, scorer: Callable[[CComponent], float], limits: Limits = Limits(),
               include: Iterable[CComponent] = (), do_prune: bool = True,
               cap: int = DEFAULT_CAP) -> list[ScoredCandidate]:
    """Enumerate, add extra components, score and (optionally) prune."""
    cands = enumerate_candidates(d, limits, cap)
    seen = set(cands)
    for c in include:
        if max(c.nodes) >= d:
            raise GraphError(f"included component {c} uses nodes beyond {d}")
        if c not in seen:
            seen.add(c)
            cands.append(c)
    scored = score_candidates(cands, scorer)
    return prune(scored) if do_prune else scored
