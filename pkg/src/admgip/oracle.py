"""Exhaustive search over all ancestral ADMGs on a handful of nodes."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator

import numpy as np

from .graph import Admg, all_pairs, is_ancestral
from .scoring import LocalScorer

MAX_ORACLE_NODES = 4

# per unordered pair (i < j): no edge, i -> j, j -> i, i <-> j
PAIR_STATES = ("", "->", "<-", "<->")


class OracleSizeError(ValueError):
    pass


def all_mixed_graphs(d: int) -> Iterator[Admg]:
    pairs = list(all_pairs(d))
    for states in product(range(4), repeat=len(pairs)):
        directed, bidirected = [], []
        for (i, j), s in zip(pairs, states):
            if s == 1:
                directed.append((i, j))
            elif s == 2:
                directed.append((j, i))
            elif s == 3:
                bidirected.append((i, j))
        yield Admg(d, directed, bidirected)


def ancestral_graphs(d: int) -> Iterator[Admg]:
    if d > MAX_ORACLE_NODES:
        raise OracleSizeError(f"exhaustive enumeration is limited to {MAX_ORACLE_NODES} nodes, got {d}")
    return (g for g in all_mixed_graphs(d) if is_ancestral(g))


def count_ancestral_closure(d: int) -> int:
    """Count ancestral graphs by an independent route: reachability from
    boolean matrix powers instead of graph search."""
    pairs = list(all_pairs(d))
    total = 0
    for states in product(range(4), repeat=len(pairs)):
        a = np.zeros((d, d), dtype=bool)
        bi = []
        for (i, j), s in zip(pairs, states):
            if s == 1:
                a[i, j] = True
            elif s == 2:
                a[j, i] = True
            elif s == 3:
                bi.append((i, j))
        reach = a.copy()
        for _ in range(d):
            reach = reach | ((reach.astype(int) @ a.astype(int)) > 0)
        if reach.diagonal().any():
            continue
        if any(reach[i, j] or reach[j, i] for i, j in bi):
            continue
        total += 1
    return total


@dataclass
class OracleResult:
    graph: Admg
    score: float
    n_graphs: int
    ties: int


def oracle_search(q: np.ndarray, n: int, tol: float = 1e-9) -> OracleResult:
    """Highest-BIC ancestral ADMG for covariance ``q`` from ``n`` samples."""
    d = q.shape[0]
    scorer = LocalScorer(q, n)
    best, best_score, count, ties = None, float("-inf"), 0, 0
    for g in ancestral_graphs(d):
        count += 1
        s = scorer.graph(g)
        if best is None or s > best_score + tol * max(1.0, abs(best_score)):
            best, best_score, ties = g, s, 1
        elif abs(s - best_score) <= tol * max(1.0, abs(best_score)):
            ties += 1
    return OracleResult(best, float(best_score), count, ties)
