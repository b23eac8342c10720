"""End-to-end structure learning: covariance to optimal ancestral ADMG."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .bnc import SolveResult, SolverConfig, branch_and_cut
from .candidates import DEFAULT_CAP, Limits, ScoredCandidate, active, enumerate_candidates, prune, score_candidates
from .graph import CComponent, GraphError
from .ipmodel import build_model
from .scoring import LocalScorer

log = logging.getLogger(__name__)


@dataclass
class LearnResult:
    solve: SolveResult
    limits: Limits
    n_candidates: int
    n_active: int
    timings: dict = field(default_factory=dict)

    @property
    def graph(self):
        return self.solve.best_graph

    @property
    def score(self) -> float:
        return self.solve.best_score

    def summary(self) -> dict:
        out = self.solve.to_dict()
        out["limits"] = {"max_parents": self.limits.max_parents, "max_district": self.limits.max_district,
                         "max_district_parents": self.limits.max_district_parents}
        out["candidates"] = {"enumerated": self.n_candidates, "after_pruning": self.n_active}
        out["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return out


def candidate_pool(q: np.ndarray, n: int, limits: Limits, include: Iterable[CComponent] = (),
                   cap: int = DEFAULT_CAP, scorer: Optional[LocalScorer] = None) -> list[ScoredCandidate]:
    d = q.shape[0]
    scorer = scorer or LocalScorer(q, n)
    comps = enumerate_candidates(d, limits, cap)
    seen = set(comps)
    for c in include:
        if max(c.nodes) >= d:
            raise GraphError(f"included component {c.label(one_based=True)} uses nodes beyond {d}")
        if c not in seen:
            seen.add(c)
            comps.append(c)
    return score_candidates(comps, scorer)


def learn_from_pool(pool: list[ScoredCandidate], d: int, do_prune: bool = True,
                    config: Optional[SolverConfig] = None, limits: Limits = Limits()) -> LearnResult:
    timings = {}
    t0 = time.perf_counter()
    cands = prune(pool) if do_prune else pool
    timings["prune"] = time.perf_counter() - t0
    n_active = len(active(cands))
    log.info("%d candidates, %d after pruning", len(pool), n_active)
    model = build_model(cands, d)
    t0 = time.perf_counter()
    res = branch_and_cut(model, config)
    timings["solve"] = time.perf_counter() - t0
    return LearnResult(res, limits, len(pool), n_active, timings)


def learn(q: np.ndarray, n: int, limits: Optional[Limits] = None, do_prune: bool = True,
          config: Optional[SolverConfig] = None, include: Iterable[CComponent] = (),
          cap: int = DEFAULT_CAP) -> LearnResult:
    """Score-maximising ancestral ADMG over the candidates allowed by ``limits``
    (all c-components on ``d`` nodes when ``limits`` is None)."""
    d = q.shape[0]
    limits = limits or Limits.unrestricted(d)
    t0 = time.perf_counter()
    pool = candidate_pool(q, n, limits, include, cap)
    t_score = time.perf_counter() - t0
    out = learn_from_pool(pool, d, do_prune, config, limits)
    out.timings["score"] = t_score
    return out
