"""Branch-and-cut search over the candidate IP."""
from __future__ import annotations

import heapq
import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .graph import Admg, CComponent, GraphError, is_ancestral
from .ipmodel import BICLUSTER, CLUSTER, IpModel
from .lp import BasisState, LpEngine, LpSolution, make_engine, solve_lp
from .separation import (
    DEFAULT_RESTARTS, format_cut, is_integral, make_rng, separate_fractional, separate_integral,
)

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
TIME_LIMIT = "time_limit"
INFEASIBLE = "infeasible"
INTEGRAL_TOL = 1e-6
SCHEMA = 1


@dataclass
class SolverConfig:
    time_limit: Optional[float] = None
    gap_tol: float = 1e-6
    restarts: int = DEFAULT_RESTARTS
    max_cut_rounds: int = 50
    seed: int = 0
    engine: str = "simplex"
    bicluster_pairs: int = 10
    heuristic_every: int = 10
    branching: str = "relation"
    cut_log: Optional[Callable[[str], None]] = None


@dataclass
class SearchNode:
    fixed_zero: frozenset = frozenset()
    fixed_one: frozenset = frozenset()
    parent_bound: float = float("inf")
    depth: int = 0
    basis: Optional[BasisState] = field(default=None, repr=False, compare=False)


@dataclass
class SolveResult:
    best_graph: Optional[Admg]
    best_score: float
    proven_bound: float
    root_bound: float
    root_gap_percent: float
    cuts_added: dict
    wall_time: float
    status: str
    nodes: int = 0
    lp_solves: int = 0
    selected: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not np.isfinite(x) else float(x)

        return {
            "schema": SCHEMA,
            "status": self.status,
            "optimal": self.optimal,
            "score": num(self.best_score),
            "bound": num(self.proven_bound),
            "root_bound": num(self.root_bound),
            "root_gap_percent": num(self.root_gap_percent),
            "cuts": dict(self.cuts_added),
            "nodes": self.nodes,
            "lp_solves": self.lp_solves,
            "wall_time": self.wall_time,
            "components": [c.label(one_based=True) for c in self.selected],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def root_gap(root_bound: float, optimum: float) -> float:
    if not np.isfinite(optimum) or optimum == 0:
        return float("nan")
    return 100.0 * (root_bound - optimum) / abs(optimum)


class _Deadline:
    def __init__(self, limit: Optional[float]):
        self.start = time.perf_counter()
        self.limit = limit

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def expired(self) -> bool:
        return self.limit is not None and self.elapsed >= self.limit


def fixing_bounds(model: IpModel, node: SearchNode) -> tuple[np.ndarray, np.ndarray]:
    """Bounds for a node; fixing ``z_C = 1`` also zeroes candidates overlapping ``C``."""
    lb = np.zeros(model.n_vars)
    ub = np.ones(model.n_vars)
    for k in node.fixed_one:
        for v in model.components[k].district:
            ub[model.cover[v]] = 0.0
    for k in node.fixed_one:
        lb[k] = ub[k] = 1.0
    for k in node.fixed_zero:
        ub[k] = 0.0
    return lb, ub


def empty_point(model: IpModel) -> Optional[np.ndarray]:
    """Indicator of the empty graph, when every empty-parent singleton is a candidate."""
    z = np.zeros(model.n_vars)
    want = {CComponent.singleton(v): v for v in range(model.n_nodes)}
    hit = 0
    for k, c in enumerate(model.components):
        if c in want:
            z[k] = 1.0
            hit += 1
    return z if hit == model.n_nodes else None


def _partial_graph(model: IpModel, chosen: list[int]) -> Admg:
    directed, bidirected = [], []
    for k in chosen:
        c = model.components[k]
        directed.extend(c.directed_edges())
        bidirected.extend(c.bidirected)
    return Admg(model.n_nodes, directed, bidirected)


def round_solution(model: IpModel, z: np.ndarray, lb=None, ub=None) -> Optional[np.ndarray]:
    """Greedy ancestral completion guided by the LP values, respecting bounds."""
    n = model.n_vars
    lb = np.zeros(n) if lb is None else lb
    ub = np.ones(n) if ub is None else ub
    covered: set = set()
    chosen: list[int] = []

    def try_add(k) -> bool:
        c = model.components[k]
        if ub[k] < 0.5 or covered & set(c.district):
            return False
        try:
            g = _partial_graph(model, chosen + [k])
        except GraphError:
            return False
        if not is_ancestral(g):
            return False
        chosen.append(k)
        covered.update(c.district)
        return True

    for k in np.flatnonzero(lb > 0.5):
        if not try_add(int(k)):
            return None
    order = sorted(np.flatnonzero(z > INTEGRAL_TOL), key=lambda k: (-z[k], -model.objective[k], k))
    for k in order:
        try_add(int(k))
    if len(covered) < model.n_nodes:
        rest = sorted((k for k in range(n) if model.components[k].size == 1 and ub[k] > 0.5),
                      key=lambda k: (-model.objective[k], k))
        for k in rest:
            if len(covered) == model.n_nodes:
                break
            try_add(int(k))
    if len(covered) < model.n_nodes:
        return None
    out = np.zeros(n)
    out[chosen] = 1.0
    return out


def branching_variable(model: IpModel, z: np.ndarray) -> int:
    """Most fractional variable; ties by larger objective, then lower index."""
    frac = np.minimum(z, 1.0 - z)
    best = float(np.max(frac))
    ties = np.flatnonzero(frac >= best - 1e-12)
    return int(min(ties, key=lambda k: (-model.objective[k], k)))


def relation_matrix(model: IpModel, districts: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Indicator matrix ``h[k, r]`` of candidates implying relation ``r``, and
    the node ``anchor[r]`` the relation is about.

    Relations are "u is a parent of v" for ordered pairs and, with
    ``districts``, "u shares the district of v" for pairs ``u < v``.
    """
    n = model.n_nodes
    rel = {}
    cols = []
    for u in range(n):
        for v in range(n):
            if u != v:
                rel[("pa", u, v)] = len(cols)
                cols.append(v)
    if districts:
        for u in range(n):
            for v in range(u + 1, n):
                rel[("di", u, v)] = len(cols)
                cols.append(v)
    h = np.zeros((model.n_vars, len(cols)), dtype=bool)
    for k, c in enumerate(model.components):
        for v, ws in zip(c.district, c.parents):
            for u in ws:
                h[k, rel[("pa", u, v)]] = True
        if districts:
            for i, u in enumerate(c.district):
                for v in c.district[i + 1:]:
                    h[k, rel[("di", u, v)]] = True
    return h, np.array(cols, dtype=np.int64)


def relation_split(model: IpModel, z: np.ndarray, relations: tuple[np.ndarray, np.ndarray]
                   ) -> Optional[tuple[frozenset, frozenset]]:
    """Split on the most fractional relation (ties by lower relation index).

    Returns the candidates to zero in the two children: those implying the
    relation, and those covering its anchor node without implying it.  Every
    integral point lies in one child and ``z`` in neither.  None when every
    relation is integral (``z`` can still be fractional, e.g. between a
    two-node district and its directed orientation).
    """
    h, anchor = relations
    x = z @ h
    frac = np.minimum(x, 1.0 - x)
    r = int(np.argmax(frac))
    if frac[r] <= INTEGRAL_TOL:
        return None
    has = h[:, r]
    covers = np.zeros(model.n_vars, dtype=bool)
    covers[model.cover[anchor[r]]] = True
    return frozenset(np.flatnonzero(has).tolist()), frozenset(np.flatnonzero(covers & ~has).tolist())


class BranchAndCut:
    def __init__(self, model: IpModel, config: Optional[SolverConfig] = None,
                 engine: Optional[LpEngine] = None):
        self.model = model
        self.config = config or SolverConfig()
        self.engine = engine or make_engine(self.config.engine)
        self.cut_counts = {CLUSTER: 0, BICLUSTER: 0}
        self.lp_solves = 0
        self.rc_fixed = 0
        self.incumbent: Optional[np.ndarray] = None
        self.incumbent_score = float("-inf")
        self.history: list[float] = []
        self._start = empty_point(model)
        self._relations = None
        if self.config.branching in ("parent", "relation"):
            self._relations = relation_matrix(model, districts=self.config.branching == "relation")
        elif self.config.branching != "variable":
            raise ValueError(f"unknown branching rule {self.config.branching!r}")

    # -- pieces ------------------------------------------------------------

    def _update_incumbent(self, z: np.ndarray, source: str) -> bool:
        score = self.model.objective_value(z)
        if score > self.incumbent_score + 1e-12:
            g = self.model.assemble(z)
            if not is_ancestral(g):
                raise RuntimeError("non-ancestral incumbent candidate")
            self.incumbent = z.copy()
            self.incumbent_score = score
            self.history.append(score)
            log.debug("new incumbent %.6f (%s)", score, source)
            return True
        return False

    def _solve(self, lb, ub, basis=None) -> LpSolution:
        """LP over the cuts binding in ``basis`` plus those added since; cuts
        from the pool that the solution violates are added until none is."""
        model = self.model
        n_cuts = len(model.cuts)
        if basis is None or basis.rows is None:
            rows = np.arange(n_cuts)
        else:
            known = np.zeros(n_cuts, dtype=bool)
            known[basis.rows] = True
            rows = np.union1d(basis.binding_rows(model.n_vars), np.flatnonzero(~known))
        while True:
            self.lp_solves += 1
            sol = solve_lp(model, lb, ub, self.engine, x0=self._start, basis=basis, rows=rows)
            if not sol.feasible or rows.size == n_cuts:
                return sol
            slack = model.cut_matrix() @ sol.values - model.cut_rhs()
            out = np.ones(n_cuts, dtype=bool)
            out[rows] = False
            viol = np.flatnonzero(out & (slack < -1e-9))
            if not viol.size:
                return sol
            rows = np.union1d(rows, viol)
            basis = sol.basis

    def cutting_plane_loop(self, lb, ub, max_rounds: Optional[int], deadline: _Deadline,
                           basis: Optional[BasisState] = None):
        """Alternate LP solves with separation; returns the final solution and cut count."""
        added = 0
        rounds = 0
        cfg = self.config
        while True:
            sol = self._solve(lb, ub, basis)
            if not sol.feasible:
                return sol, added
            basis = sol.basis
            z = sol.values
            if is_integral(z, INTEGRAL_TOL):
                zr = np.round(z)
                cuts = separate_integral(zr, self.model)
                point = zr
            else:
                if sol.objective <= self.incumbent_score + cfg.gap_tol or deadline.expired():
                    return sol, added
                rng = make_rng(cfg.seed, self.model.n_nodes, self.lp_solves)
                cuts = separate_fractional(z, self.model, cfg.restarts, rng, cfg.bicluster_pairs)
                point = z
            new = 0
            for row in cuts:
                if self.model.add_cut(row):
                    new += 1
                    self.cut_counts[row.kind] += 1
                    if cfg.cut_log is not None:
                        cfg.cut_log(format_cut(row, point))
            added += new
            if cuts and not new:
                log.warning("separated rows are already in the relaxation; LP solution inaccurate")
            if not new:
                return sol, added
            rounds += 1
            if (max_rounds is not None and rounds >= max_rounds) or deadline.expired():
                return sol, added

    # -- search ------------------------------------------------------------

    def run(self) -> SolveResult:
        cfg = self.config
        model = self.model
        deadline = _Deadline(cfg.time_limit)
        if self._start is not None:
            self._update_incumbent(self._start, "empty graph")
        counter = itertools.count()
        heap = [(-np.inf, next(counter), SearchNode())]
        root_bound = float("nan")
        n_nodes = 0
        status = OPTIMAL
        open_bound = float("-inf")
        while heap:
            neg_bound, _, node = heapq.heappop(heap)
            if -neg_bound <= self.incumbent_score + cfg.gap_tol:
                continue
            if deadline.expired():
                status = TIME_LIMIT
                open_bound = max(open_bound, -neg_bound)
                break
            n_nodes += 1
            lb, ub = fixing_bounds(model, node)
            rounds = None if node.depth == 0 else cfg.max_cut_rounds
            sol, added = self.cutting_plane_loop(lb, ub, rounds, deadline, node.basis)
            if not sol.feasible:
                if node.depth == 0 and self.incumbent is None:
                    status = INFEASIBLE
                continue
            bound = min(sol.objective, node.parent_bound)
            if node.depth == 0:
                root_bound = sol.objective
            z = sol.values
            log.info("node %d depth %d bound %.6f incumbent %.6f cuts +%d (cluster %d, bicluster %d)",
                     n_nodes, node.depth, bound, self.incumbent_score, added,
                     self.cut_counts[CLUSTER], self.cut_counts[BICLUSTER])
            if is_integral(z, INTEGRAL_TOL):
                zr = np.round(z)
                if not separate_integral(zr, model):
                    self._update_incumbent(zr, "LP")
                    continue
            elif node.depth == 0 or n_nodes % cfg.heuristic_every == 0:
                cand = round_solution(model, z, lb, ub)
                if cand is not None:
                    self._update_incumbent(cand, "rounding")
            if bound <= self.incumbent_score + cfg.gap_tol:
                continue
            if deadline.expired():
                status = TIME_LIMIT
                open_bound = max(open_bound, bound)
                break
            if is_integral(z, INTEGRAL_TOL):
                # time or round budget ran out with a cyclic integral point
                k = self._branch_on_cycle(z)
                splits = [(frozenset(), frozenset([k])), (frozenset([k]), frozenset())]
            else:
                splits = self._splits(z)
            fz, fo = self._reduced_cost_fixing(sol, lb, ub)
            fz, fo = node.fixed_zero | fz, node.fixed_one | fo
            self.rc_fixed += len(fz) + len(fo) - len(node.fixed_zero) - len(node.fixed_one)
            for zero, one in splits:
                cz, co = (fz - one) | zero, (fo - zero) | one
                child = SearchNode(cz, co, bound, node.depth + 1, sol.basis)
                heapq.heappush(heap, (-bound, next(counter), child))
        if status == TIME_LIMIT:
            for neg, _, _ in heap:
                open_bound = max(open_bound, -neg)
            proven = max(open_bound, self.incumbent_score)
        elif status == INFEASIBLE:
            proven = float("-inf")
        else:
            proven = self.incumbent_score
        if status == OPTIMAL and self.incumbent is None:
            status = INFEASIBLE
        best_graph = model.assemble(self.incumbent) if self.incumbent is not None else None
        selected = [model.components[k] for k in model.selected(self.incumbent)] if self.incumbent is not None else []
        return SolveResult(
            best_graph=best_graph, best_score=self.incumbent_score, proven_bound=proven,
            root_bound=root_bound, root_gap_percent=root_gap(root_bound, self.incumbent_score),
            cuts_added=dict(self.cut_counts), wall_time=deadline.elapsed, status=status,
            nodes=n_nodes, lp_solves=self.lp_solves, selected=selected,
        )

    def _reduced_cost_fixing(self, sol: LpSolution, lb, ub) -> tuple[frozenset, frozenset]:
        """Variables whose flip from their LP bound cannot beat the incumbent."""
        rc = sol.reduced_costs
        if rc is None or self.incumbent is None:
            return frozenset(), frozenset()
        slack = sol.objective - self.incumbent_score - self.config.gap_tol
        slack -= 1e-9 * max(1.0, abs(sol.objective))
        if slack < 0:
            return frozenset(), frozenset()
        z = sol.values
        boxed = (lb < 0.5) & (ub > 0.5)
        zero = boxed & (z <= INTEGRAL_TOL) & (-rc > slack)
        one = boxed & (z >= 1 - INTEGRAL_TOL) & (rc > slack)
        return frozenset(np.flatnonzero(zero).tolist()), frozenset(np.flatnonzero(one).tolist())

    def _splits(self, z: np.ndarray) -> list[tuple[frozenset, frozenset]]:
        """Children of a fractional node as (fix to zero, fix to one) additions."""
        if self._relations is not None:
            split = relation_split(self.model, z, self._relations)
            if split is not None:
                return [(split[0], frozenset()), (split[1], frozenset())]
        k = branching_variable(self.model, z)
        return [(frozenset(), frozenset([k])), (frozenset([k]), frozenset())]

    def _branch_on_cycle(self, z: np.ndarray) -> int:
        """Selected variable with the lowest objective (integral but cyclic point)."""
        sel = self.model.selected(z)
        return int(min(sel, key=lambda k: (self.model.objective[k], k)))


def branch_and_cut(model: IpModel, config: Optional[SolverConfig] = None,
                   engine: Optional[LpEngine] = None) -> SolveResult:
    return BranchAndCut(model, config, engine).run()
