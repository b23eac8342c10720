import json

import numpy as np
import pytest

from admgip.bnc import (
    OPTIMAL, TIME_LIMIT, BranchAndCut, SearchNode, SolverConfig, branch_and_cut, empty_point,
    fixing_bounds, relation_matrix, relation_split, root_gap, round_solution,
)
from admgip.candidates import Limits, ScoredCandidate, enumerate_candidates
from admgip.graph import is_ancestral
from admgip.ipmodel import build_model
from helpers import all_partitions, random_fractional


def _random_model(d, seed, limits=None):
    rng = np.random.default_rng(seed)
    comps = enumerate_candidates(d, limits or Limits.unrestricted(d))
    # penalise larger components so the optimum is not always the densest graph
    return build_model([ScoredCandidate(c, float(rng.normal() - 0.3 * c.n_edges)) for c in comps], d)


def _brute_force(model):
    best = -np.inf
    for sel in all_partitions(model):
        z = np.zeros(model.n_vars)
        z[sel] = 1
        if is_ancestral(model.assemble(z)):
            best = max(best, model.objective_value(z))
    return best


@pytest.mark.parametrize("branching", ["relation", "parent", "variable"])
def test_matches_brute_force(branching):
    for seed in range(6):
        d = 3 if seed < 3 else 4
        model = _random_model(d, seed, None if d == 3 else Limits(2, 3, 1))
        res = branch_and_cut(model, SolverConfig(branching=branching, seed=seed))
        assert res.status == OPTIMAL
        assert res.best_score == pytest.approx(_brute_force(model), abs=1e-9)
        assert is_ancestral(res.best_graph)
        assert res.proven_bound >= res.best_score - 1e-9


def test_highs_engine_agrees():
    model = _random_model(4, 11, Limits(2, 2, 1))
    a = branch_and_cut(model, SolverConfig())
    b = branch_and_cut(_random_model(4, 11, Limits(2, 2, 1)), SolverConfig(engine="highs"))
    assert a.best_score == pytest.approx(b.best_score, abs=1e-9)


def test_deterministic_under_seed():
    r1 = branch_and_cut(_random_model(4, 3), SolverConfig(seed=5))
    r2 = branch_and_cut(_random_model(4, 3), SolverConfig(seed=5))
    assert r1.best_score == r2.best_score and r1.nodes == r2.nodes and r1.cuts_added == r2.cuts_added


def test_time_limit_keeps_incumbent():
    res = branch_and_cut(_random_model(4, 7), SolverConfig(time_limit=0.0))
    assert res.status in (TIME_LIMIT, OPTIMAL)
    if res.status == TIME_LIMIT:
        assert res.best_graph is not None and is_ancestral(res.best_graph)
        assert res.proven_bound >= res.best_score


def test_unknown_branching_rule():
    with pytest.raises(ValueError):
        BranchAndCut(_random_model(3, 0), SolverConfig(branching="strong"))


def test_summary_json():
    res = branch_and_cut(_random_model(3, 1))
    out = json.loads(res.to_json())
    assert out["schema"] == 1 and out["status"] == "optimal" and out["optimal"]
    assert set(out["cuts"]) == {"cluster", "bicluster"}
    assert out["score"] == pytest.approx(res.best_score)


def test_relation_split_separates_point():
    rng = np.random.default_rng(0)
    model = _random_model(4, 0)
    rels = relation_matrix(model, districts=True)
    for _ in range(30):
        z = random_fractional(model, rng)
        split = relation_split(model, z, rels)
        if split is None:
            continue
        zero_a, zero_b = split
        assert not zero_a & zero_b
        # z has mass in both zeroed sets, so both children cut it off
        assert z[list(zero_a)].sum() > 1e-6 and z[list(zero_b)].sum() > 1e-6
    # every integral point stays feasible in exactly one child
    split = relation_split(model, random_fractional(model, np.random.default_rng(9)), rels)
    zero_a, zero_b = list(split[0]), list(split[1])
    for sel in all_partitions(model):
        z = np.zeros(model.n_vars)
        z[sel] = 1
        assert (z[zero_a].sum() == 0) != (z[zero_b].sum() == 0)


def test_fixing_and_rounding():
    model = _random_model(3, 2)
    k = next(k for k, c in enumerate(model.components) if c.size == 2)
    lb, ub = fixing_bounds(model, SearchNode(fixed_one=frozenset([k])))
    assert lb[k] == ub[k] == 1
    clash = [j for j in range(model.n_vars) if j != k and set(model.components[j].district) & set(model.components[k].district)]
    assert np.all(ub[clash] == 0)
    z = round_solution(model, np.full(model.n_vars, 0.5), lb, ub)
    assert z is not None and z[k] == 1 and np.allclose(model.partition_residual(z), 0)
    assert is_ancestral(model.assemble(z))


def test_root_gap():
    assert root_gap(101.0, 100.0) == pytest.approx(1.0)
    assert np.isnan(root_gap(1.0, float("-inf")))
