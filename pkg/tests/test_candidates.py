import numpy as np
import pytest

from admgip.candidates import (
    ACTIVE, PRUNED, CandidateLimitError, Limits, ScoredCandidate, active, candidate_upper_bound,
    deletion_moves, enumerate_candidates, orphan_moves, prune, read_cache, read_component_list,
    write_cache,
)
from admgip.graph import CComponent, c_components
from admgip.oracle import ancestral_graphs

S = CComponent.singleton


def test_counts_match_formula():
    assert candidate_upper_bound(18, Limits(3, 2, 1)) == 59229
    for d in range(1, 7):
        assert len(enumerate_candidates(d)) == candidate_upper_bound(d, Limits())
    assert len(enumerate_candidates(8)) == 1884


def test_enumeration_unique_and_within_limits():
    lim = Limits(2, 3, 1)
    cands = enumerate_candidates(5, lim)
    assert len(set(cands)) == len(cands)
    assert all(lim.allows(c) and c.is_internally_ancestral() for c in cands)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_unrestricted_pool_covers_every_ancestral_graph(d):
    pool = set(enumerate_candidates(d, Limits.unrestricted(d)))
    for g in ancestral_graphs(d):
        assert all(c in pool for c in c_components(g))


def test_cap_enforced():
    with pytest.raises(CandidateLimitError):
        enumerate_candidates(10, Limits.unrestricted(10), cap=1000)


def test_moves():
    c = CComponent.make([1, 2], [(1, 2)], {1: [0], 2: [3]})
    dels = deletion_moves(c)
    assert [S(1), CComponent.make([1, 2], [(1, 2)], {2: [3]})] in dels or \
        [CComponent.make([1, 2], [(1, 2)], {2: [3]})] in dels
    assert [S(1, [0]), S(2, [3])] in dels
    orph = orphan_moves(c)
    assert [S(1), S(2, [1, 3])] in orph
    assert [S(2), S(1, [0, 2])] in orph


def _pair_pool(pair_score, **singles):
    a, b, c, d = 0, 1, 2, 3
    comp = CComponent.make([b, c], [(b, c)], {b: [a], c: [d]})
    # everything not named scores poorly
    scores = {comp: pair_score, S(b): -50.0, S(c): -50.0, S(b, [a]): -50.0, S(c, [d]): -50.0,
              S(c, [b, d]): -50.0, S(b, [a, c]): -50.0, CComponent.make([b, c], [(b, c)], {c: [d]}): -50.0,
              CComponent.make([b, c], [(b, c)], {b: [a]}): -50.0, CComponent.make([b, c], [(b, c)]): -50.0}
    for k, v in singles.items():
        scores[{"b_a": S(b, [a]), "c_d": S(c, [d]), "b": S(b), "c_bd": S(c, [b, d])}[k]] = v
    return comp, [ScoredCandidate(x, s) for x, s in scores.items()]


def test_prune_by_edge_deletion():
    # {A}->B<->C<-{D} loses to B<-{A} plus C<-{D}
    comp, pool = _pair_pool(-25.0, b_a=-12.0, c_d=-12.0)
    out = {sc.component: sc.status for sc in prune(pool)}
    assert out[comp] == PRUNED
    comp, pool = _pair_pool(-23.0, b_a=-12.0, c_d=-12.0)
    assert {sc.component: sc.status for sc in prune(pool)}[comp] == ACTIVE


def test_prune_by_orphaning():
    # {A}->B<->C<-{D} loses to B<-{} plus C<-{B,D}
    comp, pool = _pair_pool(-25.0, b=-11.0, c_bd=-12.0)
    assert {sc.component: sc.status for sc in prune(pool)}[comp] == PRUNED


def test_ties_are_kept():
    comp, pool = _pair_pool(-24.0, b_a=-12.0, c_d=-12.0)
    assert {sc.component: sc.status for sc in prune(pool)}[comp] == ACTIVE


def test_empty_parent_singletons_survive():
    rng = np.random.default_rng(0)
    cands = enumerate_candidates(4)
    pool = [ScoredCandidate(c, float(rng.normal(-10 * c.n_params, 3))) for c in cands]
    kept = {sc.component for sc in active(prune(pool))}
    assert all(S(v) in kept for v in range(4))


def test_cache_roundtrip(tmp_path):
    cands = enumerate_candidates(3, Limits(2, 3, 1))
    pool = prune([ScoredCandidate(c, -float(k)) for k, c in enumerate(cands)])
    path = tmp_path / "cache.tsv"
    write_cache(path, pool, meta="N=10")
    back = read_cache(path)
    assert [(b.component, b.score, b.status) for b in back] == [(p.component, p.score, p.status) for p in pool]
    comps = read_component_list(path)
    assert comps == [p.component for p in pool]


def test_read_cache_rejects_other_files(tmp_path):
    path = tmp_path / "x.tsv"
    path.write_text("hello\n")
    with pytest.raises(ValueError):
        read_cache(path)
