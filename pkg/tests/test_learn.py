import numpy as np
import pytest

from admgip.candidates import Limits
from admgip.graph import CComponent, is_ancestral
from admgip.learn import learn
from admgip.oracle import oracle_search
from admgip.scoring import empirical_covariance, graph_bic
from admgip.simulate import generate_instance


def _data(d, latents, n, seed):
    inst = generate_instance(d, latents, n, seed=seed)
    return empirical_covariance(inst.samples), n


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_unrestricted_matches_oracle(seed):
    q, n = _data(3 + seed % 2, seed % 2 + 1, 500, seed)
    res = learn(q, n)
    assert res.solve.optimal
    assert res.score == pytest.approx(oracle_search(q, n).score, abs=1e-6)
    assert res.score == pytest.approx(graph_bic(res.graph, q, n), abs=1e-6)


def test_pruning_keeps_optimum():
    q, n = _data(4, 1, 1000, 5)
    a, b = learn(q, n), learn(q, n, do_prune=False)
    assert a.score == pytest.approx(b.score, abs=1e-6)
    assert a.n_active < b.n_active == b.n_candidates


def test_larger_districts_never_hurt():
    q, n = _data(6, 2, 1000, 8)
    dag_mode = learn(q, n, Limits(3, 1, 1))
    admg_mode = learn(q, n, Limits(3, 2, 1))
    assert not dag_mode.graph.bidirected
    assert admg_mode.score >= dag_mode.score - 1e-9
    assert is_ancestral(admg_mode.graph)


def test_included_component_is_available():
    q, n = _data(4, 0, 300, 9)
    extra = CComponent.make([0, 1, 2], [(0, 1), (1, 2)])
    res = learn(q, n, Limits(1, 1, 0), include=[extra])
    assert res.n_candidates == 4 * 4 + 1


def test_summary_fields():
    q, n = _data(3, 0, 200, 1)
    out = learn(q, n).summary()
    assert out["schema"] == 1
    assert set(out) >= {"limits", "candidates", "timings", "score", "bound", "root_gap_percent"}
