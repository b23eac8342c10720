import numpy as np
import pytest

from admgip.graph import is_ancestral
from admgip.oracle import (
    OracleSizeError, all_mixed_graphs, ancestral_graphs, count_ancestral_closure, oracle_search,
)
from admgip.scoring import graph_bic
from helpers import random_covariance


def test_counts():
    assert [sum(1 for _ in ancestral_graphs(d)) for d in (2, 3, 4)] == [4, 56, 2504]


def test_second_enumerator_agrees():
    assert count_ancestral_closure(3) == 56
    assert count_ancestral_closure(4) == 2504


def test_two_node_graphs():
    assert len(list(all_mixed_graphs(2))) == 4
    assert all(is_ancestral(g) for g in ancestral_graphs(2))


def test_size_limit():
    with pytest.raises(OracleSizeError):
        ancestral_graphs(5)


def test_argmax_is_best():
    rng = np.random.default_rng(0)
    q = random_covariance(3, rng)
    res = oracle_search(q, 300)
    assert res.n_graphs == 56 and res.ties >= 1
    assert res.score == pytest.approx(graph_bic(res.graph, q, 300), abs=1e-9)
    assert all(graph_bic(g, q, 300) <= res.score + 1e-6 for g in ancestral_graphs(3))
