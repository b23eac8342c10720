import numpy as np
import pytest

from admgip.graph import Admg
from admgip.metrics import evaluate, precision_recall, shd
from helpers import random_ancestral


def _marks(g):
    """Per-pair pattern straight from the edge sets."""
    out = {}
    for a, b in g.directed:
        out[frozenset((a, b))] = ("dir", a, b)
    for a, b in g.bidirected:
        out[frozenset((a, b))] = ("bi",)
    return out


def test_trivial_cases():
    g = Admg(3, [(0, 1)], [(1, 2)])
    assert shd(g, g) == 0
    assert shd(Admg(2, [(0, 1)]), Admg(2, [], [(0, 1)])) == 1
    assert precision_recall(g, g) == (1.0, 1.0)
    assert precision_recall(Admg(3), g)[1] == 0.0
    assert precision_recall(Admg(3), Admg(3)) == (1.0, 1.0)
    with pytest.raises(ValueError):
        shd(Admg(2), Admg(3))


def test_against_counting_oracle():
    rng = np.random.default_rng(0)
    for _ in range(300):
        d = int(rng.integers(2, 7))
        g1, g2 = random_ancestral(d, rng), random_ancestral(d, rng)
        m1, m2 = _marks(g1), _marks(g2)
        keys = set(m1) | set(m2)
        diff = sum(m1.get(k) != m2.get(k) for k in keys)
        correct = sum(k in m1 and m1[k] == m2.get(k) for k in keys)
        assert shd(g1, g2) == diff == shd(g2, g1)
        p, r = precision_recall(g1, g2)
        assert p == (correct / len(m1) if m1 else float(not m2))
        assert r == (correct / len(m2) if m2 else float(not m1))


def test_evaluate_keys():
    g = Admg(3, [(0, 1)])
    out = evaluate(g, Admg(3, [(1, 0)]))
    assert out == {"shd": 1, "precision": 0.0, "recall": 0.0, "n_pred_edges": 1, "n_true_edges": 1}
