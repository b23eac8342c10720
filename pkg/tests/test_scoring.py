import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from admgip.graph import Admg, CComponent, GraphError, c_components
from admgip.scoring import (
    ConvergenceError, GaussianDataset, LocalScorer, empirical_covariance, fit_graph, fit_mle, graph_bic,
    graph_bic_joint, local_bic, local_loglik, ricf, write_csv,
)
from admgip.simulate import generate_instance
from helpers import random_ancestral


def density_loglik(x, sigma):
    xc = x - x.mean(axis=0)
    return float(multivariate_normal(np.zeros(len(sigma)), sigma).logpdf(xc).sum())


def sample_for(g, n, rng):
    """Data from a random linear SEM whose bidirected edges come from hidden parents."""
    d = g.n_nodes
    m = np.zeros((d, d))
    for a, b in g.directed:
        m[b, a] = rng.uniform(0.3, 1.0) * rng.choice([-1, 1])
    eps = rng.standard_normal((n, d))
    for a, b in g.bidirected:
        h = rng.standard_normal(n) * 0.7
        eps[:, a] += h
        eps[:, b] += h
    return np.linalg.solve(np.eye(d) - m, eps.T).T


def test_singleton_matches_regression_density():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((300, 4))
    x[:, 0] += 0.8 * x[:, 1] - 0.5 * x[:, 2]
    q = empirical_covariance(x)
    c = CComponent.singleton(0, [1, 2])
    xc = x - x.mean(axis=0)
    coef, *_ = np.linalg.lstsq(xc[:, [1, 2]], xc[:, 0], rcond=None)
    resid = xc[:, 0] - xc[:, [1, 2]] @ coef
    var = resid @ resid / len(x)
    oracle = float(np.sum(-0.5 * (math.log(2 * math.pi * var) + resid ** 2 / var)))
    assert local_loglik(c, q, 300) == pytest.approx(oracle, abs=1e-8)
    assert local_bic(c, q, 300) == pytest.approx(2 * oracle - math.log(300) * 4, abs=1e-7)


def test_district_terms_sum_to_density():
    rng = np.random.default_rng(1)
    for _ in range(20):
        g = random_ancestral(5, rng, 0.3, 0.4)
        x = sample_for(g, 400, rng)
        q = empirical_covariance(x)
        fitted = fit_graph(g, q, 400)
        total = sum(local_loglik(c, q, 400) for c in c_components(g))
        assert total == pytest.approx(density_loglik(x, fitted.implied_cov), abs=1e-6)


def test_ricf_trace_monotone_and_converges():
    rng = np.random.default_rng(2)
    g = Admg(4, [(0, 1), (3, 2)], [(1, 2), (1, 3)])
    x = sample_for(g, 500, rng)
    s = empirical_covariance(x) * 499 / 500
    parents = [sorted(g.parents(v)) for v in range(4)]
    spouses = [sorted(g.spouses(v)) for v in range(4)]
    b, omega, sweeps, trace = ricf(s, parents, spouses, 500)
    assert sweeps >= 1
    assert all(t2 >= t1 - 1e-9 * abs(t1) for t1, t2 in zip(trace, trace[1:]))
    # zero pattern follows the graph
    assert b[0, 1] == 0 and b[1, 0] != 0
    assert omega[0, 1] == 0 and omega[1, 2] != 0
    with pytest.raises(ConvergenceError):
        ricf(s, parents, spouses, 500, max_iter=1, tol=1e-300)


def test_fit_mle_singleton_closed_form():
    rng = np.random.default_rng(3)
    q = empirical_covariance(rng.standard_normal((50, 3)))
    fitted = fit_mle(CComponent.singleton(2), q, 50)
    assert fitted.n_iter == 0
    assert fitted.implied_cov[0, 0] == pytest.approx(q[2, 2] * 49 / 50)


def test_graph_bic_rejects_non_ancestral():
    q = np.eye(3)
    with pytest.raises(GraphError):
        graph_bic(Admg(3, [(0, 1), (1, 2)], [(0, 2)]), q, 100)
    with pytest.raises(GraphError):
        graph_bic(Admg(2, [(0, 1), (1, 0)]), q[:2, :2], 100)


def test_scorer_memoises_and_sums():
    inst = generate_instance(5, 1, 300, seed=4)
    q = empirical_covariance(inst.samples)
    scorer = LocalScorer(q, 300)
    g = inst.observed_ag
    assert scorer.graph(g) == pytest.approx(graph_bic(g, q, 300), rel=1e-12)
    n_cached = len(scorer)
    scorer.graph(g)
    assert len(scorer) == n_cached


def test_joint_fit_equals_decomposition():
    rng = np.random.default_rng(5)
    for _ in range(20):
        g = random_ancestral(5, rng, 0.35, 0.35)
        q = empirical_covariance(sample_for(g, 300, rng))
        a, b = graph_bic(g, q, 300), graph_bic_joint(g, q, 300)
        assert abs(a - b) <= 1e-9 * abs(b)


def test_bic_penalty_counts():
    q = np.eye(3) + 0.2
    n = 1000
    g1 = Admg(3, [(0, 1)])
    g2 = Admg(3, [(0, 1)], [(1, 2)])
    # same fit quality terms differ only through the likelihood and one parameter
    assert graph_bic(g2, q, n) != graph_bic(g1, q, n)
    c = c_components(g2)
    assert sum(x.n_params for x in c) == 2 * 3 + 2


def test_dataset_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    x = rng.standard_normal((20, 3))
    path = tmp_path / "d.csv"
    write_csv(path, x, ["a", "b", "c"])
    data = GaussianDataset.from_csv(path)
    assert data.columns == ["a", "b", "c"] and data.n_samples == 20
    np.testing.assert_allclose(data.covariance, np.cov(x, rowvar=False))


def test_zero_variance_column_rejected():
    x = np.ones((10, 2))
    x[:, 1] = np.arange(10)
    with pytest.raises(ValueError):
        empirical_covariance(x)
