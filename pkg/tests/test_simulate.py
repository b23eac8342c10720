import numpy as np
from scipy import stats

from admgip.graph import Admg, find_directed_cycle, is_ancestral
from admgip.simulate import (
    N_FIXED_AGS, canonical_dag, five_node_dag, five_node_instance, generate_instance,
    implied_covariance, latent_project, load_fixed_ag, parametrize, random_dag, sample_sem, write_bundle,
)


def test_single_node_dag():
    assert random_dag(1, rng=0) == Admg(1)


def test_random_dags_acyclic_and_bounded():
    rng = np.random.default_rng(0)
    for _ in range(200):
        g = random_dag(int(rng.integers(1, 12)), rng=rng)
        assert find_directed_cycle(g) is None
        assert all(len(g.parents(v)) <= 3 for v in g.nodes)


def test_parent_count_histogram():
    # node at position p draws a size uniformly from {0..min(3, p)}
    total, draws = 6, 10_000
    rng = np.random.default_rng(1)
    observed = np.zeros(4)
    for _ in range(draws):
        g = random_dag(total, rng=rng)
        for v in g.nodes:
            observed[len(g.parents(v))] += 1
    expected = np.zeros(4)
    for pos in range(total):
        top = min(3, pos)
        expected[:top + 1] += draws / (top + 1)
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_weight_and_noise_ranges():
    g = random_dag(10, rng=2)
    m, noise = parametrize(g, rng=3)
    w = np.abs(m[m != 0])
    assert len(w) == g.n_edges and np.all((w >= 0.3) & (w <= 1.0))
    assert np.all((noise >= 0.5) & (noise <= 1.5))


def test_chain_covariance():
    m = np.zeros((2, 2))
    m[1, 0] = 0.7
    noise = np.array([0.8, 1.2])
    x = sample_sem(m, noise, 100_000, rng=4)
    s = np.cov(x.T)
    expect = np.array([[0.8, 0.7 * 0.8], [0.7 * 0.8, 0.49 * 0.8 + 1.2]])
    assert np.all(np.abs(s - expect) <= 0.05 * np.abs(expect))
    assert np.allclose(implied_covariance(m, noise), expect)


def test_independent_columns_without_edges():
    x = sample_sem(np.zeros((3, 3)), np.array([0.5, 1.0, 1.5]), 50_000, rng=5)
    c = np.corrcoef(x.T)
    assert np.all(np.abs(c[np.triu_indices(3, 1)]) < 0.02)


def test_hidden_common_parent_projection():
    dag, latents = five_node_dag()
    ag = latent_project(dag, latents)
    # observed 1..4 become 0..3
    assert ag == Admg(4, [(2, 0), (3, 1)], [(0, 1)])


def test_projection_without_latents_is_identity():
    g = random_dag(7, rng=6)
    assert latent_project(g, []) == g


def test_projection_always_ancestral():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        total = int(rng.integers(2, 9))
        dag = random_dag(total, rng=rng)
        latents = rng.choice(total, size=int(rng.integers(0, total)), replace=False)
        assert is_ancestral(latent_project(dag, latents))


def test_projection_ancestralises():
    # h -> a, h -> b, a -> b: the bidirected edge becomes a -> b
    dag = Admg(3, [(0, 1), (0, 2), (1, 2)])
    assert latent_project(dag, [0]) == Admg(2, [(0, 1)])


def test_fixed_ags_roundtrip_through_canonical_dag():
    for k in range(1, N_FIXED_AGS + 1):
        ag = load_fixed_ag(k)
        assert ag.n_nodes == 10 and is_ancestral(ag) and ag.bidirected
        dag, latents = canonical_dag(ag)
        assert latent_project(dag, latents) == ag


def test_deterministic_under_seed(tmp_path):
    a, b = generate_instance(5, 2, 100, seed=3), generate_instance(5, 2, 100, seed=3)
    assert np.array_equal(a.samples, b.samples) and a.observed_ag == b.observed_ag
    assert not np.array_equal(a.samples, generate_instance(5, 2, 100, seed=4).samples)
    write_bundle(a, tmp_path / "x")
    assert {p.name for p in (tmp_path / "x").iterdir()} == {"truth.graph", "data.csv", "meta.json"}


def test_five_node_instance_shape():
    inst = five_node_instance(500, seed=0)
    assert inst.samples.shape == (500, 4) and inst.latents == [0]
