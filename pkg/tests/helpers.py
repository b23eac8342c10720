"""Shared generators for the test suite."""
import numpy as np

from admgip.graph import Admg, all_pairs


def random_ancestral(d, rng, p_dir=0.3, p_bi=0.3):
    """Directed edges follow a random order; bidirected edges only join
    nodes with no ancestral relation, so the graph is ancestral."""
    order = rng.permutation(d)
    directed = [(int(order[a]), int(order[b])) for a in range(d) for b in range(a + 1, d)
                if rng.random() < p_dir]
    g = Admg(d, directed)
    bidirected = []
    for i, j in all_pairs(d):
        if (i, j) in g.directed or (j, i) in g.directed:
            continue
        if i in g.ancestors(j) or j in g.ancestors(i):
            continue
        if rng.random() < p_bi:
            bidirected.append((i, j))
    return Admg(d, directed, bidirected)


def random_mixed(d, rng, p_dir=0.3, p_bi=0.2):
    """Any mixed graph without parallel edges (often cyclic)."""
    directed, bidirected = [], []
    for i, j in all_pairs(d):
        u = rng.random()
        if u < p_dir / 2:
            directed.append((i, j))
        elif u < p_dir:
            directed.append((j, i))
        elif u < p_dir + p_bi:
            bidirected.append((i, j))
    return Admg(d, directed, bidirected)


def random_partition(model, rng):
    """Indicator of a random selection covering every node exactly once."""
    z = np.zeros(model.n_vars)
    covered = set()
    for k in rng.permutation(model.n_vars):
        c = model.components[k]
        if not covered & set(c.district):
            z[k] = 1.0
            covered |= set(c.district)
    return z


def random_fractional(model, rng, k=3):
    """Convex combination of ``k`` random partitions."""
    w = rng.dirichlet(np.ones(k))
    return sum(wi * random_partition(model, rng) for wi in w)


def random_covariance(d, rng):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + np.eye(d)


def all_partitions(model):
    """Every integral point satisfying the partition rows, as index lists."""
    comps = model.components
    out = []

    def rec(covered, chosen):
        free = [v for v in range(model.n_nodes) if v not in covered]
        if not free:
            out.append(list(chosen))
            return
        for k in model.cover[free[0]]:
            dist = set(comps[k].district)
            if not dist & covered:
                chosen.append(k)
                rec(covered | dist, chosen)
                chosen.pop()

    rec(set(), [])
    return out


def weight_two_point(model, rng):
    """Fractional point where some pair (i, j) are each other's parent with
    full weight; the other nodes mix random singleton candidates."""
    from admgip.graph import CComponent

    d = model.n_nodes
    idx = {c: k for k, c in enumerate(model.components)}
    i, j = (int(v) for v in rng.choice(d, size=2, replace=False))
    z = np.zeros(model.n_vars)
    z[idx[CComponent.singleton(i, [j])]] = 1.0
    z[idx[CComponent.singleton(j, [i])]] = 1.0
    for v in range(d):
        if v in (i, j):
            continue
        opts = [k for k in model.cover[v] if model.components[k].size == 1]
        picks = rng.choice(opts, size=2, replace=False)
        w = rng.uniform(0.2, 0.8)
        z[picks[0]] += w
        z[picks[1]] += 1 - w
    return z, (i, j)
