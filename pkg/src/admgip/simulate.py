"""Ground-truth instances: random DAG, linear Gaussian SEM, latent projection."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import Admg, from_text, is_ancestral, write_graph
from .scoring import write_csv

WEIGHT_RANGE = (0.3, 1.0)
NOISE_RANGE = (0.5, 1.5)
MAX_PARENTS = 3
N_FIXED_AGS = 5


def random_dag(total: int, max_parents: int = MAX_PARENTS, rng=None) -> Admg:
    """Random permutation order; each node draws a uniform number of parents
    (up to ``max_parents``) among the nodes placed before it."""
    rng = np.random.default_rng(rng)
    order = rng.permutation(total)
    edges = []
    for pos, v in enumerate(order):
        k = int(rng.integers(0, min(max_parents, pos) + 1))
        if k:
            for u in rng.choice(order[:pos], size=k, replace=False):
                edges.append((int(u), int(v)))
    return Admg(total, edges)


def parametrize(dag: Admg, rng=None, weight_range=WEIGHT_RANGE, noise_range=NOISE_RANGE):
    """Edge weights with magnitude uniform on ``weight_range`` and random sign,
    and noise variances uniform on ``noise_range``.

    Returns ``(m, noise)`` with ``m[j, i]`` the weight of ``i -> j``.
    """
    rng = np.random.default_rng(rng)
    m = np.zeros((dag.n_nodes, dag.n_nodes))
    for i, j in sorted(dag.directed):
        m[j, i] = rng.choice([-1.0, 1.0]) * rng.uniform(*weight_range)
    noise = rng.uniform(*noise_range, size=dag.n_nodes)
    return m, noise


def sample_sem(m: np.ndarray, noise: np.ndarray, n: int, rng=None) -> np.ndarray:
    """Draw ``n`` samples of ``X = M X + eps`` with independent Gaussian noise."""
    rng = np.random.default_rng(rng)
    eps = rng.standard_normal((n, m.shape[0])) * np.sqrt(noise)
    return np.linalg.solve(np.eye(m.shape[0]) - m, eps.T).T


def implied_covariance(m: np.ndarray, noise: np.ndarray) -> np.ndarray:
    a = np.linalg.inv(np.eye(m.shape[0]) - m)
    return a @ np.diag(noise) @ a.T


def _latent_reach(dag: Admg, src: int, latent: set) -> set:
    """Nodes reachable from ``src`` by directed paths whose intermediates are latent."""
    out = set()
    stack = [src]
    seen = {src}
    while stack:
        v = stack.pop()
        for u in dag.children(v):
            if u in seen:
                continue
            seen.add(u)
            out.add(u)
            if u in latent:
                stack.append(u)
    return out


def latent_project(dag: Admg, latents: Iterable[int]) -> Admg:
    """Mixed graph over the observed nodes (relabelled in increasing order).

    Bidirected edges between nodes where one is an ancestor of the other are
    replaced by the corresponding directed edge, so the result is ancestral.
    """
    latent = set(int(v) for v in latents)
    observed = [v for v in range(dag.n_nodes) if v not in latent]
    pos = {v: k for k, v in enumerate(observed)}
    directed = set()
    for a in observed:
        for b in _latent_reach(dag, a, latent):
            if b not in latent:
                directed.add((pos[a], pos[b]))
    bidirected = set()
    for h in latent:
        reach = sorted(pos[b] for b in _latent_reach(dag, h, latent) if b not in latent)
        for x in range(len(reach)):
            for y in range(x + 1, len(reach)):
                bidirected.add((reach[x], reach[y]))
    anc = {pos[v]: {pos[u] for u in dag.ancestors(v) if u not in latent} for v in observed}
    for a, b in sorted(bidirected):
        if a in anc[b]:
            directed.add((a, b))
        elif b in anc[a]:
            directed.add((b, a))
    bidirected = {(a, b) for a, b in bidirected if a not in anc[b] and b not in anc[a]}
    return Admg(len(observed), directed, bidirected)


def canonical_dag(ag: Admg) -> tuple[Admg, list[int]]:
    """DAG over the observed nodes plus one latent parent per bidirected edge."""
    d = ag.n_nodes
    edges = list(ag.directed)
    latents = []
    for k, (a, b) in enumerate(sorted(ag.bidirected)):
        h = d + k
        latents.append(h)
        edges += [(h, a), (h, b)]
    return Admg(d + len(latents), edges), latents


def five_node_dag() -> tuple[Admg, list[int]]:
    """Five nodes, 0->1, 0->2, 3->1, 4->2, with node 0 hidden."""
    return Admg(5, [(0, 1), (0, 2), (3, 1), (4, 2)]), [0]


def load_fixed_ag(k: int) -> Admg:
    """One of the shipped 10-node ancestral graphs (``k`` in 1..5)."""
    if not 1 <= k <= N_FIXED_AGS:
        raise ValueError(f"fixed graphs are numbered 1..{N_FIXED_AGS}")
    text = resources.files("admgip").joinpath("data", f"ag{k}.graph").read_text()
    return from_text(text)


@dataclass
class GroundTruthInstance:
    full_dag: Admg
    weights: np.ndarray
    noise_vars: np.ndarray
    latents: list
    observed_ag: Admg
    samples: np.ndarray
    seed: Optional[int] = None

    @property
    def observed(self) -> list[int]:
        lat = set(self.latents)
        return [v for v in range(self.full_dag.n_nodes) if v not in lat]

    @property
    def columns(self) -> list[str]:
        return [f"X{k + 1}" for k in range(len(self.observed))]

    def observed_covariance(self) -> np.ndarray:
        """Population covariance of the observed columns."""
        obs = self.observed
        return implied_covariance(self.weights, self.noise_vars)[np.ix_(obs, obs)]


def instance_from_dag(dag: Admg, latents: Sequence[int], n: int, rng=None, seed=None) -> GroundTruthInstance:
    rng = np.random.default_rng(rng)
    latents = sorted(int(v) for v in latents)
    m, noise = parametrize(dag, rng)
    x = sample_sem(m, noise, n, rng)
    obs = [v for v in range(dag.n_nodes) if v not in set(latents)]
    ag = latent_project(dag, latents)
    assert is_ancestral(ag)
    return GroundTruthInstance(dag, m, noise, latents, ag, x[:, obs], seed)


def generate_instance(d: int, n_latent: int, n: int, seed: int = 0,
                      max_parents: int = MAX_PARENTS) -> GroundTruthInstance:
    """Random DAG on ``d + n_latent`` nodes with ``n_latent`` of them hidden."""
    if d < 1 or n_latent < 0:
        raise ValueError("need d >= 1 and a non-negative latent count")
    rng = np.random.default_rng(seed)
    dag = random_dag(d + n_latent, max_parents, rng)
    latents = sorted(int(v) for v in rng.choice(d + n_latent, size=n_latent, replace=False))
    return instance_from_dag(dag, latents, n, rng, seed)


def instance_from_ag(ag: Admg, n: int, seed: int = 0) -> GroundTruthInstance:
    dag, latents = canonical_dag(ag)
    return instance_from_dag(dag, latents, n, np.random.default_rng(seed), seed)


def five_node_instance(n: int = 10000, seed: int = 0) -> GroundTruthInstance:
    dag, latents = five_node_dag()
    return instance_from_dag(dag, latents, n, np.random.default_rng(seed), seed)


def write_bundle(inst: GroundTruthInstance, out_dir, extra: Optional[dict] = None) -> None:
    """``truth.graph``, ``data.csv`` and ``meta.json`` in ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    write_graph(inst.observed_ag, os.path.join(out_dir, "truth.graph"),
                comment="ground-truth ancestral graph over the observed columns")
    write_csv(os.path.join(out_dir, "data.csv"), inst.samples, inst.columns)
    meta = {
        "seed": inst.seed,
        "d": len(inst.observed),
        "l": len(inst.latents),
        "N": int(inst.samples.shape[0]),
        "weight_range": list(WEIGHT_RANGE),
        "noise_range": list(NOISE_RANGE),
        "max_parents": MAX_PARENTS,
        "latents": [int(v) for v in inst.latents],
        "dag_edges": [[int(a), int(b)] for a, b in sorted(inst.full_dag.directed)],
    }
    meta.update(extra or {})
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


__all__ = [
    "GroundTruthInstance", "canonical_dag", "five_node_dag", "five_node_instance",
    "generate_instance", "implied_covariance", "instance_from_ag", "instance_from_dag",
    "latent_project", "load_fixed_ag", "parametrize", "random_dag", "sample_sem",
    "write_bundle",
]
