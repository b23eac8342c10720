"""Gaussian BIC scores of c-components.

The log-likelihood of a linear Gaussian ADMG splits over districts: each
district contributes the conditional likelihood of its nodes given their
outside parents, computed from a maximum-likelihood fit of the implied
subgraph.  Fits use residual iterative conditional fitting (RICF); districts
of one node have a closed form.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import Admg, CComponent, GraphError, c_components, find_almost_directed_cycle, find_directed_cycle

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

RICF_TOL = 1e-8
RICF_MAX_ITER = 1000


class ScoringError(RuntimeError):
    """Singular covariance blocks and similar numerical failures."""


class ConvergenceError(ScoringError):
    """RICF hit its sweep limit; ``params`` holds the last iterate."""

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


def empirical_covariance(samples) -> np.ndarray:
    """Unbiased covariance (divisor ``N - 1``) of column-centred samples."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two samples")
    if n < d + 2:
        warnings.warn(f"only {n} samples for {d} variables; covariance will be poorly conditioned",
                      RuntimeWarning, stacklevel=2)
    xc = x - x.mean(axis=0)
    q = xc.T @ xc / (n - 1)
    q = (q + q.T) / 2.0
    flat = np.flatnonzero(np.diag(q) <= 0.0)
    if flat.size:
        raise ValueError(f"zero-variance column(s) {flat.tolist()}")
    return q


@dataclass
class GaussianDataset:
    samples: np.ndarray
    covariance: np.ndarray
    columns: list = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_vars(self) -> int:
        return self.samples.shape[1]

    @classmethod
    def from_samples(cls, samples, columns=None) -> "GaussianDataset":
        x = np.asarray(samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        cols = list(columns) if columns is not None else [f"X{i + 1}" for i in range(x.shape[1])]
        return cls(x, empirical_covariance(x), cols)

    @classmethod
    def from_csv(cls, path) -> "GaussianDataset":
        header, x = read_csv(path)
        return cls.from_samples(x, header)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header row plus comma-separated floats, one sample per row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    x = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return [h.strip() for h in header], x


def write_csv(path, samples: np.ndarray, columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in samples:
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# maximum likelihood

@dataclass
class FittedParams:
    """MLE of a linear Gaussian mixed graph over ``nodes``.

    ``coeff[a, b]`` is the weight of ``nodes[b] -> nodes[a]``; ``noise_cov`` is
    the error covariance with off-diagonal support on bidirected edges;
    ``implied_cov`` is ``(I - B)^-1 Omega (I - B)^-T``.  ``loglik`` is the joint
    log-likelihood of the fitted block at the MLE-scaled sample covariance.
    """

    nodes: tuple
    coeff: np.ndarray
    noise_cov: np.ndarray
    implied_cov: np.ndarray
    loglik: float
    n_iter: int = 0
    trace: list = field(default_factory=list)


def _joint_loglik(s: np.ndarray, b: np.ndarray, omega: np.ndarray, n: int) -> float:
    m = s.shape[0]
    ib = np.eye(m) - b
    resid = ib @ s @ ib.T
    sign, logdet = np.linalg.slogdet(omega)
    if sign <= 0:
        return -math.inf
    tr = float(np.trace(np.linalg.solve(omega, resid)))
    return -0.5 * n * (m * LOG_2PI + logdet + tr)


def ricf(s: np.ndarray, parents: Sequence[Sequence[int]], spouses: Sequence[Sequence[int]],
         n: int, tol: float = RICF_TOL, max_iter: int = RICF_MAX_ITER,
         check_monotone: bool = True) -> tuple[np.ndarray, np.ndarray, int, list]:
    """Residual iterative conditional fitting on covariance ``s``.

    ``s`` must already carry the MLE scaling.  Returns ``(B, Omega, sweeps,
    loglik_trace)``.  Raises ConvergenceError after ``max_iter`` sweeps.
    """
    m = s.shape[0]
    b = np.zeros((m, m))
    omega = np.zeros((m, m))
    # nodes without spouses have closed-form updates that never change
    for i in range(m):
        pa = list(parents[i])
        if pa:
            coef = np.linalg.solve(s[np.ix_(pa, pa)], s[pa, i])
            b[i, pa] = coef
            omega[i, i] = s[i, i] - s[i, pa] @ coef
        else:
            omega[i, i] = s[i, i]
    if np.any(np.diag(omega) <= 0):
        raise ScoringError("non-positive residual variance; covariance block is singular")
    active = [i for i in range(m) if spouses[i]]
    trace = [_joint_loglik(s, b, omega, n)]
    if not active:
        return b, omega, 0, trace

    eye = np.eye(m)
    for sweep in range(1, max_iter + 1):
        b_old = b.copy()
        o_old = omega.copy()
        for i in active:
            pa = list(parents[i])
            sp = list(spouses[i])
            others = [k for k in range(m) if k != i]
            pos = {k: t for t, k in enumerate(others)}
            sp_pos = [pos[k] for k in sp]
            ib_o = (eye - b)[others]
            om_inv = np.linalg.inv(omega[np.ix_(others, others)])
            # covariances of X with the pseudo-variables Z = Omega_oo^-1 eps_o
            cxz = s @ ib_o.T @ om_inv
            czz = om_inv @ ib_o @ s @ ib_o.T @ om_inv
            npa = len(pa)
            g = np.empty((npa + len(sp), npa + len(sp)))
            g[:npa, :npa] = s[np.ix_(pa, pa)]
            g[:npa, npa:] = cxz[np.ix_(pa, sp_pos)]
            g[npa:, :npa] = g[:npa, npa:].T
            g[npa:, npa:] = czz[np.ix_(sp_pos, sp_pos)]
            h = np.concatenate([s[pa, i], cxz[i, sp_pos]])
            try:
                coef = np.linalg.solve(g, h)
            except np.linalg.LinAlgError as exc:
                raise ScoringError(f"singular regression system for node {i}") from exc
            b[i, :] = 0.0
            b[i, pa] = coef[:npa]
            omega[i, :] = 0.0
            omega[:, i] = 0.0
            omega[i, sp] = coef[npa:]
            omega[sp, i] = coef[npa:]
            resid = s[i, i] - h @ coef
            o_io = omega[i, others]
            omega[i, i] = resid + o_io @ om_inv @ o_io
        ll = _joint_loglik(s, b, omega, n)
        if check_monotone and ll < trace[-1] - 1e-9 * max(1.0, abs(trace[-1])):
            log.warning("RICF log-likelihood decreased at sweep %d: %.12g -> %.12g", sweep, trace[-1], ll)
        trace.append(ll)
        delta = max(np.max(np.abs(b - b_old)), np.max(np.abs(omega - o_old)))
        if delta < tol:
            return b, omega, sweep, trace
    raise ConvergenceError(f"RICF did not converge in {max_iter} sweeps",
                           params=(b, omega, max_iter, trace))


def _implied(b: np.ndarray, omega: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(np.eye(b.shape[0]) - b)
    sig = inv @ omega @ inv.T
    return (sig + sig.T) / 2.0


def fit_graph(g: Admg, q: np.ndarray, n: int, nodes: Optional[Sequence[int]] = None,
              **kw) -> FittedParams:
    """RICF fit of a whole mixed graph (or its restriction to ``nodes``)."""
    nodes = tuple(range(g.n_nodes)) if nodes is None else tuple(nodes)
    idx = {v: k for k, v in enumerate(nodes)}
    parents = [[idx[p] for p in sorted(g.parents(v)) if p in idx] for v in nodes]
    spouses = [[idx[p] for p in sorted(g.spouses(v)) if p in idx] for v in nodes]
    s = (n - 1) / n * np.asarray(q)[np.ix_(nodes, nodes)]
    b, omega, it, trace = ricf(s, parents, spouses, n, **kw)
    return FittedParams(nodes, b, omega, _implied(b, omega), trace[-1], it, trace)


def fit_mle(c: CComponent, q: np.ndarray, n: int, tol: float = RICF_TOL,
            max_iter: int = RICF_MAX_ITER) -> FittedParams:
    """Maximum-likelihood fit of the subgraph implied by ``c``.

    The node order is ``c.nodes``: district first, then outside parents, which
    enter as independent exogenous variables.
    """
    nodes = c.nodes
    idx = {v: k for k, v in enumerate(nodes)}
    s = (n - 1) / n * np.asarray(q)[np.ix_(nodes, nodes)]
    m = len(nodes)
    if c.size == 1:
        b = np.zeros((m, m))
        omega = np.diag(np.diag(s)).astype(float)
        pa = [idx[w] for w in sorted(c.parents[0])]
        if pa:
            try:
                coef = np.linalg.solve(s[np.ix_(pa, pa)], s[pa, 0])
            except np.linalg.LinAlgError as exc:
                raise ScoringError(f"singular parent covariance for {c}") from exc
            b[0, pa] = coef
            omega[0, 0] = s[0, 0] - s[0, pa] @ coef
        if omega[0, 0] <= 0:
            raise ScoringError(f"non-positive residual variance for {c}")
        ll = _joint_loglik(s, b, omega, n)
        return FittedParams(nodes, b, omega, _implied(b, omega), ll, 0, [ll])
    parents = [[] for _ in range(m)]
    spouses = [[] for _ in range(m)]
    for k, i in enumerate(c.district):
        parents[k] = [idx[w] for w in sorted(c.parents[k])]
    for a, b_ in c.bidirected:
        spouses[idx[a]].append(idx[b_])
        spouses[idx[b_]].append(idx[a])
    b, omega, it, trace = ricf(s, parents, spouses, n, tol=tol, max_iter=max_iter)
    return FittedParams(nodes, b, omega, _implied(b, omega), trace[-1], it, trace)


def local_loglik(c: CComponent, q: np.ndarray, n: int,
                 fitted: Optional[FittedParams] = None) -> float:
    """District term of the decomposed log-likelihood.

    Equals the conditional log-likelihood of the district given its outside
    parents: ``-(N/2) [ |D| ln 2pi + ln(|Sigma| / prod_j Sigma_jj)
    + (N-1)/N tr(Sigma^-1 Q) - |pa(D) \\ D| ]`` with ``j`` over outside parents.
    """
    if fitted is None:
        fitted = fit_mle(c, q, n)
    nodes = fitted.nodes
    sig = fitted.implied_cov
    qv = np.asarray(q)[np.ix_(nodes, nodes)]
    sign, logdet = np.linalg.slogdet(sig)
    if sign <= 0:
        raise ScoringError(f"implied covariance of {c} is not positive definite")
    k = c.size
    outside = len(nodes) - k
    log_pa = float(np.sum(np.log(np.diag(sig)[k:]))) if outside else 0.0
    tr = float(np.trace(np.linalg.solve(sig, qv)))
    return -0.5 * n * (k * LOG_2PI + logdet - log_pa + (n - 1) / n * tr - outside)


def local_bic(c: CComponent, q: np.ndarray, n: int, fitted: Optional[FittedParams] = None) -> float:
    """``2 * local_loglik - ln(N) * (2 |D| + #edges)``."""
    return 2.0 * local_loglik(c, q, n, fitted) - math.log(n) * c.n_params


def _fit_or_last(c: CComponent, q, n) -> FittedParams:
    try:
        return fit_mle(c, q, n)
    except ConvergenceError as exc:
        b, omega, it, trace = exc.params
        log.warning("using last RICF iterate for %s after %d sweeps", c, it)
        return FittedParams(c.nodes, b, omega, _implied(b, omega), trace[-1], it, trace)


class LocalScorer:
    """Memoised ``local_bic`` over a fixed covariance matrix.

    Non-converged RICF fits fall back to the last iterate with a warning.
    """

    def __init__(self, q: np.ndarray, n: int):
        self.q = np.asarray(q, dtype=float)
        self.n = int(n)
        self._cache: dict[CComponent, float] = {}

    @classmethod
    def from_dataset(cls, data: GaussianDataset) -> "LocalScorer":
        return cls(data.covariance, data.n_samples)

    def __call__(self, c: CComponent) -> float:
        s = self._cache.get(c)
        if s is None:
            s = local_bic(c, self.q, self.n, _fit_or_last(c, self.q, self.n))
            self._cache[c] = s
        return s

    def __len__(self):
        return len(self._cache)

    def graph(self, g: Admg) -> float:
        return sum(self(c) for c in c_components(g))


def graph_bic(g: Admg, q: np.ndarray, n: int) -> float:
    """BIC of an ancestral ADMG as the sum of its c-component scores."""
    cyc = find_directed_cycle(g)
    if cyc is not None:
        raise GraphError(f"graph has a directed cycle through {cyc}")
    almost = find_almost_directed_cycle(g)
    if almost is not None:
        raise GraphError(f"graph has an almost directed cycle {almost[0]} with {almost[1]}")
    return sum(local_bic(c, q, n) for c in c_components(g))


def graph_bic_joint(g: Admg, q: np.ndarray, n: int) -> float:
    """BIC from a single RICF fit of the whole graph (no decomposition)."""
    fitted = fit_graph(g, q, n)
    return 2.0 * fitted.loglik - math.log(n) * (2 * g.n_nodes + g.n_edges)
