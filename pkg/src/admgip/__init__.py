"""Exact score-based learning of ancestral ADMGs for Gaussian data.

The pipeline scores candidate c-components with a decomposable BIC, prunes
dominated candidates and solves an integer program over the survivors with a
branch-and-cut search that separates cluster and bicluster inequalities.
"""

from .graph import Admg, CComponent, assemble, districts, implied_subgraph, is_ancestral
from .scoring import empirical_covariance, graph_bic, local_bic, local_loglik

__all__ = [
    "Admg",
    "CComponent",
    "assemble",
    "districts",
    "implied_subgraph",
    "is_ancestral",
    "empirical_covariance",
    "graph_bic",
    "local_bic",
    "local_loglik",
]

__version__ = "0.1.0"
