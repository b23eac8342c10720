"""Structural Hamming distance and edge precision/recall between ADMGs."""
from __future__ import annotations

from .graph import Admg, all_pairs


def _check(g1: Admg, g2: Admg) -> None:
    if g1.n_nodes != g2.n_nodes:
        raise ValueError(f"graphs have {g1.n_nodes} and {g2.n_nodes} nodes")


def shd(g1: Admg, g2: Admg) -> int:
    """Number of node pairs whose edge marks differ (absent, either direction,
    bidirected); every disagreement counts once."""
    _check(g1, g2)
    return sum(g1.edge_mark(i, j) != g2.edge_mark(i, j) for i, j in all_pairs(g1.n_nodes))


def precision_recall(pred: Admg, truth: Admg) -> tuple[float, float]:
    """Fraction of predicted (resp. true) adjacencies that carry the same marks
    in both graphs.  An empty denominator gives 1 when both graphs are empty,
    otherwise 0."""
    _check(pred, truth)
    correct = n_pred = n_true = 0
    for i, j in all_pairs(pred.n_nodes):
        a, b = pred.edge_mark(i, j), truth.edge_mark(i, j)
        n_pred += a != ""
        n_true += b != ""
        correct += a != "" and a == b
    both_empty = n_pred == 0 and n_true == 0
    precision = correct / n_pred if n_pred else float(both_empty)
    recall = correct / n_true if n_true else float(both_empty)
    return precision, recall


def skeleton(g: Admg) -> set:
    return {(i, j) for i, j in all_pairs(g.n_nodes) if g.edge_mark(i, j)}


def evaluate(pred: Admg, truth: Admg) -> dict:
    p, r = precision_recall(pred, truth)
    return {"shd": shd(pred, truth), "precision": p, "recall": r,
            "n_pred_edges": len(skeleton(pred)), "n_true_edges": len(skeleton(truth))}
