"""Evaluation measures, computed only on held-out cells.

Link metrics look at pairs that were not observed in training (observed
adjacency 0, off-diagonal). Cascade RMSE is split into the training cells,
held-out cells that were truly infected, and held-out cells that were not.
An uninfected cell is scored as the window end ``T`` for both truth and
prediction, so a spurious predicted time ``t`` costs ``T - t``.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError, ShapeMismatchError


def heldout_link_cells(observed):
    """Boolean mask of unobserved off-diagonal pairs."""
    observed = np.asarray(observed)
    cells = observed == 0
    np.fill_diagonal(cells, False)
    return cells


def sre(Z, Z_hat, cells=None):
    """Signal-to-reconstruction-error ratio; ``inf`` when the reconstruction is exact."""
    Z = np.asarray(Z, dtype=np.float64)
    Z_hat = np.asarray(Z_hat, dtype=np.float64)
    if Z.shape != Z_hat.shape:
        raise ShapeMismatchError("sre", "Z", Z.shape, "Z_hat", Z_hat.shape)
    if cells is not None:
        Z, Z_hat = Z[cells], Z_hat[cells]
    err = float(np.sum((Z_hat - Z) ** 2))
    if err == 0.0:
        return math.inf
    return float(np.sum(Z**2)) / err


def auc(truth, scores):
    """Probability that a random positive outscores a random negative (ties count one half)."""
    truth = np.asarray(truth).ravel().astype(bool)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0:
        raise DataError("AUC undefined: no positive cells among the held-out set")
    if n_neg == 0:
        raise DataError("AUC undefined: no negative cells among the held-out set")
    ranks = rankdata(scores, method="average")
    return (ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_arrays(cls, truth, pred):
        truth = np.asarray(truth).astype(bool)
        pred = np.asarray(pred).astype(bool)
        return cls(
            tp=int(np.sum(truth & pred)),
            fp=int(np.sum(~truth & pred)),
            fn=int(np.sum(truth & ~pred)),
            tn=int(np.sum(~truth & ~pred)),
        )

    @classmethod
    def heldout(cls, G, G_obs, G_hat):
        G, G_obs, G_hat = (np.asarray(a) for a in (G, G_obs, G_hat))
        if not G.shape == G_obs.shape == G_hat.shape:
            raise ShapeMismatchError("confusion", "G", G.shape, "G_hat", G_hat.shape)
        cells = heldout_link_cells(G_obs)
        return cls.from_arrays(G[cells], G_hat[cells])


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f_measure: float
    empty_prediction: bool = False


def prf_from_confusion(conf):
    empty = conf.tp + conf.fp == 0
    precision = 0.0 if empty else conf.tp / (conf.tp + conf.fp)
    recall = 0.0 if conf.tp + conf.fn == 0 else conf.tp / (conf.tp + conf.fn)
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return PRF(precision, recall, f, empty)


def precision_recall_f(G, G_obs, G_hat):
    return prf_from_confusion(Confusion.heldout(G, G_obs, G_hat))


def accuracy(G, G_obs, G_hat):
    conf = Confusion.heldout(G, G_obs, G_hat)
    total = conf.tp + conf.fp + conf.fn + conf.tn
    return (conf.tp + conf.tn) / total if total else 0.0


def mcc(conf):
    """Matthews correlation; 0 whenever a marginal count is zero."""
    tp, fp, fn, tn = conf.tp, conf.fp, conf.fn, conf.tn
    factors = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if factors == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(factors)


def map_at_k(ranks, k):
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        return 0.0
    if np.any(ranks < 1):
        raise DataError("ranks are 1-based")
    return float(np.mean(np.where(ranks <= k, 1.0 / ranks, 0.0)))


def rmse(truth, pred):
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.size == 0:
        raise DataError("RMSE of an empty cell set")
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def cascade_rmse_partitions(truth, observed, pred_times, pred_infected, reconstruction=None):
    """RMSE per partition: 'train', 'test_infected', 'test_uninfected', 'test'.

    ``truth`` and ``observed`` are ground-truth and training CascadeSets.
    Training cells are scored against ``reconstruction`` (the raw factor
    product) when given, since imputation copies them through unchanged.
    Empty partitions map to ``None``.
    """
    window = truth.window
    true_t = np.where(truth.observed, truth.times, window)
    pred_t = np.where(pred_infected, pred_times, window)
    train = observed.observed
    test = ~train
    parts = {
        "train": train,
        "test_infected": test & truth.observed,
        "test_uninfected": test & ~truth.observed,
        "test": test,
    }
    out = {}
    for name, cells in parts.items():
        if not cells.any():
            out[name] = None
            continue
        source = reconstruction if (name == "train" and reconstruction is not None) else pred_t
        out[name] = rmse(true_t[cells], np.asarray(source)[cells])
    return out


def pr_curve(truth, scores):
    """``(threshold, precision, recall)`` rows, predicting positive when ``score >= threshold``."""
    truth = np.asarray(truth).ravel().astype(bool)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    order = np.argsort(-scores, kind="mergesort")
    s, t = scores[order], truth[order]
    tp = np.cumsum(t)
    fp = np.cumsum(~t)
    # keep the last index of every run of equal scores
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    n_pos = max(int(truth.sum()), 1)
    precision = tp[last] / (tp[last] + fp[last])
    recall = tp[last] / n_pos
    return np.column_stack([s[last], precision, recall])


def best_f_threshold(truth, scores):
    """Threshold with the highest F-measure on the PR sweep, and that F."""
    curve = pr_curve(truth, scores)
    p, r = curve[:, 1], curve[:, 2]
    f = np.where(p + r > 0, 2 * p * r / np.where(p + r > 0, p + r, 1), 0.0)
    best = int(np.argmax(f))
    return float(curve[best, 0]), float(f[best])


def break_even(truth, scores):
    """Mean of precision and recall at the sweep point where they are closest.

    Points with zero recall are skipped, since p = r = 0 there says nothing.
    """
    curve = pr_curve(truth, scores)
    curve = curve[curve[:, 2] > 0]
    if not len(curve):
        return 0.0
    k = int(np.argmin(np.abs(curve[:, 1] - curve[:, 2])))
    return float(0.5 * (curve[k, 1] + curve[k, 2]))


def link_report(G, G_obs, G_hat, scores):
    """All link metrics for one method at one operating point."""
    cells = heldout_link_cells(G_obs)
    conf = Confusion.heldout(G, G_obs, G_hat)
    prf = prf_from_confusion(conf)
    total = conf.tp + conf.fp + conf.fn + conf.tn
    return {
        "auc": auc(np.asarray(G)[cells], np.asarray(scores)[cells]),
        "precision": prf.precision,
        "recall": prf.recall,
        "f_measure": prf.f_measure,
        "accuracy": (conf.tp + conf.tn) / total if total else 0.0,
        "mcc": mcc(conf),
        "sre": sre(G, G_hat, cells),
        "break_even": break_even(np.asarray(G)[cells], np.asarray(scores)[cells]),
        "_empty_prediction": prf.empty_prediction,
    }
