"""Classical competitors: neighbourhood link scorers and polynomial time regressors."""
import logging

import numpy as np

from .errors import ConfigError, DataError
from .priors import union_neighbors

logger = logging.getLogger(__name__)

LINK_METHODS = ("CN", "AA", "RA")


def score_links(network, method):
    """Common Neighbours, Adamic-Adar or Resource Allocation over union neighbourhoods.

    Scores are returned for every pair; callers restrict to unobserved ones.
    A common neighbour of degree one would need ``1 / log 1`` under AA; it
    contributes 0 instead.
    """
    method = method.upper()
    if method not in LINK_METHODS:
        raise ConfigError(f"unknown link method {method!r}; expected one of {LINK_METHODS}")
    nb = union_neighbors(network.adjacency).astype(np.float64)
    deg = nb.sum(axis=0)
    if method == "CN":
        weight = np.ones_like(deg)
    elif method == "AA":
        weight = np.zeros_like(deg)
        ok = deg > 1
        weight[ok] = 1.0 / np.log(deg[ok])
        if np.any(deg == 1):
            logger.debug("AA: %d degree-1 nodes contribute 0", int(np.sum(deg == 1)))
    else:
        weight = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    scores = (nb * weight[None, :]) @ nb.T
    np.fill_diagonal(scores, 0.0)
    return scores


def regress_time(times, degree, missing_between):
    """Fit time ~ poly(index) on a sorted observed sequence and evaluate between two positions.

    ``missing_between = (i, j)`` are the sequence indices flanking the gap;
    the prediction is taken at their mean.
    """
    if degree not in (1, 2):
        raise ConfigError(f"degree must be 1 or 2, got {degree}")
    times = np.asarray(times, dtype=np.float64)
    if times.size < degree + 1:
        raise DataError(f"degree-{degree} fit needs at least {degree + 1} points, got {times.size}")
    idx = np.arange(times.size, dtype=np.float64)
    coef = np.polynomial.polynomial.polyfit(idx, times, degree)
    at = 0.5 * (missing_between[0] + missing_between[1])
    return float(np.polynomial.polynomial.polyval(at, coef))


def flanking_indices(observed_times, t):
    """Positions in the sorted observed sequence just before and after time ``t``.

    A gap before the first element uses index -1 on the left; a gap after
    the last uses ``len`` on the right.
    """
    k = int(np.searchsorted(observed_times, t, side="right"))
    return k - 1, k


def regression_predictions(truth, observed, degree):
    """Predicted times for every held-out infected cell, keyed by ``(node, cascade)``.

    Cascades with too few observed points for the fit are skipped.
    """
    preds = {}
    hidden = truth.observed & ~observed.observed
    for j in range(truth.n_cascades):
        rows = np.flatnonzero(hidden[:, j])
        if not rows.size:
            continue
        seq = np.sort(observed.times[observed.observed[:, j], j])
        if seq.size < degree + 1:
            continue
        for i in rows:
            preds[(int(i), j)] = regress_time(seq, degree, flanking_indices(seq, truth.times[i, j]))
    return preds
