"""Turn averaged latent factors into recovered links and cascade times."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeMismatchError
from .model import logistic

DEFAULT_DELTA_G = 0.5
XI_VETO = 0.5


@dataclass
class PredictionResult:
    G_hat: np.ndarray
    G_score: np.ndarray
    C_times: np.ndarray
    C_infected: np.ndarray
    P: np.ndarray
    A: np.ndarray
    delta_G: float
    delta_C: float


def link_scores(est):
    return logistic(est.X_bar.T @ est.U_bar)


def predict_links(est, network, delta_G=DEFAULT_DELTA_G):
    """Threshold the link scores on unobserved pairs; observed pairs pass through.

    A pair is predicted as a link only if its score exceeds ``delta_G`` and
    the averaged link observer is at least ``XI_VETO``.
    """
    if not 0.0 < delta_G < 1.0:
        raise ConfigError(f"delta_G must lie in (0, 1), got {delta_G}")
    n = network.n_nodes
    if est.X_bar.shape[1] != n or est.U_bar.shape[1] != n:
        raise ShapeMismatchError("predict_links", "estimate", est.X_bar.shape, "network", network.adjacency.shape)
    score = link_scores(est)
    veto = est.Xi_bar < XI_VETO
    g_hat = np.where(veto | (score <= delta_G), 0, 1).astype(np.uint8)
    known = network.mask == 1
    g_hat[known] = network.adjacency[known]
    np.fill_diagonal(g_hat, 0)
    return g_hat, score


def infection_transfer(cascades, backend=None):
    """A[i, j]: share of cascades touching i or j in which i precedes j.

    Numerator counts cascades where both are observed infected and
    ``t_i < t_j``; denominator counts cascades where either is observed.
    Pairs never observed get 0.
    """
    obs = np.ascontiguousarray(cascades.observed, dtype=np.uint8)
    times = np.ascontiguousarray(cascades.times, dtype=np.float64)
    num = kernels.get_backend(backend).transfer_counts(times, obs)
    per_node = obs.sum(axis=1).astype(np.int64)
    both = obs.astype(np.int64) @ obs.T.astype(np.int64)
    union = per_node[:, None] + per_node[None, :] - both
    with np.errstate(invalid="ignore", divide="ignore"):
        A = np.where(union > 0, num / np.maximum(union, 1), 0.0)
    np.fill_diagonal(A, 0.0)
    return A


def infection_probability(cascades, A, normalize_rows=False):
    """P[i, j] = sum_k Pi[k, j] * A[k, i]: transfer mass into node i from cascade j's observed nodes.

    With ``normalize_rows`` each row of A is scaled to sum to one first.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (cascades.n_nodes, cascades.n_nodes):
        raise ShapeMismatchError("infection_probability", "A", A.shape, "cascades", cascades.times.shape)
    if normalize_rows:
        sums = A.sum(axis=1, keepdims=True)
        A = np.divide(A, sums, out=np.zeros_like(A), where=sums > 0)
    return A.T @ cascades.pi.astype(np.float64)


def predict_cascades(est, cascades, P, delta_C=None, window=None):
    """Impute unobserved cascade cells.

    Returns ``(times, infected, delta_C)``. An unobserved cell becomes
    infected at ``z = X_i . Y_j`` unless ``P <= delta_C`` or ``z`` falls
    outside ``[0, window]``. Observed cells are copied unchanged.
    """
    window = cascades.window if window is None else float(window)
    delta_C = float(np.mean(P)) if delta_C is None else float(delta_C)
    z = est.X_bar.T @ est.Y_bar
    if z.shape != cascades.times.shape:
        raise ShapeMismatchError("predict_cascades", "X^T Y", z.shape, "cascades", cascades.times.shape)
    accept = (P > delta_C) & (z >= 0) & (z <= window)
    infected = np.where(cascades.observed, True, accept)
    times = np.where(cascades.observed, cascades.times, np.where(accept, z, 0.0))
    return times, infected, delta_C


def predict(est, network, cascades, delta_G=DEFAULT_DELTA_G, delta_C=None, normalize_rows=False, backend=None):
    g_hat, score = predict_links(est, network, delta_G)
    A = infection_transfer(cascades, backend)
    P = infection_probability(cascades, A, normalize_rows)
    times, infected, delta_C = predict_cascades(est, cascades, P, delta_C)
    return PredictionResult(g_hat, score, times, infected, P, A, delta_G, delta_C)
