"""Laplacian-structured prior precisions built from observed similarity.

Nodes that share many neighbours (cascades that share many infected nodes)
get a graph-Laplacian coupling so their latent vectors shrink together. A
ridge term keeps the precision invertible; the bare Laplacian always has
the constant vector in its null space.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .model import PriorConfig

DEFAULT_RIDGE = 1e-2


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise DataError(f"similarity must be square, got {vals.shape}")
        if not np.array_equal(vals, vals.T):
            raise DataError("similarity must be symmetric")
        if np.any(vals < 0):
            raise DataError("similarity must be non-negative")
        if np.any(np.diag(vals) != 0):
            raise DataError("similarity must have a zero diagonal")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self):
        return self.values.shape[0]


def union_neighbors(adjacency):
    """Undirected view of a directed graph: i and j are neighbours if either follows the other."""
    adj = np.asarray(adjacency, dtype=bool)
    return adj | adj.T


def node_similarity(network):
    """Common-neighbour counts over union (in + out) neighbourhoods."""
    nb = union_neighbors(network.adjacency).astype(np.int64)
    theta = nb @ nb.T
    np.fill_diagonal(theta, 0)
    return SimilarityMatrix(theta)


def cascade_similarity(cascades):
    """Number of nodes observed infected in both cascades, for every cascade pair."""
    obs = cascades.observed.astype(np.int64)
    theta = obs.T @ obs
    np.fill_diagonal(theta, 0)
    return SimilarityMatrix(theta)


def laplacian_prior(theta, ridge=DEFAULT_RIDGE):
    """Degree matrix minus similarity, plus ``ridge * I``."""
    if ridge < 0:
        raise ConfigError(f"ridge must be non-negative, got {ridge}")
    vals = theta.values
    lap = np.diag(vals.sum(axis=0)) - vals
    lap[np.diag_indices_from(lap)] += ridge
    return lap


def identity_prior(dim):
    return np.eye(dim)


def build_prior(network, cascades, mode="identity", *, ridge=DEFAULT_RIDGE, ridge_U=None, ridge_Y=None, **hyper):
    """Assemble a :class:`PriorConfig` for the observed data.

    ``mode='identity'`` gives independent priors; ``mode='laplacian'`` builds
    node precisions from common neighbours (shared by X and U, with optional
    separate ridges) and the cascade precision from shared infected nodes.
    """
    n, m = network.n_nodes, cascades.n_cascades
    if mode == "identity":
        return PriorConfig(identity_prior(n), identity_prior(n), identity_prior(m), **hyper)
    if mode != "laplacian":
        raise ConfigError(f"unknown prior mode {mode!r}; expected 'identity' or 'laplacian'")
    node_theta = node_similarity(network)
    inv_x = laplacian_prior(node_theta, ridge)
    inv_u = inv_x if ridge_U is None else laplacian_prior(node_theta, ridge_U)
    inv_y = laplacian_prior(cascade_similarity(cascades), ridge if ridge_Y is None else ridge_Y)
    return PriorConfig(inv_x, inv_u, inv_y, **hyper)
