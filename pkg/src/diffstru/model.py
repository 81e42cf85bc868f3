"""Domain types shared by every stage: observed data, latent state, configuration."""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .errors import ConfigError, DataError, NumericError, ShapeMismatchError


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def logistic(t):
    """Overflow-free sigmoid 1 / (1 + exp(-t)); works on scalars and arrays."""
    return expit(t)


@dataclass(frozen=True)
class ObservedNetwork:
    """Directed adjacency plus the observation mask.

    ``mask[i, j] == 1`` marks a pair whose status is known. When no mask is
    given the known pairs are exactly the observed links.
    """

    adjacency: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        adj = _frozen(self.adjacency, np.uint8)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DataError(f"adjacency must be square, got shape {adj.shape}")
        if not np.isin(adj, (0, 1)).all():
            raise DataError("adjacency must be binary")
        if np.any(np.diag(adj)):
            raise DataError("self links are not allowed (adjacency diagonal must be zero)")
        mask = adj if self.mask is None else _frozen(self.mask, np.uint8)
        if mask.shape != adj.shape:
            raise ShapeMismatchError("network mask", "adjacency", adj.shape, "mask", mask.shape)
        if not np.isin(mask, (0, 1)).all():
            raise DataError("mask must be binary")
        if np.any(adj & (1 - mask)):
            raise DataError("every observed link must lie in the observation mask")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "mask", mask)

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n_nodes, edges, mask=None):
        adj = np.zeros((n_nodes, n_nodes), dtype=np.uint8)
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n_nodes):
            raise DataError(f"edge endpoint outside [0, {n_nodes})")
        adj[edges[:, 0], edges[:, 1]] = 1
        return cls(adj, mask)

    @classmethod
    def fully_observed(cls, adjacency):
        """Ground-truth view: every pair's status is known."""
        adjacency = np.asarray(adjacency, dtype=np.uint8)
        return cls(adjacency, np.ones_like(adjacency))

    def edges(self):
        return [tuple(map(int, e)) for e in np.argwhere(self.adjacency)]

    def out_degree(self):
        return self.adjacency.sum(axis=1)

    def __eq__(self, other):
        if not isinstance(other, ObservedNetwork):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency) and np.array_equal(self.mask, other.mask)

    __hash__ = None


@dataclass(frozen=True)
class CascadeSet:
    """N x M infection records over an observation window ``[0, window]``.

    Each cell is tagged: ``observed[i, j]`` says node i was seen infected in
    cascade j at ``times[i, j]``. Untagged cells carry no time; their stored
    value is 0 and is never read.
    """

    times: np.ndarray
    observed: np.ndarray
    window: float

    def __post_init__(self):
        obs = _frozen(self.observed, bool)
        times = np.array(self.times, dtype=np.float64, copy=True)
        if times.ndim != 2:
            raise DataError(f"times must be an N x M matrix, got shape {times.shape}")
        if obs.shape != times.shape:
            raise ShapeMismatchError("cascade set", "times", times.shape, "observed", obs.shape)
        window = float(self.window)
        if not window > 0 or not np.isfinite(window):
            raise DataError(f"window must be a positive finite real, got {self.window}")
        times[~obs] = 0.0
        obs_times = times[obs]
        if not np.all(np.isfinite(obs_times)):
            raise DataError("observed infection times must be finite")
        if obs_times.size and (obs_times.min() < 0 or obs_times.max() > window):
            raise DataError(f"observed infection times must lie in [0, {window}]")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "window", window)

    @property
    def n_nodes(self):
        return self.times.shape[0]

    @property
    def n_cascades(self):
        return self.times.shape[1]

    @property
    def pi(self):
        """Diffusion observation mask (1 on observed-infected cells)."""
        return self.observed.astype(np.uint8)

    @property
    def anchored(self):
        """True when every non-empty cascade has an observed infection at time 0."""
        for j in range(self.n_cascades):
            col = self.observed[:, j]
            if col.any() and self.times[col, j].min() != 0.0:
                return False
        return True

    def normalized(self):
        """Shift each cascade so its earliest observed infection sits at t = 0."""
        times = self.times.copy()
        for j in range(self.n_cascades):
            col = self.observed[:, j]
            if col.any():
                times[col, j] -= times[col, j].min()
        return CascadeSet(times, self.observed, self.window)

    @classmethod
    def from_records(cls, n_nodes, n_cascades, records, window):
        """Build from ``(cascade_id, node_id, time)`` triples."""
        times = np.zeros((n_nodes, n_cascades))
        obs = np.zeros((n_nodes, n_cascades), dtype=bool)
        for cascade_id, node_id, t in records:
            if not (0 <= node_id < n_nodes and 0 <= cascade_id < n_cascades):
                raise DataError(f"record ({cascade_id}, {node_id}) outside a {n_nodes} x {n_cascades} cascade set")
            if obs[node_id, cascade_id]:
                raise DataError(f"node {node_id} infected twice in cascade {cascade_id}")
            obs[node_id, cascade_id] = True
            times[node_id, cascade_id] = t
        return cls(times, obs, window)

    def records(self):
        """``(cascade_id, node_id, time)`` triples ordered by cascade then node."""
        out = []
        for j in range(self.n_cascades):
            for i in np.flatnonzero(self.observed[:, j]):
                out.append((j, int(i), float(self.times[i, j])))
        return out

    def __eq__(self, other):
        if not isinstance(other, CascadeSet):
            return NotImplemented
        return (
            self.window == other.window
            and np.array_equal(self.observed, other.observed)
            and np.array_equal(self.times, other.times)
        )

    __hash__ = None


@dataclass
class LatentState:
    X: np.ndarray
    Y: np.ndarray
    U: np.ndarray
    R: np.ndarray
    Lambda: np.ndarray
    Xi: np.ndarray
    mu_xi: float

    def check(self, adjacency=None):
        if not 0.0 < self.mu_xi < 1.0:
            raise NumericError(f"mu_xi={self.mu_xi} left (0, 1)")
        if np.any(self.Lambda <= 0):
            raise NumericError("Polya-Gamma auxiliaries must be strictly positive")
        if adjacency is not None and np.any((np.asarray(adjacency) == 1) & (self.Xi != 1)):
            raise NumericError("link observer must be 1 on every observed link")

    def copy(self):
        return LatentState(
            self.X.copy(), self.Y.copy(), self.U.copy(), self.R.copy(),
            self.Lambda.copy(), self.Xi.copy(), float(self.mu_xi),
        )


def _check_psd(name, mat, dim):
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape != (dim, dim):
        raise ConfigError(f"{name} must be {dim} x {dim}, got {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-12, rtol=0):
        raise ConfigError(f"{name} must be symmetric")
    if dim and np.linalg.eigvalsh(mat)[0] < -1e-9 * max(1.0, np.abs(mat).max()):
        raise ConfigError(f"{name} must be positive semidefinite")
    out = mat.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PriorConfig:
    """Inverse covariances of the latent-row priors plus noise and Beta hyper-parameters."""

    inv_W_X: np.ndarray
    inv_W_U: np.ndarray
    inv_W_Y: np.ndarray
    sigma2_C: float = 1.0
    sigma2_R: float = 1.0
    alpha1: float = 0.2
    alpha2: float = 0.3
    D: int = 8

    def __post_init__(self):
        n = np.asarray(self.inv_W_X).shape[0]
        m = np.asarray(self.inv_W_Y).shape[0]
        object.__setattr__(self, "inv_W_X", _check_psd("inv_W_X", self.inv_W_X, n))
        object.__setattr__(self, "inv_W_U", _check_psd("inv_W_U", self.inv_W_U, n))
        object.__setattr__(self, "inv_W_Y", _check_psd("inv_W_Y", self.inv_W_Y, m))
        for name in ("sigma2_C", "sigma2_R"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative")
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ConfigError(f"Beta hyper-parameters must be positive, got ({self.alpha1}, {self.alpha2})")
        if int(self.D) != self.D or self.D < 1:
            raise ConfigError(f"latent dimension D must be a positive integer, got {self.D}")

    @property
    def n_nodes(self):
        return self.inv_W_X.shape[0]

    @property
    def n_cascades(self):
        return self.inv_W_Y.shape[0]

    @classmethod
    def identity(cls, n_nodes, n_cascades, **kwargs):
        return cls(np.eye(n_nodes), np.eye(n_nodes), np.eye(n_cascades), **kwargs)


@dataclass(frozen=True)
class SamplerConfig:
    n_iter: int = 1000
    burn_in: int = 900
    thinning: int = 1
    rng_seed: int = 0
    # "unit": unit conditional variance for R; "derived": 1 / (Xi*Lambda + 1/sigma2_R), the exact conjugate value
    r_variance: str = "unit"

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thinning < 1:
            raise ConfigError("thinning must be positive")
        if self.n_iter - self.burn_in < self.thinning:
            raise ConfigError("no draw survives: need n_iter - burn_in >= thinning")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigError("rng_seed must be a 64-bit unsigned integer")
        if self.r_variance not in ("unit", "derived"):
            raise ConfigError(f"r_variance must be 'unit' or 'derived', got {self.r_variance!r}")

    @property
    def n_retained(self):
        return (self.n_iter - self.burn_in) // self.thinning

    def is_retained(self, iteration):
        """Whether 1-based ``iteration`` is one of the averaged draws."""
        offset = iteration - self.burn_in
        return offset > 0 and offset % self.thinning == 0 and offset // self.thinning <= self.n_retained


def build_masks(network, cascades):
    """Return ``(Omega, Pi)`` as uint8 matrices."""
    if network.n_nodes != cascades.n_nodes:
        raise ShapeMismatchError(
            "build_masks", "network", network.adjacency.shape, "cascades", cascades.times.shape
        )
    return network.mask.copy(), cascades.pi


@dataclass
class ModelSample:
    """One draw from the generative process, kept as raw arrays.

    ``C`` holds the real-valued Gaussian draws on ``Pi`` cells; values are not
    constrained to the observation window, so use :meth:`cascades` to get a
    window-respecting :class:`CascadeSet`.
    """

    G: np.ndarray
    C: np.ndarray
    Pi: np.ndarray
    latent: LatentState
    window: float = field(default=np.inf)

    def network(self):
        return ObservedNetwork.fully_observed(self.G)

    def cascades(self):
        obs = (self.Pi == 1) & (self.C >= 0) & (self.C <= self.window)
        return CascadeSet(np.where(obs, self.C, 0.0), obs, self.window)


def sample_rows_from_precision(precision, n_rows, rng, name="precision"):
    """Draw ``n_rows`` iid rows from N(0, precision^-1) without forming the inverse."""
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError:
        raise ConfigError(f"{name} is not positive definite; the implied covariance does not exist") from None
    z = rng.standard_normal((n_rows, precision.shape[0]))
    return solve_triangular(chol.T, z.T, lower=False).T


def generate_from_model(prior, n_nodes, n_cascades, window, seed, *, pi=None, mu_xi=None, X=None, Y=None, U=None):
    """Sample a complete dataset from the coupled factorization model.

    Draw order is fixed (mu, Y, X, U, Xi, R, G, C) so a seed reproduces the
    output bit for bit. ``mu_xi``, ``X``, ``Y`` and ``U`` may be pinned to
    fixed values; ``pi`` selects the cells that receive a cascade value
    (default: all cells).
    """
    if n_nodes < 1 or n_cascades < 1:
        raise ConfigError("need at least one node and one cascade")
    if prior.n_nodes != n_nodes or prior.n_cascades != n_cascades:
        raise ShapeMismatchError(
            "generate_from_model", "prior(N, M)", (prior.n_nodes, prior.n_cascades), "request", (n_nodes, n_cascades)
        )
    rng = np.random.default_rng(seed)
    d = prior.D
    mu = rng.beta(prior.alpha1, prior.alpha2) if mu_xi is None else float(mu_xi)
    Y = sample_rows_from_precision(prior.inv_W_Y, d, rng, "inv_W_Y") if Y is None else np.asarray(Y, float)
    X = sample_rows_from_precision(prior.inv_W_X, d, rng, "inv_W_X") if X is None else np.asarray(X, float)
    U = sample_rows_from_precision(prior.inv_W_U, d, rng, "inv_W_U") if U is None else np.asarray(U, float)
    xi = (rng.random((n_nodes, n_nodes)) < mu).astype(np.uint8)
    R = X.T @ U + np.sqrt(prior.sigma2_R) * rng.standard_normal((n_nodes, n_nodes))
    bern = rng.random((n_nodes, n_nodes)) < logistic(R)
    G = (xi.astype(bool) & bern).astype(np.uint8)
    np.fill_diagonal(G, 0)
    pi = np.ones((n_nodes, n_cascades), dtype=np.uint8) if pi is None else np.asarray(pi, dtype=np.uint8)
    C = X.T @ Y + np.sqrt(prior.sigma2_C) * rng.standard_normal((n_nodes, n_cascades))
    C = np.where(pi == 1, C, 0.0)
    lam = np.full((n_nodes, n_nodes), 0.25)
    latent = LatentState(X=X, Y=Y, U=U, R=R, Lambda=lam, Xi=xi, mu_xi=mu)
    return ModelSample(G=G, C=C, Pi=pi, latent=latent, window=float(window))
