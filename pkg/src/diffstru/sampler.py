"""Gibbs sampler for the coupled structure/diffusion factorization.

One sweep updates, in order: link propensities R, link observers Xi, user
factors X, factor features U, cascade factors Y, Polya-Gamma auxiliaries
Lambda and the observation rate mu_xi. Post burn-in, every ``thinning``-th
draw of X, Y, U and Xi is averaged into the point estimate.

Gaussian conditionals are handled in "row" order: a D x K factor matrix is
flattened as ``vec(F^T)`` (index ``d * K + k``). The likelihood couples the
D entries of each column while the prior couples the K columns of each row;
when the prior precision is diagonal the posterior splits into K independent
D x D blocks, otherwise a dense DK x DK system is factorized.
"""
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from . import kernels
from .errors import ConfigError, NumericError, ShapeMismatchError
from .model import LatentState, logistic

logger = logging.getLogger(__name__)

XI_EPS = 1e-12

TRACE_FIELDS = ("iteration", "retained", "mu_xi", "xi_mean", "c_rmse", "r_rmse", "log_lik")


def _is_diagonal(mat):
    return np.count_nonzero(mat - np.diag(np.diag(mat))) == 0


@dataclass
class GaussianPosterior:
    """Conditional law of a D x K factor matrix.

    Exactly one of ``blocks`` (K x D x D per-column precisions) or ``dense``
    (DK x DK precision in row order) is set. ``rhs`` is the D x K
    precision-weighted mean, i.e. ``precision @ vec(mean) = vec(rhs)``.
    """

    rhs: np.ndarray
    blocks: np.ndarray = None
    dense: np.ndarray = None
    name: str = "factor"
    _chol: np.ndarray = field(default=None, repr=False)

    @property
    def shape(self):
        return self.rhs.shape

    def _factor(self):
        if self._chol is not None:
            return self._chol
        if self.blocks is not None:
            try:
                self._chol = np.linalg.cholesky(self.blocks)
            except np.linalg.LinAlgError:
                bad = next(k for k, b in enumerate(self.blocks) if np.any(np.linalg.eigvalsh(b) <= 0))
                raise NumericError(f"{self.name} posterior precision not positive definite in block {bad}") from None
        else:
            try:
                self._chol = cholesky(self.dense, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                raise NumericError(f"{self.name} posterior precision not positive definite") from None
        return self._chol

    @property
    def mean(self):
        chol = self._factor()
        d, k = self.shape
        if self.blocks is not None:
            sol = np.linalg.solve(self.blocks, self.rhs.T[:, :, None])[:, :, 0]
            return sol.T
        return cho_solve((chol, True), self.rhs.reshape(d * k)).reshape(d, k)

    def precision(self):
        """Full DK x DK precision in row order (``vec(F^T)``)."""
        if self.dense is not None:
            return self.dense.copy()
        k, d, _ = self.blocks.shape
        out = np.zeros((d * k, d * k))
        idx = np.arange(k)
        for a in range(d):
            for b in range(d):
                out[a * k + idx, b * k + idx] = self.blocks[:, a, b]
        return out

    def covariance(self):
        return np.linalg.inv(self.precision())

    def sample(self, rng):
        chol = self._factor()
        mean = self.mean
        d, k = self.shape
        z = rng.standard_normal((d, k))
        if self.blocks is not None:
            # x_k = mean_k + L_k^{-T} z_k
            lt = np.swapaxes(chol, 1, 2)
            noise = np.linalg.solve(lt, z.T[:, :, None])[:, :, 0].T
        else:
            noise = solve_triangular(chol.T, z.reshape(d * k), lower=False, check_finite=False).reshape(d, k)
        return mean + noise


def _assemble(name, lik_blocks, rhs, inv_w):
    """Combine per-column likelihood precisions with a row-coupling prior."""
    k, d, _ = lik_blocks.shape
    if _is_diagonal(inv_w):
        blocks = lik_blocks + np.diag(inv_w)[:, None, None] * np.eye(d)[None, :, :]
        return GaussianPosterior(rhs=rhs, blocks=blocks, name=name)
    dense = np.kron(np.eye(d), inv_w)
    idx = np.arange(k)
    for a in range(d):
        for b in range(d):
            dense[a * k + idx, b * k + idx] += lik_blocks[:, a, b]
    return GaussianPosterior(rhs=rhs, dense=dense, name=name)


def _inv(sigma2):
    return 0.0 if np.isinf(sigma2) else 1.0 / sigma2


def y_posterior(X, C, Pi, inv_W_Y, sigma2_C):
    """Conditional of the D x M cascade factors given X and the observed cascade cells."""
    prec = _inv(sigma2_C)
    pi = np.asarray(Pi, dtype=np.float64)
    lik = np.einsum("ai,ij,bi->jab", X, pi, X, optimize=True) * prec
    rhs = (X @ (pi * C)) * prec
    return _assemble("Y", lik, rhs, inv_W_Y)


def u_posterior(X, R, inv_W_U, sigma2_R):
    """Conditional of the D x N factor features given X and the dense R matrix."""
    prec = _inv(sigma2_R)
    n = R.shape[1]
    lik = np.broadcast_to((X @ X.T) * prec, (n, X.shape[0], X.shape[0])).copy()
    rhs = (X @ R) * prec
    return _assemble("U", lik, rhs, inv_W_U)


def x_posterior(Y, U, C, Pi, R, inv_W_X, sigma2_C, sigma2_R):
    """Conditional of the D x N user factors: cascade term, link-propensity term, prior."""
    prec_c, prec_r = _inv(sigma2_C), _inv(sigma2_R)
    pi = np.asarray(Pi, dtype=np.float64)
    lik = np.einsum("aj,ij,bj->iab", Y, pi, Y, optimize=True) * prec_c
    lik += (U @ U.T)[None, :, :] * prec_r
    rhs = (Y @ (pi * C).T) * prec_c + (U @ R.T) * prec_r
    return _assemble("X", lik, rhs, inv_W_X)


def r_conditional(X, U, G, Xi, Lam, sigma2_R, r_variance="unit"):
    """Mean and variance of each R_ij given everything else."""
    xi = np.asarray(Xi, dtype=np.float64)
    denom = xi * Lam * sigma2_R + 1.0
    mean = (xi * (np.asarray(G, dtype=np.float64) - 0.5) * sigma2_R + X.T @ U) / denom
    if r_variance == "unit":
        var = np.ones_like(mean)
    else:
        var = sigma2_R / denom
    return mean, var


def sample_R(X, U, G, Xi, Lam, sigma2_R, rng, r_variance="unit"):
    mean, var = r_conditional(X, U, G, Xi, Lam, sigma2_R, r_variance)
    return mean + np.sqrt(var) * rng.standard_normal(mean.shape)


def xi_probability(R, mu_xi):
    """P(Xi_ij = 1) for a cell whose observed adjacency is 0."""
    f = np.clip(logistic(R), XI_EPS, 1.0 - XI_EPS)
    xi = (mu_xi - mu_xi * f) / (1.0 - mu_xi * f)
    if np.any(xi < 0) or np.any(xi > 1):
        raise NumericError("link-observer probability left [0, 1]")
    return xi


def sample_Xi(R, G, mu_xi, rng):
    if not 0.0 < mu_xi < 1.0:
        raise NumericError(f"mu_xi={mu_xi} must lie in (0, 1)")
    prob = xi_probability(R, mu_xi)
    xi = (rng.random(R.shape) < prob).astype(np.uint8)
    xi[np.asarray(G) == 1] = 1
    return xi


def mu_xi_posterior(Xi, alpha1, alpha2):
    """Beta parameters of the observation-rate conditional."""
    total = int(np.sum(Xi))
    n_cells = int(np.size(Xi))
    return alpha1 + total, alpha2 + n_cells - total


def sample_mu_xi(Xi, alpha1, alpha2, rng):
    a, b = mu_xi_posterior(Xi, alpha1, alpha2)
    mu = rng.beta(a, b)
    # Beta draws can round to exactly 0 or 1 when one parameter dwarfs the other
    return float(np.clip(mu, XI_EPS, 1.0 - XI_EPS))


def sample_pg(c, rng, backend=None):
    """Exact PG(1, c) draws, elementwise over ``c``."""
    c = np.asarray(c, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise NumericError("Polya-Gamma tilt must be finite")
    out = np.empty(c.shape)
    kernels.get_backend(backend).pg1_fill(c, rng, out)
    return out


def sample_Y(state, C, Pi, prior, rng):
    return y_posterior(state.X, C, Pi, prior.inv_W_Y, prior.sigma2_C).sample(rng)


def sample_U(state, prior, rng):
    return u_posterior(state.X, state.R, prior.inv_W_U, prior.sigma2_R).sample(rng)


def sample_X(state, C, Pi, prior, rng):
    return x_posterior(state.Y, state.U, C, Pi, state.R, prior.inv_W_X, prior.sigma2_C, prior.sigma2_R).sample(rng)


@dataclass
class PosteriorEstimate:
    X_bar: np.ndarray
    Y_bar: np.ndarray
    U_bar: np.ndarray
    Xi_bar: np.ndarray
    n_retained: int
    trace: list = field(default_factory=list)


class GibbsSampler:
    """Single chain over fixed data. ``run`` may be resumed from a checkpoint."""

    def __init__(self, G, C, Pi, prior, cfg, backend=None):
        G = np.asarray(G, dtype=np.uint8)
        C = np.asarray(C, dtype=np.float64)
        Pi = np.asarray(Pi, dtype=np.uint8)
        n = G.shape[0]
        if G.shape != (n, n):
            raise ShapeMismatchError("sampler input", "G", G.shape, "square", (n, n))
        if C.shape != Pi.shape or C.shape[0] != n:
            raise ShapeMismatchError("sampler input", "G", G.shape, "C", C.shape)
        if prior.n_nodes != n or prior.n_cascades != C.shape[1]:
            raise ShapeMismatchError(
                "sampler input", "prior(N, M)", (prior.n_nodes, prior.n_cascades), "data(N, M)", C.shape
            )
        if not (prior.sigma2_C > 0 and prior.sigma2_R > 0):
            raise ConfigError("sampler needs strictly positive noise variances")
        self.G, self.C, self.Pi = G, np.where(Pi == 1, C, 0.0), Pi
        self.prior, self.cfg = prior, cfg
        self.backend = backend
        self.rng = np.random.default_rng(cfg.rng_seed)
        self.iteration = 0
        self.state = None
        self.trace = []
        d, m = prior.D, C.shape[1]
        self._sums = {
            "X": np.zeros((d, n)), "Y": np.zeros((d, m)),
            "U": np.zeros((d, n)), "Xi": np.zeros((n, n)),
        }
        self._count = 0

    @classmethod
    def from_data(cls, network, cascades, prior, cfg, backend=None):
        if network.n_nodes != cascades.n_nodes:
            raise ShapeMismatchError(
                "sampler input", "network", network.adjacency.shape, "cascades", cascades.times.shape
            )
        return cls(network.adjacency, cascades.times, cascades.pi, prior, cfg, backend)

    def initialize(self):
        rng, p = self.rng, self.prior
        n, m, d = self.G.shape[0], self.C.shape[1], p.D
        X = rng.standard_normal((d, n))
        U = rng.standard_normal((d, n))
        Y = rng.standard_normal((d, m))
        R = rng.standard_normal((n, n))
        lam = sample_pg(np.zeros((n, n)), rng, self.backend)
        mu = float(np.clip(rng.beta(p.alpha1, p.alpha2), XI_EPS, 1 - XI_EPS))
        self.state = LatentState(X=X, Y=Y, U=U, R=R, Lambda=lam, Xi=self.G.copy(), mu_xi=mu)
        return self.state

    def step(self):
        """One full sweep in the fixed update order."""
        s, p, rng = self.state, self.prior, self.rng
        s.R = sample_R(s.X, s.U, self.G, s.Xi, s.Lambda, p.sigma2_R, rng, self.cfg.r_variance)
        s.Xi = sample_Xi(s.R, self.G, s.mu_xi, rng)
        s.X = sample_X(s, self.C, self.Pi, p, rng)
        s.U = sample_U(s, p, rng)
        s.Y = sample_Y(s, self.C, self.Pi, p, rng)
        s.Lambda = sample_pg(s.R, rng, self.backend)
        s.mu_xi = sample_mu_xi(s.Xi, p.alpha1, p.alpha2, rng)
        self.iteration += 1

    def _diagnostics(self, retained):
        s, p = self.state, self.prior
        pi = self.Pi == 1
        resid_c = (self.C - s.X.T @ s.Y)[pi]
        resid_r = s.R - s.X.T @ s.U
        xi = s.Xi == 1
        r = s.R[xi]
        g = self.G[xi]
        log_lik = (
            -0.5 * np.sum(resid_c**2) / p.sigma2_C
            - 0.5 * np.sum(resid_r**2) / p.sigma2_R
            + np.sum(g * r - np.logaddexp(0.0, r))
        )
        return {
            "iteration": self.iteration,
            "retained": int(retained),
            "mu_xi": s.mu_xi,
            "xi_mean": float(s.Xi.mean()),
            "c_rmse": float(np.sqrt(np.mean(resid_c**2))) if resid_c.size else 0.0,
            "r_rmse": float(np.sqrt(np.mean(resid_r**2))),
            "log_lik": float(log_lik),
        }

    def run(self, until=None, checkpoint_path=None, checkpoint_every=None):
        """Advance to iteration ``until`` (default: ``cfg.n_iter``)."""
        until = self.cfg.n_iter if until is None else min(until, self.cfg.n_iter)
        if self.state is None:
            self.initialize()
        while self.iteration < until:
            try:
                self.step()
            except NumericError as exc:
                raise NumericError(f"iteration {self.iteration + 1}: {exc}") from exc
            retained = self.cfg.is_retained(self.iteration)
            if retained:
                s = self.state
                self._sums["X"] += s.X
                self._sums["Y"] += s.Y
                self._sums["U"] += s.U
                self._sums["Xi"] += s.Xi
                self._count += 1
            self.trace.append(self._diagnostics(retained))
            if checkpoint_path and checkpoint_every and self.iteration % checkpoint_every == 0:
                self.save_checkpoint(checkpoint_path)
        return self

    def estimate(self):
        if self._count == 0:
            raise NumericError("no retained draws yet; run past burn-in first")
        k = self._count
        return PosteriorEstimate(
            X_bar=self._sums["X"] / k,
            Y_bar=self._sums["Y"] / k,
            U_bar=self._sums["U"] / k,
            Xi_bar=self._sums["Xi"] / k,
            n_retained=k,
            trace=list(self.trace),
        )

    # Checkpoint layout (numpy .npz): latent arrays X, Y, U, R, Lambda, Xi and
    # mu_xi; running sums sum_X, sum_Y, sum_U, sum_Xi and count; iteration;
    # trace as an (iterations x len(TRACE_FIELDS)) float array; and the
    # bit-generator state as a JSON string under rng_state.
    def save_checkpoint(self, path):
        s = self.state
        trace = np.array([[row[k] for k in TRACE_FIELDS] for row in self.trace], dtype=np.float64)
        with open(path, "wb") as fh:
            np.savez(
                fh,
                X=s.X, Y=s.Y, U=s.U, R=s.R, Lambda=s.Lambda, Xi=s.Xi, mu_xi=np.float64(s.mu_xi),
                sum_X=self._sums["X"], sum_Y=self._sums["Y"], sum_U=self._sums["U"], sum_Xi=self._sums["Xi"],
                count=np.int64(self._count), iteration=np.int64(self.iteration),
                trace=trace.reshape(-1, len(TRACE_FIELDS)),
                rng_state=np.array(json.dumps(self.rng.bit_generator.state)),
            )

    def load_checkpoint(self, path):
        with np.load(path) as data:
            self.state = LatentState(
                X=data["X"], Y=data["Y"], U=data["U"], R=data["R"], Lambda=data["Lambda"],
                Xi=data["Xi"], mu_xi=float(data["mu_xi"]),
            )
            for key in self._sums:
                self._sums[key] = data[f"sum_{key}"].copy()
            self._count = int(data["count"])
            self.iteration = int(data["iteration"])
            self.trace = [
                {k: (int(v) if k in ("iteration", "retained") else float(v)) for k, v in zip(TRACE_FIELDS, row)}
                for row in data["trace"]
            ]
            self.rng.bit_generator.state = json.loads(str(data["rng_state"]))
        return self


def run_gibbs(network, cascades, prior, cfg, backend=None):
    """Run one chain to completion and return the averaged estimate."""
    sampler = GibbsSampler.from_data(network, cascades, prior, cfg, backend)
    return sampler.run().estimate()
