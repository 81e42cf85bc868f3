import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit
from scipy.stats import ks_2samp, multivariate_normal

import oracles
from diffstru import kernels, sampler
from diffstru.errors import NumericError
from diffstru.model import CascadeSet, LatentState, ObservedNetwork, PriorConfig, SamplerConfig
from diffstru.sampler import (
    GaussianPosterior,
    GibbsSampler,
    mu_xi_posterior,
    r_conditional,
    run_gibbs,
    sample_mu_xi,
    sample_pg,
    sample_R,
    sample_Xi,
    u_posterior,
    x_posterior,
    xi_probability,
    y_posterior,
)

BACKENDS = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])


def _spd(k, rng):
    a = rng.normal(size=(k, k))
    return a @ a.T + k * np.eye(k)


def _instance(rng, n, m, d, dense_prior):
    X, Y, U = rng.normal(size=(d, n)), rng.normal(size=(d, m)), rng.normal(size=(d, n))
    C, R = rng.normal(size=(n, m)), rng.normal(size=(n, n))
    Pi = (rng.random((n, m)) < 0.6).astype(np.uint8)
    if dense_prior:
        wx, wu, wy = _spd(n, rng), _spd(n, rng), _spd(m, rng)
    else:
        wx, wu, wy = (np.diag(rng.uniform(0.5, 2.0, k)) for k in (n, n, m))
    s2c, s2r = rng.uniform(0.3, 2.0, 2)
    return X, Y, U, C, R, Pi, wx, wu, wy, s2c, s2r


# -- R, Xi, mu -------------------------------------------------------------------------

def test_r_mean_examples():
    X, U = np.array([[0.7]]), np.array([[1.0]])
    mean, _ = r_conditional(X, U, np.array([[0]]), np.array([[0]]), np.array([[2.0]]), 1.0)
    assert mean[0, 0] == pytest.approx(0.7)
    X, U = np.array([[0.5]]), np.array([[1.0]])
    mean, var = r_conditional(X, U, np.array([[1]]), np.array([[1]]), np.array([[1.0]]), 1.0)
    assert mean[0, 0] == pytest.approx(0.5) and var[0, 0] == 1.0
    _, var = r_conditional(X, U, np.array([[1]]), np.array([[1]]), np.array([[1.0]]), 1.0, "derived")
    assert var[0, 0] == pytest.approx(0.5)


def test_r_monte_carlo_mean():
    rng = np.random.default_rng(0)
    n = 100_000
    X, U = np.full((1, n), 0.3), np.ones((1, 1))
    G, Xi, Lam = np.ones((n, 1)), np.ones((n, 1)), np.full((n, 1), 0.8)
    mean, _ = r_conditional(X, U, G, Xi, Lam, 1.0)
    draws = sample_R(X, U, G, Xi, Lam, 1.0, rng)
    assert abs(draws.mean() - mean[0, 0]) < 3 / np.sqrt(n)


def test_xi_examples():
    assert xi_probability(np.array([[0.0]]), 0.5)[0, 0] == pytest.approx(1 / 3)
    assert xi_probability(np.array([[40.0]]), 0.5)[0, 0] < 1e-12
    rng = np.random.default_rng(1)
    G = np.array([[0, 1], [1, 0]])
    for _ in range(50):
        xi = sample_Xi(rng.normal(size=(2, 2)), G, 0.3, rng)
        assert xi[0, 1] == 1 and xi[1, 0] == 1


@given(st.floats(1e-6, 1 - 1e-6), st.floats(-50, 50))
def test_xi_probability_in_unit_interval(mu, r):
    p = xi_probability(np.array([[r]]), mu)[0, 0]
    assert 0.0 <= p <= 1.0
    assert p == pytest.approx(oracles.xi_prob(mu, r), abs=1e-9)


def test_mu_posterior_examples():
    assert mu_xi_posterior(np.ones((2, 2)), 0.2, 0.3) == pytest.approx((4.2, 0.3))
    assert mu_xi_posterior(np.zeros((2, 2)), 0.2, 0.3) == pytest.approx((0.2, 4.3))


def test_mu_monte_carlo_mean():
    rng = np.random.default_rng(2)
    xi = np.zeros((10, 10))
    xi.flat[:37] = 1
    a, b = 0.2 + 37, 0.3 + 63
    draws = [sample_mu_xi(xi, 0.2, 0.3, rng) for _ in range(100_000)]
    assert np.mean(draws) == pytest.approx(a / (a + b), rel=0.01)


# -- Polya-Gamma ----------------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("c", [0.0, 0.5, 2.0, 7.0])
def test_pg_moments(backend, c):
    n = 200_000
    draws = sample_pg(np.full(n, c), np.random.default_rng(10), backend)
    assert np.all(draws > 0)
    se_mean = np.sqrt(oracles.pg_var(c) / n)
    assert abs(draws.mean() - oracles.pg_mean(c)) < 4 * se_mean
    assert draws.var() == pytest.approx(oracles.pg_var(c), rel=0.03)


@pytest.mark.parametrize("backend", BACKENDS)
def test_pg_symmetric_in_tilt(backend):
    rng = np.random.default_rng(11)
    a = sample_pg(np.full(100_000, 1.3), rng, backend)
    b = sample_pg(np.full(100_000, -1.3), rng, backend)
    # critical value at alpha = 0.001 for two samples of 1e5
    assert ks_2samp(a, b).statistic < 1.95 * np.sqrt(2 / 100_000)


def test_pg_backends_bit_identical():
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    c = np.random.default_rng(0).normal(scale=3, size=5000)
    a = sample_pg(c, np.random.default_rng(9), "python")
    b = sample_pg(c, np.random.default_rng(9), "cython")
    np.testing.assert_array_equal(a, b)


def test_pg_rejects_non_finite():
    with pytest.raises(NumericError):
        sample_pg(np.array([np.nan]), np.random.default_rng(0))


# -- Gaussian conditionals ---------------------------------------------------------

def test_y_scalar_case():
    post = y_posterior(np.array([[1.0]]), np.array([[3.0]]), np.array([[1]]), np.eye(1), 1.0)
    assert post.covariance()[0, 0] == pytest.approx(0.5)
    assert post.mean[0, 0] == pytest.approx(1.5)


def test_y_without_data_is_prior():
    rng = np.random.default_rng(4)
    w = _spd(3, rng)
    post = y_posterior(rng.normal(size=(2, 4)), rng.normal(size=(4, 3)), np.zeros((4, 3)), w, 1.0)
    np.testing.assert_allclose(post.mean, 0.0, atol=1e-14)
    np.testing.assert_allclose(post.precision(), np.kron(np.eye(2), w), atol=1e-14)


def test_u_scalar_and_zero_design():
    post = u_posterior(np.array([[1.0]]), np.array([[2.0]]), np.eye(1), 1.0)
    assert post.covariance()[0, 0] == pytest.approx(0.5) and post.mean[0, 0] == pytest.approx(1.0)
    w = np.diag([1.0, 3.0])
    post = u_posterior(np.zeros((2, 2)), np.ones((2, 2)), w, 1.0)
    np.testing.assert_allclose(post.precision(), np.kron(np.eye(2), w))
    np.testing.assert_allclose(post.mean, 0.0)


def test_x_scalar_case():
    post = x_posterior(np.ones((1, 1)), np.ones((1, 1)), np.array([[2.0]]), np.ones((1, 1)),
                       np.array([[4.0]]), np.eye(1), 1.0, 1.0)
    assert post.precision()[0, 0] == pytest.approx(3.0)
    assert post.mean[0, 0] == pytest.approx(2.0)


def test_x_without_data_is_prior():
    rng = np.random.default_rng(6)
    w = _spd(3, rng)
    post = x_posterior(rng.normal(size=(2, 4)), rng.normal(size=(2, 3)), rng.normal(size=(3, 4)),
                       np.zeros((3, 4)), rng.normal(size=(3, 3)), w, 1.0, np.inf)
    np.testing.assert_allclose(post.precision(), np.kron(np.eye(2), w), atol=1e-14)
    np.testing.assert_allclose(post.mean, 0.0, atol=1e-14)


@pytest.mark.parametrize("dense_prior", [False, True])
@pytest.mark.parametrize("seed", range(8))
def test_conditionals_match_dense_oracles(seed, dense_prior):
    rng = np.random.default_rng(seed)
    n, m, d = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 3)
    X, Y, U, C, R, Pi, wx, wu, wy, s2c, s2r = _instance(rng, n, m, d, dense_prior)

    perm_y = oracles.col_to_row_perm(d, m)
    mean, prec = oracles.dense_y(X, C, Pi, wy, s2c)
    post = y_posterior(X, C, Pi, wy, s2c)
    np.testing.assert_allclose(post.mean.reshape(-1), mean[perm_y], atol=1e-10)
    np.testing.assert_allclose(post.precision(), prec[np.ix_(perm_y, perm_y)], atol=1e-10)

    perm_u = oracles.col_to_row_perm(d, n)
    mean, prec = oracles.dense_u(X, R, wu, s2r)
    post = u_posterior(X, R, wu, s2r)
    np.testing.assert_allclose(post.mean.reshape(-1), mean[perm_u], atol=1e-10)
    np.testing.assert_allclose(post.precision(), prec[np.ix_(perm_u, perm_u)], atol=1e-10)

    # vec(X^T) is already the row order of X
    mean, prec = oracles.dense_x(Y, U, C, Pi, R, wx, s2c, s2r)
    post = x_posterior(Y, U, C, Pi, R, wx, s2c, s2r)
    np.testing.assert_allclose(post.mean.reshape(-1), mean, atol=1e-10)
    np.testing.assert_allclose(post.precision(), prec, atol=1e-10)


@settings(max_examples=30)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_vec_algebra(m, n, p, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.normal(size=(m, n)), rng.normal(size=(n, p))
    v = oracles.vec
    np.testing.assert_allclose(v(A @ B), np.kron(B.T, np.eye(m)) @ v(A), atol=1e-12)
    np.testing.assert_allclose(v(A @ B), np.kron(np.eye(p), A) @ v(B), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_matrix_normal_transpose(seed):
    rng = np.random.default_rng(seed)
    r, c = 3, 2
    M = rng.normal(size=(r, c))
    A, B = _spd(r, rng), _spd(c, rng)
    Z = rng.normal(size=(r, c))
    v = oracles.vec
    # Z ~ MN(M, A, B)  <=>  vec(Z) ~ N(vec M, B (x) A)  <=>  Z^T ~ MN(M^T, B, A)
    lz = multivariate_normal(v(M), np.kron(B, A)).logpdf(v(Z))
    lzt = multivariate_normal(v(M.T), np.kron(A, B)).logpdf(v(Z.T))
    assert lz == pytest.approx(lzt, abs=1e-10)


def test_structured_sample_has_posterior_covariance():
    rng = np.random.default_rng(8)
    for dense_prior in (False, True):
        X, Y, U, C, R, Pi, wx, wu, wy, s2c, s2r = _instance(rng, 3, 2, 2, dense_prior)
        post = x_posterior(Y, U, C, Pi, R, wx, s2c, s2r)
        draws = np.array([post.sample(rng).reshape(-1) for _ in range(20_000)])
        cov = post.covariance()
        np.testing.assert_allclose(draws.mean(axis=0), post.mean.reshape(-1), atol=5 * np.sqrt(cov.diagonal().max() / 20_000))
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.05 * np.abs(cov).max())


def test_non_pd_block_reports_index():
    blocks = np.stack([np.eye(2), -np.eye(2)])
    post = GaussianPosterior(rhs=np.zeros((2, 2)), blocks=blocks, name="Y")
    with pytest.raises(NumericError, match="block 1"):
        post.mean


# -- the chain ------------------------------------------------------------------------

def _small_data(seed=0, n=8, m=6):
    rng = np.random.default_rng(seed)
    adj = (rng.random((n, n)) < 0.3).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    obs = rng.random((n, m)) < 0.5
    return ObservedNetwork(adj), CascadeSet(rng.random((n, m)), obs, 1.0)


def test_single_retained_draw():
    net, cs = _small_data()
    prior = PriorConfig.identity(8, 6, D=2)
    est = run_gibbs(net, cs, prior, SamplerConfig(n_iter=10, burn_in=9, rng_seed=3))
    s = GibbsSampler.from_data(net, cs, prior, SamplerConfig(n_iter=10, burn_in=9, rng_seed=3)).run()
    assert est.n_retained == 1
    np.testing.assert_array_equal(est.X_bar, s.state.X)
    np.testing.assert_array_equal(est.Xi_bar, s.state.Xi)


def test_run_is_deterministic_and_backend_independent():
    net, cs = _small_data(1)
    prior = PriorConfig.identity(8, 6, D=3)
    cfg = SamplerConfig(n_iter=30, burn_in=10, thinning=2, rng_seed=17)
    a = run_gibbs(net, cs, prior, cfg)
    for backend in BACKENDS:
        b = run_gibbs(net, cs, prior, cfg, backend=backend)
        for name in ("X_bar", "Y_bar", "U_bar", "Xi_bar"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.n_retained == 10
    assert np.all((a.Xi_bar >= 0) & (a.Xi_bar <= 1))


def test_forced_observation_every_iteration():
    net, cs = _small_data(2)
    s = GibbsSampler.from_data(net, cs, PriorConfig.identity(8, 6, D=2), SamplerConfig(n_iter=25, burn_in=5))
    s.initialize()
    for _ in range(25):
        s.step()
        s.state.check(net.adjacency)


def test_checkpoint_resume_matches_uninterrupted(tmp_path):
    net, cs = _small_data(3)
    prior = PriorConfig.identity(8, 6, D=2)
    cfg = SamplerConfig(n_iter=40, burn_in=15, rng_seed=5)
    full = GibbsSampler.from_data(net, cs, prior, cfg).run().estimate()
    first = GibbsSampler.from_data(net, cs, prior, cfg).run(until=20)
    first.save_checkpoint(tmp_path / "ck.npz")
    resumed = GibbsSampler.from_data(net, cs, prior, cfg).load_checkpoint(tmp_path / "ck.npz").run().estimate()
    for name in ("X_bar", "Y_bar", "U_bar", "Xi_bar"):
        np.testing.assert_array_equal(getattr(full, name), getattr(resumed, name))
    assert full.trace == resumed.trace


def test_step_errors_carry_iteration():
    net, cs = _small_data(4)
    s = GibbsSampler.from_data(net, cs, PriorConfig.identity(8, 6, D=2), SamplerConfig(n_iter=5, burn_in=1))
    s.initialize()
    s.state.mu_xi = 1.0
    with pytest.raises(NumericError, match="iteration 1"):
        s.run()


def test_estimate_before_burn_in_fails():
    net, cs = _small_data(5)
    s = GibbsSampler.from_data(net, cs, PriorConfig.identity(8, 6, D=2), SamplerConfig(n_iter=5, burn_in=3))
    with pytest.raises(NumericError, match="retained"):
        s.run(until=2).estimate()


def _joint_draw(rng, prior, n, m):
    """Exact draw of latents and data from the augmented joint (no diagonal surgery)."""
    d = prior.D
    mu = rng.beta(prior.alpha1, prior.alpha2)
    X, U, Y = rng.normal(size=(d, n)), rng.normal(size=(d, n)), rng.normal(size=(d, m))
    xi = (rng.random((n, n)) < mu).astype(np.uint8)
    R = X.T @ U + np.sqrt(prior.sigma2_R) * rng.normal(size=(n, n))
    G = (xi.astype(bool) & (rng.random((n, n)) < expit(R))).astype(np.uint8)
    C = X.T @ Y + np.sqrt(prior.sigma2_C) * rng.normal(size=(n, m))
    lam = sample_pg(R, rng)
    return G, C, LatentState(X=X, Y=Y, U=U, R=R, Lambda=lam, Xi=xi, mu_xi=float(mu))


def _stats(state):
    return np.array([
        state.X[0, 0], state.X[0, 0] ** 2, state.U[0, 1], state.Y[0, 0] ** 2,
        state.R[0, 1], state.mu_xi, float(state.Xi[1, 2]),
    ])


@pytest.mark.slow
def test_one_sweep_preserves_joint():
    """Successive-conditional check: a sweep started from an exact joint draw keeps its marginals."""
    n, m = 3, 2
    prior = PriorConfig.identity(n, m, D=1, alpha1=2.0, alpha2=2.0)
    cfg = SamplerConfig(n_iter=2, burn_in=1, r_variance="derived")
    rng = np.random.default_rng(123)
    before, after = [], []
    for rep in range(1000):
        G, C, state = _joint_draw(rng, prior, n, m)
        s = GibbsSampler(G, C, np.ones((n, m)), prior, cfg)
        s.state = state.copy()
        s.rng = np.random.default_rng(rep)
        before.append(_stats(state))
        s.step()
        after.append(_stats(s.state))
    diff = np.array(after) - np.array(before)
    z = diff.mean(axis=0) / (diff.std(axis=0, ddof=1) / np.sqrt(len(diff)))
    assert np.all(np.abs(z) < 3), z
