import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffstru.baselines import flanking_indices, regress_time, regression_predictions, score_links
from diffstru.errors import ConfigError, DataError
from diffstru.model import CascadeSet, ObservedNetwork

seeds = st.integers(0, 2**32 - 1)


def _random_network(n, p, seed):
    rng = np.random.default_rng(seed)
    adj = (rng.random((n, n)) < p).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    return ObservedNetwork(adj)


def test_no_common_neighbours():
    net = ObservedNetwork.from_edges(4, [(0, 1), (2, 3)])
    for m in ("CN", "AA", "RA"):
        assert score_links(net, m)[0, 2] == 0.0


def test_single_common_neighbour_of_degree_four():
    # z = 2 is linked (in either direction) to 0, 1, 3, 4
    net = ObservedNetwork.from_edges(5, [(0, 2), (2, 1), (3, 2), (2, 4)])
    assert score_links(net, "CN")[0, 1] == 1.0
    assert score_links(net, "AA")[0, 1] == pytest.approx(1 / math.log(4))
    assert score_links(net, "RA")[0, 1] == pytest.approx(0.25)


def test_degree_one_neighbour_under_aa_contributes_zero():
    net = ObservedNetwork.from_edges(3, [(0, 1)])
    assert np.all(score_links(net, "AA") == 0.0)
    with pytest.raises(ConfigError):
        score_links(net, "Katz")


@pytest.mark.parametrize("seed", range(3))
def test_scores_match_set_arithmetic(seed):
    net = _random_network(12, 0.25, seed)
    adj = net.adjacency
    nbrs = [{k for k in range(12) if adj[i, k] or adj[k, i]} for i in range(12)]
    cn, aa, ra = (score_links(net, m) for m in ("CN", "AA", "RA"))
    for i, j in itertools.product(range(12), repeat=2):
        if i == j:
            continue
        common = nbrs[i] & nbrs[j]
        assert cn[i, j] == len(common)
        assert aa[i, j] == pytest.approx(sum(1 / math.log(len(nbrs[z])) for z in common if len(nbrs[z]) > 1))
        assert ra[i, j] == pytest.approx(sum(1 / len(nbrs[z]) for z in common))


@settings(max_examples=30)
@given(seeds)
def test_scorers_symmetric(seed):
    net = _random_network(8, 0.3, seed)
    for m in ("CN", "AA", "RA"):
        s = score_links(net, m)
        np.testing.assert_allclose(s, s.T, atol=1e-12)


# -- regression ----------------------------------------------------------------------

def test_linear_and_quadratic_are_exact():
    idx = np.arange(6.0)
    assert regress_time(0.1 + 0.2 * idx, 1, (2, 3)) == pytest.approx(0.1 + 0.2 * 2.5, abs=1e-12)
    quad = 0.05 + 0.01 * idx + 0.03 * idx**2
    assert regress_time(quad, 2, (3, 4)) == pytest.approx(0.05 + 0.01 * 3.5 + 0.03 * 3.5**2, abs=1e-12)


@pytest.mark.parametrize("degree", [1, 2])
@pytest.mark.parametrize("seed", range(4))
def test_matches_normal_equations(degree, seed):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.random(9))
    idx = np.arange(9.0)
    V = np.vander(idx, degree + 1, increasing=True)
    beta = np.linalg.solve(V.T @ V, V.T @ t)
    at = 0.5 * (4 + 5)
    expect = sum(beta[k] * at**k for k in range(degree + 1))
    assert regress_time(t, degree, (4, 5)) == pytest.approx(expect, abs=1e-10)


@settings(max_examples=30)
@given(seeds, st.floats(-5, 5))
def test_shift_equivariance(seed, shift):
    t = np.sort(np.random.default_rng(seed).random(7))
    for degree in (1, 2):
        assert regress_time(t + shift, degree, (1, 2)) == pytest.approx(regress_time(t, degree, (1, 2)) + shift, abs=1e-9)


def test_regression_errors():
    with pytest.raises(DataError):
        regress_time([0.1, 0.2], 2, (0, 1))
    with pytest.raises(ConfigError):
        regress_time([0.1, 0.2, 0.3, 0.4], 3, (0, 1))


def test_flanking_indices():
    seq = np.array([0.0, 0.2, 0.5])
    assert flanking_indices(seq, 0.3) == (1, 2)
    assert flanking_indices(seq, 0.9) == (2, 3)
    assert flanking_indices(seq, -1.0) == (-1, 0)


def test_regression_predictions_cover_hidden_cells():
    times = np.array([[0.0], [0.1], [0.2], [0.3], [0.4]])
    truth = CascadeSet(times, np.ones((5, 1), bool), 1.0)
    observed = CascadeSet(times, np.array([[1], [1], [0], [1], [1]], bool), 1.0)
    preds = regression_predictions(truth, observed, 1)
    # observed sequence 0, .1, .3, .4 flanks the gap at indices 1 and 2
    assert set(preds) == {(2, 0)}
    assert preds[(2, 0)] == pytest.approx(np.polyval(np.polyfit(np.arange(4), [0, 0.1, 0.3, 0.4], 1), 1.5))
    sparse = CascadeSet(times, np.array([[1], [0], [0], [0], [0]], bool), 1.0)
    assert regression_predictions(truth, sparse, 1) == {}
