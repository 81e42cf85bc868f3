"""Pure-Python versions of the hot kernels.

Every random draw goes through ``numpy.random.Generator`` scalar calls in
the same order as the compiled kernels in ``_kernels.pyx``, so both backends
yield bit-identical output for the same generator state.
"""
import math

import numpy as np

BACKEND = "python"

# Devroye switch point between the two series representations.
_TRUNC = 0.64
_PI2_8 = math.pi * math.pi / 8.0
_SQRT2 = math.sqrt(2.0)


def _norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


def _ig_cdf_at_trunc(z):
    """P(IG(1/z, 1) < TRUNC), computed without overflowing exp(z)."""
    rt = math.sqrt(1.0 / _TRUNC)
    b = rt * (_TRUNC * z - 1.0)
    a = -rt * (_TRUNC * z + 1.0)
    lower = math.exp(-z) * _norm_cdf(b)
    tail = math.erfc(-a / _SQRT2)
    upper = 0.0 if tail == 0.0 else math.exp(z + math.log(0.5 * tail))
    # exp(-z) * (Phi(b) + exp(2z) Phi(a))
    return lower + upper


def _series_coef(n, x):
    k = n + 0.5
    if x > _TRUNC:
        return math.exp(math.log(math.pi * k) - 0.5 * k * k * math.pi * math.pi * x)
    return math.exp(math.log(math.pi * k) + 1.5 * math.log(2.0 / (math.pi * x)) - 2.0 * k * k / x)


def _truncated_inv_gauss(z, rng):
    """Draw from IG(1/z, 1) restricted to (0, TRUNC)."""
    t = _TRUNC
    if z < 1.0 / t:
        while True:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
            if rng.random() <= alpha:
                return x
    mu = 1.0 / z
    while True:
        y = rng.standard_normal()
        y = y * y
        mu_y = mu * y
        x = mu + 0.5 * mu * mu_y - 0.5 * mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
        if rng.random() > mu / (mu + x):
            x = mu * mu / x
        if x <= t:
            return x


def pg1_draw(c, rng):
    """One exact draw from PG(1, c)."""
    z = 0.5 * abs(c)
    k = _PI2_8 + 0.5 * z * z
    p = math.pi / (2.0 * k) * math.exp(-k * _TRUNC)
    q = 2.0 * _ig_cdf_at_trunc(z)
    ratio = p / (p + q)
    while True:
        if rng.random() < ratio:
            x = _TRUNC + rng.standard_exponential() / k
        else:
            x = _truncated_inv_gauss(z, rng)
        s = _series_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _series_coef(n, x)
                if y > s:
                    break


def pg1_fill(c, rng, out):
    flat_c = np.ascontiguousarray(c, dtype=np.float64).ravel()
    flat_out = out.reshape(-1)
    for idx in range(flat_c.shape[0]):
        flat_out[idx] = pg1_draw(float(flat_c[idx]), rng)
    return out


def transfer_counts(times, observed):
    """num[i, j] = number of cascades where i and j are both observed and t_i < t_j."""
    n_nodes, n_cascades = times.shape
    num = np.zeros((n_nodes, n_nodes), dtype=np.int64)
    for col in range(n_cascades):
        idx = np.flatnonzero(observed[:, col])
        if idx.size < 2:
            continue
        t = times[idx, col]
        num[np.ix_(idx, idx)] += t[:, None] < t[None, :]
    return num
