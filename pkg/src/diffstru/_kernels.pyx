# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_kernels_py`` draw-for-draw."""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, log, sqrt, erfc, fabs, M_PI
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_uniform,
    random_standard_exponential,
    random_standard_normal,
)

cnp.import_array()

BACKEND = "cython"

cdef double TRUNC = 0.64
cdef double PI2_8 = M_PI * M_PI / 8.0
cdef double SQRT2 = sqrt(2.0)
cdef const char *CAPSULE_NAME = "BitGenerator"


cdef inline double _norm_cdf(double x) noexcept nogil:
    return 0.5 * erfc(-x / SQRT2)


cdef double _ig_cdf_at_trunc(double z) noexcept nogil:
    cdef double rt = sqrt(1.0 / TRUNC)
    cdef double b = rt * (TRUNC * z - 1.0)
    cdef double a = -rt * (TRUNC * z + 1.0)
    cdef double lower = exp(-z) * _norm_cdf(b)
    cdef double tail = erfc(-a / SQRT2)
    cdef double upper = 0.0
    if tail != 0.0:
        upper = exp(z + log(0.5 * tail))
    return lower + upper


cdef inline double _series_coef(int n, double x) noexcept nogil:
    cdef double k = n + 0.5
    if x > TRUNC:
        return exp(log(M_PI * k) - 0.5 * k * k * M_PI * M_PI * x)
    return exp(log(M_PI * k) + 1.5 * log(2.0 / (M_PI * x)) - 2.0 * k * k / x)


cdef double _truncated_inv_gauss(double z, bitgen_t *rng) noexcept nogil:
    cdef double t = TRUNC
    cdef double e1, e2, x, alpha, mu, y, mu_y
    if z < 1.0 / t:
        while True:
            e1 = random_standard_exponential(rng)
            e2 = random_standard_exponential(rng)
            while e1 * e1 > 2.0 * e2 / t:
                e1 = random_standard_exponential(rng)
                e2 = random_standard_exponential(rng)
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = exp(-0.5 * z * z * x)
            if random_standard_uniform(rng) <= alpha:
                return x
    mu = 1.0 / z
    while True:
        y = random_standard_normal(rng)
        y = y * y
        mu_y = mu * y
        x = mu + 0.5 * mu * mu_y - 0.5 * mu * sqrt(4.0 * mu_y + mu_y * mu_y)
        if random_standard_uniform(rng) > mu / (mu + x):
            x = mu * mu / x
        if x <= t:
            return x


cdef double _pg1_draw(double c, bitgen_t *rng) noexcept nogil:
    cdef double z = 0.5 * fabs(c)
    cdef double k = PI2_8 + 0.5 * z * z
    cdef double p = M_PI / (2.0 * k) * exp(-k * TRUNC)
    cdef double q = 2.0 * _ig_cdf_at_trunc(z)
    cdef double ratio = p / (p + q)
    cdef double x, s, y
    cdef int n
    while True:
        if random_standard_uniform(rng) < ratio:
            x = TRUNC + random_standard_exponential(rng) / k
        else:
            x = _truncated_inv_gauss(z, rng)
        s = _series_coef(0, x)
        y = random_standard_uniform(rng) * s
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


def pg1_draw(double c, rng):
    cdef double out
    bit_generator = rng.bit_generator
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("invalid bit generator capsule")
    cdef bitgen_t *state = <bitgen_t *> PyCapsule_GetPointer(capsule, CAPSULE_NAME)
    with bit_generator.lock:
        out = _pg1_draw(c, state)
    return out


def pg1_fill(c, rng, out):
    cdef double[::1] flat_c = np.ascontiguousarray(c, dtype=np.float64).ravel()
    cdef double[::1] flat_out = out.reshape(-1)
    cdef Py_ssize_t idx, n = flat_c.shape[0]
    bit_generator = rng.bit_generator
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("invalid bit generator capsule")
    cdef bitgen_t *state = <bitgen_t *> PyCapsule_GetPointer(capsule, CAPSULE_NAME)
    with bit_generator.lock, nogil:
        for idx in range(n):
            flat_out[idx] = _pg1_draw(flat_c[idx], state)
    return out


def transfer_counts(const double[:, :] times, const cnp.uint8_t[:, :] observed):
    cdef Py_ssize_t n_nodes = times.shape[0], n_cascades = times.shape[1]
    cdef Py_ssize_t col, a, b, i, j, n_obs
    cdef cnp.ndarray[cnp.int64_t, ndim=2] num_arr = np.zeros((n_nodes, n_nodes), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] num = num_arr
    cdef Py_ssize_t[::1] idx = np.empty(n_nodes, dtype=np.intp)
    with nogil:
        for col in range(n_cascades):
            n_obs = 0
            for i in range(n_nodes):
                if observed[i, col]:
                    idx[n_obs] = i
                    n_obs += 1
            for a in range(n_obs):
                i = idx[a]
                for b in range(n_obs):
                    j = idx[b]
                    if times[i, col] < times[j, col]:
                        num[i, j] += 1
    return num_arr
