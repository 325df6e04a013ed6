# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: per-cluster random-intercept modes, adaptive
Gauss-Hermite cluster integrals, and the exact rank-sum null distribution.

The pure-NumPy twin lives in ``_kernels_py``; both expose identical
signatures and are checked against each other in the test-suite.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, sqrt, fabs

cnp.import_array()

cdef double MAX_STEP = 2.0


cdef inline double _log1pexp(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double _expit(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def cluster_modes(const double[::1] eta, const double[::1] y, const long[::1] offsets,
                  double sigma2, const double[::1] b0, double tol=1e-10, int maxiter=200):
    """Newton iterations for each cluster's posterior mode of its intercept.

    Returns ``(b, d, ok)`` where ``d[i]`` is the summed binomial weight at the
    mode and ``ok`` is False if some cluster failed to converge.
    """
    cdef Py_ssize_t G = offsets.shape[0] - 1
    cdef Py_ssize_t i, j, it
    cdef double bi, g, h, p, w, step, inv_s2, sw
    cdef bint ok = True, done
    out_b = np.zeros(G, dtype=np.float64)
    out_d = np.zeros(G, dtype=np.float64)
    cdef double[::1] b = out_b
    cdef double[::1] d = out_d
    with nogil:
        if sigma2 <= 0:
            for i in range(G):
                sw = 0.0
                for j in range(offsets[i], offsets[i + 1]):
                    p = _expit(eta[j])
                    sw += p * (1.0 - p)
                d[i] = sw
        else:
            inv_s2 = 1.0 / sigma2
            for i in range(G):
                bi = b0[i]
                done = False
                for it in range(maxiter):
                    g = -bi * inv_s2
                    sw = 0.0
                    for j in range(offsets[i], offsets[i + 1]):
                        p = _expit(eta[j] + bi)
                        g += y[j] - p
                        sw += p * (1.0 - p)
                    h = sw + inv_s2
                    step = g / h
                    # flat likelihood tails make raw Newton steps overshoot
                    if step > MAX_STEP:
                        step = MAX_STEP
                    elif step < -MAX_STEP:
                        step = -MAX_STEP
                    bi += step
                    if fabs(step) < tol:
                        done = True
                        break
                if not done:
                    ok = False
                sw = 0.0
                for j in range(offsets[i], offsets[i + 1]):
                    p = _expit(eta[j] + bi)
                    sw += p * (1.0 - p)
                b[i] = bi
                d[i] = sw
    return out_b, out_d, bool(ok)


def cluster_loglik(const double[::1] eta, const double[::1] y, const long[::1] offsets,
                   const double[::1] b):
    """Bernoulli log-likelihood of each cluster at intercept shift ``b``."""
    cdef Py_ssize_t G = offsets.shape[0] - 1
    cdef Py_ssize_t i, j
    cdef double s, e
    out = np.zeros(G, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(G):
            s = 0.0
            for j in range(offsets[i], offsets[i + 1]):
                e = eta[j] + b[i]
                s += y[j] * e - _log1pexp(e)
            o[i] = s
    return out


def agq_log_integrals(const double[::1] eta, const double[::1] y, const long[::1] offsets,
                      const double[::1] b, const double[::1] h, double sigma2,
                      const double[::1] nodes, const double[::1] weights):
    """log of each cluster's marginal likelihood by mode-centred quadrature.

    ``nodes``/``weights`` are physicists' Gauss-Hermite rules; ``h`` holds the
    curvature of the log-posterior at the mode ``b``.
    """
    cdef Py_ssize_t G = offsets.shape[0] - 1
    cdef Py_ssize_t K = nodes.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double scale, bk, f, e, fmax, acc
    cdef double log_norm = -0.5 * log(2.0 * 3.141592653589793 * sigma2)
    out = np.zeros(G, dtype=np.float64)
    fk_buf = np.zeros(K, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] fk = fk_buf
    with nogil:
        for i in range(G):
            scale = sqrt(2.0 / h[i])
            fmax = -1e300
            for k in range(K):
                bk = b[i] + scale * nodes[k]
                f = -0.5 * bk * bk / sigma2 + log_norm
                for j in range(offsets[i], offsets[i + 1]):
                    e = eta[j] + bk
                    f += y[j] * e - _log1pexp(e)
                f += nodes[k] * nodes[k] + log(weights[k])
                fk[k] = f
                if f > fmax:
                    fmax = f
            acc = 0.0
            for k in range(K):
                acc += exp(fk[k] - fmax)
            o[i] = fmax + log(acc) + log(scale)
    return out


def rank_sum_counts(const long[::1] doubled_ranks, int n1):
    """Number of size-``n1`` subsets attaining each doubled rank sum.

    Subset-sum dynamic programme; index ``s`` of the result counts subsets
    whose doubled ranks add up to ``s``.
    """
    cdef Py_ssize_t n = doubled_ranks.shape[0]
    cdef Py_ssize_t i, j, s, r
    cdef long total = 0
    for i in range(n):
        total += doubled_ranks[i]
    table = np.zeros((n1 + 1, total + 1), dtype=np.int64)
    cdef long long[:, ::1] dp = table
    dp[0, 0] = 1
    for i in range(n):
        r = doubled_ranks[i]
        for j in range(min(i + 1, n1), 0, -1):
            for s in range(total, r - 1, -1):
                dp[j, s] += dp[j - 1, s - r]
    return table[n1].copy()


def agq_posterior_residuals(const double[::1] eta, const double[::1] y, const long[::1] offsets,
                            const double[::1] b, const double[::1] h, double sigma2,
                            const double[::1] nodes, const double[::1] weights):
    """Quadrature-weighted posterior mean of ``y - p`` for every observation.

    Returns ``(resid, log_integrals)``; ``X.T @ resid`` is the gradient of the
    summed log integrals in the fixed effects (node positions held fixed).
    """
    cdef Py_ssize_t G = offsets.shape[0] - 1
    cdef Py_ssize_t K = nodes.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double scale, bk, f, e, fmax, acc
    cdef double log_norm = -0.5 * log(2.0 * 3.141592653589793 * sigma2)
    out_r = np.zeros(eta.shape[0], dtype=np.float64)
    out_l = np.zeros(G, dtype=np.float64)
    fk_buf = np.zeros(K, dtype=np.float64)
    cdef double[::1] r = out_r
    cdef double[::1] o = out_l
    cdef double[::1] fk = fk_buf
    with nogil:
        for i in range(G):
            scale = sqrt(2.0 / h[i])
            fmax = -1e300
            for k in range(K):
                bk = b[i] + scale * nodes[k]
                f = -0.5 * bk * bk / sigma2 + log_norm
                for j in range(offsets[i], offsets[i + 1]):
                    e = eta[j] + bk
                    f += y[j] * e - _log1pexp(e)
                f += nodes[k] * nodes[k] + log(weights[k])
                fk[k] = f
                if f > fmax:
                    fmax = f
            acc = 0.0
            for k in range(K):
                fk[k] = exp(fk[k] - fmax)
                acc += fk[k]
            o[i] = fmax + log(acc) + log(scale)
            for k in range(K):
                bk = b[i] + scale * nodes[k]
                for j in range(offsets[i], offsets[i + 1]):
                    r[j] += (fk[k] / acc) * (y[j] - _expit(eta[j] + bk))
    return out_r, out_l
