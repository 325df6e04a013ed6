"""Pure-NumPy versions of the compiled kernels in ``_kernels.pyx``."""
from __future__ import annotations

import numpy as np
from scipy.special import expit


def _log1pexp(x):
    return np.logaddexp(0.0, x)


def _segment_sum(values, offsets):
    # reduceat mishandles empty segments; clusters are never empty here
    if values.ndim == 1:
        return np.add.reduceat(values, offsets[:-1]) if values.size else np.zeros(len(offsets) - 1)
    return np.add.reduceat(values, offsets[:-1], axis=0)


MAX_STEP = 2.0


def cluster_modes(eta, y, offsets, sigma2, b0, tol=1e-10, maxiter=200):
    G = len(offsets) - 1
    sizes = np.diff(offsets)
    if sigma2 <= 0:
        p = expit(eta)
        return np.zeros(G), _segment_sum(p * (1 - p), offsets), True
    b = np.array(b0, dtype=float, copy=True)
    active = np.ones(G, dtype=bool)
    inv_s2 = 1.0 / sigma2
    for _ in range(maxiter):
        p = expit(eta + np.repeat(b, sizes))
        g = _segment_sum(y - p, offsets) - b * inv_s2
        h = _segment_sum(p * (1 - p), offsets) + inv_s2
        step = np.where(active, np.clip(g / h, -MAX_STEP, MAX_STEP), 0.0)
        b += step
        active &= np.abs(step) >= tol
        if not active.any():
            break
    p = expit(eta + np.repeat(b, sizes))
    return b, _segment_sum(p * (1 - p), offsets), not active.any()


def cluster_loglik(eta, y, offsets, b):
    e = eta + np.repeat(b, np.diff(offsets))
    return _segment_sum(y * e - _log1pexp(e), offsets)


def agq_log_integrals(eta, y, offsets, b, h, sigma2, nodes, weights):
    sizes = np.diff(offsets)
    scale = np.sqrt(2.0 / h)
    bk = b[:, None] + scale[:, None] * nodes[None, :]  # (G, K)
    e = eta[:, None] + np.repeat(bk, sizes, axis=0)  # (n, K)
    f = _segment_sum(y[:, None] * e - _log1pexp(e), offsets)
    f += -0.5 * bk**2 / sigma2 - 0.5 * np.log(2 * np.pi * sigma2)
    f += nodes**2 + np.log(weights)
    fmax = f.max(axis=1, keepdims=True)
    return (fmax[:, 0] + np.log(np.exp(f - fmax).sum(axis=1))) + np.log(scale)


def rank_sum_counts(doubled_ranks, n1):
    total = int(np.sum(doubled_ranks))
    dp = np.zeros((n1 + 1, total + 1), dtype=np.int64)
    dp[0, 0] = 1
    for i, r in enumerate(doubled_ranks):
        r = int(r)
        for j in range(min(i + 1, n1), 0, -1):
            dp[j, r:] += dp[j - 1, : total + 1 - r]
    return dp[n1].copy()


def agq_posterior_residuals(eta, y, offsets, b, h, sigma2, nodes, weights):
    sizes = np.diff(offsets)
    scale = np.sqrt(2.0 / h)
    bk = b[:, None] + scale[:, None] * nodes[None, :]
    e = eta[:, None] + np.repeat(bk, sizes, axis=0)
    f = _segment_sum(y[:, None] * e - _log1pexp(e), offsets)
    f += -0.5 * bk**2 / sigma2 - 0.5 * np.log(2 * np.pi * sigma2)
    f += nodes**2 + np.log(weights)
    fmax = f.max(axis=1, keepdims=True)
    ex = np.exp(f - fmax)
    acc = ex.sum(axis=1)
    logs = fmax[:, 0] + np.log(acc) + np.log(scale)
    omega = np.repeat(ex / acc[:, None], sizes, axis=0)
    resid = np.sum(omega * (y[:, None] - expit(e)), axis=1)
    return resid, logs
