"""Random-intercept logit (GLMM) by Laplace or adaptive Gauss-Hermite quadrature.

For a fixed random-intercept variance the fixed effects and cluster modes are
found jointly by penalized IRLS, written as Newton steps on the profile in
the fixed effects (each step re-solves the per-cluster modes and uses the
Schur complement of the joint Hessian). The variance is then chosen by a
bounded one-dimensional search on the approximate marginal log-likelihood.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import linalg
from scipy.optimize import minimize_scalar
from scipy.special import expit
from scipy.stats import norm

from .. import kernels
from .design import check_rank
from .logistic import ConvergenceError, open_unit

logger = logging.getLogger(__name__)


class GlmmConvergenceError(ConvergenceError):
    pass


@dataclass
class GlmmFit:
    beta: np.ndarray
    cov: np.ndarray
    sigma2: float
    loglik: float
    converged: bool
    n_obs: int
    n_clusters: int
    columns: list[str]
    method: str
    modes: np.ndarray  # per cluster, in order of `cluster_labels`
    cluster_labels: np.ndarray
    eta_fixed: np.ndarray  # X beta, original row order
    fitted: np.ndarray  # conditional probabilities, original row order
    eta_conditional: np.ndarray  # X beta + b, original row order
    boundary: bool = False
    at_upper_bound: bool = False
    history: list[tuple[float, float]] = field(default_factory=list)
    y: np.ndarray | None = None

    @property
    def se(self):
        return np.sqrt(np.diag(self.cov))

    @property
    def z(self):
        return self.beta / self.se

    @property
    def p_values(self):
        return 2.0 * norm.sf(np.abs(self.z))

    @property
    def n_params(self) -> int:
        return self.beta.size

    @property
    def n_variance_params(self) -> int:
        return 1

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * (self.n_params + 1)

    @property
    def bic(self) -> float:
        return -2.0 * self.loglik + np.log(self.n_obs) * (self.n_params + 1)

    @property
    def fixed_predictor(self):
        return self.eta_fixed

    @property
    def linear_predictor(self):
        return self.eta_conditional


@dataclass
class _Clusters:
    order: np.ndarray
    inverse: np.ndarray
    offsets: np.ndarray
    sizes: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_ids(cls, ids):
        labels, codes = np.unique(np.asarray(ids), return_inverse=True)
        order = np.argsort(codes, kind="stable")
        sizes = np.bincount(codes, minlength=labels.size)
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        inverse = np.empty_like(order)
        inverse[order] = np.arange(order.size)
        return cls(order, inverse, offsets, sizes, labels)


@dataclass
class _State:
    beta: np.ndarray
    b: np.ndarray
    d: np.ndarray
    schur: np.ndarray
    eta: np.ndarray
    penalized: float
    converged: bool
    n_iter: int


class _Problem:
    def __init__(self, X, y, clusters: _Clusters, tol=1e-8, max_iter=100):
        self.X = np.ascontiguousarray(X[clusters.order])
        self.y = np.ascontiguousarray(y[clusters.order], dtype=float)
        self.cl = clusters
        self.tol = tol
        self.max_iter = max_iter

    def modes(self, eta, sigma2, b0):
        b, d, ok = kernels.cluster_modes(
            np.ascontiguousarray(eta), self.y, self.cl.offsets, float(sigma2), np.ascontiguousarray(b0)
        )
        return b, d, ok

    def penalized(self, eta, b, sigma2):
        ll = kernels.cluster_loglik(np.ascontiguousarray(eta), self.y, self.cl.offsets, b).sum()
        if sigma2 > 0:
            ll -= 0.5 * np.sum(b * b) / sigma2
        return float(ll)

    def pirls(self, sigma2, beta0, b0) -> _State:
        X, y, cl = self.X, self.y, self.cl
        beta = beta0.copy()
        eta = X @ beta
        b, d, ok = self.modes(eta, sigma2, b0)
        pen = self.penalized(eta, b, sigma2)
        converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            p = expit(eta + np.repeat(b, cl.sizes))
            w = p * (1 - p)
            grad = X.T @ (y - p)
            schur = self._schur(w, d, sigma2)
            if np.max(np.abs(grad)) < self.tol:
                converged = True
                break
            step = linalg.solve(schur, grad, assume_a="pos")
            t = 1.0
            while True:
                cand = beta + t * step
                eta_c = X @ cand
                b_c, d_c, ok = self.modes(eta_c, sigma2, b)
                pen_c = self.penalized(eta_c, b_c, sigma2)
                if pen_c >= pen - 1e-10 or t < 1e-6:
                    break
                t *= 0.5
            change = pen_c - pen
            beta, eta, b, d, pen = cand, eta_c, b_c, d_c, pen_c
            if abs(change) < 1e-12 and t == 1.0:
                p = expit(eta + np.repeat(b, cl.sizes))
                schur = self._schur(p * (1 - p), d, sigma2)
                converged = True
                break
        else:
            p = expit(eta + np.repeat(b, cl.sizes))
            schur = self._schur(p * (1 - p), d, sigma2)
        return _State(beta, b, d, schur, eta, pen, converged and ok, it)

    def _schur(self, w, d, sigma2):
        X = self.X
        info = (X * w[:, None]).T @ X
        if sigma2 <= 0:
            return info
        C = np.add.reduceat(X * w[:, None], self.cl.offsets[:-1], axis=0)
        h = d + 1.0 / sigma2
        return info - (C / h[:, None]).T @ C

    def laplace(self, st: _State, sigma2) -> float:
        ll = kernels.cluster_loglik(st.eta, self.y, self.cl.offsets, st.b).sum()
        if sigma2 <= 0:
            return float(ll)
        return float(ll - 0.5 * np.sum(st.b**2) / sigma2 - 0.5 * np.sum(np.log1p(sigma2 * st.d)))

    def agq(self, st: _State, sigma2, nodes, weights) -> float:
        if sigma2 <= 0:
            return self.laplace(st, sigma2)
        h = st.d + 1.0 / sigma2
        return float(
            kernels.agq_log_integrals(st.eta, self.y, self.cl.offsets, st.b, h, float(sigma2), nodes, weights).sum()
        )

    def _at(self, beta, sigma2, b0) -> _State:
        eta = np.ascontiguousarray(self.X @ beta)
        b, d, ok = self.modes(eta, sigma2, b0)
        return _State(beta, b, d, np.empty((0, 0)), eta, 0.0, ok, 0)

    def _gradient(self, st: _State, sigma2, quad):
        """Gradient of the approximate marginal log-likelihood in ``beta``.

        Laplace: exact total derivative, including the dependence of the
        modes and of the curvature term on ``beta``. Quadrature: posterior
        mean of the score over the (fixed) adaptive nodes.
        """
        sizes = self.cl.sizes
        p = expit(st.eta + np.repeat(st.b, sizes))
        w = p * (1 - p)
        if sigma2 <= 0:
            return self.X.T @ (self.y - p), w
        if quad is None:
            h = st.d + 1.0 / sigma2
            a = sigma2 / (1.0 + sigma2 * st.d)
            t = np.add.reduceat(w * (1 - 2 * p), self.cl.offsets[:-1])
            r = (self.y - p) - 0.5 * np.repeat(a, sizes) * w * (1 - 2 * p) + 0.5 * np.repeat(a * t / h, sizes) * w
            return self.X.T @ r, w
        nodes, weights = quad
        h = st.d + 1.0 / sigma2
        r, _ = kernels.agq_posterior_residuals(st.eta, self.y, self.cl.offsets, st.b, h, float(sigma2), nodes, weights)
        return self.X.T @ r, w

    def refine(self, start: _State, sigma2, quad) -> _State:
        """Maximise the approximate marginal likelihood over ``beta`` at fixed variance.

        BFGS on the inverse Hessian, seeded with the penalized-IRLS curvature
        (Schur complement), with step halving on the objective. The seed is
        exact at zero variance and the updates repair it where the curvature
        of the log-determinant term matters.
        """

        def value(st):
            return self.laplace(st, sigma2) if quad is None else self.agq(st, sigma2, *quad)

        st = start
        val = value(st)
        grad, w = self._gradient(st, sigma2, quad)
        schur = self._schur(w, st.d, sigma2)
        H = linalg.inv(schur)
        converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            if np.max(np.abs(grad)) < self.tol:
                converged = True
                break
            step = H @ grad
            if step @ grad <= 0:
                H = linalg.inv(schur)
                step = H @ grad
            t = 1.0
            while True:
                cand = self._at(st.beta + t * step, sigma2, st.b)
                val_c = value(cand)
                if val_c >= val - 1e-12 or t < 1e-6:
                    break
                t *= 0.5
            grad_c, w = self._gradient(cand, sigma2, quad)
            s_vec = cand.beta - st.beta
            y_vec = grad - grad_c
            sy = s_vec @ y_vec
            if sy > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
                Hy = H @ y_vec
                H = H + ((sy + y_vec @ Hy) / sy**2) * np.outer(s_vec, s_vec) - (np.outer(Hy, s_vec) + np.outer(s_vec, Hy)) / sy
            change = val_c - val
            st, val, grad = cand, val_c, grad_c
            schur = self._schur(w, st.d, sigma2)
            if abs(change) < 1e-13 * max(1.0, abs(val)) and np.max(np.abs(s_vec)) < 1e-8:
                converged = True
                break
        return _State(st.beta, st.b, st.d, schur, st.eta, val, converged and start.converged, it)

    def observed_cov(self, st: _State, sigma2, quad):
        """Inverse observed information over ``(beta, sigma)``, ``beta`` block.

        The fixed effects and the variance are not orthogonal in a logit
        GLMM, so the fixed-variance curvature understates the sampling
        variance. Differences of the analytic ``beta`` gradient, with the
        ``sigma`` derivative taken from central differences of the objective.
        """
        k = st.beta.size
        s0 = np.sqrt(sigma2)

        def value(beta, s):
            cur = self._at(beta, s * s, st.b)
            return self.laplace(cur, s * s) if quad is None else self.agq(cur, s * s, *quad)

        def full_grad(theta):
            beta, s = theta[:k], theta[k]
            cur = self._at(beta, s * s, st.b)
            g, _ = self._gradient(cur, s * s, quad)
            e = 1e-5 * max(1.0, s)
            gs = (value(beta, s + e) - value(beta, s - e)) / (2 * e)
            return np.append(g, gs)

        theta = np.append(st.beta, s0)
        H = np.empty((k + 1, k + 1))
        for j in range(k + 1):
            e = 1e-4 * max(1.0, abs(theta[j]))
            up, dn = theta.copy(), theta.copy()
            up[j] += e
            dn[j] -= e
            H[:, j] = (full_grad(up) - full_grad(dn)) / (2 * e)
        info = -0.5 * (H + H.T)
        try:
            cov = linalg.inv(info)
        except linalg.LinAlgError:
            return None
        cb = cov[:k, :k]
        if not np.all(np.isfinite(cb)) or np.any(np.diag(cb) <= 0) or cov[k, k] <= 0:
            return None
        return 0.5 * (cb + cb.T)


def _parse_method(method):
    if method == "laplace":
        return "laplace", 1
    if isinstance(method, tuple) and method[0] == "agq":
        return "agq", int(method[1])
    if isinstance(method, str) and method.startswith("agq"):
        k = int(method[3:].strip("()") or 1)
        return "agq", k
    raise ValueError(f"unknown method {method!r}; use 'laplace' or 'agq(k)'")


def fit_glmm(
    X,
    y,
    cluster_ids,
    method="laplace",
    columns=None,
    sigma2: float | None = None,
    max_sd: float = 10.0,
    tol: float = 1e-8,
    max_iter: int = 100,
    check: bool = True,
) -> GlmmFit:
    """Fit ``logit P(y=1) = X beta + u_cluster`` with ``u ~ N(0, sigma2)``.

    ``method`` is ``"laplace"`` or ``"agq(k)"`` (also ``("agq", k)``). Pass
    ``sigma2`` to hold the variance fixed instead of estimating it. A fit
    whose variance lands on zero is reported with ``boundary=True``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    columns = list(columns) if columns is not None else [f"x{j}" for j in range(k)]
    if check:
        check_rank(X, columns)
    cl = _Clusters.from_ids(cluster_ids)
    if cl.labels.size < 2:
        raise ValueError("need at least two clusters")
    kind, nagq = _parse_method(method)
    nodes, weights = hermgauss(nagq)
    prob = _Problem(X, y, cl, tol=tol, max_iter=max_iter)

    # one-node quadrature is the Laplace approximation; share its code path
    quad = None if (kind == "laplace" or nagq == 1) else (nodes, weights)

    beta0 = np.zeros(k)
    if columns[0] == "(Intercept)":
        ybar = np.clip(y.mean(), 1e-6, 1 - 1e-6)
        beta0[0] = np.log(ybar / (1 - ybar))
    warm = {"beta": beta0, "b": np.zeros(cl.labels.size)}
    history: list[tuple[float, float]] = []
    cache: dict[float, tuple[_State, float]] = {}

    def evaluate(s2):
        s2 = float(s2)
        if s2 in cache:
            return cache[s2]
        st = prob.pirls(s2, warm["beta"], warm["b"])
        if not np.all(np.isfinite(st.beta)):
            raise GlmmConvergenceError("non-finite coefficients in penalized IRLS", last=st)
        st = prob.refine(st, s2, quad)
        warm["beta"], warm["b"] = st.beta, st.b
        val = st.penalized
        cache[s2] = (st, val)
        if not history or val > history[-1][1]:
            history.append((s2, val))
        return st, val

    if sigma2 is not None:
        if sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")
        best_s2 = float(sigma2)
    else:
        st0, val0 = evaluate(0.0)
        res = minimize_scalar(
            lambda s: -evaluate(s * s)[1],
            bounds=(0.0, max_sd),
            method="bounded",
            options={"xatol": 1e-6, "maxiter": 200},
        )
        s_hat = float(res.x) ** 2
        _, val_hat = evaluate(s_hat)
        best_s2 = s_hat if val_hat > val0 else 0.0
        if not res.success:
            st, _ = evaluate(best_s2)
            raise GlmmConvergenceError("variance search did not converge", last=st)

    st, val = evaluate(best_s2)
    at_upper = sigma2 is None and np.sqrt(best_s2) >= max_sd * (1 - 1e-4)
    if at_upper:
        logger.warning(
            "variance estimate on the upper search bound (sd=%g); the %s objective may be unbounded in sigma2",
            max_sd,
            method,
        )
    if not st.converged:
        raise GlmmConvergenceError(f"penalized IRLS did not converge in {max_iter} iterations", last=st)
    cov = linalg.inv(st.schur)
    if sigma2 is None and best_s2 > 0:
        full = prob.observed_cov(st, best_s2, quad)
        if full is not None:
            cov = full
    eta_fixed = (prob.X @ st.beta)[cl.inverse]
    eta_cond = (prob.X @ st.beta + np.repeat(st.b, cl.sizes))[cl.inverse]
    fitted = open_unit(expit(eta_cond))
    logger.info("GLMM (%s): sigma2=%.6g loglik=%.6f", method, best_s2, val)
    return GlmmFit(
        beta=st.beta,
        cov=cov,
        sigma2=best_s2,
        loglik=val,
        converged=True,
        n_obs=n,
        n_clusters=int(cl.labels.size),
        columns=columns,
        method=kind if kind == "laplace" else f"agq({nagq})",
        modes=st.b,
        cluster_labels=cl.labels,
        eta_fixed=eta_fixed,
        fitted=fitted,
        eta_conditional=eta_cond,
        boundary=best_s2 <= 0.0,
        at_upper_bound=bool(at_upper),
        history=history,
        y=y,
    )


def marginal_loglik(X, y, cluster_ids, beta, sigma2, method="laplace") -> float:
    """Approximate marginal log-likelihood at given ``beta`` and ``sigma2``.

    The cluster modes are solved for the supplied ``beta``; no fixed-effect
    optimisation happens here.
    """
    X = np.asarray(X, dtype=float)
    cl = _Clusters.from_ids(cluster_ids)
    prob = _Problem(X, np.asarray(y, dtype=float), cl)
    eta = prob.X @ np.asarray(beta, dtype=float)
    b, d, _ = prob.modes(eta, sigma2, np.zeros(cl.labels.size))
    st = _State(np.asarray(beta), b, d, np.empty((0, 0)), np.ascontiguousarray(eta), 0.0, True, 0)
    kind, nagq = _parse_method(method)
    if kind == "laplace":
        return prob.laplace(st, sigma2)
    nodes, weights = hermgauss(nagq)
    return prob.agq(st, sigma2, nodes, weights)
