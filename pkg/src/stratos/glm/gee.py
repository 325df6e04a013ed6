"""Population-averaged logit by generalized estimating equations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import expit
from scipy.stats import norm

from .design import check_rank
from .glmm import _Clusters
from .logistic import ConvergenceError, open_unit

WORKING = ("independence", "exchangeable")


class GeeConvergenceError(ConvergenceError):
    pass


@dataclass
class GeeFit:
    beta: np.ndarray
    cov: np.ndarray  # cluster-robust sandwich
    cov_naive: np.ndarray
    working_correlation: str
    alpha: float
    n_obs: int
    n_clusters: int
    columns: list[str] = field(default_factory=list)
    converged: bool = True
    n_iter: int = 0
    fitted: np.ndarray | None = None
    eta: np.ndarray | None = None
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
        return 0

    @property
    def linear_predictor(self):
        return self.eta

    @property
    def fixed_predictor(self):
        return self.eta


def _exchangeable_alpha(r, offsets, sizes, n_params):
    """Moment estimate of the common within-cluster correlation."""
    n = r.size
    phi = np.sum(r * r) / max(n - n_params, 1)
    s = np.add.reduceat(r, offsets[:-1])
    ss = np.add.reduceat(r * r, offsets[:-1])
    pairs = np.sum(sizes * (sizes - 1) / 2.0)
    if pairs - n_params <= 0:
        return 0.0
    alpha = np.sum((s * s - ss) / 2.0) / ((pairs - n_params) * phi)
    return float(np.clip(alpha, -1.0 / max(sizes.max() - 1, 1) + 1e-8, 0.999))


def _pieces(Xt, rt, offsets, sizes, alpha):
    """Bread ``sum D'V^-1 D`` and per-cluster scores ``D_i'V_i^-1 (y_i - mu_i)``.

    ``Xt`` and ``rt`` are the variance-scaled design and Pearson residuals;
    the exchangeable inverse is applied in closed form.
    """
    starts = offsets[:-1]
    xs = np.add.reduceat(Xt, starts, axis=0)  # (G, k)
    U = np.add.reduceat(Xt * rt[:, None], starts, axis=0)
    bread = Xt.T @ Xt
    if alpha != 0.0:
        c = alpha / (1.0 + (sizes - 1) * alpha)
        rs = np.add.reduceat(rt, starts)
        bread = (bread - (xs * c[:, None]).T @ xs) / (1.0 - alpha)
        U = (U - xs * (c * rs)[:, None]) / (1.0 - alpha)
    return bread, U


def fit_gee(
    X,
    y,
    cluster_ids,
    working: str = "independence",
    columns=None,
    tol: float = 1e-10,
    max_iter: int = 100,
    check: bool = True,
) -> GeeFit:
    """Solve the logit GEE by Fisher scoring; covariance is the sandwich."""
    if working not in WORKING:
        raise ValueError(f"working correlation must be one of {WORKING}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    columns = list(columns) if columns is not None else [f"x{j}" for j in range(k)]
    if check:
        check_rank(X, columns)
    cl = _Clusters.from_ids(cluster_ids)
    Xs, ys = X[cl.order], y[cl.order]
    beta = np.zeros(k)
    if columns[0] == "(Intercept)":
        ybar = np.clip(y.mean(), 1e-6, 1 - 1e-6)
        beta[0] = np.log(ybar / (1 - ybar))
    alpha = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = expit(Xs @ beta)
        v = mu * (1 - mu)
        sq = np.sqrt(v)
        Xt = Xs * sq[:, None]
        rt = (ys - mu) / sq
        if working == "exchangeable":
            alpha = _exchangeable_alpha(rt, cl.offsets, cl.sizes, k)
        bread, U = _pieces(Xt, rt, cl.offsets, cl.sizes, alpha)
        score = U.sum(axis=0)
        step = linalg.solve(bread, score, assume_a="pos")
        beta = beta + step
        if not np.all(np.isfinite(beta)):
            raise GeeConvergenceError("GEE iterations diverged", last=beta)
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    if not converged:
        raise GeeConvergenceError(f"GEE did not converge in {max_iter} iterations", last=beta)

    mu = expit(Xs @ beta)
    v = mu * (1 - mu)
    sq = np.sqrt(v)
    bread, U = _pieces(Xs * sq[:, None], (ys - mu) / sq, cl.offsets, cl.sizes, alpha)
    bread_inv = linalg.inv(bread)
    meat = U.T @ U
    cov = bread_inv @ meat @ bread_inv
    cov = (cov + cov.T) / 2.0
    eta = X @ beta
    return GeeFit(
        beta=beta,
        cov=cov,
        cov_naive=bread_inv,
        working_correlation=working,
        alpha=alpha,
        n_obs=n,
        n_clusters=int(cl.labels.size),
        columns=columns,
        converged=True,
        n_iter=it,
        fitted=open_unit(expit(eta)),
        eta=eta,
        y=y,
    )
