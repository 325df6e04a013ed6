"""Maximum-likelihood logistic regression by iteratively reweighted least squares."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import linprog
from scipy.special import expit
from scipy.stats import norm

from .design import RankDeficiencyError, check_rank

logger = logging.getLogger(__name__)

SEPARATION_BOUND = 30.0


class SeparationError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


@dataclass
class GlmFit:
    beta: np.ndarray
    cov: np.ndarray
    loglik: float
    converged: bool
    n_iter: int
    fitted: np.ndarray
    eta: np.ndarray
    columns: list[str] = field(default_factory=list)
    n_obs: int = 0
    y: np.ndarray | None = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    @property
    def z(self) -> np.ndarray:
        return self.beta / self.se

    @property
    def p_values(self) -> np.ndarray:
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
    def fixed_predictor(self) -> np.ndarray:
        return self.eta


_TINY = np.finfo(float).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)


def open_unit(p):
    """Clip probabilities into the open unit interval (saturated ``expit``)."""
    return np.clip(p, _TINY, _BELOW_ONE)


def bernoulli_loglik(y, eta) -> float:
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def is_separated(X, y, tol: float = 1e-7) -> bool:
    """Linear-programming test for (quasi-)complete separation.

    Looks for a direction ``d`` in the unit box with ``s_i x_i'd >= 0`` for all
    rows (``s_i = 2 y_i - 1``) and a strictly positive total margin.
    """
    s = 2.0 * np.asarray(y) - 1.0
    A = -(s[:, None] * X)
    res = linprog(
        c=A.sum(axis=0),  # minimise -sum of margins
        A_ub=A,
        b_ub=np.zeros(X.shape[0]),
        bounds=[(-1.0, 1.0)] * X.shape[1],
        method="highs",
    )
    return bool(res.status == 0 and -res.fun > tol * max(1.0, X.shape[0]))


def fit_logistic(
    X,
    y,
    columns=None,
    offset=None,
    tol_score: float = 1e-8,
    tol_dev: float = 1e-10,
    max_iter: int = 100,
    separation_bound: float = SEPARATION_BOUND,
    check: bool = True,
) -> GlmFit:
    """Logit MLE by Newton/IRLS with step halving.

    Converged once ``max|X'(y - p)| < tol_score`` or the deviance changes by
    less than ``tol_dev``. Coefficients beyond ``separation_bound`` trigger a
    separation check; confirmed separation raises :class:`SeparationError`.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    columns = list(columns) if columns is not None else [f"x{j}" for j in range(k)]
    if check:
        check_rank(X, columns)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("response must be binary 0/1")
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)

    beta = np.zeros(k)
    ybar = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    if columns and columns[0] == "(Intercept)":
        beta[0] = np.log(ybar / (1 - ybar))
    eta = X @ beta + off
    ll = bernoulli_loglik(y, eta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(eta)
        w = p * (1 - p)
        score = X.T @ (y - p)
        if np.max(np.abs(score)) < tol_score:
            converged = True
            break
        info = (X * w[:, None]).T @ X
        try:
            step = linalg.solve(info, score, assume_a="pos")
        except linalg.LinAlgError:
            raise RankDeficiencyError("?", "information matrix is singular") from None
        t = 1.0
        while True:
            cand = beta + t * step
            eta_c = X @ cand + off
            ll_c = bernoulli_loglik(y, eta_c)
            if ll_c >= ll - 1e-12 or t < 1e-8:
                break
            t *= 0.5
        beta, eta = cand, eta_c
        change = 2.0 * abs(ll_c - ll)
        ll = ll_c
        if change < tol_dev:
            converged = True
            break

    if np.max(np.abs(beta)) > separation_bound and is_separated(X, y):
        raise SeparationError(
            f"perfect separation: coefficients diverged past {separation_bound} (max |beta| = {np.max(np.abs(beta)):.1f})"
        )
    p = open_unit(expit(eta))
    info = (X * (p * (1 - p))[:, None]).T @ X
    cov = linalg.inv(info)
    fit = GlmFit(beta, cov, ll, converged, it, p, eta, columns, n, y)
    if not converged:
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations", last=fit)
    return fit
