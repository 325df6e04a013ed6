"""Model-quality battery for fitted logit models.

Collinearity (generalized VIF), Pearson dispersion, residual summaries,
discrimination (AUC), latent-scale variance decomposition (ICC and
Nakagawa-Schielzeth R2) and their tabular serialization.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import expit

LOGIT_RESIDUAL_VARIANCE = math.pi**2 / 3.0
DIAGNOSTICS_SCHEMA = "stratos.diagnostics/1"


class CollinearityError(ValueError):
    """Singular column correlation matrix; ``columns`` lists the culprits."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"singular correlation matrix; dependent columns: {', '.join(self.columns)}")


@dataclass(frozen=True)
class GvifRow:
    term: str
    gvif: float
    df: int
    gvif_adjusted: float


@dataclass
class DiagnosticsReport:
    gvif_table: list[GvifRow]
    chi2_pearson: float
    df_resid: int
    dispersion_ratio: float
    overdispersion_p: float
    residual_summary: dict
    auc: float
    icc: float
    r2_marginal: float
    r2_conditional: float
    model_quality: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gvif_table"] = [asdict(r) for r in self.gvif_table]
        return d


def adjusted_gvif(gvif_value, df):
    """``GVIF ** (1 / (2 df))``, comparable across terms of different size."""
    return np.asarray(gvif_value, dtype=float) ** (1.0 / (2.0 * np.asarray(df, dtype=float)))


def _dependent_columns(R, names, tol):
    w, V = np.linalg.eigh(R)
    null = V[:, w < tol]
    if null.size == 0:
        null = V[:, :1]
    hit = np.any(np.abs(null) > 1e-6, axis=1)
    return [n for n, h in zip(names, hit) if h]


def gvif(X, term_column_map, columns=None, tol: float = 1e-10) -> list[GvifRow]:
    """Generalized variance inflation factors per model term.

    Parameters
    ----------
    X : (n, p) array
        Design matrix; columns not named in ``term_column_map`` (the
        intercept) are ignored.
    term_column_map : dict
        Term label to the list of its column indices in ``X``.
    columns : list of str, optional
        Column names used in error messages.

    Returns
    -------
    list of GvifRow
        ``gvif = det(R_JJ) det(R_KK) / det(R)`` over the correlation matrix
        of the retained columns, and ``gvif ** (1 / (2 df))``.
    """
    X = np.asarray(X, dtype=float)
    names = list(columns) if columns is not None else [f"x{j}" for j in range(X.shape[1])]
    terms = list(term_column_map.items())
    keep = [j for _, idx in terms for j in idx]
    sub = X[:, keep]
    sd = sub.std(axis=0)
    if np.any(sd == 0):
        raise CollinearityError([names[keep[j]] for j in np.flatnonzero(sd == 0)])
    R = np.corrcoef(sub, rowvar=False)
    R = np.atleast_2d(R)
    sign, logdet = np.linalg.slogdet(R)
    if sign <= 0 or np.linalg.eigvalsh(R)[0] < tol:
        raise CollinearityError(_dependent_columns(R, [names[j] for j in keep], tol))
    pos = {j: i for i, j in enumerate(keep)}
    out = []
    all_idx = np.arange(len(keep))
    for term, idx in terms:
        J = np.array([pos[j] for j in idx])
        K = np.setdiff1d(all_idx, J)
        ld = np.linalg.slogdet(R[np.ix_(J, J)])[1] - logdet
        if K.size:
            ld += np.linalg.slogdet(R[np.ix_(K, K)])[1]
        g = float(np.exp(ld))
        out.append(GvifRow(term, g, len(idx), float(adjusted_gvif(g, len(idx)))))
    return out


def _fit_arrays(fit, y=None):
    y = getattr(fit, "y", None) if y is None else y
    if y is None:
        raise ValueError("fit carries no response; pass y")
    return np.asarray(y, dtype=float), np.asarray(fit.fitted, dtype=float)


def pearson_residuals(fit=None, y=None, p=None, eta=None):
    """``(y - p) / sqrt(p (1 - p))`` for binary ``y``.

    From the linear predictor (taken from ``fit`` when it has one) the
    residual is evaluated as ``s exp(-s eta / 2)`` with ``s = 2y - 1``, which
    stays finite where ``p`` rounds to 0 or 1.
    """
    if p is None and eta is None:
        eta = getattr(fit, "linear_predictor", None)
        if eta is None:
            y, p = _fit_arrays(fit, y)
        elif y is None:
            y = fit.y
    y = np.asarray(y, dtype=float)
    if eta is not None:
        eta = np.asarray(eta, dtype=float)
        if np.all((y == 0) | (y == 1)):
            s = 2.0 * y - 1.0
            return s * np.exp(-s * eta / 2.0)
        p = expit(eta)
    p = np.asarray(p, dtype=float)
    return (y - p) / np.sqrt(p * (1.0 - p))


def residual_df(fit) -> int:
    """Observations minus fixed and variance parameters."""
    return int(fit.n_obs - (fit.n_params + fit.n_variance_params))


def overdispersion(fit=None, y=None, *, chi2=None, df_resid=None) -> dict:
    """Pearson chi-square dispersion test.

    The p-value is the upper tail of chi-square(df_resid) at ``chi2``: a test
    for overdispersion only, so a strongly underdispersed fit gives p near 1.
    Either a fit or the pair ``chi2``/``df_resid`` may be given.
    """
    if chi2 is None:
        r = pearson_residuals(fit, y)
        chi2 = float(np.sum(r * r))
    if df_resid is None:
        df_resid = residual_df(fit)
    if df_resid <= 0:
        raise ValueError("no residual degrees of freedom")
    return {
        "chi2": float(chi2),
        "df_resid": int(df_resid),
        "ratio": float(chi2) / df_resid,
        "p": float(stats.chi2.sf(chi2, df_resid)),
    }


def summarize_residuals(r) -> dict:
    """Min, linear-interpolation quartiles, max, mean and sample sd."""
    r = np.asarray(r, dtype=float)
    q25, med, q75 = np.quantile(r, [0.25, 0.5, 0.75])
    return {
        "min": float(r.min()),
        "q25": float(q25),
        "median": float(med),
        "q75": float(q75),
        "max": float(r.max()),
        "mean": float(r.mean()),
        "sd": float(r.std(ddof=1)) if r.size > 1 else 0.0,
    }


def pearson_residual_summary(fit, y=None) -> dict:
    return summarize_residuals(pearson_residuals(fit, y))


def auc(scores, labels) -> float:
    """Concordance AUC with half credit for tied scores."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in shape")
    n1 = int(labels.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes present")
    ranks = stats.rankdata(scores)
    u = ranks[labels].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def icc(sigma2) -> float:
    """Latent-scale intraclass correlation of a logit random intercept."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    return float(sigma2 / (sigma2 + LOGIT_RESIDUAL_VARIANCE))


def r2_nakagawa(fit=None, *, fixed_predictor=None, sigma2=None) -> dict:
    """Marginal and conditional latent-scale R2 of a random-intercept logit."""
    eta = fit.fixed_predictor if fixed_predictor is None else fixed_predictor
    s2 = getattr(fit, "sigma2", 0.0) if sigma2 is None else sigma2
    eta = np.asarray(eta, dtype=float)
    vf = float(np.var(eta, ddof=1)) if eta.size > 1 else 0.0
    denom = vf + s2 + LOGIT_RESIDUAL_VARIANCE
    return {"marginal": vf / denom, "conditional": (vf + s2) / denom}


def model_quality(fit) -> dict:
    """Summary block keyed like a model-quality table."""
    s2 = float(getattr(fit, "sigma2", 0.0))
    r2 = r2_nakagawa(fit)
    out = {
        "n obs": int(fit.n_obs),
        "n authors": int(getattr(fit, "n_clusters", fit.n_obs)),
        "logLik": float(fit.loglik),
    }
    k = fit.n_params + fit.n_variance_params
    out["AIC"] = -2.0 * out["logLik"] + 2.0 * k
    out["BIC"] = -2.0 * out["logLik"] + math.log(fit.n_obs) * k
    out["is_singular"] = bool(s2 <= 0.0)
    out["RE var AuthID"] = s2
    out["RE sd AuthID"] = math.sqrt(s2)
    out["R2 marginal"] = r2["marginal"]
    out["R2 conditional"] = r2["conditional"]
    out["ICC AuthID"] = icc(s2)
    out["ICC total"] = icc(s2)
    return out


def diagnose(fit, X=None, term_columns=None, columns=None, y=None) -> DiagnosticsReport:
    """Run the whole battery on a converged fit.

    ``X``/``term_columns`` enable the collinearity table; without them it is
    left empty.
    """
    y_arr, p = _fit_arrays(fit, y)
    table = gvif(X, term_columns, columns or getattr(fit, "columns", None)) if X is not None else []
    od = overdispersion(fit, y_arr)
    r2 = r2_nakagawa(fit)
    s2 = float(getattr(fit, "sigma2", 0.0))
    return DiagnosticsReport(
        gvif_table=table,
        chi2_pearson=od["chi2"],
        df_resid=od["df_resid"],
        dispersion_ratio=od["ratio"],
        overdispersion_p=od["p"],
        residual_summary=pearson_residual_summary(fit, y_arr),
        auc=auc(p, y_arr),
        icc=icc(s2),
        r2_marginal=r2["marginal"],
        r2_conditional=r2["conditional"],
        model_quality=model_quality(fit),
    )


def report_tables(report: DiagnosticsReport) -> dict[str, list[tuple[str, object]]]:
    """Statistic/value rows of the quality, dispersion and residual tables."""
    rs = report.residual_summary
    return {
        "model_quality": list(report.model_quality.items()) + [("AUC", report.auc)],
        "overdispersion": [
            ("chi2", report.chi2_pearson),
            ("df resid", report.df_resid),
            ("ratio", report.dispersion_ratio),
            ("p value", report.overdispersion_p),
        ],
        "pearson_residuals": [(f"pearson {k}", rs[k]) for k in ("min", "q25", "median", "q75", "max", "mean", "sd")],
        "collinearity": [(r.term, (r.gvif, r.df, r.gvif_adjusted)) for r in report.gvif_table],
    }


def _fmt(v):
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(report: DiagnosticsReport) -> str:
    """One tidy CSV block: ``table,statistic,value[,df,adjusted]``."""
    buf = io.StringIO()
    buf.write(f"# schema: {DIAGNOSTICS_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["table", "statistic", "value", "df", "adjusted"])
    for name, rows in report_tables(report).items():
        for stat, val in rows:
            if name == "collinearity":
                g, df, adj = val
                w.writerow([name, stat, _fmt(g), df, _fmt(adj)])
            else:
                w.writerow([name, stat, _fmt(val), "", ""])
    return buf.getvalue()


def to_json(report: DiagnosticsReport) -> str:
    return json.dumps({"schema": DIAGNOSTICS_SCHEMA, **report.to_dict()}, indent=2, sort_keys=True)
