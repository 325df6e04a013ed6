"""Design matrices and the logit model family (GLM, random-intercept GLMM, GEE)."""
from .design import Design, DesignSpec, RankDeficiencyError, build_design, check_rank, column_names
from .gee import GeeConvergenceError, GeeFit, fit_gee
from .glmm import GlmmConvergenceError, GlmmFit, fit_glmm, marginal_loglik
from .logistic import ConvergenceError, GlmFit, SeparationError, fit_logistic
from .spline import NaturalSpline, natural_spline_basis

COEF_HEADER = ("term", "Estimate", "Std.Error", "z.value", "p.value")


def coefficient_table(fit) -> list[dict]:
    """Rows of a coefficient table keyed by the canonical column names."""
    return [
        {
            "term": name,
            "Estimate": float(b),
            "Std.Error": float(s),
            "z.value": float(z),
            "p.value": float(p),
        }
        for name, b, s, z, p in zip(fit.columns, fit.beta, fit.se, fit.z, fit.p_values)
    ]


__all__ = [
    "COEF_HEADER",
    "ConvergenceError",
    "Design",
    "DesignSpec",
    "GeeConvergenceError",
    "GeeFit",
    "GlmFit",
    "GlmmConvergenceError",
    "GlmmFit",
    "NaturalSpline",
    "RankDeficiencyError",
    "SeparationError",
    "build_design",
    "check_rank",
    "coefficient_table",
    "column_names",
    "fit_gee",
    "fit_glmm",
    "fit_logistic",
    "marginal_loglik",
    "natural_spline_basis",
]
