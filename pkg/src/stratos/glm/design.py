"""Design-matrix construction for the top-performer logit models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..panel import RESPONSES, CenteredPanel
from ..vocab import DISCIPLINES, PERIODS, InstType
from .spline import NaturalSpline


class RankDeficiencyError(ValueError):
    def __init__(self, column: str, message: str | None = None):
        super().__init__(message or f"design is rank deficient at column {column!r}")
        self.column = column


# term key -> (term label used by collinearity tables, panel attribute)
CONTINUOUS = {
    "ln_pubs_c": "ln_pubs",
    "ln_pubs2_c": "ln_pubs2",
    "mean_journal_pct_c": "mean_journal_pct",
    "coop_c": "coop",
    "coopint_c": "coopint",
    "acage_c": "acage",
    "ATS_c": "ats",
    "prestmed_c": "prestmed",
}

QUADRATIC_TERMS = (
    "period",
    "discipline",
    "ln_pubs_c",
    "ln_pubs2_c",
    "mean_journal_pct_c",
    "coop_c",
    "coopint_c",
    "male",
    "acage_c",
    "inst_type",
    "ATS_c",
    "prestmed_c",
    "ln_pubs_c:mean_journal_pct_c",
)

# term set of the spline robustness table: no median-prestige control and no
# quantity x quality interaction
SPLINE_TABLE_TERMS = (
    "period",
    "discipline",
    "spline",
    "mean_journal_pct_c",
    "coop_c",
    "coopint_c",
    "male",
    "acage_c",
    "inst_type",
    "ATS_c",
)


@dataclass(frozen=True)
class DesignSpec:
    response: str = "top10"
    terms: tuple[str, ...] = QUADRATIC_TERMS
    spline_df: int = 3

    def __post_init__(self):
        if self.response not in RESPONSES:
            raise ValueError(f"response must be one of {RESPONSES}")
        known = set(QUADRATIC_TERMS) | {"spline"}
        bad = [t for t in self.terms if t not in known]
        if bad:
            raise ValueError(f"unknown design terms {bad}")

    @classmethod
    def quadratic(cls, response: str = "top10") -> "DesignSpec":
        return cls(response, QUADRATIC_TERMS)

    @classmethod
    def spline(cls, response: str = "top10", df: int = 3, table_terms: bool = True) -> "DesignSpec":
        """Spline variant of the productivity curve.

        With ``table_terms`` the term set is the reduced spline robustness
        set (no ``prestmed_c`` or interaction); otherwise the quadratic specification with its two
        log-count terms swapped for the spline columns.
        """
        if table_terms:
            return cls(response, SPLINE_TABLE_TERMS, df)
        terms = []
        for t in QUADRATIC_TERMS:
            if t == "ln_pubs_c":
                terms.append("spline")
            elif t != "ln_pubs2_c":
                terms.append(t)
        return cls(response, tuple(terms), df)


@dataclass
class Design:
    X: np.ndarray
    y: np.ndarray
    clusters: np.ndarray
    columns: list[str]
    term_columns: dict[str, list[int]] = field(default_factory=dict)
    rows_used: np.ndarray | None = None
    spec: DesignSpec | None = None

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_params(self) -> int:
        return self.X.shape[1]


def period_column(p) -> str:
    return f"Period {p.label}"


def discipline_column(d) -> str:
    return f"Discipline: {d.value}"


def spline_columns(df: int) -> list[str]:
    return [f"ns(ln_pubs_c, df = {df}){k}" for k in range(1, df + 1)]


def column_names(spec: DesignSpec) -> list[str]:
    cols = ["(Intercept)"]
    for t in spec.terms:
        cols.extend(_term_columns(t, spec))
    return cols


def _term_columns(term, spec):
    if term == "period":
        return [period_column(p) for p in PERIODS[1:]]
    if term == "discipline":
        return [discipline_column(d) for d in DISCIPLINES[1:]]
    if term == "male":
        return ["MaleMale"]
    if term == "inst_type":
        return ["inst_typeRest"]
    if term == "spline":
        return spline_columns(spec.spline_df)
    return [term]


def _term_label(term, spec):
    return {
        "period": "Period",
        "discipline": "Discipline",
        "male": "Male",
        "inst_type": "inst_type",
        "spline": f"ns(ln_pubs_c, df = {spec.spline_df})",
    }.get(term, term)


def check_rank(X: np.ndarray, columns, tol: float = 1e-10) -> None:
    """Raise :class:`RankDeficiencyError` naming the first dependent column."""
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    for j, nrm in enumerate(norms):
        if nrm == 0:
            raise RankDeficiencyError(columns[j], f"column {columns[j]!r} is identically zero (empty level?)")
    Xs = X / norms
    gram = Xs.T @ Xs
    for k in range(1, X.shape[1] + 1):
        if np.linalg.eigvalsh(gram[:k, :k])[0] < tol:
            raise RankDeficiencyError(columns[k - 1])


def build_design(panel: CenteredPanel, spec: DesignSpec | None = None, check: bool = True) -> Design:
    """Assemble ``X``, the 0/1 response and author cluster ids.

    Rows whose response label is missing (unclassifiable cells) are left out.
    Columns follow the canonical coefficient-table order.
    """
    spec = spec or DesignSpec()
    rows = panel.rows if isinstance(panel, CenteredPanel) else panel
    used = np.array([i for i, r in enumerate(rows) if getattr(r, spec.response) is not None], dtype=int)
    sub = [rows[i] for i in used]
    n = len(sub)
    if n == 0:
        raise RankDeficiencyError("(Intercept)", "no classified rows to model")

    def attr(name):
        return np.array([getattr(r, name) for r in sub], dtype=float)

    blocks = [np.ones((n, 1))]
    columns = ["(Intercept)"]
    term_columns: dict[str, list[int]] = {}
    for term in spec.terms:
        if term == "period":
            idx = np.array([r.period.index for r in sub])
            block = np.column_stack([(idx == p.index).astype(float) for p in PERIODS[1:]])
        elif term == "discipline":
            codes = [r.discipline for r in sub]
            block = np.column_stack([np.array([c == d for c in codes], dtype=float) for d in DISCIPLINES[1:]])
        elif term == "male":
            block = attr("male")[:, None]
        elif term == "inst_type":
            block = np.array([r.inst_type == InstType.REST for r in sub], dtype=float)[:, None]
        elif term == "spline":
            block = NaturalSpline(attr("ln_pubs"), spec.spline_df)(attr("ln_pubs"))
        elif term == "ln_pubs_c:mean_journal_pct_c":
            block = (attr("ln_pubs") * attr("mean_journal_pct"))[:, None]
        else:
            block = attr(CONTINUOUS[term])[:, None]
        names = _term_columns(term, spec)
        term_columns[_term_label(term, spec)] = list(range(len(columns), len(columns) + len(names)))
        columns.extend(names)
        blocks.append(block)
    X = np.hstack(blocks)
    if check:
        check_rank(X, columns)
    y = np.array([getattr(r, spec.response) for r in sub], dtype=float)
    clusters = np.array([r.author_id for r in sub])
    return Design(X, y, clusters, columns, term_columns, used, spec)
