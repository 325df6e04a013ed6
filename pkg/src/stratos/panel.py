"""Author x period x discipline micro-panel construction and centering."""
from __future__ import annotations

import csv
import dataclasses
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .vocab import (
    PERIODS,
    AuthorRecord,
    CellKey,
    Discipline,
    Gender,
    InstType,
    PeriodId,
    period_from_label,
)

PANEL_SCHEMA = "stratos.panel/1"
CENTERED_COVARIATES = ("ln_pubs", "ln_pubs2", "mean_journal_pct", "coop", "coopint", "acage", "ats", "prestmed")
RESPONSES = ("top20", "top10", "top5", "top1")
RESPONSE_QUANTILES = {"top20": 0.80, "top10": 0.90, "top5": 0.95, "top1": 0.99}


class MissingDataError(ValueError):
    pass


class InconsistentDataError(ValueError):
    pass


@dataclass
class PanelRow:
    author_id: str
    cell: CellKey
    n_pubs: int
    ln_pubs: float
    ln_pubs2: float
    mean_journal_pct: float
    coop: float
    coopint: float
    male: bool
    acage: float
    inst_type: InstType
    ats: float
    prestmed: float
    weighted_prod: float
    top_share: float
    weighted_prod_frac: float = 0.0
    deciles: tuple[float, ...] = field(default_factory=lambda: (0.0,) * metrics.N_BANDS)
    top20: int | None = None
    top10: int | None = None
    top5: int | None = None
    top1: int | None = None

    @property
    def period(self) -> PeriodId:
        return self.cell.period

    @property
    def discipline(self) -> Discipline:
        return self.cell.discipline


@dataclass
class CenteredPanel:
    rows: list[PanelRow]
    centering_means: dict[str, float]


def modal_discipline(author_id, period: PeriodId, corpus) -> Discipline:
    """Most frequent discipline code over the author's publications in `period`.

    `corpus` is either ``(publications, authors)`` or a bare publication list.
    Ties go to the alphabetically first code.
    """
    pubs = corpus[0] if isinstance(corpus, tuple) else corpus
    mine = [p for p in pubs if author_id in p.author_ids and p.period.index == period.index]
    if not mine:
        raise MissingDataError(f"author {author_id} has no publications in {period.label}")
    return _mode_of_codes(mine, author_id, period)


def _mode_of_codes(pubs, author_id, period) -> Discipline:
    counts = Counter(code for p in pubs for code in p.asjc_codes)
    if not counts:
        raise MissingDataError(f"author {author_id} has no discipline codes in {period.label}")
    best = max(counts.values())
    return min(c for c, n in counts.items() if n == best)


def academic_age(author: AuthorRecord, period: PeriodId) -> int:
    """Years from first publication to the last year of `period`."""
    if author.first_pub_year is None:
        raise MissingDataError(f"author {author.author_id} has no first publication year")
    if author.first_pub_year > period.end_year:
        raise InconsistentDataError(
            f"author {author.author_id}: first publication {author.first_pub_year} after {period.label}"
        )
    return period.end_year - author.first_pub_year


def _row_for(author: AuthorRecord, period: PeriodId, pubs) -> PanelRow:
    ranks = np.array([p.journal_percentile for p in pubs], dtype=float)
    sizes = np.array([p.author_count for p in pubs], dtype=float)
    n = len(pubs)
    ln_pubs = math.log(n)
    return PanelRow(
        author_id=author.author_id,
        cell=CellKey(period, _mode_of_codes(pubs, author.author_id, period)),
        n_pubs=n,
        ln_pubs=ln_pubs,
        ln_pubs2=ln_pubs * ln_pubs,
        mean_journal_pct=float(ranks.mean()),
        coop=float(np.mean(sizes > 1)),
        coopint=float(np.mean([p.any_foreign_affiliation for p in pubs])),
        male=author.gender == Gender.MALE,
        acage=float(academic_age(author, period)),
        inst_type=author.inst_type,
        ats=float(sizes.mean()),
        prestmed=float(np.median(ranks)),
        weighted_prod=metrics.weighted_productivity(ranks),
        top_share=metrics.top_share(ranks),
        weighted_prod_frac=float(np.sum(metrics.prestige_weight(ranks) / sizes)),
        deciles=tuple(float(s) for s in metrics.decile_histogram(ranks)),
    )


def build_panel(corpus, on_missing: str = "raise") -> list[PanelRow]:
    """One row per (author, active period), assigned to the modal discipline.

    Only authors present in the corpus's author list get rows. With
    ``on_missing="skip"`` author-periods lacking codes or with an inconsistent
    first publication year are left out instead of raising.
    """
    pubs, authors = corpus
    by_author_period: dict[tuple[str, int], list] = defaultdict(list)
    known = {a.author_id: a for a in authors}
    for p in pubs:
        pidx = p.period.index
        for aid in p.author_ids:
            if aid in known:
                by_author_period[(aid, pidx)].append(p)

    rows = []
    for (aid, pidx) in sorted(by_author_period):
        try:
            rows.append(_row_for(known[aid], PERIODS[pidx], by_author_period[(aid, pidx)]))
        except (MissingDataError, InconsistentDataError):
            if on_missing != "skip":
                raise
    return rows


def cell_counts(rows) -> dict[CellKey, int]:
    return dict(sorted(Counter(r.cell for r in rows).items()))


def center_covariates(rows) -> CenteredPanel:
    """Subtract grand means from the continuous covariates.

    The quadratic term is rebuilt as the square of the centered log count and
    then centered itself.
    """
    if not rows:
        raise ValueError("cannot center an empty panel")
    cols = {c: np.array([getattr(r, c) for r in rows], dtype=float) for c in CENTERED_COVARIATES}
    means = {}
    for c in CENTERED_COVARIATES:
        if c == "ln_pubs2":
            continue
        means[c] = float(cols[c].mean())
        cols[c] = cols[c] - means[c]
    sq = cols["ln_pubs"] ** 2
    means["ln_pubs2"] = float(sq.mean())
    cols["ln_pubs2"] = sq - means["ln_pubs2"]
    out = [
        dataclasses.replace(r, **{c: float(cols[c][i]) for c in CENTERED_COVARIATES})
        for i, r in enumerate(rows)
    ]
    return CenteredPanel(out, {c: means[c] for c in CENTERED_COVARIATES})


# -- panel file ------------------------------------------------------------

PANEL_COLUMNS = (
    "author_id",
    "period",
    "discipline",
    "n_pubs",
    "ln_pubs",
    "ln_pubs2",
    "mean_journal_pct",
    "coop",
    "coopint",
    "male",
    "acage",
    "inst_type",
    "ats",
    "prestmed",
    "weighted_prod",
    "weighted_prod_frac",
    "top_share",
    *[f"dec{k}" for k in range(metrics.N_BANDS)],
    *RESPONSES,
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_panel(rows, path) -> Path:
    """Write panel rows; label columns are empty until classification."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema: {PANEL_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PANEL_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r.author_id,
                    r.period.label,
                    r.discipline.value,
                    r.n_pubs,
                    *(_fmt(getattr(r, c)) for c in PANEL_COLUMNS[4:10]),
                    _fmt(r.acage),
                    r.inst_type.value,
                    _fmt(r.ats),
                    _fmt(r.prestmed),
                    _fmt(r.weighted_prod),
                    _fmt(r.weighted_prod_frac),
                    _fmt(r.top_share),
                    *(_fmt(float(d)) for d in r.deciles),
                    *(_fmt(getattr(r, c)) for c in RESPONSES),
                ]
            )
    return path


def read_panel(path) -> list[PanelRow]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.startswith("# schema:") or first.split(":", 1)[1].strip() != PANEL_SCHEMA:
            raise ValueError(f"{path}: not a {PANEL_SCHEMA} file")
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            def opt(k):
                v = rec[k]
                return int(v) if v != "" else None

            rows.append(
                PanelRow(
                    author_id=rec["author_id"],
                    cell=CellKey(period_from_label(rec["period"]), Discipline.parse(rec["discipline"])),
                    n_pubs=int(rec["n_pubs"]),
                    ln_pubs=float(rec["ln_pubs"]),
                    ln_pubs2=float(rec["ln_pubs2"]),
                    mean_journal_pct=float(rec["mean_journal_pct"]),
                    coop=float(rec["coop"]),
                    coopint=float(rec["coopint"]),
                    male=rec["male"] == "1",
                    acage=float(rec["acage"]),
                    inst_type=InstType(rec["inst_type"]),
                    ats=float(rec["ats"]),
                    prestmed=float(rec["prestmed"]),
                    weighted_prod=float(rec["weighted_prod"]),
                    weighted_prod_frac=float(rec["weighted_prod_frac"]),
                    top_share=float(rec["top_share"]),
                    deciles=tuple(float(rec[f"dec{k}"]) for k in range(metrics.N_BANDS)),
                    **{c: opt(c) for c in RESPONSES},
                )
            )
    return rows

