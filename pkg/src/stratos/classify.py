"""Per-cell top-performer classification and stratification analytics."""
from __future__ import annotations

import dataclasses
import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import metrics
from .panel import RESPONSE_QUANTILES, RESPONSES
from .vocab import CellKey

logger = logging.getLogger(__name__)


class DegenerateCellError(ValueError):
    pass


@dataclass(frozen=True)
class ClassLabel:
    is_top: bool
    cell: CellKey | None
    threshold_used: float


@dataclass
class DeltaMatrix:
    """Per cell and decile band: mean share among top performers minus the rest.

    Cells lacking one of the classes hold NaN in every band.
    """

    values: dict[CellKey, np.ndarray]

    def get(self, cell: CellKey, band: int) -> float:
        return float(self.values[cell][band])

    def populated(self) -> list[CellKey]:
        return [c for c, v in self.values.items() if not np.isnan(v).any()]


def target_top_count(n: int, quantile: float) -> int:
    # rounding guards against 0.1 * 10 == 0.9999999999999998
    return max(1, math.ceil(round((1.0 - quantile) * n, 9)))


def top_threshold(values, quantile: float = 0.90) -> float:
    """Cut-off value such that ``x >= cut`` marks the top class.

    Without ties the top class holds exactly ``ceil((1 - q) * n)`` values.
    When a block of tied values straddles that rank, the whole block goes to
    whichever side leaves the class size closer to the target (inclusion on
    an exact draw).
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 2:
        raise DegenerateCellError(f"cell has {n} member(s); need at least 2")
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    k = target_top_count(n, quantile)
    desc = np.sort(x)[::-1]
    v = desc[k - 1]
    n_ge = int(np.count_nonzero(x >= v))
    n_gt = int(np.count_nonzero(x > v))
    if n_ge == k or n_gt == 0 or (n_ge - k) <= (k - n_gt):
        return float(v)
    return float(np.min(x[x > v]))


def classify_cell(productivities, quantile: float = 0.90, cell: CellKey | None = None) -> list[ClassLabel]:
    x = np.asarray(productivities, dtype=float)
    cut = top_threshold(x, quantile)
    return [ClassLabel(bool(v >= cut), cell, cut) for v in x]


def group_by_cell(rows) -> dict[CellKey, list[int]]:
    groups: dict[CellKey, list[int]] = defaultdict(list)
    for i, r in enumerate(rows):
        groups[r.cell].append(i)
    return dict(sorted(groups.items()))


def classify_panel(rows, responses=RESPONSES, measure: str = "weighted_prod"):
    """Attach top-class labels for each response quantile.

    Returns ``(labelled_rows, degenerate_cells)``; rows in cells with fewer
    than two members keep ``None`` labels.
    """
    labels = {resp: [None] * len(rows) for resp in responses}
    degenerate = []
    for cell, idx in group_by_cell(rows).items():
        if len(idx) < 2:
            degenerate.append(cell)
            continue
        vals = np.array([getattr(rows[i], measure) for i in idx])
        for resp in responses:
            cut = top_threshold(vals, RESPONSE_QUANTILES[resp])
            for i, v in zip(idx, vals):
                labels[resp][i] = int(v >= cut)
    if degenerate:
        logger.info("%d cell(s) too small to classify: %s", len(degenerate), ", ".join(map(str, degenerate)))
    out = [dataclasses.replace(r, **{resp: labels[resp][i] for resp in responses}) for i, r in enumerate(rows)]
    return out, degenerate


def split_classes(rows, response):
    tp = [r for r in rows if getattr(r, response) == 1]
    rest = [r for r in rows if getattr(r, response) == 0]
    return tp, rest


def delta_matrix(rows, response: str = "top10") -> DeltaMatrix:
    values = {}
    for cell, idx in group_by_cell(rows).items():
        tp, rest = split_classes([rows[i] for i in idx], response)
        if not tp or not rest:
            values[cell] = np.full(metrics.N_BANDS, np.nan)
            continue
        tp_mean = np.mean([r.deciles for r in tp], axis=0)
        rest_mean = np.mean([r.deciles for r in rest], axis=0)
        values[cell] = tp_mean - rest_mean
    return DeltaMatrix(values)


def concentration_share(rows, response: str = "top10", measure: str = "weighted_prod") -> float:
    """Share of a cell's total productivity held by its top class."""
    tp, _ = split_classes(rows, response)
    if not tp:
        raise DegenerateCellError("cell has no top performers")
    total = sum(getattr(r, measure) for r in rows)
    if total <= 0:
        raise ZeroDivisionError("cell has zero total productivity")
    return float(sum(getattr(r, measure) for r in tp) / total)
