"""Tidy CSV tables for the class comparison figures and tables.

Each builder returns ``(columns, rows)``; :func:`write_table` emits a CSV
whose first line declares the schema. Floats are written with ``repr`` and
rows are sorted by cell, so identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import classify, metrics, stats
from .vocab import PERIODS

SCHEMA_VERSION = 1
CLASSES = ("TP", "Rest")


def _canonical(rows):
    return sorted(rows, key=lambda r: (r.cell, r.author_id))


def _cell_rows(rows):
    # rows within a cell are ordered by author so float sums do not depend
    # on the order the panel arrives in
    out = defaultdict(list)
    for r in _canonical(rows):
        out[r.cell].append(r)
    return dict(sorted(out.items()))


def _split(rows, response):
    return classify.split_classes(rows, response)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if np.isnan(v) else repr(v)
    return str(v)


def _mw(x, y):
    if len(x) == 0 or len(y) == 0:
        return None
    return stats.mann_whitney(x, y)


def _mw_cols(res):
    if res is None:
        return [None, None, None, ""]
    return [res.u_statistic, res.z_score, res.p_two_sided, res.stars]


def table3(rows, response: str = "top10"):
    """Per cell: class sizes, top-class percentage, mean top-band shares, test."""
    cols = ["period", "discipline", "n_tp", "n_rest", "pct_tp", "mean_top_share_tp", "mean_top_share_rest",
            "mw_u", "mw_z", "mw_p", "stars"]
    out = []
    for cell, rs in _cell_rows(rows).items():
        tp, rest = _split(rs, response)
        if not tp and not rest:
            continue
        x = [r.top_share for r in tp]
        y = [r.top_share for r in rest]
        out.append([
            cell.period.label, cell.discipline.value, len(tp), len(rest),
            100.0 * len(tp) / (len(tp) + len(rest)),
            float(np.mean(x)) if x else None, float(np.mean(y)) if y else None,
            *_mw_cols(_mw(x, y)),
        ])
    return cols, out


def fig1(rows, response: str = "top10"):
    """Mean top-band share per class and period, disciplines pooled."""
    cols = ["period", "class", "n", "mean_top_share"]
    out = []
    rows = _canonical(rows)
    for p in PERIODS:
        rs = [r for r in rows if r.cell.period == p]
        tp, rest = _split(rs, response)
        for name, grp in zip(CLASSES, (tp, rest)):
            if grp:
                out.append([p.label, name, len(grp), float(np.mean([r.top_share for r in grp]))])
    return cols, out


def fig2(rows, response: str = "top10"):
    """Quartiles of the per-author top-band share per cell and class."""
    cols = ["period", "discipline", "class", "n", "min", "q25", "median", "q75", "max"]
    out = []
    for cell, rs in _cell_rows(rows).items():
        for name, grp in zip(CLASSES, _split(rs, response)):
            if grp:
                v = np.array([r.top_share for r in grp])
                out.append([cell.period.label, cell.discipline.value, name, v.size,
                            *[float(q) for q in np.quantile(v, [0, 0.25, 0.5, 0.75, 1])]])
    return cols, out


def fig3(rows, response: str = "top10", measure: str = "weighted_prod"):
    """Share of each cell's prestige-weighted output produced by the top class."""
    cols = ["period", "discipline", "n_authors", "n_tp", "concentration_share"]
    out = []
    for cell, rs in _cell_rows(rows).items():
        tp, _ = _split(rs, response)
        if not tp:
            continue
        out.append([cell.period.label, cell.discipline.value, len(rs), len(tp),
                    classify.concentration_share(rs, response, measure)])
    return cols, out


def _hist_rows(label_period, label_disc, rs, response):
    out = []
    for name, grp in zip(CLASSES, _split(rs, response)):
        if not grp:
            continue
        h = np.mean([r.deciles for r in grp], axis=0)
        for k in range(metrics.N_BANDS):
            out.append([label_period, label_disc, name, metrics.band_label(k), len(grp), float(h[k])])
    return out


def fig4_6(rows, response: str = "top10"):
    """Mean decile histograms per class: per cell, per period pooled, overall."""
    cols = ["period", "discipline", "class", "band", "n", "mean_share"]
    out = []
    for cell, rs in _cell_rows(rows).items():
        out += _hist_rows(cell.period.label, cell.discipline.value, rs, response)
    rows = _canonical(rows)
    for p in PERIODS:
        rs = [r for r in rows if r.cell.period == p]
        out += _hist_rows(p.label, "ALL", rs, response)
    out += _hist_rows("ALL", "ALL", rows, response)
    return cols, out


def fig5(rows, response: str = "top10"):
    """Delta (top class minus rest) of mean decile shares per cell."""
    cols = ["period", "discipline", "band", "delta"]
    dm = classify.delta_matrix(_canonical(rows), response)
    out = []
    for cell, vals in sorted(dm.values.items()):
        for k in range(metrics.N_BANDS):
            out.append([cell.period.label, cell.discipline.value, metrics.band_label(k), float(vals[k])])
    return cols, out


def gender_split(rows):
    """Top-band shares by gender per cell, with a rank-sum test."""
    cols = ["period", "discipline", "n_female", "n_male", "pct_female", "mean_top_share_female",
            "mean_top_share_male", "mw_u", "mw_z", "mw_p", "stars"]
    out = []
    for cell, rs in _cell_rows(rows).items():
        f = [r.top_share for r in rs if not r.male]
        m = [r.top_share for r in rs if r.male]
        out.append([
            cell.period.label, cell.discipline.value, len(f), len(m), 100.0 * len(f) / len(rs),
            float(np.mean(f)) if f else None, float(np.mean(m)) if m else None,
            *_mw_cols(_mw(f, m)),
        ])
    return cols, out


FIGURES = {
    "table3": table3,
    "fig1": fig1,
    "fig2": fig2,
    "fig3": fig3,
    "fig4_6": fig4_6,
    "fig5": fig5,
    "gender_split": lambda rows, response="top10": gender_split(rows),
}


def write_table(path, name: str, columns, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema: stratos.{name}/{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_table(path):
    """Inverse of :func:`write_table` (strings); returns ``(schema, columns, rows)``."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema:"):
            raise ValueError(f"{path}: missing schema header")
        r = csv.reader(fh)
        cols = next(r)
        return first.split(":", 1)[1].strip(), cols, list(r)


def write_bundle(rows, out_dir, response: str = "top10") -> dict[str, Path]:
    """Write every figure/table file plus a manifest of their digests."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, build in FIGURES.items():
        cols, body = build(rows, response)
        written[name] = write_table(out_dir / f"{name}.csv", name, cols, body)
    write_manifest(out_dir, written.values())
    return written


def write_manifest(out_dir, paths) -> Path:
    out_dir = Path(out_dir)
    entries = {}
    for p in sorted(Path(x) for x in paths):
        entries[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    path = out_dir / "manifest.json"
    path.write_text(json.dumps({"schema": f"stratos.manifest/{SCHEMA_VERSION}", "files": entries},
                               indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
