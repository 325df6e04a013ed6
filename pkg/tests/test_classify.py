import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_rows
from stratos import classify
from stratos.vocab import PERIODS, CellKey, Discipline


def oracle_top_count(x, q):
    """Brute force over every cut-off: class size nearest the target, larger on a draw."""
    k = max(1, math.ceil(round((1 - q) * len(x), 9)))
    sizes = sorted({sum(1 for v in x if v >= c) for c in set(x)})
    return min(sizes, key=lambda s: (abs(s - k), -s))


values = st.lists(st.integers(0, 30).map(lambda v: v / 4), min_size=2, max_size=80)


@settings(max_examples=300)
@given(values, st.sampled_from([0.8, 0.9, 0.95, 0.99]))
def test_top_count_matches_brute_force(x, q):
    labels = classify.classify_cell(x, q)
    assert sum(lab.is_top for lab in labels) == oracle_top_count(x, q)
    cut = labels[0].threshold_used
    assert all(lab.is_top == (v >= cut) for lab, v in zip(labels, x))


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=2, max_size=200, unique=True))
def test_distinct_values_give_exact_share(x):
    n = len(x)
    top = sum(lab.is_top for lab in classify.classify_cell(x))
    assert top == math.ceil(round(0.1 * n, 9))


@given(values)
def test_rank_invariance(x):
    a = [lab.is_top for lab in classify.classify_cell(x)]
    b = [lab.is_top for lab in classify.classify_cell([math.exp(v / 3) + 7 for v in x])]
    assert a == b


def test_target_count_rounding():
    assert classify.target_top_count(10, 0.9) == 1
    assert classify.target_top_count(30, 0.9) == 3
    assert classify.target_top_count(31, 0.9) == 4
    assert classify.target_top_count(5, 0.99) == 1


def test_degenerate_cell():
    with pytest.raises(classify.DegenerateCellError):
        classify.top_threshold([1.0])
    with pytest.raises(ValueError):
        classify.top_threshold([1.0, 2.0], 1.0)


def test_all_tied_cell_goes_top():
    assert all(lab.is_top for lab in classify.classify_cell([2.0] * 12))


def test_classify_panel_labels_and_small_cells():
    rows = make_rows(300, seed=3, label=False)
    # isolate one row in a cell of its own
    lone = CellKey(PERIODS[0], Discipline.AGRI)
    rows = [r for r in rows if r.cell != lone] + [make_rows(1, seed=9, label=False)[0]]
    assert rows[-1].cell == lone
    out, degenerate = classify.classify_panel(rows)
    assert degenerate == [lone]
    assert out[-1].top10 is None
    for cell, idx in classify.group_by_cell(out).items():
        if cell == lone:
            continue
        vals = [out[i].weighted_prod for i in idx]
        for resp, q in (("top20", 0.8), ("top10", 0.9), ("top5", 0.95), ("top1", 0.99)):
            assert sum(getattr(out[i], resp) for i in idx) == oracle_top_count(vals, q)
        # nested classes
        for i in idx:
            assert out[i].top1 <= out[i].top5 <= out[i].top10 <= out[i].top20


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_concentration_at_least_class_share(seed):
    rows, _ = classify.classify_panel(make_rows(150, seed=seed, label=False))
    for _cell, idx in classify.group_by_cell(rows).items():
        rs = [rows[i] for i in idx]
        tp = sum(r.top10 for r in rs)
        if sum(r.weighted_prod for r in rs) > 0:
            assert classify.concentration_share(rs) >= tp / len(rs) - 1e-12


def test_delta_matrix_definition():
    rows, _ = classify.classify_panel(make_rows(400, seed=5, label=False))
    dm = classify.delta_matrix(rows)
    for cell, idx in classify.group_by_cell(rows).items():
        rs = [rows[i] for i in idx]
        tp = np.array([r.deciles for r in rs if r.top10 == 1])
        rest = np.array([r.deciles for r in rs if r.top10 == 0])
        if len(tp) and len(rest):
            np.testing.assert_allclose(dm.values[cell], tp.mean(0) - rest.mean(0), atol=1e-15)
            assert dm.get(cell, 9) == dm.values[cell][9]
    assert set(dm.populated()) <= set(dm.values)
