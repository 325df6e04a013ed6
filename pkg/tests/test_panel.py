import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratos import panel
from stratos.vocab import PERIODS, AuthorRecord, Discipline, Gender, InstType, PublicationRecord


def _author(aid, fpy=1990, gender=Gender.FEMALE):
    return AuthorRecord(aid, gender, 0.99, fpy, InstType.IDUB)


def _pub(pid, authors, year, pct, codes, foreign=False):
    return PublicationRecord(pid, tuple(authors), year, pct, tuple(codes), foreign)


def test_row_values_by_hand():
    pubs = [
        _pub("p1", ["a"], 1993, 99, [Discipline.BIO], True),
        _pub("p2", ["a", "x"], 1995, 0, [Discipline.BIO, Discipline.CHEM]),
        _pub("p3", ["a", "x", "y"], 1999, 50, [Discipline.MED]),
    ]
    rows = panel.build_panel((pubs, [_author("a", 1980)]))
    assert len(rows) == 2
    r = rows[0]
    assert r.cell.period is PERIODS[0] and r.discipline is Discipline.BIO
    assert r.n_pubs == 2 and r.ln_pubs == pytest.approx(math.log(2))
    assert r.mean_journal_pct == 49.5 and r.prestmed == 49.5
    assert r.coop == 0.5 and r.coopint == 0.5 and r.ats == 1.5
    assert r.acage == 1997 - 1980
    assert r.weighted_prod == pytest.approx(1.0)
    assert r.top_share == 0.5
    assert r.deciles[0] == 0.5 and r.deciles[9] == 0.5
    assert r.weighted_prod_frac == pytest.approx(1.0)
    assert not r.male
    assert rows[1].discipline is Discipline.MED and rows[1].acage == 2003 - 1980


def test_modal_discipline_tie_goes_alphabetical():
    pubs = [
        _pub("p1", ["a"], 2000, 10, [Discipline.PHYS]),
        _pub("p2", ["a"], 2001, 10, [Discipline.CHEM]),
    ]
    assert panel.modal_discipline("a", PERIODS[1], pubs) is Discipline.CHEM
    with pytest.raises(panel.MissingDataError):
        panel.modal_discipline("a", PERIODS[0], pubs)


def test_academic_age_errors():
    with pytest.raises(panel.MissingDataError):
        panel.academic_age(_author("a", None), PERIODS[0])
    with pytest.raises(panel.InconsistentDataError):
        panel.academic_age(_author("a", 2005), PERIODS[1])


def test_inconsistent_rows_raise_or_skip():
    pubs = [_pub("p1", ["a"], 1993, 10, [Discipline.BIO]), _pub("p2", ["b"], 1993, 10, [Discipline.BIO])]
    authors = [_author("a", 2010), _author("b", 1990)]
    with pytest.raises(panel.InconsistentDataError):
        panel.build_panel((pubs, authors))
    rows = panel.build_panel((pubs, authors), on_missing="skip")
    assert [r.author_id for r in rows] == ["b"]


def test_centering(rows_small):
    cp = panel.center_covariates(rows_small)
    for c in panel.CENTERED_COVARIATES:
        assert abs(np.mean([getattr(r, c) for r in cp.rows])) < 1e-10
    ln = np.array([r.ln_pubs for r in rows_small])
    sq = (ln - ln.mean()) ** 2
    np.testing.assert_allclose([r.ln_pubs2 for r in cp.rows], sq - sq.mean(), atol=1e-12)
    assert cp.centering_means["ln_pubs"] == pytest.approx(ln.mean())
    with pytest.raises(ValueError):
        panel.center_covariates([])


def test_panel_file_round_trip(tmp_path, rows_small):
    path = panel.write_panel(rows_small, tmp_path / "panel.csv")
    assert path.read_text().startswith("# schema: stratos.panel/1\n")
    back = panel.read_panel(path)
    assert back == rows_small


def test_read_panel_rejects_other_schema(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("# schema: other/1\n")
    with pytest.raises(ValueError):
        panel.read_panel(p)


@st.composite
def corpora(draw):
    n_auth = draw(st.integers(1, 5))
    authors = [_author(f"a{i}", draw(st.integers(1950, 1992)), draw(st.sampled_from([Gender.MALE, Gender.FEMALE])))
               for i in range(n_auth)]
    pubs = []
    for k in range(draw(st.integers(1, 25))):
        byline = draw(st.lists(st.sampled_from([a.author_id for a in authors] + ["ext"]), min_size=1, max_size=4,
                               unique=True))
        pubs.append(_pub(f"p{k}", byline, draw(st.integers(1992, 2021)), draw(st.integers(0, 99)),
                         draw(st.lists(st.sampled_from(list(Discipline)), min_size=1, max_size=3, unique=True)),
                         draw(st.booleans())))
    return pubs, authors


@settings(max_examples=150, deadline=None)
@given(corpora())
def test_row_invariants(corpus):
    pubs, authors = corpus
    rows = panel.build_panel(corpus)
    assert sum(panel.cell_counts(rows).values()) == len(rows)
    assert len({(r.author_id, r.period) for r in rows}) == len(rows)
    for r in rows:
        mine = [p for p in pubs if r.author_id in p.author_ids and p.period == r.period]
        ranks = [p.journal_percentile for p in mine]
        assert r.n_pubs == len(mine)
        assert r.ln_pubs == math.log(r.n_pubs)
        assert min(ranks) <= r.mean_journal_pct <= max(ranks)
        assert min(ranks) <= r.prestmed <= max(ranks)
        for v in (r.coop, r.coopint, r.top_share):
            assert 0 <= v <= 1
        assert r.ats >= 1
        assert (r.ats == 1) == all(p.author_count == 1 for p in mine)
        assert abs(sum(r.deciles) - 1) < 1e-12
        assert r.weighted_prod_frac <= r.weighted_prod + 1e-12
