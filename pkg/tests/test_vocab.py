import pytest
from hypothesis import given
from hypothesis import strategies as st

from stratos.vocab import (
    DISCIPLINES,
    PERIODS,
    CellKey,
    Discipline,
    PublicationRecord,
    VocabularyError,
    check_percentile,
    period_from_label,
    period_of_year,
)


def test_periods_tile_the_window():
    assert len(PERIODS) == 5
    assert PERIODS[0].start_year == 1992 and PERIODS[-1].end_year == 2021
    for a, b in zip(PERIODS, PERIODS[1:]):
        assert b.start_year == a.end_year + 1
    for p in PERIODS:
        assert p.end_year - p.start_year == 5


def test_period_labels_use_en_dash():
    assert [p.label for p in PERIODS] == [
        "1992–1997", "1998–2003", "2004–2009", "2010–2015", "2016–2021",
    ]
    assert period_from_label("2004-2009") is PERIODS[2]
    with pytest.raises(VocabularyError):
        period_from_label("1990–1995")


@given(st.integers(1992, 2021))
def test_period_of_year_total(year):
    p = period_of_year(year)
    assert p.start_year <= year <= p.end_year


def test_each_period_has_six_years():
    counts = [sum(period_of_year(y) is p for y in range(1992, 2022)) for p in PERIODS]
    assert counts == [6] * 5


@pytest.mark.parametrize("year", [1991, 2022, 1900])
def test_year_outside_window(year):
    with pytest.raises(VocabularyError):
        period_of_year(year)


def test_disciplines():
    assert len(DISCIPLINES) == 15
    assert DISCIPLINES[0] is Discipline.AGRI
    assert list(DISCIPLINES) == sorted(DISCIPLINES, key=lambda d: d.value)


@given(st.sampled_from(DISCIPLINES))
def test_discipline_round_trip(d):
    assert Discipline.parse(str(d)) is d
    assert Discipline.parse(f" {d.value.lower()} ") is d


def test_unknown_discipline():
    with pytest.raises(VocabularyError):
        Discipline.parse("ARTS")


@pytest.mark.parametrize("rank", [-1, 100, 12.5])
def test_bad_percentile(rank):
    with pytest.raises(VocabularyError):
        check_percentile(rank)


def test_publication_needs_an_author():
    with pytest.raises(VocabularyError):
        PublicationRecord("p", (), 2000, 50, (Discipline.BIO,), False)
    p = PublicationRecord("p", ("a", "b"), 2000, 50, (Discipline.BIO,), False)
    assert p.author_count == 2 and p.period is PERIODS[1]


def test_cells_order_and_count():
    cells = sorted(CellKey(p, d) for p in reversed(PERIODS) for d in reversed(DISCIPLINES))
    assert len(set(cells)) == 75
    assert cells[0] == CellKey(PERIODS[0], Discipline.AGRI)
    assert str(cells[-1]) == "2016–2021/PHYS"
