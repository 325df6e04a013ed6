"""Fixed vocabulary shared by every stage: periods, disciplines, record types."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

FIRST_YEAR = 1992
LAST_YEAR = 2021
PERIOD_LENGTH = 6
N_PERIODS = 5


class VocabularyError(ValueError):
    """Raised for values outside the fixed vocabulary (years, codes, ranks)."""


@dataclass(frozen=True, order=True)
class PeriodId:
    index: int
    start_year: int = field(compare=False)
    end_year: int = field(compare=False)

    @property
    def label(self) -> str:
        return f"{self.start_year}–{self.end_year}"

    def __str__(self) -> str:
        return self.label


PERIODS: tuple[PeriodId, ...] = tuple(
    PeriodId(i, FIRST_YEAR + PERIOD_LENGTH * i, FIRST_YEAR + PERIOD_LENGTH * i + PERIOD_LENGTH - 1)
    for i in range(N_PERIODS)
)


def period_of_year(year: int) -> PeriodId:
    """Return the six-year period containing `year`."""
    if not FIRST_YEAR <= year <= LAST_YEAR:
        raise VocabularyError(f"year {year} outside {FIRST_YEAR}-{LAST_YEAR}")
    return PERIODS[(year - FIRST_YEAR) // PERIOD_LENGTH]


def period_from_label(label: str) -> PeriodId:
    norm = label.replace("-", "–").strip()
    for p in PERIODS:
        if p.label == norm:
            return p
    raise VocabularyError(f"unknown period label {label!r}")


class Discipline(str, enum.Enum):
    AGRI = "AGRI"
    BIO = "BIO"
    CHEM = "CHEM"
    CHEMENG = "CHEMENG"
    COMP = "COMP"
    EARTH = "EARTH"
    ENER = "ENER"
    ENG = "ENG"
    ENVI = "ENVI"
    MATER = "MATER"
    MATH = "MATH"
    MED = "MED"
    NEURO = "NEURO"
    PHARM = "PHARM"
    PHYS = "PHYS"

    @classmethod
    def parse(cls, text: str) -> "Discipline":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise VocabularyError(f"unknown discipline code {text!r}") from None

    def __str__(self) -> str:
        return self.value


DISCIPLINES: tuple[Discipline, ...] = tuple(Discipline)


class Gender(str, enum.Enum):
    FEMALE = "female"
    MALE = "male"
    UNKNOWN = "unknown"


class InstType(str, enum.Enum):
    IDUB = "IDUB"
    REST = "Rest"


def check_percentile(rank: int) -> int:
    """Validate a journal percentile rank (0-99) and return it as int."""
    r = int(rank)
    if r != rank or not 0 <= r <= 99:
        raise VocabularyError(f"journal percentile {rank!r} outside 0-99")
    return r


@dataclass(frozen=True)
class PublicationRecord:
    pub_id: str
    author_ids: tuple[str, ...]
    year: int
    journal_percentile: int
    asjc_codes: tuple[Discipline, ...]
    any_foreign_affiliation: bool

    def __post_init__(self):
        if len(self.author_ids) < 1:
            raise VocabularyError(f"publication {self.pub_id} has no authors")
        check_percentile(self.journal_percentile)

    @property
    def author_count(self) -> int:
        return len(self.author_ids)

    @property
    def period(self) -> PeriodId:
        return period_of_year(self.year)


@dataclass(frozen=True)
class AuthorRecord:
    author_id: str
    gender: Gender
    gender_confidence: float
    first_pub_year: int | None
    inst_type: InstType


@dataclass(frozen=True, order=True)
class CellKey:
    period: PeriodId
    discipline: Discipline

    def __str__(self) -> str:
        return f"{self.period.label}/{self.discipline.value}"
