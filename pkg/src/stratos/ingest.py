"""Reading and writing corpus files, and the record-level cleaning rules.

Publications file columns::

    pub_id, year, journal_percentile, author_ids, asjc_codes, any_foreign_affiliation

In the delimited form ``author_ids`` and ``asjc_codes`` are joined with ``;``
and the flag is written as ``0``/``1``. The JSON-lines form uses native lists
and booleans.

Authors file columns::

    author_id, gender, gender_confidence, first_pub_year, inst_type

An empty ``first_pub_year`` (or JSON ``null``) means missing.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

from .vocab import (
    FIRST_YEAR,
    LAST_YEAR,
    AuthorRecord,
    Discipline,
    Gender,
    InstType,
    PublicationRecord,
    VocabularyError,
    check_percentile,
)

logger = logging.getLogger(__name__)

PUBLICATION_FIELDS = (
    "pub_id",
    "year",
    "journal_percentile",
    "author_ids",
    "asjc_codes",
    "any_foreign_affiliation",
)
AUTHOR_FIELDS = ("author_id", "gender", "gender_confidence", "first_pub_year", "inst_type")
FORMATS = ("csv", "jsonl")


class ParseError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class DuplicateKeyError(ValueError):
    pass


@dataclass(frozen=True)
class CleaningConfig:
    max_authors: int = 100
    gender_confidence_min: float = 0.85
    require_first_pub_year: bool = True
    require_discipline: bool = True

    def __post_init__(self):
        if self.max_authors < 1:
            raise ValueError("max_authors must be >= 1")
        if not 0.0 <= self.gender_confidence_min <= 1.0:
            raise ValueError("gender_confidence_min must lie in [0, 1]")


@dataclass(frozen=True)
class CleaningReport:
    input_authors: int
    input_publications: int
    dropped_gender: int
    dropped_first_year: int
    dropped_discipline: int
    dropped_big_author_lists: int
    dropped_out_of_range_year: int
    dropped_orphan_publications: int
    retained_authors: int
    retained_publications: int

    def reconciles(self) -> bool:
        authors_ok = (
            self.retained_authors + self.dropped_gender + self.dropped_first_year + self.dropped_discipline
            == self.input_authors
        )
        pubs_ok = (
            self.retained_publications
            + self.dropped_big_author_lists
            + self.dropped_out_of_range_year
            + self.dropped_orphan_publications
            == self.input_publications
        )
        return authors_ok and pubs_ok

    def to_dict(self) -> dict:
        return asdict(self)


# -- parsing ---------------------------------------------------------------


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "t", "yes"):
        return True
    if t in ("0", "false", "f", "no", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _split(value) -> list[str]:
    if isinstance(value, list):
        return [str(v) for v in value]
    value = str(value).strip()
    return [v for v in value.split(";") if v] if value else []


def _publication_from_row(row: dict) -> PublicationRecord:
    year = int(row["year"])
    rank = row["journal_percentile"]
    if isinstance(rank, str):
        rank = int(rank.strip())
    return PublicationRecord(
        pub_id=str(row["pub_id"]),
        author_ids=tuple(_split(row["author_ids"])),
        year=year,
        journal_percentile=check_percentile(rank),
        asjc_codes=tuple(Discipline.parse(c) for c in _split(row["asjc_codes"])),
        any_foreign_affiliation=_parse_bool(row["any_foreign_affiliation"]),
    )


def _author_from_row(row: dict) -> AuthorRecord:
    conf = float(row["gender_confidence"])
    if not 0.0 <= conf <= 1.0:
        raise ValueError(f"gender_confidence {conf} outside [0, 1]")
    fpy = row.get("first_pub_year")
    fpy = None if fpy is None or str(fpy).strip() == "" else int(fpy)
    try:
        gender = Gender(str(row["gender"]).strip().lower())
        inst = InstType(str(row["inst_type"]).strip())
    except ValueError as exc:
        raise ValueError(str(exc)) from None
    return AuthorRecord(
        author_id=str(row["author_id"]),
        gender=gender,
        gender_confidence=conf,
        first_pub_year=fpy,
        inst_type=inst,
    )


def _iter_rows(path: Path, fmt: str, fields):
    """Yield (line_number, dict) pairs from a csv or jsonl file."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
                if not isinstance(row, dict):
                    raise ParseError(path, lineno, "expected a JSON object")
                yield lineno, row
            return
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        missing = [f for f in fields if f not in reader.fieldnames]
        if missing:
            raise ParseError(path, 1, f"missing columns {missing}")
        for row in reader:
            yield reader.line_num, row


def _load(path, fmt, fields, build, key):
    records, seen = [], set()
    for lineno, row in _iter_rows(Path(path), fmt, fields):
        try:
            rec = build(row)
        except (KeyError, ValueError, TypeError, VocabularyError) as exc:
            raise ParseError(path, lineno, str(exc)) from None
        k = getattr(rec, key)
        if k in seen:
            raise DuplicateKeyError(f"{path}:{lineno}: duplicate {key} {k!r}")
        seen.add(k)
        records.append(rec)
    return records


def load_publications(path, fmt: str = "csv") -> list[PublicationRecord]:
    return _load(path, fmt, PUBLICATION_FIELDS, _publication_from_row, "pub_id")


def load_authors(path, fmt: str = "csv") -> list[AuthorRecord]:
    return _load(path, fmt, AUTHOR_FIELDS, _author_from_row, "author_id")


def load_corpus(publications_path, authors_path, fmt: str = "csv"):
    """Parse both corpus files.

    Every row is either parsed or reported through :class:`ParseError`
    (with its line number); nothing is skipped silently.
    """
    pubs = load_publications(publications_path, fmt)
    authors = load_authors(authors_path, fmt)
    logger.info("loaded %d publications and %d authors", len(pubs), len(authors))
    return pubs, authors


# -- writing ---------------------------------------------------------------


def _publication_row(p: PublicationRecord, fmt: str) -> dict:
    if fmt == "jsonl":
        return {
            "pub_id": p.pub_id,
            "year": p.year,
            "journal_percentile": p.journal_percentile,
            "author_ids": list(p.author_ids),
            "asjc_codes": [c.value for c in p.asjc_codes],
            "any_foreign_affiliation": p.any_foreign_affiliation,
        }
    return {
        "pub_id": p.pub_id,
        "year": p.year,
        "journal_percentile": p.journal_percentile,
        "author_ids": ";".join(p.author_ids),
        "asjc_codes": ";".join(c.value for c in p.asjc_codes),
        "any_foreign_affiliation": int(p.any_foreign_affiliation),
    }


def _author_row(a: AuthorRecord, fmt: str) -> dict:
    fpy = a.first_pub_year
    return {
        "author_id": a.author_id,
        "gender": a.gender.value,
        "gender_confidence": repr(float(a.gender_confidence)),
        "first_pub_year": fpy if fpy is not None else (None if fmt == "jsonl" else ""),
        "inst_type": a.inst_type.value,
    }


def _write(path: Path, fmt: str, fields, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        else:
            writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)


def corpus_filenames(fmt: str) -> tuple[str, str]:
    ext = "csv" if fmt == "csv" else "jsonl"
    return f"publications.{ext}", f"authors.{ext}"


def write_corpus(pubs, authors, out_dir, fmt: str = "csv") -> tuple[Path, Path]:
    """Write a corpus in the same layout :func:`load_corpus` reads."""
    out_dir = Path(out_dir)
    pname, aname = corpus_filenames(fmt)
    ppath, apath = out_dir / pname, out_dir / aname
    _write(ppath, fmt, PUBLICATION_FIELDS, (_publication_row(p, fmt) for p in sorted(pubs, key=lambda p: p.pub_id)))
    _write(apath, fmt, AUTHOR_FIELDS, (_author_row(a, fmt) for a in sorted(authors, key=lambda a: a.author_id)))
    return ppath, apath


# -- cleaning --------------------------------------------------------------


def clean(pubs, authors, config: CleaningConfig | None = None):
    """Apply the record-level cleaning rules.

    Returns ``((publications, authors), report)``. Cleaning never raises;
    every removal is counted in the report. Authors are checked in the order
    gender, first publication year, discipline and counted once, under the
    first rule they fail.
    """
    config = config or CleaningConfig()
    n_pubs_in, n_auth_in = len(pubs), len(authors)

    big = out_of_range = 0
    kept_pubs = []
    for p in pubs:
        if p.author_count > config.max_authors:
            big += 1
        elif not FIRST_YEAR <= p.year <= LAST_YEAR:
            out_of_range += 1
        else:
            kept_pubs.append(p)

    has_code: set[str] = set()
    for p in kept_pubs:
        if p.asjc_codes:
            has_code.update(p.author_ids)

    dropped_gender = dropped_year = dropped_disc = 0
    kept_authors = []
    for a in authors:
        if a.gender == Gender.UNKNOWN or a.gender_confidence < config.gender_confidence_min:
            dropped_gender += 1
        elif config.require_first_pub_year and a.first_pub_year is None:
            dropped_year += 1
        elif config.require_discipline and a.author_id not in has_code:
            dropped_disc += 1
        else:
            kept_authors.append(a)

    retained_ids = {a.author_id for a in kept_authors}
    final_pubs = [p for p in kept_pubs if any(aid in retained_ids for aid in p.author_ids)]
    orphans = len(kept_pubs) - len(final_pubs)

    final_pubs.sort(key=lambda p: p.pub_id)
    kept_authors.sort(key=lambda a: a.author_id)
    report = CleaningReport(
        input_authors=n_auth_in,
        input_publications=n_pubs_in,
        dropped_gender=dropped_gender,
        dropped_first_year=dropped_year,
        dropped_discipline=dropped_disc,
        dropped_big_author_lists=big,
        dropped_out_of_range_year=out_of_range,
        dropped_orphan_publications=orphans,
        retained_authors=len(kept_authors),
        retained_publications=len(final_pubs),
    )
    logger.info("cleaning kept %d/%d authors, %d/%d publications", len(kept_authors), n_auth_in, len(final_pubs), n_pubs_in)
    return (final_pubs, kept_authors), report
