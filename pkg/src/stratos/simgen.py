"""Seeded synthetic publication corpus with heavy-tailed productivity.

Each author draws a latent ability. Ability scales a Lotka-type draw of the
number of articles per active period and, through ``prestige_gradient``,
raises the chance that an article lands in a top-band journal (percentile
90-99). Articles outside the top band come from a fixed Beta over the
percentile scale, so the lower bands of high- and low-ability authors differ
only through dilution.
"""
from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, logit

from .vocab import (
    DISCIPLINES,
    PERIODS,
    AuthorRecord,
    Gender,
    InstType,
    PublicationRecord,
)

# author-period totals per period and per discipline in the reference sample
REFERENCE_PERIOD_TOTALS = (19234, 31635, 49403, 72294, 91717)
REFERENCE_DISCIPLINE_TOTALS = {
    "AGRI": 24555,
    "BIO": 26390,
    "CHEM": 28407,
    "CHEMENG": 1966,
    "COMP": 4263,
    "EARTH": 9482,
    "ENER": 1895,
    "ENG": 18416,
    "ENVI": 8601,
    "MATER": 12595,
    "MATH": 8039,
    "MED": 91804,
    "NEURO": 2446,
    "PHARM": 1992,
    "PHYS": 23432,
}
REFERENCE_MALE_SHARE = 140898 / 264283


def _normalize(values):
    v = np.asarray(values, dtype=float)
    return tuple(float(x) for x in v / v.sum())


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Generator settings.

    ``period_growth`` are relative sizes of the active author population per
    period and ``discipline_mix`` the home-discipline shares (both normalized
    on construction). ``productivity_tail`` is the Lotka exponent of articles
    per author-period; ``prestige_gradient`` the logit slope of the top-band
    probability in ability (0 decouples prestige from ability).
    """

    n_authors: int = 5000
    period_growth: tuple = _normalize(REFERENCE_PERIOD_TOTALS)
    discipline_mix: tuple = _normalize([REFERENCE_DISCIPLINE_TOTALS[d.value] for d in DISCIPLINES])
    productivity_tail: float = 1.5
    prestige_gradient: float = 2.0
    random_intercept_sd: float = 0.3
    seed: int = 20240101
    ability_scale: float = 1.0
    max_articles: int = 22
    continuation: float = 0.45
    top_band_rate: float = 0.08
    base_beta: tuple = (3.5, 1.0)
    team_mean: float = 3.0
    foreign_rate: float = 0.25
    male_share: float = REFERENCE_MALE_SHARE
    idub_share: float = 0.35
    veteran_share: float = 0.3
    cross_listing: float = 0.15

    def __post_init__(self):
        if self.n_authors < 1:
            raise SimConfigError("n_authors must be positive")
        if len(self.period_growth) != len(PERIODS):
            raise SimConfigError(f"period_growth needs {len(PERIODS)} entries")
        if len(self.discipline_mix) != len(DISCIPLINES):
            raise SimConfigError(f"discipline_mix needs {len(DISCIPLINES)} entries")
        for name in ("period_growth", "discipline_mix"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise SimConfigError(f"{name} entries must be positive")
            object.__setattr__(self, name, _normalize(v))
        if self.productivity_tail <= 1:
            raise SimConfigError("productivity_tail must exceed 1")
        if self.random_intercept_sd < 0:
            raise SimConfigError("random_intercept_sd must be >= 0")
        if self.max_articles < 1:
            raise SimConfigError("max_articles must be positive")
        for name in ("continuation", "top_band_rate", "foreign_rate", "male_share", "idub_share",
                     "veteran_share", "cross_listing"):
            if not 0 <= getattr(self, name) <= 1:
                raise SimConfigError(f"{name} must lie in [0, 1]")
        if not 0 < self.top_band_rate < 1:
            raise SimConfigError("top_band_rate must lie strictly inside (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise SimConfigError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "base_beta", tuple(float(x) for x in self.base_beta))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SimConfigError(f"unknown simgen settings: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})

    @classmethod
    def from_file(cls, path) -> "SimConfig":
        """Read a JSON or TOML file; a ``[simgen]`` table is used if present."""
        path = Path(path)
        data = load_config_file(path)
        return cls.from_dict(data.get("simgen", data))


def load_config_file(path) -> dict:
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def entry_probabilities(growth, continuation):
    """Entry-period distribution giving active counts proportional to ``growth``.

    With survival ``continuation`` between consecutive periods the expected
    active count is ``A_t = N sum_{e <= t} p_e c^(t - e)``; solving for ``p``
    gives ``p_t ∝ g_t - c g_(t-1)`` (clipped at zero when growth is too slow).
    """
    g = np.asarray(growth, dtype=float)
    p = g.copy()
    p[1:] -= continuation * g[:-1]
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def lotka_pmf(alpha: float, cap: int) -> np.ndarray:
    """``p(n) ∝ n^-alpha`` on ``n = 1..cap``."""
    pmf = np.arange(1, cap + 1, dtype=float) ** (-alpha)
    return pmf / pmf.sum()


def _draw(rng, cdf) -> int:
    # inversion; index into the support of the pmf behind ``cdf``
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), cdf.size - 1))


@dataclass
class _Author:
    record: AuthorRecord
    publications: list[PublicationRecord] = field(default_factory=list)


def _author(i: int, ss: np.random.SeedSequence, cfg: SimConfig, p_entry, count_cdf, pct_cdf) -> _Author:
    rng = np.random.default_rng(ss)
    aid = f"A{i:07d}"
    ability = rng.standard_normal()
    persistent = cfg.random_intercept_sd * rng.standard_normal()
    home = DISCIPLINES[rng.choice(len(DISCIPLINES), p=cfg.discipline_mix)]
    entry = int(rng.choice(len(PERIODS), p=p_entry))
    last = entry
    while last + 1 < len(PERIODS) and rng.random() < cfg.continuation:
        last += 1
    first_year = PERIODS[entry].start_year + int(rng.integers(0, 6))
    if rng.random() < cfg.veteran_share:
        first_year -= int(rng.integers(1, 31))
    gender = Gender.MALE if rng.random() < cfg.male_share else Gender.FEMALE
    record = AuthorRecord(
        author_id=aid,
        gender=gender,
        gender_confidence=float(np.round(rng.uniform(0.85, 1.0), 4)),
        first_pub_year=first_year,
        inst_type=InstType.IDUB if rng.random() < cfg.idub_share else InstType.REST,
    )
    out = _Author(record)
    scale = np.exp(cfg.ability_scale * ability + persistent)
    p_top = expit(logit(cfg.top_band_rate) + cfg.prestige_gradient * ability)
    k = 0
    for t in range(entry, last + 1):
        period = PERIODS[t]
        n = int(min(cfg.max_articles, max(1, round((_draw(rng, count_cdf) + 1) * scale))))
        lo = max(period.start_year, first_year)
        for _ in range(n):
            year = int(rng.integers(lo, period.end_year + 1))
            if rng.random() < p_top:
                pct = int(rng.integers(90, 100))
            else:
                pct = _draw(rng, pct_cdf)
            codes = [home]
            if rng.random() < cfg.cross_listing:
                other = DISCIPLINES[rng.choice(len(DISCIPLINES), p=cfg.discipline_mix)]
                if other != home:
                    codes.append(other)
            team = 1 + int(rng.poisson(cfg.team_mean - 1)) if cfg.team_mean > 1 else 1
            coauthors = tuple(f"X{i:07d}.{k:04d}.{j}" for j in range(1, min(team, 100)))
            out.publications.append(
                PublicationRecord(
                    pub_id=f"P{i:07d}.{k:04d}",
                    author_ids=(aid,) + coauthors,
                    year=year,
                    journal_percentile=pct,
                    asjc_codes=tuple(codes),
                    any_foreign_affiliation=bool(rng.random() < cfg.foreign_rate),
                )
            )
            k += 1
    return out


def base_percentile_pmf(a: float, b: float) -> np.ndarray:
    """Percentile ranks 0..99 from a Beta(a, b) on the unit interval, binned."""
    from scipy.stats import beta

    edges = np.linspace(0.0, 1.0, 101)
    return np.diff(beta.cdf(edges, a, b))


def generate(config: SimConfig | None = None, threads: int = 1):
    """Generate ``(publications, authors)``.

    Every author has an independent stream spawned from ``config.seed``, so
    the output does not depend on ``threads``. Records are sorted by id.
    """
    cfg = config or SimConfig()
    p_entry = entry_probabilities(cfg.period_growth, cfg.continuation)
    count_cdf = np.cumsum(lotka_pmf(cfg.productivity_tail, cfg.max_articles))
    pct_cdf = np.cumsum(base_percentile_pmf(*cfg.base_beta))
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_authors)

    def one(i):
        return _author(i, streams[i], cfg, p_entry, count_cdf, pct_cdf)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            drafts = list(ex.map(one, range(cfg.n_authors)))
    else:
        drafts = [one(i) for i in range(cfg.n_authors)]
    authors = [d.record for d in drafts]
    pubs = [p for d in drafts for p in d.publications]
    return pubs, authors


def articles_per_period(pubs) -> list[int]:
    counts = [0] * len(PERIODS)
    for p in pubs:
        counts[p.period.index] += 1
    return counts


__all__ = [
    "REFERENCE_DISCIPLINE_TOTALS",
    "REFERENCE_PERIOD_TOTALS",
    "SimConfig",
    "SimConfigError",
    "articles_per_period",
    "base_percentile_pmf",
    "entry_probabilities",
    "generate",
    "load_config_file",
    "lotka_pmf",
]
