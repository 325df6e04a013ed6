"""Journal-prestige weighting and per-author prestige analytics."""
from __future__ import annotations

import numpy as np

from .vocab import VocabularyError

PRESTIGE_EXPONENT = 2.5
TOP_BAND = (90, 99)
N_BANDS = 10


def _ranks(pubs) -> np.ndarray:
    """Accept publication records or bare percentile ranks."""
    ranks = np.array(
        [getattr(p, "journal_percentile", p) for p in pubs],
        dtype=float,
    )
    if ranks.size == 0:
        raise ValueError("empty publication set")
    if np.any((ranks < 0) | (ranks > 99)):
        raise VocabularyError("journal percentile outside 0-99")
    return ranks


def prestige_weight(percentile, exponent: float = PRESTIGE_EXPONENT):
    """Nonlinear prestige weight ``(rank / 99) ** exponent``.

    Works on scalars and arrays. Rank 99 maps to exactly 1 and rank 0 to 0.
    """
    r = np.asarray(percentile, dtype=float)
    if np.any((r < 0) | (r > 99)) or np.any(np.isnan(r)):
        raise VocabularyError("journal percentile outside 0-99")
    w = (r / 99.0) ** exponent
    return float(w) if w.ndim == 0 else w


def weighted_productivity(pubs, exponent: float = PRESTIGE_EXPONENT, counting: str = "full") -> float:
    """Sum of prestige weights over an author-period's publications.

    ``counting="fractional"`` divides each publication's weight by its byline
    size; it needs publication records rather than bare ranks.
    """
    ranks = _ranks(pubs)
    w = prestige_weight(ranks, exponent)
    if counting == "full":
        return float(np.sum(w))
    if counting == "fractional":
        sizes = np.array([p.author_count for p in pubs], dtype=float)
        return float(np.sum(w / sizes))
    raise ValueError(f"unknown counting mode {counting!r}")


def linear_productivity(pubs) -> float:
    """Linear (y = x) prestige-normalized productivity."""
    return float(np.sum(_ranks(pubs) / 99.0))


def top_share(pubs, band=TOP_BAND) -> float:
    """Fraction of publications whose rank lies in the closed ``band``."""
    ranks = _ranks(pubs)
    lo, hi = band
    return float(np.count_nonzero((ranks >= lo) & (ranks <= hi)) / ranks.size)


def decile_histogram(pubs) -> np.ndarray:
    """Shares of publications per decile band 0-9, ..., 90-99."""
    ranks = _ranks(pubs).astype(int)
    counts = np.bincount(ranks // 10, minlength=N_BANDS)
    return counts / ranks.size


def band_label(k: int) -> str:
    return f"{10 * k}-{10 * k + 9}"
