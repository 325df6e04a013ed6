"""Prestige-stratified top-performer analytics for publication corpora.

Stages: ``ingest`` (load and clean records), ``panel`` (author x period x
discipline micro-panel), ``metrics`` (prestige weighting), ``classify`` (top
class per cell), ``stats`` (rank-sum tests), ``glm`` (logit GLM, GLMM, GEE),
``diagnostics``, ``simgen`` (synthetic corpora), ``report`` and ``cli``.
"""
from importlib.metadata import PackageNotFoundError, version

from .kernels import BACKEND
from .vocab import DISCIPLINES, PERIODS, CellKey, Discipline, PeriodId, VocabularyError

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # source tree without installation
    __version__ = "0.0.0"

__all__ = [
    "BACKEND",
    "DISCIPLINES",
    "PERIODS",
    "CellKey",
    "Discipline",
    "PeriodId",
    "VocabularyError",
    "__version__",
]
