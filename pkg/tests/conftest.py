import math

import numpy as np
import pytest

from stratos.panel import PanelRow
from stratos.vocab import DISCIPLINES, PERIODS, CellKey, InstType

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def key(k):
        num = "".join(ch for ch in k if ch.isdigit())
        return (int(num), k)

    for cid in sorted(ACCEPTANCE, key=key):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}")


def make_rows(n: int, seed: int = 0, label: bool = True) -> list[PanelRow]:
    """Random panel rows covering every period and discipline.

    The top10 label follows a logit in the log count and mean percentile so
    that models fitted on these rows have a finite optimum.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        p = PERIODS[i % len(PERIODS)]
        d = DISCIPLINES[(i // len(PERIODS)) % len(DISCIPLINES)]
        n_pubs = int(1 + rng.poisson(2.0))
        mean_pct = float(rng.uniform(20, 99))
        ln = math.log(n_pubs)
        eta = -2.5 + 1.2 * ln + 0.03 * (mean_pct - 60) + 0.3 * rng.standard_normal()
        rows.append(PanelRow(
            author_id=f"A{i // 2:06d}",
            cell=CellKey(p, d),
            n_pubs=n_pubs,
            ln_pubs=ln,
            ln_pubs2=ln * ln,
            mean_journal_pct=mean_pct,
            coop=float(rng.uniform()),
            coopint=float(rng.uniform()),
            male=bool(rng.random() < 0.55),
            acage=float(rng.integers(0, 40)),
            inst_type=InstType.REST if rng.random() < 0.6 else InstType.IDUB,
            ats=float(1 + rng.gamma(2.0, 1.5)),
            prestmed=float(np.clip(mean_pct + rng.normal(0, 8), 0, 99)),
            weighted_prod=float(n_pubs * (mean_pct / 99) ** 2.5),
            top_share=float(rng.uniform()),
            deciles=tuple(float(v) for v in rng.dirichlet(np.ones(10))),
            top10=int(rng.random() < 1 / (1 + math.exp(-eta))) if label else None,
        ))
    return rows


def clustered_logit(n_clusters, size, beta=(-1.0, 2.0), sd=0.5, seed=0):
    """Random-intercept logit data: ``(X, y, cluster_ids)``."""
    rng = np.random.default_rng(seed)
    cl = np.repeat(np.arange(n_clusters), size)
    x = rng.normal(size=n_clusters * size)
    eta = beta[0] + beta[1] * x + rng.normal(scale=sd, size=n_clusters)[cl]
    y = (rng.random(cl.size) < 1 / (1 + np.exp(-eta))).astype(float)
    return np.column_stack([np.ones(cl.size), x]), y, cl


@pytest.fixture
def rows_small():
    return make_rows(600, seed=1)
