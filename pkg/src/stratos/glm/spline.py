"""Natural cubic spline basis (the ``ns()`` construction, without intercept)."""
from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline


def _interior_knots(x, probs, lo, hi):
    k = np.quantile(x, probs)
    if np.all(np.diff(np.concatenate([[lo], k, [hi]])) > 0):
        return k
    return np.quantile(np.unique(x), probs)


class NaturalSpline:
    """Natural cubic spline basis with quantile-placed interior knots.

    Boundary knots sit at the data range; ``df - 1`` interior knots sit at the
    equally spaced quantiles ``k / df``. The B-spline basis on those knots is
    projected onto the subspace with zero second derivative at both boundary
    knots, and the constant function is removed, leaving ``df`` columns.
    Outside the boundary knots each column continues linearly.
    """

    def __init__(self, x, df: int):
        x = np.asarray(x, dtype=float)
        if df < 1:
            raise ValueError("df must be >= 1")
        lo, hi = float(np.min(x)), float(np.max(x))
        if not hi > lo:
            raise ValueError("natural spline needs a non-constant covariate")
        if np.unique(x).size < df + 1:
            raise ValueError(f"need at least {df + 1} distinct values for df={df}")
        self.df = df
        self.boundary = (lo, hi)
        probs = np.arange(1, df) / df
        self.interior = _interior_knots(x, probs, lo, hi) if df > 1 else np.array([])
        self.knots = np.concatenate([[lo] * 4, self.interior, [hi] * 4])
        nb = len(self.knots) - 4
        # second derivatives of every B-spline at both boundaries
        const = np.vstack([self._bspline_design(np.array(self.boundary), deriv=2)])
        # drop the first B-spline (removes the intercept), then project out the
        # boundary constraints via a complete QR of their transpose
        const = const[:, 1:]
        q, _ = np.linalg.qr(const.T, mode="complete")
        self._proj = q[:, 2:]  # (nb - 1, df)
        assert self._proj.shape == (nb - 1, df)

    def _bspline_design(self, x, deriv=0):
        nb = len(self.knots) - 4
        cols = []
        for i in range(nb):
            c = np.zeros(nb)
            c[i] = 1.0
            spl = BSpline(self.knots, c, 3, extrapolate=True)
            cols.append(spl(x, nu=deriv) if deriv else spl(x))
        return np.column_stack(cols)

    def _inside(self, x):
        return self._bspline_design(x)[:, 1:] @ self._proj

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.boundary
        inner = np.clip(x, lo, hi)
        out = self._inside(inner)
        below, above = x < lo, x > hi
        if below.any() or above.any():
            slopes = self._bspline_design(np.array([lo, hi]), deriv=1)[:, 1:] @ self._proj
            if below.any():
                out[below] += (x[below] - lo)[:, None] * slopes[0]
            if above.any():
                out[above] += (x[above] - hi)[:, None] * slopes[1]
        return out


def natural_spline_basis(x, df: int) -> np.ndarray:
    """Evaluate a ``df``-column natural cubic spline basis at ``x`` itself."""
    return NaturalSpline(x, df)(x)
