"""Cross-sectional least-squares helpers for conditional expectations."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import RegressionError


def basis_size(n_vars: int, degree: int) -> int:
    return math.comb(n_vars + degree, degree)


def poly_features(columns: list[np.ndarray], degree: int) -> np.ndarray:
    """Design matrix of all monomials with total degree <= degree.

    Columns are standardized first; constant columns pass through as zeros so
    degenerate states (e.g. the initial grid point) reduce to the intercept.
    """
    cols = []
    for c in columns:
        c = np.asarray(c, dtype=float)
        sd = c.std()
        cols.append((c - c.mean()) / sd if sd > 0 else np.zeros_like(c))
    n = cols[0].shape[0] if cols else 0
    feats = [np.ones(n)]
    if degree >= 1 and cols:
        powers = _monomial_powers(len(cols), degree)
        for expo in powers:
            term = np.ones(n)
            for c, e in zip(cols, expo):
                if e:
                    term = term * c ** e
            feats.append(term)
    return np.column_stack(feats)


def _monomial_powers(n_vars: int, degree: int) -> list[tuple[int, ...]]:
    out = []

    def rec(prefix, remaining, left):
        if remaining == 0:
            if sum(prefix) > 0:
                out.append(tuple(prefix))
            return
        for e in range(left + 1):
            rec(prefix + [e], remaining - 1, left - e)

    rec([], n_vars, degree)
    return out


def fit_conditional(features: np.ndarray, targets: np.ndarray,
                    fallback_mean: bool = False) -> np.ndarray:
    """Fitted values of an OLS regression of targets on features.

    Targets may be 1-D or 2-D (one regression per column).  Identically-zero
    feature columns (degenerate states standardized away) do not count
    toward the rank requirement; genuine rank deficiency among live columns
    degrades to the column mean with a warning when ``fallback_mean`` is
    set.  Minimal-norm lstsq solutions interpolate on tiny path sets and so
    act as exact conditioning there.
    """
    if features.shape[0] == 0:
        raise RegressionError("no rows to regress on")
    live = int((np.abs(features).max(axis=0) > 0).sum())
    coef, _, rank, _ = np.linalg.lstsq(features, targets, rcond=None)
    if fallback_mean and rank < min(live, features.shape[0]):
        warnings.warn("rank-deficient regression, using path-mean continuation",
                      RuntimeWarning, stacklevel=2)
        mean = targets.mean(axis=0)
        return np.broadcast_to(mean, targets.shape).copy()
    return features @ coef
