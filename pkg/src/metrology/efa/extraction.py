"""Factor extraction by iterated principal-axis factoring.

Starting from squared multiple correlations as communality estimates, the
reduced correlation matrix (communalities on the diagonal) is repeatedly
eigendecomposed and the communalities re-estimated from the top-k factor
loadings until they stop moving.
"""

from __future__ import annotations

import numpy as np

from ..dataset import CorrelationMatrix
from ..errors import ConvergenceError, ValidationError
from .solution import FactorSolution, order_and_sign

HEYWOOD_CAP = 1.0 - 1e-6


def squared_multiple_correlations(r: np.ndarray) -> np.ndarray:
    """SMC of each variable on all the others: 1 - 1/diag(R^-1)."""
    inv = np.linalg.inv(r)
    return 1.0 - 1.0 / np.diag(inv)


def extract(cm: CorrelationMatrix, k: int, tol: float = 1e-6,
            max_iter: int = 200) -> FactorSolution:
    """Extract k unrotated factors from a correlation matrix.

    Returns a solution with orthogonal factors (unit factor correlations),
    communalities equal to the row sums of squared loadings, and a Heywood
    flag when any communality had to be capped just below one.
    """
    p = cm.p
    if not 1 <= k < p:
        raise ValidationError(f"factor count must satisfy 1 <= k < p={p}")
    r = np.asarray(cm.r, dtype=float)
    eigenvalues_full = np.sort(np.linalg.eigvalsh(r))[::-1]
    if eigenvalues_full[-1] <= 1e-12:
        raise ValidationError(
            "correlation matrix is singular; screen for multicollinearity first"
        )

    h2 = np.clip(squared_multiple_correlations(r), 0.0, HEYWOOD_CAP)
    heywood = False
    loadings = None
    delta = np.inf
    for _ in range(max_iter):
        reduced = r.copy()
        np.fill_diagonal(reduced, h2)
        w, v = np.linalg.eigh(reduced)
        top = np.argsort(w)[::-1][:k]
        lam = np.clip(w[top], 0.0, None)
        loadings = v[:, top] * np.sqrt(lam)
        h2_new = (loadings ** 2).sum(axis=1)
        if (h2_new > HEYWOOD_CAP).any():
            heywood = True
            scale = np.sqrt(np.minimum(h2_new, HEYWOOD_CAP) / np.where(h2_new > 0, h2_new, 1.0))
            loadings = loadings * scale[:, None]
            h2_new = (loadings ** 2).sum(axis=1)
        delta = float(np.abs(h2_new - h2).max())
        h2 = h2_new
        if delta < tol:
            break
    else:
        raise ConvergenceError(
            f"principal-axis factoring did not converge in {max_iter} iterations",
            last_delta=delta,
        )

    loadings, phi = order_and_sign(loadings, np.eye(k))
    return FactorSolution(
        labels=cm.labels,
        pattern=loadings,
        factor_correlations=phi,
        eigenvalues=tuple(float(e) for e in eigenvalues_full),
        rotation="none",
        heywood=heywood,
    )
