"""Oblique (oblimin) and orthogonal (varimax) rotation by gradient projection.

The gradient projection algorithm walks the rotation matrix along the
projected negative gradient of the simplicity criterion, halving the step
until the criterion improves. Oblique rotation constrains the columns of the
rotation matrix to unit length; orthogonal rotation projects onto the
orthogonal group via the singular value decomposition.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError, ValidationError
from .solution import FactorSolution, order_and_sign


def _oblimin_criterion(loadings: np.ndarray, gamma: float):
    """Direct oblimin value and gradient; gamma = 0 is quartimin."""
    k = loadings.shape[1]
    sq = loadings ** 2
    cross = sq @ (np.ones((k, k)) - np.eye(k))
    if gamma != 0.0:
        cross = cross - gamma * cross.mean(axis=0)
    value = float((sq * cross).sum() / 4.0)
    gradient = loadings * cross
    return value, gradient


def _varimax_criterion(loadings: np.ndarray):
    centered = loadings ** 2 - (loadings ** 2).mean(axis=0)
    value = -float((centered ** 2).sum() / 4.0)
    gradient = -loadings * centered
    return value, gradient


def _gpa_oblique(a: np.ndarray, t: np.ndarray, gamma: float, tol: float, max_iter: int):
    ti = np.linalg.inv(t)
    loadings = a @ ti.T
    f, gq = _oblimin_criterion(loadings, gamma)
    gradient = -(loadings.T @ gq @ ti).T
    step = 1.0
    for _ in range(max_iter):
        projected = gradient - t * (t * gradient).sum(axis=0)
        norm = np.linalg.norm(projected)
        if norm < tol:
            return loadings, t.T @ t, f, True
        step *= 2.0
        improved = False
        for _ in range(12):
            candidate = t - step * projected
            candidate = candidate / np.sqrt((candidate ** 2).sum(axis=0))
            ti = np.linalg.inv(candidate)
            loadings_new = a @ ti.T
            f_new, gq = _oblimin_criterion(loadings_new, gamma)
            if f_new < f - 0.5 * norm ** 2 * step:
                improved = True
                break
            step /= 2.0
        if not improved:
            # stuck below representable step size; report where we stopped
            return loadings, t.T @ t, f, norm < 1e-4
        t, loadings, f = candidate, loadings_new, f_new
        gradient = -(loadings.T @ gq @ ti).T
    projected = gradient - t * (t * gradient).sum(axis=0)
    return loadings, t.T @ t, f, float(np.linalg.norm(projected)) < tol


def _gpa_orthogonal(a: np.ndarray, t: np.ndarray, tol: float, max_iter: int):
    loadings = a @ t
    f, gq = _varimax_criterion(loadings)
    gradient = a.T @ gq
    step = 1.0
    for _ in range(max_iter):
        m = t.T @ gradient
        projected = gradient - t @ (m + m.T) / 2.0
        norm = np.linalg.norm(projected)
        if norm < tol:
            return loadings, np.eye(t.shape[0]), f, True
        step *= 2.0
        improved = False
        for _ in range(12):
            u, _, vt = np.linalg.svd(t - step * projected, full_matrices=False)
            candidate = u @ vt
            loadings_new = a @ candidate
            f_new, gq = _varimax_criterion(loadings_new)
            if f_new < f - 0.5 * norm ** 2 * step:
                improved = True
                break
            step /= 2.0
        if not improved:
            return loadings, np.eye(t.shape[0]), f, norm < 1e-4
        t, loadings, f = candidate, loadings_new, f_new
        gradient = a.T @ gq
    m = t.T @ gradient
    projected = gradient - t @ (m + m.T) / 2.0
    return loadings, np.eye(t.shape[0]), f, float(np.linalg.norm(projected)) < tol


def rotate(solution: FactorSolution, method: str = "oblimin", gamma: float = 0.0,
           restarts: int = 10, seed: int = 0, tol: float = 1e-6,
           max_iter: int = 500) -> FactorSolution:
    """Rotate an unrotated solution toward simple structure.

    Runs gradient projection from the identity plus ``restarts`` random
    orthonormal starts and keeps the converged run with the lowest criterion
    value. A one-factor solution is returned unchanged.
    """
    if solution.k == 1:
        return solution
    if method not in ("oblimin", "varimax"):
        raise ValidationError(f"unknown rotation method {method!r}")

    a = np.asarray(solution.pattern, dtype=float)
    k = solution.k
    starts = [np.eye(k)]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        q, r = np.linalg.qr(rng.standard_normal((k, k)))
        starts.append(q * np.sign(np.diag(r)))

    best = None
    for t0 in starts:
        if method == "oblimin":
            loadings, phi, f, converged = _gpa_oblique(a, t0, gamma, tol, max_iter)
        else:
            loadings, phi, f, converged = _gpa_orthogonal(a, t0, tol, max_iter)
        if converged and (best is None or f < best[2]):
            best = (loadings, phi, f)
    if best is None:
        raise ConvergenceError(
            f"{method} rotation failed to converge from {len(starts)} starts"
        )

    loadings, phi = order_and_sign(best[0], best[1])
    name = f"oblimin({gamma:g})" if method == "oblimin" else "varimax"
    return FactorSolution(
        labels=solution.labels,
        pattern=loadings,
        factor_correlations=phi,
        eigenvalues=solution.eigenvalues,
        rotation=name,
        heywood=solution.heywood,
        suppressed_threshold=solution.suppressed_threshold,
    )
