"""How many factors? Parallel analysis, the Kaiser criterion, and scree
elbow candidates, reported side by side and left to the analyst to weigh."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import MetricDataset, correlation_matrix
from ..errors import ValidationError


@dataclass(frozen=True)
class FactorCountAdvice:
    """Competing factor-count suggestions for one dataset."""

    eigenvalues: tuple
    parallel_suggested: int
    parallel_thresholds: tuple
    kaiser_suggested: int
    scree_series: tuple
    scree_elbow_candidates: tuple
    theory_suggested: int | None = None


def kaiser_count(eigenvalues) -> int:
    """Number of eigenvalues above one."""
    return int(np.sum(np.asarray(eigenvalues) > 1.0))


def scree_elbow_candidates(eigenvalues, top: int = 3) -> tuple:
    """Advisory elbow positions from the second-difference acceleration.

    The acceleration at rank i is e[i-1] - 2 e[i] + e[i+1]; a sharp bend at
    rank i suggests keeping i - 1 factors. Candidates are returned in
    decreasing order of acceleration. Reading a scree plot takes judgement,
    so these are hints, not a decision.
    """
    e = np.asarray(eigenvalues, dtype=float)
    if e.size < 3:
        return ()
    accel = e[:-2] - 2.0 * e[1:-1] + e[2:]
    order = np.argsort(-accel, kind="stable")
    candidates = []
    for idx in order[:top]:
        count = int(idx) + 1  # bend at rank idx+2 (1-based), keep one fewer
        if count >= 1:
            candidates.append(count)
    return tuple(candidates)


def parallel_analysis(n: int, p: int, actual_eigenvalues, reps: int = 100,
                      quantile: float = 0.95, seed: int = 0):
    """Horn's parallel analysis against seeded standard-normal data.

    Generates ``reps`` random n-by-p datasets, takes the eigenvalues of each
    sample correlation matrix, and keeps the leading ranks where the actual
    eigenvalue exceeds the chosen quantile of the random eigenvalues at the
    same rank. Replications use independently derived seeds, so the result
    does not depend on execution order.
    """
    if reps < 50:
        raise ValidationError("parallel analysis needs at least 50 replications")
    if p < 2:
        raise ValidationError("parallel analysis needs at least 2 metrics")
    if not 0 < quantile < 1:
        raise ValidationError("quantile must lie in (0, 1)")
    child_seeds = np.random.SeedSequence(seed).spawn(reps)
    random_eigs = np.empty((reps, p))
    for rep, child in enumerate(child_seeds):
        rng = np.random.default_rng(child)
        data = rng.standard_normal((n, p))
        random_eigs[rep] = np.sort(np.linalg.eigvalsh(np.corrcoef(data, rowvar=False)))[::-1]
    thresholds = np.quantile(random_eigs, quantile, axis=0)

    actual = np.asarray(actual_eigenvalues, dtype=float)
    suggested = 0
    for rank in range(p):
        if actual[rank] > thresholds[rank]:
            suggested += 1
        else:
            break
    return suggested, tuple(float(t) for t in thresholds)


def advise_factor_count(ds: MetricDataset, reps: int = 100, quantile: float = 0.95,
                        seed: int = 0, theory: int | None = None) -> FactorCountAdvice:
    """Collect all factor-count suggestions for a dataset.

    Adequacy of the dataset is the caller's concern: advice is diagnostic
    output and is also useful on data that would fail the adequacy bar.
    """
    cm = correlation_matrix(ds)
    eigenvalues = np.sort(np.linalg.eigvalsh(cm.r))[::-1]
    suggested, thresholds = parallel_analysis(
        cm.n_used, cm.p, eigenvalues, reps=reps, quantile=quantile, seed=seed
    )
    return FactorCountAdvice(
        eigenvalues=tuple(float(e) for e in eigenvalues),
        parallel_suggested=suggested,
        parallel_thresholds=thresholds,
        kaiser_suggested=kaiser_count(eigenvalues),
        scree_series=tuple(float(e) for e in eigenvalues),
        scree_elbow_candidates=scree_elbow_candidates(eigenvalues),
        theory_suggested=theory,
    )
