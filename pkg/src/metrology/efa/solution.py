"""Factor solutions and the end-to-end correlation -> extract -> rotate run."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..dataset import LISTWISE, MetricDataset, correlation_matrix
from ..errors import ValidationError

DEFAULT_SUPPRESS = 0.3


def order_and_sign(pattern: np.ndarray, phi: np.ndarray):
    """Canonical factor order and signs.

    Factors are sorted by descending sum of squared pattern loadings; within
    each factor the largest-magnitude loading is made positive. The factor
    correlation matrix is permuted and sign-flipped to match, which leaves
    the model-implied common covariance untouched.
    """
    ss = (pattern ** 2).sum(axis=0)
    order = np.argsort(-ss, kind="stable")
    pattern = pattern[:, order]
    phi = phi[np.ix_(order, order)]
    signs = np.ones(pattern.shape[1])
    for j in range(pattern.shape[1]):
        anchor = np.argmax(np.abs(pattern[:, j]))
        if pattern[anchor, j] < 0:
            signs[j] = -1.0
    pattern = pattern * signs
    phi = phi * np.outer(signs, signs)
    return pattern, phi


@dataclass(frozen=True)
class FactorSolution:
    """Pattern loadings, factor correlations, and everything derived from them."""

    labels: tuple
    pattern: np.ndarray
    factor_correlations: np.ndarray
    eigenvalues: tuple
    rotation: str = "none"
    heywood: bool = False
    suppressed_threshold: float = DEFAULT_SUPPRESS

    def __post_init__(self):
        pattern = np.asarray(self.pattern, dtype=float)
        phi = np.asarray(self.factor_correlations, dtype=float)
        pattern.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "pattern", pattern)
        object.__setattr__(self, "factor_correlations", phi)
        object.__setattr__(self, "labels", tuple(self.labels))
        if pattern.ndim != 2 or pattern.shape[0] != len(self.labels):
            raise ValidationError("pattern shape does not match metric labels")
        k = pattern.shape[1]
        if phi.shape != (k, k):
            raise ValidationError("factor correlation shape does not match factor count")
        if not np.allclose(np.diag(phi), 1.0, atol=1e-10):
            raise ValidationError("factor correlations must have a unit diagonal")

    @property
    def k(self) -> int:
        return self.pattern.shape[1]

    @property
    def p(self) -> int:
        return self.pattern.shape[0]

    @property
    def communalities(self) -> np.ndarray:
        """Model-implied common variance per metric: diag(L Phi L')."""
        return np.einsum(
            "ij,jk,ik->i", self.pattern, self.factor_correlations, self.pattern
        )

    @property
    def variance_explained(self) -> float:
        return float(self.communalities.sum() / self.p)

    @property
    def assignment(self) -> dict:
        """Metric -> factor index by largest absolute pattern loading.

        Ties resolve to the lower factor index.
        """
        idx = np.argmax(np.abs(self.pattern), axis=1)
        return {str(label): int(j) for label, j in zip(self.labels, idx)}

    def factor_metrics(self) -> dict:
        """Factor index -> list of assigned metric names."""
        grouped = {j: [] for j in range(self.k)}
        for metric, j in self.assignment.items():
            grouped[j].append(metric)
        return grouped

    def suppressed(self) -> np.ndarray:
        """Boolean mask of loadings below the display threshold."""
        return np.abs(self.pattern) < self.suppressed_threshold

    def digest(self) -> str:
        """Content hash of the loadings, rounded to 1e-10."""
        rounded = np.round(self.pattern, 10) + 0.0  # normalize -0.0
        payload = repr(rounded.tolist()).encode() + repr([str(c) for c in self.labels]).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class EfaConfig:
    """Knobs for one EFA pass."""

    missing_policy: str = LISTWISE
    extraction: str = "paf"
    rotation: str = "oblimin"
    gamma: float = 0.0
    restarts: int = 10
    rotation_seed: int = 0
    suppress_threshold: float = DEFAULT_SUPPRESS
    adequacy_override: bool = False
    extraction_tol: float = 1e-6
    extraction_max_iter: int = 200

    def __post_init__(self):
        if self.rotation not in ("oblimin", "varimax", "none"):
            raise ValidationError(f"unknown rotation {self.rotation!r}")
        if self.extraction == "minres":
            raise ValidationError("minimum-residual extraction is reserved; only 'paf' ships")
        if self.extraction != "paf":
            raise ValidationError(f"unknown extraction method {self.extraction!r}")


def run_efa(ds: MetricDataset, k: int, config: EfaConfig = EfaConfig()) -> FactorSolution:
    """Correlation -> adequacy gate -> extraction -> rotation, in one call.

    Adequacy failures (KMO below 0.5 or a non-significant Bartlett test)
    abort unless ``config.adequacy_override`` is set; the hard errors from a
    singular correlation matrix always propagate.
    """
    from .adequacy import adequacy
    from .extraction import extract
    from .rotation import rotate

    cm = correlation_matrix(ds, missing_policy=config.missing_policy)
    report = adequacy(cm, cm.n_used)
    if not report.passes and not config.adequacy_override:
        raise ValidationError(
            f"dataset fails the adequacy bar (KMO={report.kmo_overall:.3f}, "
            f"Bartlett p={report.bartlett_p:.3g}); pass adequacy_override to proceed"
        )
    solution = extract(cm, k, tol=config.extraction_tol, max_iter=config.extraction_max_iter)
    if config.rotation != "none" and k >= 2:
        solution = rotate(
            solution,
            method=config.rotation,
            gamma=config.gamma,
            restarts=config.restarts,
            seed=config.rotation_seed,
        )
    if config.suppress_threshold != solution.suppressed_threshold:
        solution = FactorSolution(
            labels=solution.labels,
            pattern=solution.pattern,
            factor_correlations=solution.factor_correlations,
            eigenvalues=solution.eigenvalues,
            rotation=solution.rotation,
            heywood=solution.heywood,
            suppressed_threshold=config.suppress_threshold,
        )
    return solution
