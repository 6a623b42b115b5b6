"""Sampling adequacy: KMO via anti-image partial correlations, Bartlett's
test of sphericity, multicollinearity screening, observations-per-metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from ..dataset import CorrelationMatrix
from ..errors import MulticollinearityError, ValidationError

MIN_OBS_PER_VARIABLE = 10.0


@dataclass(frozen=True)
class AdequacyReport:
    """KMO, Bartlett, and screening results for one correlation matrix."""

    kmo_overall: float
    kmo_per_variable: dict
    bartlett_chi2: float
    bartlett_df: int
    bartlett_p: float
    multicollinear_pairs: list
    obs_per_variable: float
    n: int

    @property
    def passes(self) -> bool:
        """Minimum bar for factoring: KMO at least 0.5 and Bartlett significant."""
        return self.kmo_overall >= 0.5 and self.bartlett_p < 0.05

    @property
    def sample_size_warning(self) -> bool:
        return self.obs_per_variable < MIN_OBS_PER_VARIABLE


def _near_duplicate_pairs(cm: CorrelationMatrix, cutoff: float):
    pairs = []
    for i in range(cm.p):
        for j in range(i + 1, cm.p):
            r = cm.r[i, j]
            if abs(r) >= cutoff:
                pairs.append((str(cm.labels[i]), str(cm.labels[j]), float(r)))
    pairs.sort(key=lambda t: -abs(t[2]))
    return pairs


def adequacy(cm: CorrelationMatrix, n: int, multicollinearity_cutoff: float = 0.9) -> AdequacyReport:
    """Run the pre-factoring adequacy battery on a correlation matrix.

    KMO compares squared correlations against squared anti-image partial
    correlations (from the inverse correlation matrix). Bartlett's statistic
    is -(n - 1 - (2p + 5) / 6) ln|R| on p(p-1)/2 degrees of freedom. A
    non-positive-definite matrix aborts with the near-duplicate metric pairs
    that most likely caused it.
    """
    p = cm.p
    if n <= p:
        raise ValidationError(f"sample size {n} must exceed the number of metrics {p}")

    r = np.asarray(cm.r, dtype=float)
    eigenvalues = np.linalg.eigvalsh(r)
    if eigenvalues.min() <= 1e-12:
        suspects = _near_duplicate_pairs(cm, 0.999) or _near_duplicate_pairs(cm, multicollinearity_cutoff)
        raise MulticollinearityError(suspects)

    inv = np.linalg.inv(r)
    d = np.sqrt(np.diag(inv))
    partial = -inv / np.outer(d, d)
    off = ~np.eye(p, dtype=bool)

    r2 = r ** 2
    q2 = partial ** 2

    def _ratio(num, den):
        # an exactly diagonal matrix has no correlation signal at all
        return float(num / den) if den > 0 else 0.0

    kmo_overall = _ratio(r2[off].sum(), r2[off].sum() + q2[off].sum())
    kmo_per_variable = {}
    for i in range(p):
        mask = off[i]
        kmo_per_variable[str(cm.labels[i])] = _ratio(
            r2[i, mask].sum(), r2[i, mask].sum() + q2[i, mask].sum()
        )

    sign, logdet = np.linalg.slogdet(r)
    if sign <= 0:
        raise MulticollinearityError(_near_duplicate_pairs(cm, multicollinearity_cutoff))
    statistic = -(n - 1 - (2 * p + 5) / 6.0) * logdet
    statistic = max(statistic, 0.0)
    df = p * (p - 1) // 2
    p_value = float(chi2.sf(statistic, df))

    return AdequacyReport(
        kmo_overall=kmo_overall,
        kmo_per_variable=kmo_per_variable,
        bartlett_chi2=float(statistic),
        bartlett_df=df,
        bartlett_p=p_value,
        multicollinear_pairs=_near_duplicate_pairs(cm, multicollinearity_cutoff),
        obs_per_variable=n / p,
        n=n,
    )
