"""Reliability and agreement coefficients with interpretation bands.

Bands follow the usual reading: above 0.9 excellent, above 0.7 acceptable.
They are advisory labels, never gates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, ValidationError

NOMINAL = "nominal"
ORDINAL = "ordinal"
INTERVAL = "interval"
RATIO = "ratio"
_LEVELS = (NOMINAL, ORDINAL, INTERVAL, RATIO)


def interpretation_band(value: float) -> str:
    if value > 0.9:
        return "excellent"
    if value > 0.7:
        return "acceptable"
    return "poor"


@dataclass(frozen=True)
class ReliabilityReport:
    """A single coefficient plus everything needed to read it."""

    coefficient: str
    value: float
    items: tuple
    n: int
    band: str
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RatingTable:
    """Units-by-raters ratings with missing support (NaN = not rated)."""

    ratings: np.ndarray
    level: str = NOMINAL
    raters: tuple = ()

    def __post_init__(self):
        ratings = np.asarray(self.ratings, dtype=float)
        ratings.setflags(write=False)
        object.__setattr__(self, "ratings", ratings)
        if ratings.ndim != 2:
            raise ValidationError("ratings must be a 2-D units x raters table")
        if self.level not in _LEVELS:
            raise ValidationError(f"unknown measurement level {self.level!r}")
        if ratings.shape[1] < 2:
            raise ValidationError("need at least two raters")
        counts = (~np.isnan(ratings)).sum(axis=1)
        if not (counts >= 2).any():
            raise ValidationError("no unit was rated by at least two raters")
        raters = self.raters or tuple(f"rater{i + 1}" for i in range(ratings.shape[1]))
        object.__setattr__(self, "raters", tuple(raters))


def cronbach_alpha(items, names=None) -> ReliabilityReport:
    """Cronbach's alpha for an entities-by-items score matrix.

    Uses unbiased (n-1) variances and listwise-complete rows. The details
    carry the standardized alpha (from the mean inter-item correlation) and
    the drop-one alpha for every item.
    """
    x = np.asarray(items, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValidationError("alpha needs an entities x items matrix with >= 2 items")
    x = x[~np.isnan(x).any(axis=1)]
    n, k = x.shape
    if n < 3:
        raise ValidationError(f"only {n} complete observations; need at least 3")
    item_var = x.var(axis=0, ddof=1)
    if (item_var == 0).any():
        j = int(np.argmax(item_var == 0))
        label = names[j] if names else f"item {j + 1}"
        raise ValidationError(f"{label} is constant; alpha is undefined")
    total_var = x.sum(axis=1).var(ddof=1)
    if total_var == 0:
        raise ValidationError("total score has zero variance; alpha is undefined")
    value = k / (k - 1) * (1.0 - item_var.sum() / total_var)

    r = np.corrcoef(x, rowvar=False)
    mean_r = r[np.triu_indices(k, 1)].mean()
    standardized = k * mean_r / (1.0 + (k - 1) * mean_r)

    labels = tuple(str(n_) for n_ in names) if names else tuple(f"item{i + 1}" for i in range(k))
    drop_one = {}
    if k > 2:
        for j in range(k):
            rest = np.delete(x, j, axis=1)
            rest_total = rest.sum(axis=1).var(ddof=1)
            rest_items = rest.var(axis=0, ddof=1).sum()
            drop_one[labels[j]] = (k - 1) / (k - 2) * (1.0 - rest_items / rest_total)
    return ReliabilityReport(
        coefficient="alpha",
        value=float(value),
        items=labels,
        n=n,
        band=interpretation_band(float(value)),
        details={"standardized_alpha": float(standardized), "drop_one": drop_one},
    )


def percent_agreement(table: RatingTable) -> ReliabilityReport:
    """Share of exactly matching rating pairs over all co-rated pairs."""
    if table.level not in (NOMINAL, ORDINAL):
        raise ValidationError("percent agreement applies to nominal or ordinal ratings")
    matches = 0
    total = 0
    for row in table.ratings:
        present = row[~np.isnan(row)]
        m = present.size
        if m < 2:
            continue
        for i in range(m):
            for j in range(i + 1, m):
                total += 1
                if present[i] == present[j]:
                    matches += 1
    if total == 0:
        raise ValidationError("no unit with at least two ratings")
    value = matches / total
    return ReliabilityReport(
        coefficient="percent_agreement",
        value=float(value),
        items=table.raters,
        n=int(table.ratings.shape[0]),
        band=interpretation_band(float(value)),
        details={"matching_pairs": matches, "total_pairs": total},
    )


def _difference_matrix(values: np.ndarray, marginals: np.ndarray, level: str) -> np.ndarray:
    v = len(values)
    delta = np.zeros((v, v))
    for c in range(v):
        for k in range(c + 1, v):
            if level == NOMINAL:
                d = 1.0
            elif level == ORDINAL:
                span = marginals[c:k + 1].sum() - (marginals[c] + marginals[k]) / 2.0
                d = span ** 2
            elif level == INTERVAL:
                d = (values[c] - values[k]) ** 2
            else:  # ratio
                d = ((values[c] - values[k]) / (values[c] + values[k])) ** 2
            delta[c, k] = delta[k, c] = d
    return delta


def krippendorff_alpha(table: RatingTable) -> ReliabilityReport:
    """Krippendorff's alpha via the coincidence-matrix formulation.

    Handles missing ratings and all four measurement levels. When every
    observed rating is identical the expected disagreement is zero and the
    coefficient is undefined; that is reported as degenerate data rather
    than a number.
    """
    values = np.unique(table.ratings[~np.isnan(table.ratings)])
    if values.size == 0:
        raise ValidationError("rating table holds no ratings")
    index = {v: i for i, v in enumerate(values)}
    v = values.size

    coincidence = np.zeros((v, v))
    for row in table.ratings:
        present = row[~np.isnan(row)]
        m = present.size
        if m < 2:
            continue
        weight = 1.0 / (m - 1)
        for i in range(m):
            for j in range(m):
                if i != j:
                    coincidence[index[present[i]], index[present[j]]] += weight
    marginals = coincidence.sum(axis=1)
    n_total = marginals.sum()
    if n_total <= 1:
        raise ValidationError("no unit with at least two ratings")

    delta = _difference_matrix(values, marginals, table.level)
    d_expected = float((np.outer(marginals, marginals) * delta).sum()) / (n_total * (n_total - 1))
    if d_expected == 0:
        raise DegenerateDataError(
            "all observed ratings are identical; expected disagreement is zero "
            "and alpha is undefined (report percent agreement instead)"
        )
    d_observed = float((coincidence * delta).sum()) / n_total
    value = 1.0 - d_observed / d_expected
    return ReliabilityReport(
        coefficient="krippendorff_alpha",
        value=float(value),
        items=table.raters,
        n=int(table.ratings.shape[0]),
        band=interpretation_band(float(value)),
        details={
            "level": table.level,
            "observed_disagreement": d_observed,
            "expected_disagreement": d_expected,
            "pairable_values": float(n_total),
        },
    )


def composite_reliability(loadings, uniquenesses, coefficient: str = "composite_reliability",
                          names=None) -> ReliabilityReport:
    """Construct-level reliability from standardized loadings and uniquenesses.

    CR = (sum lambda)^2 / ((sum lambda)^2 + sum theta). Omega total for a
    one-factor solution is the same expression, so ``coefficient`` may be
    set to ``"omega_total"`` when the inputs come from a one-factor fit.
    """
    lam = np.asarray(loadings, dtype=float)
    theta = np.asarray(uniquenesses, dtype=float)
    if lam.ndim != 1 or lam.shape != theta.shape:
        raise ValidationError("loadings and uniquenesses must be equal-length vectors")
    if lam.size < 2:
        raise ValidationError("need at least two indicators")
    if (theta < 0).any():
        raise ValidationError("uniquenesses must be nonnegative")
    if coefficient not in ("composite_reliability", "omega_total"):
        raise ValidationError(f"unknown coefficient {coefficient!r}")
    common = lam.sum() ** 2
    denom = common + theta.sum()
    if denom == 0:
        raise ValidationError("zero total variance: all loadings and uniquenesses are 0")
    value = common / denom
    labels = tuple(str(n_) for n_ in names) if names else tuple(
        f"item{i + 1}" for i in range(lam.size)
    )
    return ReliabilityReport(
        coefficient=coefficient,
        value=float(value),
        items=labels,
        n=lam.size,
        band=interpretation_band(float(value)),
        details={},
    )
