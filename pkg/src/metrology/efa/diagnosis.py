"""Solution diagnosis against an expected assignment, and the scale audit.

A solution is inspected for three kinds of problems: metrics the factors
barely explain (low communality), metrics loading meaningfully on several
factors (cross-loadings), and metrics loading highly on a factor other than
the one they were designed for. Problems are ranked worst first so an
analyst (or the scripted advisor) can remove them one at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..dataset import CorrelationMatrix
from ..errors import ValidationError
from .solution import FactorSolution


@dataclass(frozen=True)
class DiagnosisThresholds:
    """Cutoffs for the three problem kinds; defaults follow common practice."""

    communality: float = 0.5
    cross_loading: float = 0.3
    wrong_factor: float = 0.5


@dataclass(frozen=True)
class Problem:
    """One diagnosed defect of one metric, with the numbers behind it."""

    kind: str
    metric: str
    severity: float
    evidence: dict = field(default_factory=dict)
    retain_for_now: bool = False


def label_factors(solution: FactorSolution, expected: dict) -> dict:
    """Factor index -> expected construct name, matched by loading mass.

    Each construct is paired with the factor carrying the largest sum of
    squared loadings of that construct's metrics, one-to-one. Surplus
    factors (more factors than constructs) stay unlabeled.
    """
    constructs = sorted(set(expected.values()))
    scores = np.zeros((len(constructs), solution.k))
    for i, metric in enumerate(solution.labels):
        construct = expected[str(metric)]
        scores[constructs.index(construct)] += solution.pattern[i] ** 2
    rows, cols = linear_sum_assignment(-scores)
    return {int(f): constructs[c] for c, f in zip(rows, cols)}


def diagnose(solution: FactorSolution, expected: dict,
             thresholds: DiagnosisThresholds = DiagnosisThresholds()) -> list:
    """Rank a solution's problems, worst first.

    Metrics that combine low communality with a primary loading on the
    wrong factor come first (lowest communality leading), then the other
    low communalities, then high loadings on wrong factors, then
    cross-loadings by how close the runner-up loading comes to the primary.

    Two exceptions are only flagged, not queued for removal: a low-communality
    metric that loads above the wrong-factor cutoff on its own factor and
    nowhere else, and a cross-loader whose primary loading is on the right
    factor and whose off-loading stays below the smallest primary loading of
    any correctly assigned metric.
    """
    metrics = [str(m) for m in solution.labels]
    missing = [m for m in metrics if m not in expected]
    if missing:
        raise ValidationError(f"expected assignment is missing: {', '.join(missing)}")

    factor_construct = label_factors(solution, expected)
    pattern = np.abs(solution.pattern)
    h2 = solution.communalities
    assignment = solution.assignment

    # smallest primary loading among correctly assigned metrics
    correct_primaries = []
    for i, metric in enumerate(metrics):
        j = assignment[metric]
        if factor_construct.get(j) == expected[metric]:
            correct_primaries.append(pattern[i, j])
    min_correct_primary = min(correct_primaries) if correct_primaries else np.inf

    problems = []
    for i, metric in enumerate(metrics):
        primary = assignment[metric]
        primary_loading = pattern[i, primary]
        misassigned = factor_construct.get(primary) != expected[metric]
        above_cross = np.where(pattern[i] >= thresholds.cross_loading)[0]

        if h2[i] < thresholds.communality:
            solely_correct = bool(
                not misassigned
                and primary_loading > thresholds.wrong_factor
                and len(above_cross) <= 1
            )
            severity = (4.0 if misassigned else 3.0) + (thresholds.communality - float(h2[i]))
            problems.append(Problem(
                kind="low_communality",
                metric=metric,
                severity=severity,
                evidence={
                    "h2": float(h2[i]),
                    "primary_factor": factor_construct.get(primary, f"F{primary + 1}"),
                    "primary_loading": float(solution.pattern[i, primary]),
                    "expected": expected[metric],
                    "wrong_factor": misassigned,
                },
                retain_for_now=solely_correct,
            ))

        for j in range(solution.k):
            if j == primary:
                continue
            if pattern[i, j] > thresholds.wrong_factor and factor_construct.get(j) != expected[metric]:
                problems.append(Problem(
                    kind="wrong_factor",
                    metric=metric,
                    severity=2.0 + float(pattern[i, j]) - thresholds.wrong_factor,
                    evidence={
                        "factor": factor_construct.get(j, f"F{j + 1}"),
                        "loading": float(solution.pattern[i, j]),
                        "expected": expected[metric],
                    },
                ))
        if misassigned and primary_loading > thresholds.wrong_factor:
            problems.append(Problem(
                kind="wrong_factor",
                metric=metric,
                severity=2.0 + float(primary_loading) - thresholds.wrong_factor,
                evidence={
                    "factor": factor_construct.get(primary, f"F{primary + 1}"),
                    "loading": float(solution.pattern[i, primary]),
                    "expected": expected[metric],
                },
            ))

        if len(above_cross) >= 2:
            others = [j for j in above_cross if j != primary]
            secondary = max(others, key=lambda j: pattern[i, j])
            margin = float(primary_loading - pattern[i, secondary])
            dominated = bool(
                factor_construct.get(primary) == expected[metric]
                and primary_loading > pattern[i, secondary]
                and pattern[i, secondary] < min_correct_primary
            )
            problems.append(Problem(
                kind="cross_loading",
                metric=metric,
                severity=1.0 + max(0.0, 1.0 - margin),
                evidence={
                    "primary_factor": factor_construct.get(primary, f"F{primary + 1}"),
                    "primary_loading": float(solution.pattern[i, primary]),
                    "secondary_factor": factor_construct.get(secondary, f"F{int(secondary) + 1}"),
                    "secondary_loading": float(solution.pattern[i, secondary]),
                    "expected": expected[metric],
                },
                retain_for_now=dominated,
            ))

    problems.sort(key=lambda pr: (pr.retain_for_now, -pr.severity, pr.metric, pr.kind))
    return problems


@dataclass(frozen=True)
class ScaleAudit:
    """Convergent/discriminant check: intra-construct correlations must all
    exceed every inter-construct correlation (absolute values)."""

    min_intra: float
    max_inter: float
    offending_pairs: list

    @property
    def passes(self) -> bool:
        return self.min_intra > self.max_inter


def audit_scales(cm: CorrelationMatrix, assignment: dict) -> ScaleAudit:
    """Split |r| into intra- and inter-construct sets and compare extremes.

    ``assignment`` maps metric name -> construct. Every construct needs at
    least two metrics or the intra set is empty for it. Offending pairs are
    the inter-construct pairs at least as correlated as the weakest
    intra-construct pair.
    """
    labels = [str(c) for c in cm.labels]
    missing = [m for m in labels if m not in assignment]
    if missing:
        raise ValidationError(f"assignment is missing: {', '.join(missing)}")
    by_construct = {}
    for metric in labels:
        by_construct.setdefault(assignment[metric], []).append(metric)
    if len(by_construct) < 2:
        raise ValidationError("scale audit needs at least two constructs")
    singles = [c for c, ms in by_construct.items() if len(ms) < 2]
    if singles:
        raise ValidationError(
            "constructs with a single metric cannot be audited: " + ", ".join(sorted(singles))
        )

    intra, inter = [], []
    for i in range(cm.p):
        for j in range(i + 1, cm.p):
            r = abs(float(cm.r[i, j]))
            pair = (labels[i], labels[j], float(cm.r[i, j]))
            if assignment[labels[i]] == assignment[labels[j]]:
                intra.append((r, pair))
            else:
                inter.append((r, pair))
    min_intra = min(r for r, _ in intra)
    max_inter = max(r for r, _ in inter)
    offending = [pair for r, pair in inter if r >= min_intra]
    offending.sort(key=lambda t: -abs(t[2]))
    return ScaleAudit(min_intra=min_intra, max_inter=max_inter, offending_pairs=offending)
