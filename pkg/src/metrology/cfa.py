"""Confirmatory factor analysis by maximum-likelihood discrepancy minimization.

The model is the congeneric structure Sigma = Lambda Phi Lambda' + Theta with
each metric loading on exactly one factor, factor variances fixed at one for
identification, and Theta diagonal. The fit minimizes

    F(theta) = ln|Sigma| + tr(S Sigma^-1) - ln|S| - p

over an unconstrained reparameterization: free loadings as-is, uniquenesses
through a floored exponential, and factor correlations through a spherical
(angle) factorization Phi = B B' that keeps the diagonal at one and the
matrix positive semidefinite at every iterate. Fitting happens on the
correlation scale and is rescaled afterwards, which leaves the discrepancy
unchanged and lets raw loadings exceed one for high-variance metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .dataset import MetricDataset
from .errors import ComputationError, ValidationError

UNIQUENESS_FLOOR = 1e-4
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ConfirmatorySpec:
    """Which metrics belong to which factor; factors are identified by name."""

    structure: dict

    def __post_init__(self):
        cleaned = {}
        seen = {}
        for factor, metrics in self.structure.items():
            metrics = tuple(str(m) for m in metrics)
            if not metrics:
                raise ValidationError(f"factor {factor!r} has no metrics")
            for m in metrics:
                if m in seen:
                    raise ValidationError(
                        f"metric {m!r} appears under both {seen[m]!r} and {factor!r}"
                    )
                seen[m] = factor
            cleaned[str(factor)] = metrics
        if not cleaned:
            raise ValidationError("structure has no factors")
        object.__setattr__(self, "structure", cleaned)

    @property
    def factor_names(self) -> tuple:
        return tuple(self.structure)

    @property
    def metric_names(self) -> tuple:
        return tuple(m for metrics in self.structure.values() for m in metrics)

    def warnings(self) -> list:
        return [
            f"factor {factor!r} has only {len(metrics)} metrics; "
            "fewer than three risks under-identification"
            for factor, metrics in self.structure.items()
            if len(metrics) < 3
        ]

    @classmethod
    def from_document(cls, doc: dict) -> "ConfirmatorySpec":
        """Accept a session export or any document with a ``factors`` map."""
        if "factors" in doc:
            return cls(doc["factors"])
        if "structure" in doc:
            return cls(doc["structure"])
        raise ValidationError("document has neither 'factors' nor 'structure'")


@dataclass(frozen=True)
class FitOptions:
    gtol: float = 1e-10
    max_iter: int = 2000
    multi_start: int = 0
    seed: int = 0


@dataclass(frozen=True)
class MeasurementModel:
    """Fitted confirmatory structure plus the reusable scoring formulas."""

    structure: dict
    loadings: np.ndarray
    standardized_loadings: np.ndarray
    factor_correlations: np.ndarray
    uniquenesses: np.ndarray
    standardized_uniquenesses: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    score_coefficients: np.ndarray
    discrepancy: float
    converged: bool
    n: int
    heywood_flags: tuple = ()

    def __post_init__(self):
        for name in ("loadings", "standardized_loadings", "factor_correlations",
                     "uniquenesses", "standardized_uniquenesses", "means", "sds",
                     "score_coefficients"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(
            self, "structure",
            {str(f): tuple(str(m) for m in ms) for f, ms in self.structure.items()},
        )
        object.__setattr__(self, "heywood_flags", tuple(self.heywood_flags))

    @property
    def factor_names(self) -> tuple:
        return tuple(self.structure)

    @property
    def metric_names(self) -> tuple:
        return tuple(m for metrics in self.structure.values() for m in metrics)

    @property
    def k(self) -> int:
        return len(self.factor_names)

    @property
    def p(self) -> int:
        return len(self.metric_names)

    def implied_standardized_covariance(self) -> np.ndarray:
        lam = self.standardized_loadings
        return lam @ self.factor_correlations @ lam.T + np.diag(self.standardized_uniquenesses)


def _spherical_rows(angles: np.ndarray, k: int) -> np.ndarray:
    """Lower-triangular B with unit-norm rows from k(k-1)/2 angles."""
    b = np.zeros((k, k))
    b[0, 0] = 1.0
    pos = 0
    for i in range(1, k):
        w = angles[pos:pos + i]
        pos += i
        prefix = 1.0
        for j in range(i):
            b[i, j] = prefix * math.cos(w[j])
            prefix *= math.sin(w[j])
        b[i, i] = prefix
    return b


def _spherical_gradient(angles: np.ndarray, k: int, db_target: np.ndarray) -> np.ndarray:
    """Chain dF/dB into dF/dangles for the spherical parameterization."""
    grad = np.zeros_like(angles)
    pos = 0
    for i in range(1, k):
        w = angles[pos:pos + i]
        sins = np.sin(w)
        coss = np.cos(w)
        for m in range(i):
            total = 0.0
            # b[i, j] for j in m..i  depends on w[m]
            for j in range(m, i + 1):
                prod = 1.0
                for t in range(min(j, i)):
                    prod *= coss[m] if t == m else sins[t]
                if j < i:
                    d = -sins[j] * np.prod(sins[:j]) if j == m else prod * coss[j]
                else:
                    d = prod
                total += db_target[i, j] * d
            grad[pos + m] = total
        pos += i
    return grad


def _objective(params: np.ndarray, r: np.ndarray, factor_of: np.ndarray, k: int,
               logdet_s: float):
    """F_ML and its analytic gradient over (loadings, log-uniquenesses, angles)."""
    p = r.shape[0]
    lam_free = params[:p]
    theta = UNIQUENESS_FLOOR + np.exp(params[p:2 * p])
    angles = params[2 * p:]
    b = _spherical_rows(angles, k)
    phi = b @ b.T

    lam = np.zeros((p, k))
    lam[np.arange(p), factor_of] = lam_free
    sigma = lam @ phi @ lam.T + np.diag(theta)

    chol = np.linalg.cholesky(sigma)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    sigma_inv = np.linalg.inv(sigma)
    value = logdet + float((sigma_inv * r).sum()) - logdet_s - p

    w = sigma_inv - sigma_inv @ r @ sigma_inv
    g_lam_full = 2.0 * w @ lam @ phi
    g_lam = g_lam_full[np.arange(p), factor_of]
    g_u = np.diag(w) * (theta - UNIQUENESS_FLOOR)
    g_phi = lam.T @ w @ lam
    g_b = 2.0 * g_phi @ b
    g_angles = _spherical_gradient(angles, k, g_b)
    return value, np.concatenate([g_lam, g_u, g_angles])


def _start_params(p: int, k: int, rng=None) -> np.ndarray:
    lam = np.full(p, 0.7)
    u = np.full(p, math.log(0.3 - UNIQUENESS_FLOOR))
    angles = np.full(k * (k - 1) // 2, math.pi / 2.0)
    params = np.concatenate([lam, u, angles])
    if rng is not None:
        params = params + rng.uniform(-0.2, 0.2, size=params.size)
    return params


def _canonical_signs(lam: np.ndarray, phi: np.ndarray):
    signs = np.ones(lam.shape[1])
    for j in range(lam.shape[1]):
        column = lam[:, j]
        if column.size and column[np.argmax(np.abs(column))] < 0:
            signs[j] = -1.0
    return lam * signs, phi * np.outer(signs, signs)


def fit_correlation(r: np.ndarray, n: int, spec: ConfirmatorySpec,
                    metric_names=None, options: FitOptions = FitOptions()):
    """Fit the structure to a correlation (or standardized covariance) matrix.

    Returns (standardized loadings, factor correlations, standardized
    uniquenesses, discrepancy, converged). Raises when the input matrix is
    not positive definite.
    """
    r = np.asarray(r, dtype=float)
    p = r.shape[0]
    names = [str(m) for m in (metric_names or spec.metric_names)]
    if len(names) != p:
        raise ValidationError("metric names do not match matrix size")
    if n <= p:
        raise ValidationError(f"sample size {n} must exceed the number of metrics {p}")
    order = {m: i for i, m in enumerate(names)}
    missing = [m for m in spec.metric_names if m not in order]
    if missing:
        raise ValidationError(f"matrix lacks metrics: {', '.join(missing)}")
    idx = [order[m] for m in spec.metric_names]
    r = r[np.ix_(idx, idx)]
    p = len(idx)
    k = len(spec.factor_names)

    sign, logdet_s = np.linalg.slogdet(r)
    if sign <= 0 or not np.isfinite(logdet_s):
        raise ComputationError("sample matrix is singular or not positive definite")

    factor_of = np.empty(p, dtype=int)
    pos = 0
    for j, (_, metrics) in enumerate(spec.structure.items()):
        for _ in metrics:
            factor_of[pos] = j
            pos += 1

    def minimize(x0):
        return optimize.minimize(
            _objective, x0, args=(r, factor_of, k, logdet_s), jac=True,
            method="BFGS",
            options={"gtol": options.gtol, "maxiter": options.max_iter},
        )

    result = minimize(_start_params(p, k))
    if options.multi_start:
        rng = np.random.default_rng(options.seed)
        for _ in range(options.multi_start):
            other = minimize(_start_params(p, k, rng))
            if other.fun < result.fun:
                result = other

    gradient_norm = float(np.max(np.abs(result.jac)))
    converged = bool(result.success) or gradient_norm < 1e-6
    if not converged:
        raise ComputationError(
            f"CFA did not converge: gradient norm {gradient_norm:.3e} "
            f"after {result.nit} iterations"
        )

    params = result.x
    lam_free = params[:p]
    theta = UNIQUENESS_FLOOR + np.exp(params[p:2 * p])
    b = _spherical_rows(params[2 * p:], k)
    phi = b @ b.T
    lam = np.zeros((p, k))
    lam[np.arange(p), factor_of] = lam_free
    lam, phi = _canonical_signs(lam, phi)
    heywood = tuple(bool(t <= UNIQUENESS_FLOOR * 1.5) for t in theta)
    return lam, phi, theta, float(result.fun), converged, heywood


def fit(ds: MetricDataset, spec: ConfirmatorySpec,
        options: FitOptions = FitOptions()) -> MeasurementModel:
    """Fit a confirmatory model to a dataset.

    Uses listwise-complete rows over the structure's metrics. The structure
    is taken as given: no metric is ever added or dropped here, because the
    confirmatory phase runs once on the model the exploratory phase settled.
    """
    names = list(spec.metric_names)
    sub = ds.select(names)
    keep = sub.complete_rows()
    data = sub.values[keep]
    n = data.shape[0]
    p = len(names)
    if n <= p:
        raise ValidationError(f"only {n} complete rows for {p} metrics; need n > p")
    means = data.mean(axis=0)
    sds = data.std(axis=0, ddof=1)
    if (sds == 0).any():
        bad = names[int(np.argmax(sds == 0))]
        raise ValidationError(f"metric {bad!r} is constant in the fitting data")
    z = (data - means) / sds
    r = (z.T @ z) / (n - 1)
    r = (r + r.T) / 2.0

    lam_std, phi, theta_std, discrepancy, converged, heywood = fit_correlation(
        r, n, spec, metric_names=names, options=options
    )
    implied = lam_std @ phi @ lam_std.T + np.diag(theta_std)
    score_coefficients = phi @ lam_std.T @ np.linalg.inv(implied)
    return MeasurementModel(
        structure=spec.structure,
        loadings=lam_std * sds[:, None],
        standardized_loadings=lam_std,
        factor_correlations=phi,
        uniquenesses=theta_std * sds ** 2,
        standardized_uniquenesses=theta_std,
        means=means,
        sds=sds,
        score_coefficients=score_coefficients,
        discrepancy=discrepancy,
        converged=converged,
        n=n,
        heywood_flags=heywood,
    )


def factor_scores(model: MeasurementModel, ds: MetricDataset) -> np.ndarray:
    """Regression (Thomson) factor scores for every entity in the dataset.

    Observations are standardized against the model's means and sds, then
    multiplied by the exported coefficient matrix. Rows with missing cells
    produce NaN scores.
    """
    sub = ds.select(model.metric_names)
    z = (sub.values - model.means) / model.sds
    return z @ model.score_coefficients.T


def export_formulas(model: MeasurementModel) -> dict:
    """The measurement model as a reusable document.

    Everything needed to score new data without re-fitting: structure,
    loadings, uniquenesses, factor correlations, standardization constants,
    and the score coefficient matrix. Factor scores are regression scores;
    that choice is recorded in the document.
    """
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "measurement_model",
        "factors": {f: list(ms) for f, ms in model.structure.items()},
        "metrics": list(model.metric_names),
        "loadings": model.loadings.tolist(),
        "standardized_loadings": model.standardized_loadings.tolist(),
        "factor_correlations": model.factor_correlations.tolist(),
        "uniquenesses": model.uniquenesses.tolist(),
        "standardized_uniquenesses": model.standardized_uniquenesses.tolist(),
        "means": model.means.tolist(),
        "sds": model.sds.tolist(),
        "score_coefficients": model.score_coefficients.tolist(),
        "score_method": "regression",
        "discrepancy": model.discrepancy,
        "converged": model.converged,
        "n": model.n,
        "heywood_flags": list(model.heywood_flags),
    }


def import_formulas(doc: dict) -> MeasurementModel:
    """Rebuild a measurement model from :func:`export_formulas` output."""
    if doc.get("kind") != "measurement_model":
        raise ValidationError("not a measurement model document")
    return MeasurementModel(
        structure=doc["factors"],
        loadings=np.array(doc["loadings"], dtype=float),
        standardized_loadings=np.array(doc["standardized_loadings"], dtype=float),
        factor_correlations=np.array(doc["factor_correlations"], dtype=float),
        uniquenesses=np.array(doc["uniquenesses"], dtype=float),
        standardized_uniquenesses=np.array(doc["standardized_uniquenesses"], dtype=float),
        means=np.array(doc["means"], dtype=float),
        sds=np.array(doc["sds"], dtype=float),
        score_coefficients=np.array(doc["score_coefficients"], dtype=float),
        discrepancy=float(doc["discrepancy"]),
        converged=bool(doc["converged"]),
        n=int(doc["n"]),
        heywood_flags=tuple(bool(f) for f in doc.get("heywood_flags", ())),
    )


def formulas_to_json(model: MeasurementModel) -> str:
    return json.dumps(export_formulas(model))


def formulas_from_json(text: str) -> MeasurementModel:
    return import_formulas(json.loads(text))
