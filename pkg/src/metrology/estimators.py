"""Scikit-learn style estimators wrapping the factor-analysis core.

These let the workbench's algorithms drop into sklearn pipelines and model
selection: ``fit`` on an entities-by-metrics array, ``transform`` to factor
scores, parameters via ``get_params``/``set_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cfa import ConfirmatorySpec, FitOptions
from .cfa import factor_scores as _cfa_scores
from .cfa import fit as _cfa_fit
from .dataset import MetricDataset, MetricName
from .efa.solution import EfaConfig, run_efa
from .errors import MetrologyError


def _as_dataset(x, columns=None) -> MetricDataset:
    if isinstance(x, MetricDataset):
        return x
    x = check_array(x, ensure_min_features=2)
    if columns is None:
        columns = [MetricName("V", f"v{j + 1}") for j in range(x.shape[1])]
    else:
        columns = [c if isinstance(c, MetricName) else MetricName.parse(str(c))
                   for c in columns]
    ids = tuple(str(i) for i in range(x.shape[0]))
    return MetricDataset(ids, tuple(columns), x)


class ExploratoryFactorAnalysis(BaseEstimator, TransformerMixin):
    """Iterated principal-axis factoring with optional oblique rotation.

    Parameters mirror the functional pipeline: ``n_factors``, ``rotation``
    in {"oblimin", "varimax", "none"}, the oblimin ``gamma``, and the number
    of random rotation ``restarts``. ``transform`` returns regression factor
    scores computed from the fitted pattern and factor correlations.
    """

    def __init__(self, n_factors=2, rotation="oblimin", gamma=0.0, restarts=10,
                 rotation_seed=0, suppress_threshold=0.3, check_adequacy=False):
        self.n_factors = n_factors
        self.rotation = rotation
        self.gamma = gamma
        self.restarts = restarts
        self.rotation_seed = rotation_seed
        self.suppress_threshold = suppress_threshold
        self.check_adequacy = check_adequacy

    def fit(self, X, y=None, columns=None):
        ds = _as_dataset(X, columns)
        config = EfaConfig(
            rotation=self.rotation,
            gamma=self.gamma,
            restarts=self.restarts,
            rotation_seed=self.rotation_seed,
            suppress_threshold=self.suppress_threshold,
            adequacy_override=not self.check_adequacy,
        )
        solution = run_efa(ds, self.n_factors, config)
        self.solution_ = solution
        self.loadings_ = np.asarray(solution.pattern)
        self.factor_correlations_ = np.asarray(solution.factor_correlations)
        self.communalities_ = solution.communalities
        self.eigenvalues_ = np.asarray(solution.eigenvalues)
        self.variance_explained_ = solution.variance_explained
        self.mean_ = ds.values[ds.complete_rows()].mean(axis=0)
        self.scale_ = ds.values[ds.complete_rows()].std(axis=0, ddof=1)
        self.n_features_in_ = ds.n_metrics
        return self

    def transform(self, X):
        check_is_fitted(self, "solution_")
        x = check_array(X)
        if x.shape[1] != self.n_features_in_:
            raise MetrologyError(
                f"expected {self.n_features_in_} metrics, got {x.shape[1]}"
            )
        z = (x - self.mean_) / self.scale_
        lam = self.loadings_
        phi = self.factor_correlations_
        implied = lam @ phi @ lam.T + np.diag(1.0 - self.communalities_)
        weights = phi @ lam.T @ np.linalg.inv(implied)
        return z @ weights.T


class ConfirmatoryFactorAnalysis(BaseEstimator, TransformerMixin):
    """Maximum-likelihood CFA with a fixed factor structure.

    ``structure`` maps factor name to the column names (or indices) of its
    metrics. ``transform`` returns regression factor scores from the fitted
    measurement model.
    """

    def __init__(self, structure=None, gtol=1e-10, max_iter=2000, multi_start=0,
                 seed=0):
        self.structure = structure
        self.gtol = gtol
        self.max_iter = max_iter
        self.multi_start = multi_start
        self.seed = seed

    def _spec(self, ds: MetricDataset) -> ConfirmatorySpec:
        if not self.structure:
            raise MetrologyError("structure must map factor names to metric lists")
        names = [str(c) for c in ds.columns]
        resolved = {}
        for factor, metrics in self.structure.items():
            resolved[factor] = [
                names[m] if isinstance(m, int) else str(m) for m in metrics
            ]
        return ConfirmatorySpec(resolved)

    def fit(self, X, y=None, columns=None):
        ds = _as_dataset(X, columns)
        options = FitOptions(gtol=self.gtol, max_iter=self.max_iter,
                             multi_start=self.multi_start, seed=self.seed)
        self.model_ = _cfa_fit(ds, self._spec(ds), options)
        self.loadings_ = np.asarray(self.model_.standardized_loadings)
        self.factor_correlations_ = np.asarray(self.model_.factor_correlations)
        self.uniquenesses_ = np.asarray(self.model_.standardized_uniquenesses)
        self.discrepancy_ = self.model_.discrepancy
        self._columns = ds.columns
        self.n_features_in_ = ds.n_metrics
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        ds = _as_dataset(X, self._columns)
        return _cfa_scores(self.model_, ds)
