import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler

from metrology import ConfirmatoryFactorAnalysis, ExploratoryFactorAnalysis

from .conftest import synthetic_factor_dataset


def make_data(seed=0, k=3, per=4):
    ds, expected, lam, factors = synthetic_factor_dataset(
        seed=seed, k=k, per_factor=per, load_lo=0.7, load_hi=0.9, factor_corr=0.2
    )
    return np.asarray(ds.values), [str(c) for c in ds.columns], lam, factors


def test_efa_estimator_fits_and_exposes_attributes():
    x, columns, lam, _ = make_data()
    efa = ExploratoryFactorAnalysis(n_factors=3).fit(x, columns=columns)
    assert efa.loadings_.shape == (12, 3)
    assert efa.factor_correlations_.shape == (3, 3)
    assert 0 < efa.variance_explained_ < 1
    assert efa.eigenvalues_.sum() == pytest.approx(12, abs=1e-8)


def test_efa_estimator_get_set_params():
    efa = ExploratoryFactorAnalysis(n_factors=4, rotation="varimax")
    params = efa.get_params()
    assert params["n_factors"] == 4
    cloned = clone(efa)
    assert cloned.get_params() == params
    cloned.set_params(n_factors=2)
    assert cloned.n_factors == 2


def test_efa_transform_scores_follow_factors():
    x, columns, lam, factors = make_data(seed=3)
    efa = ExploratoryFactorAnalysis(n_factors=3).fit(x, columns=columns)
    scores = efa.transform(x)
    assert scores.shape == (x.shape[0], 3)
    best = np.abs(np.corrcoef(scores.T, factors.T)[:3, 3:]).max(axis=1)
    assert (best > 0.85).all()


def test_efa_in_pipeline():
    x, columns, _, _ = make_data(seed=5)
    pipeline = Pipeline([
        ("scale", StandardScaler()),
        ("efa", ExploratoryFactorAnalysis(n_factors=3)),
    ])
    scores = pipeline.fit_transform(x)
    assert scores.shape == (x.shape[0], 3)


def test_cfa_estimator_fit_transform():
    x, columns, lam, factors = make_data(seed=7)
    structure = {f"C{j + 1}": [f"C{j + 1}.m{t + 1}" for t in range(4)] for j in range(3)}
    cfa = ConfirmatoryFactorAnalysis(structure=structure).fit(x, columns=columns)
    assert cfa.loadings_.shape == (12, 3)
    assert cfa.discrepancy_ >= 0
    scores = cfa.transform(x)
    for j in range(3):
        assert abs(np.corrcoef(scores[:, j], factors[:, j])[0, 1]) > 0.85


def test_cfa_estimator_accepts_column_indices():
    x, columns, _, _ = make_data(seed=9)
    structure = {"C1": [0, 1, 2, 3], "C2": [4, 5, 6, 7], "C3": [8, 9, 10, 11]}
    cfa = ConfirmatoryFactorAnalysis(structure=structure).fit(x, columns=columns)
    assert cfa.model_.metric_names[0] == "C1.m1"


def test_estimator_validates_input():
    x, columns, _, _ = make_data()
    efa = ExploratoryFactorAnalysis(n_factors=3).fit(x, columns=columns)
    with pytest.raises(Exception):
        efa.transform(x[:, :5])
