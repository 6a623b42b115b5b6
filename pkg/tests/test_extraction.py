import numpy as np
import pytest

from metrology import ValidationError, extract
from metrology.dataset import CorrelationMatrix, MetricName, correlation_matrix

from .conftest import synthetic_factor_dataset


def cm_from(r):
    r = np.asarray(r, dtype=float).copy()
    np.fill_diagonal(r, 1.0)
    labels = tuple(MetricName("C", f"m{i}") for i in range(r.shape[0]))
    return CorrelationMatrix(labels, r, n_used=500)


def test_uniform_one_factor_closed_form():
    p = 6
    r = np.full((p, p), 0.64)
    solution = extract(cm_from(r), 1)
    assert np.allclose(solution.pattern[:, 0], 0.8, atol=1e-4)
    assert np.allclose(solution.communalities, 0.64, atol=1e-4)


def test_identity_has_no_common_variance():
    solution = extract(cm_from(np.eye(5)), 1)
    assert np.all(np.abs(solution.pattern) <= 1e-6)


def test_two_factor_reconstruction():
    ds, _, _, _ = synthetic_factor_dataset(
        seed=21, n=2000, k=2, per_factor=4, load_lo=0.7, load_hi=0.9, factor_corr=0.0
    )
    cm = correlation_matrix(ds)
    solution = extract(cm, 2)
    implied = solution.pattern @ solution.pattern.T
    off = ~np.eye(cm.p, dtype=bool)
    assert np.abs((cm.r - implied)[off]).max() < 0.05


def test_unrotated_communities_equal_row_sums():
    ds, _, _, _ = synthetic_factor_dataset(seed=5, k=3, per_factor=4)
    solution = extract(correlation_matrix(ds), 3)
    assert np.allclose(
        solution.communalities, (solution.pattern ** 2).sum(axis=1), atol=1e-10
    )
    assert np.allclose(solution.factor_correlations, np.eye(3))


def test_eigenvalues_sum_to_p():
    ds, _, _, _ = synthetic_factor_dataset(seed=6, k=4, per_factor=3)
    solution = extract(correlation_matrix(ds), 4)
    assert sum(solution.eigenvalues) == pytest.approx(ds.n_metrics, abs=1e-8)


def test_factor_order_and_sign_conventions():
    ds, _, _, _ = synthetic_factor_dataset(seed=8, k=3, per_factor=4)
    solution = extract(correlation_matrix(ds), 3)
    ss = (solution.pattern ** 2).sum(axis=0)
    assert list(ss) == sorted(ss, reverse=True)
    for j in range(solution.k):
        column = solution.pattern[:, j]
        assert column[np.argmax(np.abs(column))] > 0


def test_k_bounds_rejected():
    r = np.eye(4)
    with pytest.raises(ValidationError):
        extract(cm_from(r), 0)
    with pytest.raises(ValidationError):
        extract(cm_from(r), 4)


def test_singular_matrix_rejected():
    r = np.array([
        [1.0, 1.0, 0.3],
        [1.0, 1.0, 0.3],
        [0.3, 0.3, 1.0],
    ])
    with pytest.raises(ValidationError, match="singular"):
        extract(cm_from(r), 1)


def test_heywood_capped_and_flagged():
    # a variable bridging two tight clusters drives its h2 past one
    r = np.array([
        [1.00, 0.85, 0.84, 0.12, 0.10],
        [0.85, 1.00, 0.86, 0.11, 0.09],
        [0.84, 0.86, 1.00, 0.55, 0.50],
        [0.12, 0.11, 0.55, 1.00, 0.82],
        [0.10, 0.09, 0.50, 0.82, 1.00],
    ])
    solution = extract(cm_from(r), 2, max_iter=4000)
    assert solution.heywood
    assert solution.communalities.max() <= 1.0
