import json

import numpy as np
import pytest

from metrology import (
    ConfirmatorySpec,
    MeasurementModel,
    MetricDataset,
    MetricName,
    ValidationError,
)
from metrology.cfa import (
    FitOptions,
    _objective,
    _spherical_rows,
    export_formulas,
    factor_scores,
    fit,
    fit_correlation,
    formulas_from_json,
    formulas_to_json,
    import_formulas,
)


def model_implied(lam, phi, theta):
    return lam @ phi @ lam.T + np.diag(theta)


def two_factor_truth():
    lam = np.zeros((8, 2))
    lam[0:4, 0] = [0.6, 0.7, 0.8, 0.9]
    lam[4:8, 1] = [0.9, 0.8, 0.7, 0.6]
    phi = np.array([[1.0, 0.3], [0.3, 1.0]])
    theta = 1.0 - np.einsum("ij,jk,ik->i", lam, phi, lam)
    return lam, phi, theta


def spec_for(k=2, per=4, prefix="C"):
    return ConfirmatorySpec({
        f"{prefix}{j + 1}": [f"{prefix}{j + 1}.m{t + 1}" for t in range(per)]
        for j in range(k)
    })


def dataset_from_truth(lam, phi, theta, n=2000, seed=0, prefix="C"):
    rng = np.random.default_rng(seed)
    k = phi.shape[0]
    per = lam.shape[0] // k
    factors = rng.standard_normal((n, k)) @ np.linalg.cholesky(phi).T
    x = factors @ lam.T + rng.standard_normal((n, lam.shape[0])) * np.sqrt(theta)
    columns = tuple(
        MetricName(f"{prefix}{j + 1}", f"m{t + 1}") for j in range(k) for t in range(per)
    )
    ds = MetricDataset(tuple(f"e{i}" for i in range(n)), columns, x)
    return ds, factors


class TestSpec:
    def test_disjointness_enforced(self):
        with pytest.raises(ValidationError, match="appears under both"):
            ConfirmatorySpec({"A": ["X.a"], "B": ["X.a"]})

    def test_empty_factor_rejected(self):
        with pytest.raises(ValidationError):
            ConfirmatorySpec({"A": []})

    def test_under_identification_warning(self):
        spec = ConfirmatorySpec({"A": ["X.a", "X.b"], "B": ["Y.a", "Y.b", "Y.c"]})
        warnings = spec.warnings()
        assert len(warnings) == 1 and "'A'" in warnings[0]

    def test_from_document_accepts_session_export(self):
        spec = ConfirmatorySpec.from_document({"factors": {"A": ["X.a", "X.b"]}})
        assert spec.metric_names == ("X.a", "X.b")


class TestObjectiveGradient:
    def test_analytic_gradient_matches_central_differences(self):
        lam, phi, theta = two_factor_truth()
        r = model_implied(lam, phi, theta)
        _, logdet_s = np.linalg.slogdet(r)
        p, k = lam.shape
        factor_of = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        rng = np.random.default_rng(12)
        for _ in range(20):
            params = np.concatenate([
                rng.uniform(0.3, 0.9, size=p),
                np.log(rng.uniform(0.2, 0.8, size=p)),
                rng.uniform(0.8, 2.2, size=k * (k - 1) // 2),
            ])
            _, grad = _objective(params, r, factor_of, k, logdet_s)
            step = 1e-6
            for index in range(params.size):
                bumped = params.copy()
                bumped[index] += step
                up, _ = _objective(bumped, r, factor_of, k, logdet_s)
                bumped[index] -= 2 * step
                down, _ = _objective(bumped, r, factor_of, k, logdet_s)
                numeric = (up - down) / (2 * step)
                scale = max(abs(numeric), abs(grad[index]), 1e-8)
                assert abs(grad[index] - numeric) / scale < 1e-4

    def test_objective_nonnegative_and_zero_at_truth(self):
        lam, phi, theta = two_factor_truth()
        r = model_implied(lam, phi, theta)
        _, logdet_s = np.linalg.slogdet(r)
        factor_of = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        # at the generating parameters F must vanish
        angles = np.array([np.arccos(0.3)])
        params = np.concatenate([
            lam[np.arange(8), factor_of],
            np.log(theta - 1e-4),
            angles,
        ])
        value, _ = _objective(params, r, factor_of, 2, logdet_s)
        assert abs(value) < 1e-10
        rng = np.random.default_rng(3)
        for _ in range(10):
            off = params + rng.normal(scale=0.1, size=params.size)
            value, _ = _objective(off, r, factor_of, 2, logdet_s)
            assert value >= 0.0


class TestFit:
    def test_exact_covariance_recovered(self):
        lam, phi, theta = two_factor_truth()
        r = model_implied(lam, phi, theta)
        est_lam, est_phi, est_theta, discrepancy, converged, _ = fit_correlation(
            r, n=1000, spec=spec_for(),
        )
        assert converged
        assert discrepancy < 1e-8
        mask = lam != 0
        assert np.abs(est_lam[mask] - lam[mask]).max() < 1e-4
        assert abs(est_phi[0, 1] - 0.3) < 1e-4
        assert np.abs(est_theta - theta).max() < 1e-4

    def test_synthetic_data_recovery(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, n=2000, seed=5)
        model = fit(ds, spec_for())
        mask = lam != 0
        assert np.abs(model.standardized_loadings[mask] - lam[mask]).max() < 0.05
        assert abs(model.factor_correlations[0, 1] - 0.3) < 0.05
        assert model.converged

    def test_off_structure_loadings_exactly_zero(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, seed=6)
        model = fit(ds, spec_for())
        assert np.all(model.standardized_loadings[lam == 0] == 0.0)

    def test_implied_covariance_positive_definite(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, seed=7)
        model = fit(ds, spec_for())
        implied = model.implied_standardized_covariance()
        assert np.linalg.eigvalsh(implied).min() > 0
        assert np.allclose(implied, implied.T)

    def test_heywood_flag_for_near_perfect_indicator(self):
        rng = np.random.default_rng(8)
        n = 2000
        factor = rng.standard_normal((n, 1))
        x = np.hstack([
            factor + 1e-4 * rng.standard_normal((n, 1)),
            0.8 * factor + 0.6 * rng.standard_normal((n, 1)),
            0.7 * factor + 0.71 * rng.standard_normal((n, 1)),
        ])
        columns = (MetricName("F", "perfect"), MetricName("F", "ok"),
                   MetricName("F", "meh"))
        ds = MetricDataset(tuple(map(str, range(n))), columns, x)
        model = fit(ds, ConfirmatorySpec({"F": [str(c) for c in columns]}))
        assert model.heywood_flags[0]
        assert not model.heywood_flags[1]

    def test_raw_loadings_scale_with_sd(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, seed=9)
        scaled = MetricDataset(
            ds.entity_ids, ds.columns, ds.values * 100.0
        )
        model = fit(scaled, spec_for())
        assert model.loadings.max() > 1.0
        assert model.standardized_loadings.max() <= 1.0 + 1e-6

    def test_metric_order_within_factor_irrelevant(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, seed=10)
        forward = fit(ds, spec_for())
        shuffled = ConfirmatorySpec({
            "C1": ["C1.m3", "C1.m1", "C1.m4", "C1.m2"],
            "C2": ["C2.m2", "C2.m4", "C2.m1", "C2.m3"],
        })
        backward = fit(ds, shuffled)
        assert forward.discrepancy == pytest.approx(backward.discrepancy, abs=1e-9)
        for factor, metrics in shuffled.structure.items():
            j = backward.factor_names.index(factor)
            for metric in metrics:
                i_b = backward.metric_names.index(metric)
                i_f = forward.metric_names.index(metric)
                assert backward.standardized_loadings[i_b, j] == pytest.approx(
                    forward.standardized_loadings[i_f, forward.factor_names.index(factor)],
                    abs=1e-5,
                )

    def test_small_sample_rejected(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, n=8, seed=11)
        with pytest.raises(ValidationError):
            fit(ds, spec_for())

    def test_structure_must_exist_in_dataset(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, seed=12)
        with pytest.raises(ValidationError):
            fit(ds, ConfirmatorySpec({"A": ["Nope.x", "Nope.y"]}))


class TestFactorScores:
    def perfect_single_indicator_model(self, theta=0.0):
        return MeasurementModel(
            structure={"F": ["F.x"]},
            loadings=np.array([[1.0]]),
            standardized_loadings=np.array([[1.0]]),
            factor_correlations=np.array([[1.0]]),
            uniquenesses=np.array([theta]),
            standardized_uniquenesses=np.array([theta]),
            means=np.array([5.0]),
            sds=np.array([2.0]),
            score_coefficients=np.array([[1.0 / (1.0 + theta)]]),
            discrepancy=0.0,
            converged=True,
            n=100,
        )

    def test_perfect_indicator_scores_equal_standardized_values(self):
        model = self.perfect_single_indicator_model()
        values = np.array([[5.0], [7.0], [3.0]])
        ds = MetricDataset(("a", "b", "c"), (MetricName("F", "x"),), values)
        scores = factor_scores(model, ds)
        z = (values - 5.0) / 2.0
        assert np.abs(scores - z).max() < 1e-6

    def test_scores_track_true_factors(self):
        lam, phi, theta = two_factor_truth()
        ds, factors = dataset_from_truth(lam, phi, theta, n=2000, seed=13)
        model = fit(ds, spec_for())
        scores = factor_scores(model, ds)
        for j in range(2):
            r = np.corrcoef(scores[:, j], factors[:, j])[0, 1]
            assert r > 0.9

    def test_zero_loadings_give_zero_scores(self):
        model = MeasurementModel(
            structure={"F": ["F.x", "F.y"]},
            loadings=np.zeros((2, 1)),
            standardized_loadings=np.zeros((2, 1)),
            factor_correlations=np.array([[1.0]]),
            uniquenesses=np.ones(2),
            standardized_uniquenesses=np.ones(2),
            means=np.zeros(2),
            sds=np.ones(2),
            score_coefficients=np.zeros((1, 2)),
            discrepancy=0.0,
            converged=True,
            n=50,
        )
        ds = MetricDataset(
            ("a", "b"), (MetricName("F", "x"), MetricName("F", "y")),
            np.array([[1.0, 2.0], [3.0, 4.0]]),
        )
        assert np.all(factor_scores(model, ds) == 0.0)

    def test_missing_metric_rejected(self):
        model = self.perfect_single_indicator_model()
        ds = MetricDataset(("a",), (MetricName("G", "y"),), np.array([[1.0]]))
        with pytest.raises(ValidationError):
            factor_scores(model, ds)


class TestExport:
    def test_hand_computed_two_metric_coefficients(self):
        # lambda = (0.8, 0.6), theta = (0.36, 0.64), phi = 1
        # sigma = [[1, .48], [.48, 1]]; B = lambda' sigma^-1 via 2x2 inverse
        det = 1.0 - 0.48 * 0.48
        inv = np.array([[1.0, -0.48], [-0.48, 1.0]]) / det
        expected = np.array([0.8, 0.6]) @ inv
        lam = np.array([[0.8], [0.6]])
        theta = np.array([0.36, 0.64])
        implied = lam @ lam.T + np.diag(theta)
        model = MeasurementModel(
            structure={"F": ["F.a", "F.b"]},
            loadings=lam,
            standardized_loadings=lam,
            factor_correlations=np.array([[1.0]]),
            uniquenesses=theta,
            standardized_uniquenesses=theta,
            means=np.zeros(2),
            sds=np.ones(2),
            score_coefficients=np.array([[1.0]]) @ lam.T @ np.linalg.inv(implied),
            discrepancy=0.0,
            converged=True,
            n=500,
        )
        document = export_formulas(model)
        assert np.abs(np.array(document["score_coefficients"][0]) - expected).max() < 1e-10

    def test_roundtrip_scores_bit_identical(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, seed=14)
        model = fit(ds, spec_for())
        text = formulas_to_json(model)
        again = formulas_from_json(text)
        before = factor_scores(model, ds)
        after = factor_scores(again, ds)
        assert np.array_equal(before, after)

    def test_export_shape_and_fields(self):
        lam, phi, theta = two_factor_truth()
        ds, _ = dataset_from_truth(lam, phi, theta, seed=15)
        model = fit(ds, spec_for())
        document = export_formulas(model)
        assert document["kind"] == "measurement_model"
        assert len(document["score_coefficients"]) == 2
        assert len(document["score_coefficients"][0]) == 8
        assert document["score_method"] == "regression"
        assert json.dumps(document)  # fully serializable

    def test_import_rejects_other_documents(self):
        with pytest.raises(ValidationError):
            import_formulas({"kind": "something_else"})


def test_spherical_rows_identity_at_right_angles():
    angles = np.full(3, np.pi / 2)
    b = _spherical_rows(angles, 3)
    assert np.allclose(b @ b.T, np.eye(3), atol=1e-12)


def test_optimizer_monotone_under_callback():
    lam, phi, theta = two_factor_truth()
    r = model_implied(lam, phi, theta)
    _, logdet_s = np.linalg.slogdet(r)
    factor_of = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    from scipy import optimize as sp_opt

    values = []

    def track(xk):
        value, _ = _objective(xk, r, factor_of, 2, logdet_s)
        values.append(value)

    start = np.concatenate([
        np.full(8, 0.7), np.full(8, np.log(0.3 - 1e-4)), [np.pi / 2]
    ])
    sp_opt.minimize(_objective, start, args=(r, factor_of, 2, logdet_s),
                    jac=True, method="BFGS", callback=track,
                    options={"gtol": 1e-10, "maxiter": 500})
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
