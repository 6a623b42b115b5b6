import numpy as np
import pytest

from metrology import ValidationError, run_efa
from metrology.dataset import MetricDataset, MetricName, correlation_matrix
from metrology.efa.solution import EfaConfig

from .conftest import synthetic_factor_dataset
from .oracles import tucker_congruence


def test_single_factor_assignment():
    ds, _, _, _ = synthetic_factor_dataset(seed=2, k=1, per_factor=5,
                                           load_lo=0.7, load_hi=0.9)
    solution = run_efa(ds, 1, EfaConfig())
    assert set(solution.assignment.values()) == {0}
    assert solution.rotation == "none"


def test_variance_explained_is_mean_communality():
    ds, _, _, _ = synthetic_factor_dataset(seed=3, k=3, per_factor=4)
    solution = run_efa(ds, 3, EfaConfig())
    assert solution.variance_explained == pytest.approx(
        solution.communalities.sum() / solution.p, abs=1e-12
    )


def test_small_loadings_suppressed_for_display_but_retained():
    ds, _, _, _ = synthetic_factor_dataset(seed=4, k=3, per_factor=4)
    solution = run_efa(ds, 3, EfaConfig())
    suppressed = solution.suppressed()
    assert suppressed.any()
    assert np.abs(solution.pattern[suppressed]).max() < 0.3
    assert not np.all(solution.pattern[suppressed] == 0.0)


def test_adequacy_gate_blocks_noise_without_override():
    rng = np.random.default_rng(0)
    cols = tuple(MetricName("N", f"m{i}") for i in range(6))
    ds = MetricDataset(tuple(map(str, range(400))), cols,
                       rng.standard_normal((400, 6)))
    with pytest.raises(ValidationError, match="adequacy"):
        run_efa(ds, 2, EfaConfig())
    # factoring noise converges slowly; the override still computes a solution
    solution = run_efa(ds, 2, EfaConfig(adequacy_override=True,
                                        extraction_max_iter=20000))
    assert solution.k == 2


def test_eigenvalue_trace_preservation_many_seeds():
    for seed in range(10):
        ds, _, _, _ = synthetic_factor_dataset(seed=seed, k=3, per_factor=3)
        cm = correlation_matrix(ds)
        eigenvalues = np.linalg.eigvalsh(cm.r)
        assert eigenvalues.sum() == pytest.approx(cm.p, abs=1e-8)


def test_orthogonal_factor_recovery_congruence():
    ds, expected, lam_true, _ = synthetic_factor_dataset(
        seed=11, n=800, k=3, per_factor=4, load_lo=0.7, load_hi=0.9,
        factor_corr=0.0,
    )
    solution = run_efa(ds, 3, EfaConfig())
    # match each true factor to the recovered column with max |congruence|
    for j in range(3):
        congruences = [
            abs(tucker_congruence(lam_true[:, j], solution.pattern[:, l]))
            for l in range(3)
        ]
        assert max(congruences) > 0.95


def test_config_threshold_carried_to_solution():
    ds, _, _, _ = synthetic_factor_dataset(seed=12, k=3, per_factor=4)
    solution = run_efa(ds, 3, EfaConfig(suppress_threshold=0.4))
    assert solution.suppressed_threshold == 0.4
