import os
from pathlib import Path

import numpy as np
import pytest

from metrology import MetricDataset, MetricName

TESTS_DIR = Path(__file__).parent


def synthetic_factor_dataset(seed=0, n=1000, k=6, per_factor=3, load_lo=0.6,
                             load_hi=0.95, factor_corr=0.2, junk=0,
                             planted=()):
    """Dataset generated from a known oblique factor structure.

    ``planted`` rows add defective metrics: ("wrong_low", construct,
    target_factor, loading) for a low-communality metric generated by the
    wrong factor, ("cross", construct, own_loading, other_factor,
    other_loading) for a cross-loader dominated on its own factor. ``junk``
    appends pure-noise metrics. Returns (dataset, expected map, true loading
    matrix, factor draws).
    """
    rng = np.random.default_rng(seed)
    p = k * per_factor
    phi = np.full((k, k), factor_corr)
    np.fill_diagonal(phi, 1.0)
    factors = rng.standard_normal((n, k)) @ np.linalg.cholesky(phi).T

    lam = np.zeros((p, k))
    columns = []
    for j in range(k):
        for t in range(per_factor):
            i = j * per_factor + t
            lam[i, j] = rng.uniform(load_lo, load_hi)
            columns.append(MetricName(f"C{j + 1}", f"m{t + 1}"))

    extra_cols = []
    extra_lam = []
    for spec in planted:
        if spec[0] == "wrong_low":
            _, construct, target, loading = spec
            row = np.zeros(k)
            row[target] = loading
            extra_lam.append(row)
            extra_cols.append(MetricName(construct, f"bad{len(extra_cols) + 1}"))
        elif spec[0] == "cross":
            _, construct, own_loading, other, other_loading = spec
            own = int(construct[1:]) - 1
            row = np.zeros(k)
            row[own] = own_loading
            row[other] = other_loading
            extra_lam.append(row)
            extra_cols.append(MetricName(construct, f"cross{len(extra_cols) + 1}"))
    if extra_lam:
        lam = np.vstack([lam, np.array(extra_lam)])
        columns.extend(extra_cols)

    common_var = np.einsum("ij,jk,ik->i", lam, phi, lam)
    unique_sd = np.sqrt(np.clip(1.0 - common_var, 1e-4, None))
    x = factors @ lam.T + rng.standard_normal((n, lam.shape[0])) * unique_sd

    for t in range(junk):
        x = np.hstack([x, rng.standard_normal((n, 1))])
        # junk claims to measure C1 but is pure noise
        columns.append(MetricName("C1", f"junk{t + 1}"))
        lam = np.vstack([lam, np.zeros(k)])

    ds = MetricDataset(
        tuple(f"e{i}" for i in range(n)), tuple(columns), x
    )
    expected = {str(c): c.construct for c in columns}
    return ds, expected, lam, factors


@pytest.fixture
def six_factor_dataset():
    return synthetic_factor_dataset(seed=7)


def maven_dataset_path():
    """The supplement dataset, when the analyst has placed it locally."""
    env = os.environ.get("METROLOGY_MAVEN_DATA")
    if env and Path(env).exists():
        return Path(env)
    bundled = TESTS_DIR / "data" / "maven" / "efaReadyMC.csv"
    if bundled.exists():
        return bundled
    return None


requires_maven = pytest.mark.skipif(
    maven_dataset_path() is None,
    reason=(
        "supplement Maven dataset not present; set METROLOGY_MAVEN_DATA or put "
        "it at tests/data/maven/efaReadyMC.csv to run the golden tests"
    ),
)
