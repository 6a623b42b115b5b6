"""True-score error simulation and the cost of unreliable measurement.

An observation is modelled as the true quantity plus a constant systematic
offset plus Gaussian random error. The detectability helpers quantify how
random error of a single observation blurs a real difference between two
conditions, and how many observations buy the blur back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import ValidationError


@dataclass(frozen=True)
class ErrorModel:
    """True score plus error components for one measurement process."""

    true_score: float
    random_sd: float = 0.0
    systematic_offset: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.random_sd < 0:
            raise ValidationError("random_sd must be nonnegative")


@dataclass(frozen=True)
class DetectabilityReport:
    """How visible an effect is through single noisy observations."""

    effect: float
    per_obs_sd: float
    misorder_probability: float
    distribution_overlap: float


def simulate_observations(model: ErrorModel, n: int) -> np.ndarray:
    """Draw n observations X = T + systematic_offset + N(0, random_sd)."""
    if n < 1:
        raise ValidationError("need at least one observation")
    rng = np.random.default_rng(model.seed)
    center = model.true_score + model.systematic_offset
    if model.random_sd == 0:
        return np.full(n, float(center))
    return center + rng.normal(0.0, model.random_sd, size=n)


def detectability(effect: float, per_obs_sd: float) -> DetectabilityReport:
    """Misorder probability and distribution overlap for a given effect.

    The misorder probability is the chance that a single observation of the
    faster (better) condition looks worse than a single observation of the
    slower one: Phi(-|effect| / (sd * sqrt(2))). Overlap is the shared area
    of the two observation distributions, 2 * Phi(-|effect| / (2 * sd)).
    """
    if per_obs_sd < 0:
        raise ValidationError("per_obs_sd must be nonnegative")
    if per_obs_sd == 0:
        if effect == 0:
            raise ValidationError("effect and per_obs_sd cannot both be zero")
        return DetectabilityReport(effect, per_obs_sd, 0.0, 0.0)
    misorder = float(norm.cdf(-abs(effect) / (per_obs_sd * math.sqrt(2.0))))
    overlap = float(2.0 * norm.cdf(-abs(effect) / (2.0 * per_obs_sd)))
    return DetectabilityReport(effect, per_obs_sd, misorder, overlap)


def required_sample_size(effect: float, per_obs_sd: float, alpha: float = 0.05,
                         power: float = 0.8) -> int:
    """Per-group n for a two-sample z test to reach the target power.

    Smallest integer n with n >= 2 (z_{1-alpha/2} + z_power)^2 (sd/effect)^2,
    floored at 1 (perfect measurement still needs one observation).
    """
    if effect == 0:
        raise ValidationError("effect of zero can never be detected")
    if per_obs_sd < 0:
        raise ValidationError("per_obs_sd must be nonnegative")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    if not 0.5 < power < 1:
        raise ValidationError("power must lie in (0.5, 1)")
    if per_obs_sd == 0:
        return 1
    z = norm.ppf(1.0 - alpha / 2.0) + norm.ppf(power)
    n = 2.0 * (z * per_obs_sd / effect) ** 2
    return max(1, int(math.ceil(n - 1e-12)))


def histogram_table(samples, bins: int = 30) -> list:
    """Plot-ready (bin center, count) rows for a sample vector."""
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise ValidationError("no samples to bin")
    counts, edges = np.histogram(values, bins=bins)
    centers = (edges[:-1] + edges[1:]) / 2.0
    return [(float(c), int(k)) for c, k in zip(centers, counts)]
