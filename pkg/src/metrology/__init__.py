"""Measurement workbench for multi-tool software metrics.

Reliability and agreement coefficients, true-score error simulation,
exploratory factor analysis with an interactive refinement loop, and
confirmatory factor analysis that exports a reusable measurement model.
"""

from . import cfa, dataset, efa, reliability, render, session, truescore
from .cfa import ConfirmatorySpec, MeasurementModel
from .dataset import (
    CorrelationMatrix,
    MetricDataset,
    MetricName,
    ParseOptions,
    correlation_matrix,
    invert_reversed,
    load_dataset,
    save_dataset,
)
from .efa import (
    AdequacyReport,
    EfaConfig,
    FactorCountAdvice,
    FactorSolution,
    Problem,
    ScaleAudit,
    adequacy,
    advise_factor_count,
    audit_scales,
    diagnose,
    extract,
    rotate,
    run_efa,
)
from .errors import (
    ComputationError,
    ConstantColumnError,
    ConvergenceError,
    DegenerateDataError,
    MetrologyError,
    MulticollinearityError,
    ValidationError,
)
from .estimators import ConfirmatoryFactorAnalysis, ExploratoryFactorAnalysis
from .reliability import (
    RatingTable,
    ReliabilityReport,
    composite_reliability,
    cronbach_alpha,
    krippendorff_alpha,
    percent_agreement,
)
from .session import (
    RefinementConfig,
    RefinementSession,
    apply,
    auto_refine,
    export_model,
    new_session,
    replay,
    session_from_json,
    session_to_json,
)
from .truescore import (
    DetectabilityReport,
    ErrorModel,
    detectability,
    required_sample_size,
    simulate_observations,
)

__version__ = "0.1.0"

__all__ = [
    "cfa", "dataset", "efa", "reliability", "render", "session", "truescore",
    "ConfirmatorySpec", "MeasurementModel",
    "CorrelationMatrix", "MetricDataset", "MetricName", "ParseOptions",
    "correlation_matrix", "invert_reversed", "load_dataset", "save_dataset",
    "AdequacyReport", "EfaConfig", "FactorCountAdvice", "FactorSolution",
    "Problem", "ScaleAudit", "adequacy", "advise_factor_count", "audit_scales",
    "diagnose", "extract", "rotate", "run_efa",
    "ComputationError", "ConstantColumnError", "ConvergenceError",
    "DegenerateDataError", "MetrologyError", "MulticollinearityError",
    "ValidationError",
    "ConfirmatoryFactorAnalysis", "ExploratoryFactorAnalysis",
    "RatingTable", "ReliabilityReport", "composite_reliability",
    "cronbach_alpha", "krippendorff_alpha", "percent_agreement",
    "RefinementConfig", "RefinementSession", "apply", "auto_refine",
    "export_model", "new_session", "replay", "session_from_json",
    "session_to_json",
    "DetectabilityReport", "ErrorModel", "detectability",
    "required_sample_size", "simulate_observations",
]
