"""Exploratory factor analysis: adequacy, factor-count advice, extraction,
oblique rotation, solution diagnosis, and the intra/inter correlation audit."""

from .adequacy import AdequacyReport, adequacy
from .advice import FactorCountAdvice, advise_factor_count
from .diagnosis import DiagnosisThresholds, Problem, ScaleAudit, audit_scales, diagnose
from .extraction import extract
from .rotation import rotate
from .solution import EfaConfig, FactorSolution, run_efa

__all__ = [
    "AdequacyReport",
    "adequacy",
    "FactorCountAdvice",
    "advise_factor_count",
    "DiagnosisThresholds",
    "Problem",
    "ScaleAudit",
    "audit_scales",
    "diagnose",
    "extract",
    "rotate",
    "EfaConfig",
    "FactorSolution",
    "run_efa",
]
