"""JSON schemas for the machine-readable payloads.

Shared by the HTTP service (published at GET /schema) and by the CLI's
``--json`` output, so scripts can rely on one contract for both surfaces.
"""

_NUMBER = {"type": "number"}
_STRING = {"type": "string"}
_BOOL = {"type": "boolean"}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUMBER}}
_NUMBERS = {"type": "array", "items": _NUMBER}
_STRINGS = {"type": "array", "items": _STRING}

RELIABILITY_REPORT = {
    "type": "object",
    "properties": {
        "coefficient": {"enum": ["alpha", "percent_agreement", "krippendorff_alpha",
                                 "composite_reliability", "omega_total"]},
        "value": _NUMBER,
        "band": {"enum": ["excellent", "acceptable", "poor"]},
        "n": {"type": "integer"},
        "items": _STRINGS,
        "details": {"type": "object"},
    },
    "required": ["coefficient", "value", "band", "n", "items"],
}

PROBLEM = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["low_communality", "cross_loading", "wrong_factor"]},
        "metric": _STRING,
        "severity": _NUMBER,
        "evidence": {"type": "object"},
        "retain_for_now": _BOOL,
    },
    "required": ["kind", "metric", "severity", "retain_for_now"],
}

SOLUTION = {
    "type": "object",
    "properties": {
        "loadings": _MATRIX,
        "factor_correlations": _MATRIX,
        "communalities": _NUMBERS,
        "eigenvalues": _NUMBERS,
        "variance_explained": _NUMBER,
        "assignment": {"type": "object", "additionalProperties": {"type": "integer"}},
        "rotation": _STRING,
        "heywood": _BOOL,
        "suppressed_threshold": _NUMBER,
        "digest": _STRING,
    },
    "required": ["loadings", "factor_correlations", "communalities",
                 "variance_explained", "assignment", "rotation", "digest"],
}

ADVICE = {
    "type": "object",
    "properties": {
        "eigenvalues": _NUMBERS,
        "parallel_suggested": {"type": "integer"},
        "parallel_thresholds": _NUMBERS,
        "kaiser_suggested": {"type": "integer"},
        "scree_elbow_candidates": {"type": "array", "items": {"type": "integer"}},
    },
    "required": ["eigenvalues", "kaiser_suggested"],
}

ADEQUACY_REPORT = {
    "type": "object",
    "properties": {
        "kmo_overall": _NUMBER,
        "kmo_per_variable": {"type": "object", "additionalProperties": _NUMBER},
        "bartlett_chi2": _NUMBER,
        "bartlett_df": {"type": "integer"},
        "bartlett_p": _NUMBER,
        "obs_per_variable": _NUMBER,
        "passes": _BOOL,
        "multicollinear_pairs": {"type": "array"},
        "advice": ADVICE,
    },
    "required": ["kmo_overall", "bartlett_chi2", "bartlett_df", "bartlett_p"],
}

EFA_RESULT = {
    "type": "object",
    "properties": {
        **SOLUTION["properties"],
        "metrics": _STRINGS,
        "factor_names": _STRINGS,
        "problems": {"type": "array", "items": PROBLEM},
    },
    "required": SOLUTION["required"] + ["metrics"],
}

STEP = {
    "type": "object",
    "properties": {
        "action": {"type": "object"},
        "rationale": _STRING,
        "digest": _STRING,
        "warnings": _STRINGS,
    },
    "required": ["action", "digest"],
}

REFINE_RESULT = {
    "type": "object",
    "properties": {
        "id": _STRING,
        "dropped": _STRINGS,
        "clean": _BOOL,
        "variance_explained": _NUMBER,
        "steps": {"type": "array", "items": STEP},
        "solution": EFA_RESULT,
    },
    "required": ["id", "dropped", "clean", "steps", "solution"],
}

STOP_REPORT = {
    "type": "object",
    "properties": {
        "clean": _BOOL,
        "active_problems": {"type": "integer"},
        "retained_problems": {"type": "integer"},
        "variance_explained": _NUMBER,
        "variance_ok": _BOOL,
        "factor_sizes": {"type": "object"},
        "factor_sizes_ok": _BOOL,
    },
    "required": ["clean", "active_problems", "variance_explained"],
}

SESSION = {
    "type": "object",
    "properties": {
        "schema_version": {"type": "integer"},
        "id": _STRING,
        "k": {"type": "integer"},
        "factor_names": _STRINGS,
        "metrics": _STRINGS,
        "dropped": _STRINGS,
        "expected": {"type": "object", "additionalProperties": _STRING},
        "thresholds": {"type": "object", "additionalProperties": _NUMBER},
        "solution": SOLUTION,
        "problems": {"type": "array", "items": PROBLEM},
        "stop": STOP_REPORT,
        "history": {"type": "array", "items": STEP},
        "advice": ADVICE,
    },
    "required": ["schema_version", "id", "k", "factor_names", "metrics",
                 "dropped", "solution", "problems", "stop", "history", "advice"],
}

CONFIRMATORY_SPEC = {
    "type": "object",
    "properties": {
        "schema_version": {"type": "integer"},
        "kind": {"const": "confirmatory_spec"},
        "factors": {"type": "object", "additionalProperties": _STRINGS},
        "k": {"type": "integer"},
        "variance_explained": _NUMBER,
        "thresholds": {"type": "object"},
        "dropped": _STRINGS,
        "content_validity_checklist": _STRINGS,
    },
    "required": ["kind", "factors"],
}

MEASUREMENT_MODEL = {
    "type": "object",
    "properties": {
        "schema_version": {"type": "integer"},
        "kind": {"const": "measurement_model"},
        "factors": {"type": "object", "additionalProperties": _STRINGS},
        "metrics": _STRINGS,
        "loadings": _MATRIX,
        "standardized_loadings": _MATRIX,
        "factor_correlations": _MATRIX,
        "uniquenesses": _NUMBERS,
        "standardized_uniquenesses": _NUMBERS,
        "means": _NUMBERS,
        "sds": _NUMBERS,
        "score_coefficients": _MATRIX,
        "score_method": {"const": "regression"},
        "discrepancy": _NUMBER,
        "converged": _BOOL,
        "n": {"type": "integer"},
        "heywood_flags": {"type": "array", "items": _BOOL},
    },
    "required": ["kind", "factors", "loadings", "score_coefficients",
                 "discrepancy", "converged", "means", "sds"],
}

SIMULATION = {
    "type": "object",
    "properties": {
        "n": {"type": "integer"},
        "mean": _NUMBER,
        "sd": _NUMBER,
        "histogram": {
            "type": "array",
            "items": {"type": "array", "minItems": 2, "maxItems": 2},
        },
        "samples": _NUMBERS,
    },
    "required": ["n", "mean", "sd", "histogram"],
}

AUDIT = {
    "type": "object",
    "properties": {
        "min_intra": _NUMBER,
        "max_inter": _NUMBER,
        "passes": _BOOL,
        "offending_pairs": {"type": "array"},
    },
    "required": ["min_intra", "max_inter", "passes", "offending_pairs"],
}

ENVELOPE = {
    "type": "object",
    "properties": {
        "ok": _BOOL,
        "result": {},
        "error": {
            "type": ["object", "null"],
            "properties": {"code": _STRING, "message": _STRING},
            "required": ["code", "message"],
        },
    },
    "required": ["ok"],
}

RESPONSES = {
    "envelope": ENVELOPE,
    "reliability_report": RELIABILITY_REPORT,
    "adequacy_report": ADEQUACY_REPORT,
    "efa_result": EFA_RESULT,
    "refine_result": REFINE_RESULT,
    "session": SESSION,
    "confirmatory_spec": CONFIRMATORY_SPEC,
    "measurement_model": MEASUREMENT_MODEL,
    "simulation": SIMULATION,
    "audit": AUDIT,
    "problem": PROBLEM,
    "solution": SOLUTION,
}
