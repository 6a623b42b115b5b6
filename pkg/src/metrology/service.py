"""Local JSON-over-HTTP API for the workbench UI and scripts.

Every response is wrapped in an envelope ``{ok, result, error}``. The
service adds no computation of its own: each route calls the corresponding
core operation, so anything seen over HTTP is reproducible in-process.
Session mutations are serialized per session id; binds to loopback by
default and carries no authentication (single-analyst desk tool).
"""

from __future__ import annotations

import io
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field

from . import session as sessions
from .cfa import ConfirmatorySpec, FitOptions, export_formulas
from .cfa import fit as cfa_fit
from .dataset import (
    MetricDataset,
    ParseOptions,
    correlation_matrix,
    load_dataset,
)
from .efa import DiagnosisThresholds, adequacy, advise_factor_count, audit_scales
from .efa.solution import EfaConfig
from .errors import (
    ComputationError,
    DegenerateDataError,
    MetrologyError,
    ValidationError,
)
from .reliability import (
    RatingTable,
    composite_reliability,
    cronbach_alpha,
    krippendorff_alpha,
    percent_agreement,
)
from .truescore import ErrorModel, histogram_table, simulate_observations

MAX_UPLOAD_BYTES = 50 * 1024 * 1024


class NotFoundError(MetrologyError):
    pass


def _ok(result, status_code: int = 200) -> JSONResponse:
    return JSONResponse({"ok": True, "result": result, "error": None},
                        status_code=status_code)


def _fail(code: str, message: str, status_code: int) -> JSONResponse:
    return JSONResponse(
        {"ok": False, "result": None, "error": {"code": code, "message": message}},
        status_code=status_code,
    )


class DatasetUpload(BaseModel):
    csv: str
    name: str | None = None
    delimiter: str = ","
    strict: bool = False


class SessionCreate(BaseModel):
    dataset_id: str
    k: int
    expected: dict[str, str] | None = None
    config: dict = Field(default_factory=dict)


class SessionAction(BaseModel):
    action: dict
    rationale: str = ""
    max_steps: int = 20


class ReliabilityRequest(BaseModel):
    coefficient: str
    items: list[list[float | None]] | None = None
    names: list[str] | None = None
    dataset_id: str | None = None
    metrics: list[str] | None = None
    ratings: list[list[float | None]] | None = None
    level: str = "nominal"
    loadings: list[float] | None = None
    uniquenesses: list[float] | None = None


class CfaRequest(BaseModel):
    dataset_id: str
    structure: dict[str, list[str]] | None = None
    document: dict | None = None
    options: dict = Field(default_factory=dict)


class SimulateRequest(BaseModel):
    true_score: float
    random_sd: float = 0.0
    systematic_offset: float = 0.0
    seed: int = 0
    n: int = 1000
    bins: int = 30
    include_samples: bool = False


class _Store:
    """In-memory state plus the per-session write locks."""

    def __init__(self):
        self.datasets: dict[str, MetricDataset] = {}
        self.dataset_names: dict[str, str] = {}
        self.sessions: dict[str, sessions.RefinementSession] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self.advice_cache: dict[tuple, dict] = {}
        self.lock = threading.Lock()

    def dataset(self, dataset_id: str) -> MetricDataset:
        try:
            return self.datasets[dataset_id]
        except KeyError:
            raise NotFoundError(f"unknown dataset {dataset_id!r}") from None

    def session(self, session_id: str) -> sessions.RefinementSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise NotFoundError(f"unknown session {session_id!r}") from None

    def session_lock(self, session_id: str) -> threading.Lock:
        with self.lock:
            if session_id not in self.session_locks:
                self.session_locks[session_id] = threading.Lock()
            return self.session_locks[session_id]


def _dataset_summary(dataset_id: str, ds: MetricDataset, name: str | None) -> dict:
    return {
        "dataset_id": dataset_id,
        "name": name,
        "n_entities": ds.n_entities,
        "n_metrics": ds.n_metrics,
        "metrics": [
            {"raw": str(c), "construct": c.construct, "metric": c.metric, "tool": c.tool}
            for c in ds.columns
        ],
        "n_missing_cells": int(ds.missing_mask.sum()),
        "provenance": list(ds.provenance),
    }


def _problem_payload(problem) -> dict:
    return {
        "kind": problem.kind,
        "metric": problem.metric,
        "severity": problem.severity,
        "evidence": problem.evidence,
        "retain_for_now": problem.retain_for_now,
    }


def _session_payload(session: sessions.RefinementSession, store: _Store) -> dict:
    from .efa.diagnosis import label_factors

    solution = session.current
    stop = session.stop_report()
    config = session.effective_config
    names = label_factors(solution, session.expected)
    factor_names = [names.get(j, f"F{j + 1}") for j in range(solution.k)]
    key = (session.id, solution.digest(), tuple(sorted(session.active_metrics)))
    advice = store.advice_cache.get(key)
    if advice is None:
        working = session.dataset.drop(session.dropped) if session.dropped else session.dataset
        raw = advise_factor_count(working, seed=0)
        advice = {
            "eigenvalues": list(raw.eigenvalues),
            "parallel_suggested": raw.parallel_suggested,
            "parallel_thresholds": list(raw.parallel_thresholds),
            "kaiser_suggested": raw.kaiser_suggested,
            "scree_elbow_candidates": list(raw.scree_elbow_candidates),
        }
        store.advice_cache[key] = advice
    return {
        "schema_version": 1,
        "id": session.id,
        "k": session.k,
        "factor_names": factor_names,
        "metrics": [str(c) for c in solution.labels],
        "dropped": list(session.dropped),
        "expected": dict(session.expected),
        "thresholds": {
            "communality": config.thresholds.communality,
            "cross_loading": config.thresholds.cross_loading,
            "wrong_factor": config.thresholds.wrong_factor,
            "suppress": config.efa.suppress_threshold,
        },
        "solution": {
            "loadings": solution.pattern.tolist(),
            "factor_correlations": solution.factor_correlations.tolist(),
            "communalities": solution.communalities.tolist(),
            "eigenvalues": list(solution.eigenvalues),
            "variance_explained": solution.variance_explained,
            "assignment": solution.assignment,
            "rotation": solution.rotation,
            "heywood": solution.heywood,
            "suppressed_threshold": solution.suppressed_threshold,
            "digest": solution.digest(),
        },
        "problems": [_problem_payload(p) for p in session.problems],
        "stop": {
            "clean": stop.clean,
            "active_problems": stop.active_problems,
            "retained_problems": stop.retained_problems,
            "variance_explained": stop.variance_explained,
            "variance_ok": stop.variance_ok,
            "factor_sizes": {str(k): v for k, v in stop.factor_sizes.items()},
            "factor_sizes_ok": stop.factor_sizes_ok,
        },
        "history": [
            {
                "action": step.action,
                "rationale": step.rationale,
                "digest": step.solution_digest,
                "warnings": list(step.warnings),
                "problem_count": step.problem_count,
            }
            for step in session.history
        ],
        "advice": advice,
    }


def _session_config(payload: dict) -> sessions.RefinementConfig:
    efa_keys = {
        "missing_policy", "rotation", "gamma", "restarts", "rotation_seed",
        "suppress_threshold", "adequacy_override",
    }
    efa_kwargs = {k: v for k, v in payload.items() if k in efa_keys}
    thresholds = payload.get("thresholds", {})
    return sessions.RefinementConfig(
        efa=EfaConfig(**efa_kwargs),
        thresholds=DiagnosisThresholds(**thresholds),
    )


def _default_expected(ds: MetricDataset) -> dict:
    return {str(c): c.construct for c in ds.columns}


def create_app(ui_dir: str | None = None, max_upload_bytes: int = MAX_UPLOAD_BYTES) -> FastAPI:
    app = FastAPI(title="metrology service", docs_url=None, redoc_url=None)
    store = _Store()
    app.state.store = store

    @app.exception_handler(NotFoundError)
    async def _not_found(request: Request, exc: NotFoundError):
        return _fail("not_found", str(exc), 404)

    from starlette.exceptions import HTTPException as StarletteHTTPException

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "http_error"
        return _fail(code, str(exc.detail), exc.status_code)

    @app.exception_handler(ValidationError)
    async def _validation(request: Request, exc: ValidationError):
        return _fail("validation", str(exc), 422)

    @app.exception_handler(DegenerateDataError)
    async def _degenerate(request: Request, exc: DegenerateDataError):
        return _fail("degenerate_data", str(exc), 422)

    @app.exception_handler(ComputationError)
    async def _computation(request: Request, exc: ComputationError):
        return _fail("computation", str(exc), 422)

    @app.exception_handler(RequestValidationError)
    async def _request_validation(request: Request, exc: RequestValidationError):
        details = "; ".join(
            f"{'.'.join(str(x) for x in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        return _fail("validation", details, 422)

    @app.get("/schema")
    def schema():
        from .schemas import ENVELOPE, RESPONSES

        return _ok({
            "envelope": ENVELOPE,
            "responses": RESPONSES,
            "requests": {
                "dataset_upload": DatasetUpload.model_json_schema(),
                "session_create": SessionCreate.model_json_schema(),
                "session_action": SessionAction.model_json_schema(),
                "reliability": ReliabilityRequest.model_json_schema(),
                "cfa": CfaRequest.model_json_schema(),
                "simulate": SimulateRequest.model_json_schema(),
            },
        })

    @app.post("/datasets")
    def upload_dataset(payload: DatasetUpload):
        if len(payload.csv.encode()) > max_upload_bytes:
            raise ValidationError(
                f"upload exceeds the {max_upload_bytes // (1024 * 1024)} MB cap"
            )
        ds = load_dataset(
            io.StringIO(payload.csv),
            ParseOptions(delimiter=payload.delimiter, strict=payload.strict),
        )
        dataset_id = uuid.uuid4().hex[:12]
        with store.lock:
            store.datasets[dataset_id] = ds
            store.dataset_names[dataset_id] = payload.name
        return _ok(_dataset_summary(dataset_id, ds, payload.name), status_code=201)

    @app.get("/datasets/{dataset_id}")
    def dataset_summary(dataset_id: str):
        ds = store.dataset(dataset_id)
        return _ok(_dataset_summary(dataset_id, ds, store.dataset_names.get(dataset_id)))

    @app.get("/datasets/{dataset_id}/correlations")
    def dataset_correlations(dataset_id: str, policy: str = "listwise"):
        ds = store.dataset(dataset_id)
        cm = correlation_matrix(ds, missing_policy=policy)
        return _ok({
            "labels": [str(c) for c in cm.labels],
            "r": cm.r.tolist(),
            "n_used": cm.n_used,
            "missing_policy": cm.missing_policy,
        })

    @app.get("/datasets/{dataset_id}/adequacy")
    def dataset_adequacy(dataset_id: str):
        ds = store.dataset(dataset_id)
        cm = correlation_matrix(ds)
        report = adequacy(cm, cm.n_used)
        return _ok({
            "kmo_overall": report.kmo_overall,
            "kmo_per_variable": report.kmo_per_variable,
            "bartlett_chi2": report.bartlett_chi2,
            "bartlett_df": report.bartlett_df,
            "bartlett_p": report.bartlett_p,
            "multicollinear_pairs": report.multicollinear_pairs,
            "obs_per_variable": report.obs_per_variable,
            "passes": report.passes,
            "sample_size_warning": report.sample_size_warning,
        })

    @app.post("/reliability")
    def reliability(payload: ReliabilityRequest):
        coefficient = payload.coefficient
        if coefficient == "alpha":
            if payload.dataset_id:
                ds = store.dataset(payload.dataset_id)
                if payload.metrics:
                    ds = ds.select(payload.metrics)
                items = ds.values
                names = [str(c) for c in ds.columns]
            elif payload.items is not None:
                items = np.array(
                    [[np.nan if v is None else v for v in row] for row in payload.items],
                    dtype=float,
                )
                names = payload.names
            else:
                raise ValidationError("alpha needs items or dataset_id")
            report = cronbach_alpha(items, names)
        elif coefficient in ("percent_agreement", "krippendorff_alpha"):
            if payload.ratings is None:
                raise ValidationError(f"{coefficient} needs a ratings table")
            ratings = np.array(
                [[np.nan if v is None else v for v in row] for row in payload.ratings],
                dtype=float,
            )
            table = RatingTable(ratings, level=payload.level,
                                raters=tuple(payload.names or ()))
            report = (percent_agreement(table) if coefficient == "percent_agreement"
                      else krippendorff_alpha(table))
        elif coefficient in ("composite_reliability", "omega_total"):
            if payload.loadings is None or payload.uniquenesses is None:
                raise ValidationError(f"{coefficient} needs loadings and uniquenesses")
            report = composite_reliability(
                payload.loadings, payload.uniquenesses,
                coefficient=coefficient, names=payload.names,
            )
        else:
            raise ValidationError(f"unknown coefficient {coefficient!r}")
        return _ok({
            "coefficient": report.coefficient,
            "value": report.value,
            "band": report.band,
            "n": report.n,
            "items": list(report.items),
            "details": report.details,
        })

    @app.post("/sessions")
    def create_session(payload: SessionCreate):
        ds = store.dataset(payload.dataset_id)
        expected = payload.expected or _default_expected(ds)
        config = _session_config(payload.config)
        session = sessions.new_session(ds, expected, payload.k, config)
        with store.lock:
            store.sessions[session.id] = session
        return _ok(_session_payload(session, store), status_code=201)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _ok(_session_payload(store.session(session_id), store))

    @app.post("/sessions/{session_id}/actions")
    def session_action(session_id: str, payload: SessionAction):
        lock = store.session_lock(session_id)
        acquired = lock.acquire(timeout=30.0)
        if not acquired:
            return _fail("conflict", "session is busy with another mutation", 409)
        try:
            session = store.session(session_id)
            kind = payload.action.get("type")
            if kind == "auto_refine":
                session = sessions.auto_refine(session, max_steps=payload.max_steps)
            else:
                session = sessions.apply(session, payload.action, payload.rationale)
            store.sessions[session_id] = session
        finally:
            lock.release()
        return _ok(_session_payload(session, store))

    @app.post("/sessions/{session_id}/export")
    def session_export(session_id: str):
        return _ok(sessions.export_model(store.session(session_id)))

    @app.post("/cfa/fit")
    def fit_cfa(payload: CfaRequest):
        ds = store.dataset(payload.dataset_id)
        if payload.structure:
            spec = ConfirmatorySpec(payload.structure)
        elif payload.document:
            spec = ConfirmatorySpec.from_document(payload.document)
        else:
            raise ValidationError("cfa fit needs structure or an exported document")
        options = FitOptions(**payload.options) if payload.options else FitOptions()
        model = cfa_fit(ds, spec, options)
        result = export_formulas(model)
        result["warnings"] = spec.warnings()
        return _ok(result)

    @app.post("/simulate")
    def simulate(payload: SimulateRequest):
        model = ErrorModel(
            true_score=payload.true_score,
            random_sd=payload.random_sd,
            systematic_offset=payload.systematic_offset,
            seed=payload.seed,
        )
        samples = simulate_observations(model, payload.n)
        result = {
            "n": payload.n,
            "mean": float(samples.mean()),
            "sd": float(samples.std(ddof=1)) if payload.n > 1 else 0.0,
            "histogram": histogram_table(samples, bins=payload.bins),
        }
        if payload.include_samples:
            result["samples"] = samples.tolist()
        return _ok(result)

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        index = Path(ui_dir) / "index.html"
        if index.exists():
            @app.get("/")
            def root():
                return FileResponse(index)
        app.mount("/ui", StaticFiles(directory=ui_dir), name="ui")

    return app


def serve(host: str = "127.0.0.1", port: int = 8765, ui_dir: str | None = None):
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(ui_dir=ui_dir), host=host, port=port, log_level="warning")
