"""Iterative EFA refinement sessions: diagnose, drop, undo, export.

A session owns an immutable dataset and an append-only action history.
Dropped metrics are tombstoned, never deleted, so any state can be
reproduced by replaying the action log from the initial inputs. The current
solution is always the full pipeline run over the surviving metrics.
"""

from __future__ import annotations

import io
import json
import uuid
from dataclasses import dataclass, field, replace

from .dataset import MetricDataset, load_dataset, save_dataset
from .efa.diagnosis import DiagnosisThresholds, Problem, diagnose, label_factors
from .efa.solution import EfaConfig, FactorSolution, run_efa
from .errors import ValidationError

MIN_VARIANCE_EXPLAINED = 0.6
MIN_METRICS_PER_FACTOR = 3

EXPORT_SCHEMA_VERSION = 1

CONTENT_VALIDITY_CHECKLIST = (
    "Do the surviving metrics still cover every facet of each construct?",
    "Did any construct lose a facet when metrics were dropped?",
    "Are any constructs now measured by near-duplicate metrics only?",
)


@dataclass(frozen=True)
class RefinementConfig:
    """Session-wide settings: EFA knobs plus diagnosis thresholds."""

    efa: EfaConfig = field(default_factory=EfaConfig)
    thresholds: DiagnosisThresholds = field(default_factory=DiagnosisThresholds)

    def with_threshold(self, name: str, value: float) -> "RefinementConfig":
        if name == "suppress":
            return replace(self, efa=replace(self.efa, suppress_threshold=value))
        if name in ("communality", "cross_loading", "wrong_factor"):
            return replace(self, thresholds=replace(self.thresholds, **{name: value}))
        raise ValidationError(f"unknown threshold {name!r}")


@dataclass(frozen=True)
class StopReport:
    """Whether the refinement loop can stop, and why not if it cannot."""

    clean: bool
    active_problems: int
    retained_problems: int
    variance_explained: float
    variance_ok: bool
    factor_sizes: dict
    factor_sizes_ok: bool


@dataclass(frozen=True)
class RefinementStep:
    """One applied action and the state it produced."""

    action: dict
    solution_digest: str
    problem_count: int
    rationale: str = ""
    warnings: tuple = ()


@dataclass(frozen=True)
class RefinementSession:
    """Dataset, expected assignment, history, and the current solution."""

    id: str
    dataset: MetricDataset
    expected: dict
    initial_k: int
    config: RefinementConfig
    history: tuple = ()
    current: FactorSolution = None
    problems: tuple = ()

    @property
    def dropped(self) -> tuple:
        out = []
        for step in self.history:
            if step.action["type"] == "drop":
                out.append(step.action["metric"])
        return tuple(out)

    @property
    def k(self) -> int:
        k = self.initial_k
        for step in self.history:
            if step.action["type"] == "set_k":
                k = step.action["k"]
        return k

    @property
    def effective_config(self) -> RefinementConfig:
        config = self.config
        for step in self.history:
            if step.action["type"] == "set_threshold":
                config = config.with_threshold(step.action["name"], step.action["value"])
        return config

    @property
    def active_metrics(self) -> tuple:
        gone = set(self.dropped)
        return tuple(str(c) for c in self.dataset.columns if str(c) not in gone)

    def stop_report(self) -> StopReport:
        active = [p for p in self.problems if not p.retain_for_now]
        retained = [p for p in self.problems if p.retain_for_now]
        variance = self.current.variance_explained
        sizes = {j: len(ms) for j, ms in self.current.factor_metrics().items()}
        sizes_ok = all(size >= MIN_METRICS_PER_FACTOR for size in sizes.values())
        variance_ok = variance >= MIN_VARIANCE_EXPLAINED
        return StopReport(
            clean=not active and variance_ok and sizes_ok,
            active_problems=len(active),
            retained_problems=len(retained),
            variance_explained=variance,
            variance_ok=variance_ok,
            factor_sizes=sizes,
            factor_sizes_ok=sizes_ok,
        )


def _solve(session: RefinementSession) -> RefinementSession:
    config = session.effective_config
    working = session.dataset.drop(session.dropped) if session.dropped else session.dataset
    solution = run_efa(working, session.k, config.efa)
    problems = tuple(diagnose(solution, session.expected, config.thresholds))
    return replace(session, current=solution, problems=problems)


def new_session(ds: MetricDataset, expected: dict, k: int,
                config: RefinementConfig = RefinementConfig(),
                session_id: str | None = None) -> RefinementSession:
    """Start a session: validate the expected map, solve, and diagnose."""
    expected = {str(m): str(c) for m, c in expected.items()}
    missing = [str(c) for c in ds.columns if str(c) not in expected]
    if missing:
        raise ValidationError(f"expected assignment is missing: {', '.join(missing)}")
    session = RefinementSession(
        id=session_id or uuid.uuid4().hex,
        dataset=ds,
        expected=expected,
        initial_k=k,
        config=config,
    )
    return _solve(session)


def _drop_warnings(session: RefinementSession, metric: str) -> tuple:
    construct = session.expected[metric]
    remaining = [
        m for m in session.active_metrics
        if m != metric and session.expected[m] == construct
    ]
    if len(remaining) < MIN_METRICS_PER_FACTOR:
        return (
            f"dropping {metric} leaves construct {construct!r} with "
            f"{len(remaining)} metrics; at least {MIN_METRICS_PER_FACTOR} are needed",
        )
    return ()


def apply(session: RefinementSession, action: dict, rationale: str = "") -> RefinementSession:
    """Apply one action and return the new session state.

    Actions: ``{"type": "drop", "metric": name}``, ``{"type": "set_k",
    "k": count}``, ``{"type": "set_threshold", "name": ..., "value": ...}``,
    and ``{"type": "undo"}``, which removes exactly the last step. Dropping
    below three expected metrics per construct is a recorded warning, not an
    error; the analyst may proceed.
    """
    kind = action.get("type")
    if kind == "undo":
        if not session.history:
            raise ValidationError("nothing to undo")
        return _solve(replace(session, history=session.history[:-1]))

    warnings: tuple = ()
    if kind == "drop":
        metric = str(action.get("metric", ""))
        if metric not in session.active_metrics:
            raise ValidationError(f"metric {metric!r} is not in the active set")
        if len(session.active_metrics) - 1 <= session.k:
            raise ValidationError(
                f"cannot drop {metric!r}: {session.k} factors need more than "
                f"{session.k} metrics"
            )
        warnings = _drop_warnings(session, metric)
        action = {"type": "drop", "metric": metric}
    elif kind == "set_k":
        k = int(action.get("k", 0))
        if not 1 <= k < len(session.active_metrics):
            raise ValidationError(f"factor count must satisfy 1 <= k < {len(session.active_metrics)}")
        action = {"type": "set_k", "k": k}
    elif kind == "set_threshold":
        name = str(action.get("name", ""))
        value = float(action.get("value", 0.0))
        session.effective_config.with_threshold(name, value)  # validates the name
        action = {"type": "set_threshold", "name": name, "value": value}
    else:
        raise ValidationError(f"unknown action type {kind!r}")

    step = RefinementStep(action=action, solution_digest="", problem_count=0,
                          rationale=rationale, warnings=warnings)
    solved = _solve(replace(session, history=session.history + (step,)))
    step = replace(step, solution_digest=solved.current.digest(),
                   problem_count=len(solved.problems))
    return replace(solved, history=solved.history[:-1] + (step,))


def auto_refine(session: RefinementSession, max_steps: int = 20) -> RefinementSession:
    """Scripted advisor: drop the worst active problem until clean or out of steps.

    Retained-for-now problems are never acted on, a metric is never dropped
    twice, and every automatic step carries a machine rationale. The loop
    also stops when the remaining problems are all retained or each factor
    would fall below the three-metric floor.
    """
    ever_dropped = set(session.dropped)
    for _ in range(max_steps):
        report = session.stop_report()
        if report.clean:
            break
        candidates = [
            p for p in session.problems
            if not p.retain_for_now and p.metric not in ever_dropped
        ]
        if not candidates:
            break
        worst = candidates[0]
        ever_dropped.add(worst.metric)
        rationale = (
            f"auto: {worst.kind} on {worst.metric} "
            f"(severity {worst.severity:.2f}, evidence {worst.evidence})"
        )
        session = apply(session, {"type": "drop", "metric": worst.metric}, rationale)
    return session


def replay(ds: MetricDataset, expected: dict, k: int, config: RefinementConfig,
           actions, session_id: str | None = None) -> RefinementSession:
    """Rebuild a session by applying a recorded action log from scratch."""
    session = new_session(ds, expected, k, config, session_id=session_id)
    for entry in actions:
        if isinstance(entry, RefinementStep):
            session = apply(session, entry.action, entry.rationale)
        else:
            session = apply(session, dict(entry))
    return session


def export_model(session: RefinementSession) -> dict:
    """Confirmatory specification from the current solution.

    Factors are named after the expected constructs they carry (surplus
    factors keep positional names) and each lists its assigned metrics. The
    document is accepted verbatim by the confirmatory fit, and closes with a
    content-validity checklist for the analyst.
    """
    solution = session.current
    names = label_factors(solution, session.expected)
    factors = {}
    for j, metrics in solution.factor_metrics().items():
        if not metrics:
            continue
        factors[names.get(j, f"F{j + 1}")] = sorted(metrics)
    thresholds = session.effective_config.thresholds
    return {
        "schema_version": EXPORT_SCHEMA_VERSION,
        "kind": "confirmatory_spec",
        "factors": factors,
        "k": solution.k,
        "variance_explained": solution.variance_explained,
        "thresholds": {
            "communality": thresholds.communality,
            "cross_loading": thresholds.cross_loading,
            "wrong_factor": thresholds.wrong_factor,
            "suppress": session.effective_config.efa.suppress_threshold,
        },
        "rotation": solution.rotation,
        "dropped": list(session.dropped),
        "content_validity_checklist": list(CONTENT_VALIDITY_CHECKLIST),
    }


def session_to_json(session: RefinementSession) -> str:
    """Serialize a session (dataset included) to a single JSON document."""
    efa = session.config.efa
    thresholds = session.config.thresholds
    doc = {
        "schema_version": EXPORT_SCHEMA_VERSION,
        "kind": "refinement_session",
        "id": session.id,
        "dataset_csv": save_dataset(session.dataset),
        "expected": session.expected,
        "initial_k": session.initial_k,
        "config": {
            "efa": {
                "missing_policy": efa.missing_policy,
                "rotation": efa.rotation,
                "gamma": efa.gamma,
                "restarts": efa.restarts,
                "rotation_seed": efa.rotation_seed,
                "suppress_threshold": efa.suppress_threshold,
                "adequacy_override": efa.adequacy_override,
            },
            "thresholds": {
                "communality": thresholds.communality,
                "cross_loading": thresholds.cross_loading,
                "wrong_factor": thresholds.wrong_factor,
            },
        },
        "actions": [
            {"action": step.action, "rationale": step.rationale}
            for step in session.history
        ],
    }
    return json.dumps(doc)


def session_from_json(text: str) -> RefinementSession:
    """Rebuild a session from :func:`session_to_json` output by replaying it."""
    doc = json.loads(text)
    if doc.get("kind") != "refinement_session":
        raise ValidationError("not a refinement session document")
    ds = load_dataset(io.StringIO(doc["dataset_csv"]))
    config = RefinementConfig(
        efa=EfaConfig(**doc["config"]["efa"]),
        thresholds=DiagnosisThresholds(**doc["config"]["thresholds"]),
    )
    session = new_session(ds, doc["expected"], doc["initial_k"], config,
                          session_id=doc["id"])
    for entry in doc["actions"]:
        session = apply(session, entry["action"], entry.get("rationale", ""))
    return session
