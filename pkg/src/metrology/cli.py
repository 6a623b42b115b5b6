"""Command-line entry point for batch runs and for launching the service.

Exit codes: 0 success, 1 usage or validation error, 2 computation failure.
Every subcommand takes ``--json`` for machine output.
"""

from __future__ import annotations

import csv
import json
import os
import sys

import click
import numpy as np

from . import render, session as sessions
from .cfa import ConfirmatorySpec, export_formulas
from .cfa import fit as cfa_fit
from .dataset import ParseOptions, correlation_matrix, load_dataset
from .efa import adequacy as run_adequacy
from .efa import advise_factor_count, audit_scales, diagnose
from .efa.diagnosis import DiagnosisThresholds, label_factors
from .efa.solution import EfaConfig, run_efa
from .errors import ComputationError, MetrologyError, ValidationError
from .reliability import (
    RatingTable,
    composite_reliability,
    cronbach_alpha,
    krippendorff_alpha,
    percent_agreement,
)
from .truescore import ErrorModel, histogram_table, simulate_observations


def _resolve(path: str) -> str:
    """Resolve relative paths against METROLOGY_WORKDIR when it is set."""
    workdir = os.environ.get("METROLOGY_WORKDIR")
    if workdir and not os.path.isabs(path):
        return os.path.join(workdir, path)
    return path


def _load(path: str, delimiter: str = ",", strict: bool = False):
    with open(_resolve(path), "r", encoding="utf-8", newline="") as handle:
        return load_dataset(handle, ParseOptions(delimiter=delimiter, strict=strict))


def _load_expected(ds, path: str | None) -> dict:
    if path is None:
        return {str(c): c.construct for c in ds.columns}
    with open(_resolve(path), "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    return {str(k): str(v) for k, v in doc.get("expected", doc).items()}


def _emit(as_json: bool, payload: dict, text: str):
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(text)


def _report_payload(report) -> dict:
    return {
        "coefficient": report.coefficient,
        "value": report.value,
        "band": report.band,
        "n": report.n,
        "items": list(report.items),
        "details": report.details,
    }


def _solution_payload(solution) -> dict:
    return {
        "loadings": solution.pattern.tolist(),
        "factor_correlations": solution.factor_correlations.tolist(),
        "communalities": solution.communalities.tolist(),
        "eigenvalues": list(solution.eigenvalues),
        "variance_explained": solution.variance_explained,
        "assignment": solution.assignment,
        "rotation": solution.rotation,
        "heywood": solution.heywood,
        "suppressed_threshold": solution.suppressed_threshold,
        "metrics": [str(c) for c in solution.labels],
        "digest": solution.digest(),
    }


@click.group()
def cli():
    """Measurement workbench for multi-tool software metrics."""


@cli.command()
@click.option("--items", type=click.Path(), help="entities x items CSV")
@click.option("--ratings", type=click.Path(), help="units x raters CSV")
@click.option("--metrics", help="comma-separated metric names to select")
@click.option("--coefficient", default="alpha",
              type=click.Choice(["alpha", "percent_agreement", "krippendorff_alpha",
                                 "composite_reliability", "omega_total"]))
@click.option("--level", default="nominal",
              type=click.Choice(["nominal", "ordinal", "interval", "ratio"]))
@click.option("--loadings", help="comma-separated loadings (composite/omega)")
@click.option("--uniquenesses", help="comma-separated uniquenesses (composite/omega)")
@click.option("--json", "as_json", is_flag=True)
def reliability(items, ratings, metrics, coefficient, level, loadings, uniquenesses, as_json):
    """Compute a reliability or agreement coefficient."""
    if coefficient == "alpha":
        if not items:
            raise ValidationError("alpha needs --items")
        ds = _load(items)
        if metrics:
            ds = ds.select([m.strip() for m in metrics.split(",")])
        report = cronbach_alpha(ds.values, [str(c) for c in ds.columns])
    elif coefficient in ("percent_agreement", "krippendorff_alpha"):
        if not ratings:
            raise ValidationError(f"{coefficient} needs --ratings")
        with open(_resolve(ratings), "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        if len(rows) < 2:
            raise ValidationError("ratings file needs a header and data rows")
        raters = tuple(rows[0][1:])
        table = np.array(
            [[float(c) if c.strip() else np.nan for c in row[1:]] for row in rows[1:]],
            dtype=float,
        )
        rating_table = RatingTable(table, level=level, raters=raters)
        report = (percent_agreement(rating_table) if coefficient == "percent_agreement"
                  else krippendorff_alpha(rating_table))
    else:
        if not loadings or not uniquenesses:
            raise ValidationError(f"{coefficient} needs --loadings and --uniquenesses")
        report = composite_reliability(
            [float(v) for v in loadings.split(",")],
            [float(v) for v in uniquenesses.split(",")],
            coefficient=coefficient,
        )
    _emit(as_json, _report_payload(report), render.render_reliability(report))


@cli.command()
@click.argument("data", type=click.Path())
@click.option("--delimiter", default=",")
@click.option("--json", "as_json", is_flag=True)
def adequacy(data, delimiter, as_json):
    """KMO, Bartlett's sphericity test, and multicollinearity screening."""
    ds = _load(data, delimiter)
    cm = correlation_matrix(ds)
    report = run_adequacy(cm, cm.n_used)
    advice = advise_factor_count(ds)
    payload = {
        "kmo_overall": report.kmo_overall,
        "kmo_per_variable": report.kmo_per_variable,
        "bartlett_chi2": report.bartlett_chi2,
        "bartlett_df": report.bartlett_df,
        "bartlett_p": report.bartlett_p,
        "obs_per_variable": report.obs_per_variable,
        "passes": report.passes,
        "multicollinear_pairs": report.multicollinear_pairs,
        "advice": {
            "eigenvalues": list(advice.eigenvalues),
            "parallel_suggested": advice.parallel_suggested,
            "kaiser_suggested": advice.kaiser_suggested,
            "scree_elbow_candidates": list(advice.scree_elbow_candidates),
        },
    }
    text = render.render_adequacy(report) + (
        f"\nparallel analysis suggests {advice.parallel_suggested}; "
        f"Kaiser suggests {advice.kaiser_suggested}; "
        f"scree candidates {list(advice.scree_elbow_candidates)}"
    )
    _emit(as_json, payload, text)


@cli.command()
@click.argument("data", type=click.Path())
@click.option("--k", required=True, type=int, help="number of factors")
@click.option("--expected", type=click.Path(),
              help="JSON metric->construct map (defaults to name prefixes)")
@click.option("--rotation", default="oblimin",
              type=click.Choice(["oblimin", "varimax", "none"]))
@click.option("--force", is_flag=True, help="run even if adequacy fails")
@click.option("--delimiter", default=",")
@click.option("--json", "as_json", is_flag=True)
def efa(data, k, expected, rotation, force, delimiter, as_json):
    """One exploratory factor analysis pass; prints the loadings table."""
    ds = _load(data, delimiter)
    expected_map = _load_expected(ds, expected)
    config = EfaConfig(rotation=rotation, adequacy_override=force)
    solution = run_efa(ds, k, config)
    problems = diagnose(solution, expected_map)
    names = label_factors(solution, expected_map)
    factor_names = [names.get(j, f"F{j + 1}") for j in range(solution.k)]
    payload = _solution_payload(solution)
    payload["factor_names"] = factor_names
    payload["problems"] = [
        {"kind": p.kind, "metric": p.metric, "severity": p.severity,
         "evidence": p.evidence, "retain_for_now": p.retain_for_now}
        for p in problems
    ]
    text = (
        render.render_loadings_table(solution, factor_names)
        + "\n\nfactor correlations:\n"
        + render.render_factor_correlations(solution, factor_names)
        + "\n\nproblems:\n"
        + render.render_problems(problems)
    )
    _emit(as_json, payload, text)


@cli.command()
@click.argument("data", type=click.Path())
@click.option("--k", required=True, type=int)
@click.option("--expected", type=click.Path())
@click.option("--auto", is_flag=True, help="run the scripted advisor")
@click.option("--max-steps", default=20, type=int)
@click.option("--save", type=click.Path(), help="write the session JSON here")
@click.option("--delimiter", default=",")
@click.option("--json", "as_json", is_flag=True)
def refine(data, k, expected, auto, max_steps, save, delimiter, as_json):
    """Start a refinement session; with --auto, drop problems until clean."""
    ds = _load(data, delimiter)
    expected_map = _load_expected(ds, expected)
    state = sessions.new_session(ds, expected_map, k)
    if auto:
        state = sessions.auto_refine(state, max_steps=max_steps)
    if save:
        with open(_resolve(save), "w", encoding="utf-8") as handle:
            handle.write(sessions.session_to_json(state))
    report = state.stop_report()
    payload = {
        "id": state.id,
        "dropped": list(state.dropped),
        "clean": report.clean,
        "variance_explained": report.variance_explained,
        "steps": [
            {"action": step.action, "rationale": step.rationale,
             "digest": step.solution_digest, "warnings": list(step.warnings)}
            for step in state.history
        ],
        "solution": _solution_payload(state.current),
    }
    lines = [
        f"step {i + 1}: {step.action}  {step.rationale}"
        + ("".join(f"\n  warning: {w}" for w in step.warnings))
        for i, step in enumerate(state.history)
    ]
    names = label_factors(state.current, expected_map)
    factor_names = [names.get(j, f"F{j + 1}") for j in range(state.current.k)]
    text = "\n".join(lines) if lines else "no steps taken"
    text += (
        f"\nclean: {report.clean}  variance explained: "
        f"{report.variance_explained:.2f}\n\n"
        + render.render_loadings_table(state.current, factor_names)
    )
    _emit(as_json, payload, text)


@cli.command()
@click.argument("data", type=click.Path())
@click.option("--structure", required=True, type=click.Path(),
              help="JSON confirmatory structure (or a session export)")
@click.option("--out", type=click.Path(), help="write the measurement model here")
@click.option("--delimiter", default=",")
@click.option("--json", "as_json", is_flag=True)
def cfa(data, structure, out, delimiter, as_json):
    """Confirmatory factor analysis; exports the measurement model."""
    ds = _load(data, delimiter)
    with open(_resolve(structure), "r", encoding="utf-8") as handle:
        spec = ConfirmatorySpec.from_document(json.load(handle))
    model = cfa_fit(ds, spec)
    document = export_formulas(model)
    if out:
        with open(_resolve(out), "w", encoding="utf-8") as handle:
            json.dump(document, handle)
    lines = [f"discrepancy: {model.discrepancy:.6g}  converged: {model.converged}"]
    for warning in spec.warnings():
        lines.append(f"warning: {warning}")
    for j, factor in enumerate(model.factor_names):
        lines.append(f"{factor}:")
        for metric in model.structure[factor]:
            i = model.metric_names.index(metric)
            flag = "  [Heywood]" if model.heywood_flags[i] else ""
            lines.append(
                f"  {metric}: loading {model.loadings[i, j]:.3f} "
                f"(std {model.standardized_loadings[i, j]:.3f}), "
                f"uniqueness {model.standardized_uniquenesses[i]:.3f}{flag}"
            )
    _emit(as_json, document, "\n".join(lines))


@cli.command()
@click.option("--t", "true_score", required=True, type=float, help="true score")
@click.option("--es", "systematic", default=0.0, type=float, help="systematic offset")
@click.option("--sd", "random_sd", default=0.0, type=float, help="random error sd")
@click.option("--n", default=1000, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--bins", default=30, type=int)
@click.option("--out", type=click.Path(), help="write the samples to this CSV")
@click.option("--json", "as_json", is_flag=True)
def simulate(true_score, systematic, random_sd, n, seed, bins, out, as_json):
    """Simulate noisy observations of a true score."""
    model = ErrorModel(true_score=true_score, random_sd=random_sd,
                       systematic_offset=systematic, seed=seed)
    samples = simulate_observations(model, n)
    if out:
        with open(_resolve(out), "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["observation"])
            for value in samples:
                writer.writerow([repr(float(value))])
    table = histogram_table(samples, bins=bins)
    payload = {
        "n": n,
        "mean": float(samples.mean()),
        "sd": float(samples.std(ddof=1)) if n > 1 else 0.0,
        "histogram": table,
    }
    lines = [f"mean: {payload['mean']:.4f}  sd: {payload['sd']:.4f}  n: {n}",
             "value,count"]
    lines += [f"{value:.6g},{count}" for value, count in table]
    _emit(as_json, payload, "\n".join(lines))


@cli.command()
@click.argument("data", type=click.Path())
@click.option("--expected", type=click.Path())
@click.option("--delimiter", default=",")
@click.option("--json", "as_json", is_flag=True)
def audit(data, expected, delimiter, as_json):
    """Convergent/discriminant audit of intra vs inter construct correlations."""
    ds = _load(data, delimiter)
    expected_map = _load_expected(ds, expected)
    cm = correlation_matrix(ds)
    result = audit_scales(cm, expected_map)
    payload = {
        "min_intra": result.min_intra,
        "max_inter": result.max_inter,
        "passes": result.passes,
        "offending_pairs": result.offending_pairs,
    }
    lines = [
        f"smallest intra-construct |r|: {result.min_intra:.3f}",
        f"largest inter-construct |r|: {result.max_inter:.3f}",
        f"passes: {result.passes}",
    ]
    lines += [f"offending: {a} ~ {b} (r={r:.3f})" for a, b, r in result.offending_pairs]
    _emit(as_json, payload, "\n".join(lines))


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8765, type=int)
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="directory with the built workbench UI")
def serve(host, port, ui_dir):
    """Start the local JSON-over-HTTP service."""
    from .service import serve as run_service

    if ui_dir is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        ui_dir = candidate if os.path.isdir(candidate) else None
    click.echo(f"serving on http://{host}:{port}")
    run_service(host=host, port=port, ui_dir=ui_dir)


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    args = list(sys.argv[1:] if argv is None else argv)
    if not args:
        with click.Context(cli) as ctx:
            click.echo(cli.get_help(ctx), err=True)
        return 1
    try:
        cli.main(args=args, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(exc.format_message(), err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_help(), err=True)
        else:
            with click.Context(cli) as ctx:
                click.echo(cli.get_help(ctx), err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ComputationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except MetrologyError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
