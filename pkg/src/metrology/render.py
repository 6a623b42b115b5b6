"""Plain-text tables for solutions and reports, in the style analysts expect:
two decimals, suppressed loadings blanked, communality column on the right."""

from __future__ import annotations

from .efa.solution import FactorSolution


def render_loadings_table(solution: FactorSolution, factor_names=None) -> str:
    """Loadings table with |loading| below the threshold left blank."""
    names = list(factor_names) if factor_names else [f"F{j + 1}" for j in range(solution.k)]
    headers = ["metric"] + names + ["h2"]
    suppressed = solution.suppressed()
    h2 = solution.communalities
    rows = []
    for i, metric in enumerate(solution.labels):
        cells = [str(metric)]
        for j in range(solution.k):
            cells.append("" if suppressed[i, j] else f"{solution.pattern[i, j]:.2f}")
        cells.append(f"{h2[i]:.2f}")
        rows.append(cells)
    footer = (
        f"variance explained: {solution.variance_explained:.2f}   "
        f"rotation: {solution.rotation}"
        + ("   (Heywood case capped)" if solution.heywood else "")
    )
    return _tabulate(headers, rows) + "\n" + footer


def render_factor_correlations(solution: FactorSolution, factor_names=None) -> str:
    names = list(factor_names) if factor_names else [f"F{j + 1}" for j in range(solution.k)]
    headers = [""] + names
    rows = []
    for j, name in enumerate(names):
        rows.append([name] + [f"{solution.factor_correlations[j, l]:.2f}"
                              for l in range(solution.k)])
    return _tabulate(headers, rows)


def render_reliability(report) -> str:
    rows = [
        ["coefficient", report.coefficient],
        ["value", f"{report.value:.4f}"],
        ["band", report.band],
        ["n", str(report.n)],
        ["items", ", ".join(str(i) for i in report.items)],
    ]
    for key, value in report.details.items():
        if key == "drop_one":
            for item, alpha in value.items():
                rows.append([f"alpha without {item}", f"{alpha:.4f}"])
        elif isinstance(value, float):
            rows.append([key, f"{value:.4f}"])
        else:
            rows.append([key, str(value)])
    return _tabulate(["field", "value"], rows)


def render_adequacy(report) -> str:
    rows = [
        ["KMO overall", f"{report.kmo_overall:.4f}"],
        ["Bartlett chi2", f"{report.bartlett_chi2:.2f}"],
        ["Bartlett df", str(report.bartlett_df)],
        ["Bartlett p", f"{report.bartlett_p:.3g}"],
        ["observations per metric", f"{report.obs_per_variable:.1f}"],
        ["adequate", "yes" if report.passes else "no"],
    ]
    for metric, value in report.kmo_per_variable.items():
        rows.append([f"KMO {metric}", f"{value:.4f}"])
    if report.sample_size_warning:
        rows.append(["warning", "fewer than ten observations per metric"])
    for a, b, r in report.multicollinear_pairs:
        rows.append(["multicollinear", f"{a} ~ {b} (r={r:.3f})"])
    return _tabulate(["field", "value"], rows)


def render_problems(problems) -> str:
    if not problems:
        return "no problems found"
    headers = ["rank", "metric", "kind", "severity", "note"]
    rows = []
    for rank, problem in enumerate(problems, start=1):
        note = ", ".join(f"{k}={_short(v)}" for k, v in problem.evidence.items())
        if problem.retain_for_now:
            note += "  [retain for now]"
        rows.append([str(rank), problem.metric, problem.kind,
                     f"{problem.severity:.2f}", note])
    return _tabulate(headers, rows)


def _short(value) -> str:
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def _tabulate(headers, rows) -> str:
    table = [list(headers)] + [list(r) for r in rows]
    widths = [max(len(row[c]) for row in table) for c in range(len(headers))]
    lines = []
    for index, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if index == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
