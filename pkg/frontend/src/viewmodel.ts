/** Pure view-model layer: session payload in, renderable structures out.
 *
 * No statistical computation happens here. Every number in the view is an
 * API field (or a formatting of one); the only comparison performed is the
 * suppression rule the service publishes the threshold for. Rendering the
 * same payload twice yields identical view models.
 */

import type { ProblemPayload, SessionPayload } from "./types.js";

export interface GridCell {
  factor: string;
  value: number;
  display: string;
  suppressed: boolean;
}

export interface Badge {
  rank: number;
  kind: ProblemPayload["kind"];
  severity: number;
  severityDisplay: string;
  retained: boolean;
  summary: string;
}

export interface GridRow {
  metric: string;
  expected: string;
  cells: GridCell[];
  h2: number;
  h2Display: string;
  badges: Badge[];
}

export interface HistoryEntry {
  index: number;
  label: string;
  struck: boolean;
  rationale: string;
  warnings: string[];
  digest: string;
}

export interface AdviceSeries {
  ranks: number[];
  eigenvalues: number[];
  thresholds: number[];
  kaiser: number;
  parallel: number;
  elbows: number[];
}

export interface SolutionView {
  sessionId: string;
  digest: string;
  factorNames: string[];
  rows: GridRow[];
  problems: Badge[];
  varianceGauge: { value: number; display: string; ok: boolean };
  stopSummary: string;
  clean: boolean;
  history: HistoryEntry[];
  advice: AdviceSeries;
  suppressThreshold: number;
  rotation: string;
  heywood: boolean;
}

function fixed(value: number, places = 2): string {
  return value.toFixed(places);
}

function problemSummary(problem: ProblemPayload): string {
  const tail = problem.retain_for_now ? " (retain for now)" : "";
  return `${problem.kind.replace(/_/g, " ")} on ${problem.metric}${tail}`;
}

function actionLabel(action: HistoryActionLike): string {
  switch (action.type) {
    case "drop":
      return `drop ${action.metric ?? ""}`.trim();
    case "set_k":
      return `set factor count to ${action.k ?? "?"}`;
    case "set_threshold":
      return `set ${action.name ?? "?"} threshold to ${action.value ?? "?"}`;
    default:
      return action.type;
  }
}

interface HistoryActionLike {
  type: string;
  metric?: string;
  k?: number;
  name?: string;
  value?: number;
}

/** Build the complete view model for one session payload. */
export function renderSession(session: SessionPayload): SolutionView {
  const threshold = session.solution.suppressed_threshold;

  const badges: Badge[] = session.problems.map((problem, index) => ({
    rank: index + 1,
    kind: problem.kind,
    severity: problem.severity,
    severityDisplay: fixed(problem.severity),
    retained: problem.retain_for_now,
    summary: problemSummary(problem),
  }));
  const badgesByMetric = new Map<string, Badge[]>();
  session.problems.forEach((problem, index) => {
    const list = badgesByMetric.get(problem.metric) ?? [];
    const badge = badges[index];
    if (badge !== undefined) list.push(badge);
    badgesByMetric.set(problem.metric, list);
  });

  const rows: GridRow[] = session.metrics.map((metric, i) => {
    const loadings = session.solution.loadings[i] ?? [];
    const cells: GridCell[] = session.factor_names.map((factor, j) => {
      const value = loadings[j] ?? 0;
      const suppressed = Math.abs(value) < threshold;
      return { factor, value, display: fixed(value), suppressed };
    });
    const h2 = session.solution.communalities[i] ?? 0;
    return {
      metric,
      expected: session.expected[metric] ?? "",
      cells,
      h2,
      h2Display: fixed(h2),
      badges: badgesByMetric.get(metric) ?? [],
    };
  });

  const history: HistoryEntry[] = session.history.map((step, index) => ({
    index: index + 1,
    label: actionLabel(step.action),
    struck: step.action.type === "drop",
    rationale: step.rationale,
    warnings: step.warnings,
    digest: step.digest,
  }));

  const advice: AdviceSeries = {
    ranks: session.advice.eigenvalues.map((_, i) => i + 1),
    eigenvalues: session.advice.eigenvalues,
    thresholds: session.advice.parallel_thresholds,
    kaiser: session.advice.kaiser_suggested,
    parallel: session.advice.parallel_suggested,
    elbows: session.advice.scree_elbow_candidates,
  };

  const variance = session.stop.variance_explained;
  const stopParts = [
    session.stop.clean ? "clean" : "not clean",
    `${session.stop.active_problems} active problem(s)`,
    `${session.stop.retained_problems} retained`,
    session.stop.variance_ok ? "variance ok" : "variance below target",
    session.stop.factor_sizes_ok ? "factor sizes ok" : "a factor has too few metrics",
  ];

  return {
    sessionId: session.id,
    digest: session.solution.digest,
    factorNames: session.factor_names,
    rows,
    problems: badges,
    varianceGauge: {
      value: variance,
      display: `${fixed(variance * 100, 0)}%`,
      ok: session.stop.variance_ok,
    },
    stopSummary: stopParts.join(" · "),
    clean: session.stop.clean,
    history,
    advice,
    suppressThreshold: threshold,
    rotation: session.solution.rotation,
    heywood: session.solution.heywood,
  };
}
