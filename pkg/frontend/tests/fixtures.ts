import type { SessionPayload } from "../src/types.js";

/** Hand-rolled session payload with a loading sitting exactly on the
 * suppression threshold and one just below it. */
export function sessionFixture(overrides: Partial<SessionPayload> = {}): SessionPayload {
  const base: SessionPayload = {
    schema_version: 1,
    id: "sess-1",
    k: 2,
    factor_names: ["Cohesion", "Size"],
    metrics: ["Cohesion.LCOM", "Cohesion.TCC", "Size.LOC", "Size.NOM"],
    dropped: [],
    expected: {
      "Cohesion.LCOM": "Cohesion",
      "Cohesion.TCC": "Cohesion",
      "Size.LOC": "Size",
      "Size.NOM": "Size",
    },
    thresholds: { communality: 0.5, cross_loading: 0.3, wrong_factor: 0.5, suppress: 0.3 },
    solution: {
      loadings: [
        [0.92, 0.05],
        [0.81, 0.3],      // exactly at the threshold: shown
        [0.29999, 0.88],  // just below: suppressed
        [-0.3, 0.7],      // negative at threshold: shown
      ],
      factor_correlations: [
        [1, 0.2],
        [0.2, 1],
      ],
      communalities: [0.85, 0.7, 0.81, 0.55],
      eigenvalues: [2.1, 1.4, 0.3, 0.2],
      variance_explained: 0.7275,
      assignment: { "Cohesion.LCOM": 0, "Cohesion.TCC": 0, "Size.LOC": 1, "Size.NOM": 1 },
      rotation: "oblimin(0)",
      heywood: false,
      suppressed_threshold: 0.3,
      digest: "abc123",
    },
    problems: [
      {
        kind: "low_communality",
        metric: "Size.NOM",
        severity: 3.05,
        evidence: { h2: 0.45 },
        retain_for_now: false,
      },
      {
        kind: "cross_loading",
        metric: "Cohesion.TCC",
        severity: 1.49,
        evidence: { primary_loading: 0.81, secondary_loading: 0.3 },
        retain_for_now: true,
      },
    ],
    stop: {
      clean: false,
      active_problems: 1,
      retained_problems: 1,
      variance_explained: 0.7275,
      variance_ok: true,
      factor_sizes: { "0": 2, "1": 2 },
      factor_sizes_ok: false,
    },
    history: [
      {
        action: { type: "drop", metric: "Size.Junk" },
        rationale: "pure noise",
        digest: "d1",
        warnings: [],
        problem_count: 2,
      },
      {
        action: { type: "set_k", k: 2 },
        rationale: "",
        digest: "d2",
        warnings: ["example warning"],
        problem_count: 2,
      },
    ],
    advice: {
      eigenvalues: [2.1, 1.4, 0.3, 0.2],
      parallel_suggested: 2,
      parallel_thresholds: [1.2, 1.1, 1.0, 0.9],
      kaiser_suggested: 2,
      scree_elbow_candidates: [2],
    },
  };
  return { ...base, ...overrides };
}
