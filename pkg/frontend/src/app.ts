/** DOM wiring for the workbench: one session at a time, all state from the
 * service. Actions are posted and the session re-fetched; nothing is
 * mutated locally, so the grid always shows what the core computed.
 */

import { ApiError, createSession, exportSpec, getSession, postAction, uploadDataset } from "./api.js";
import type { SessionAction } from "./api.js";
import { renderSession } from "./viewmodel.js";
import type { SolutionView } from "./viewmodel.js";
import { validateSession } from "./types.js";

interface AppState {
  datasetId: string | null;
  sessionId: string | null;
  pendingAction: { action: SessionAction; rationale: string } | null;
}

const state: AppState = { datasetId: null, sessionId: null, pendingAction: null };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function toast(message: string) {
  const node = el<HTMLDivElement>("toast");
  node.textContent = message;
  node.classList.add("visible");
  setTimeout(() => node.classList.remove("visible"), 5000);
}

function banner(message: string | null, retry = false) {
  const node = el<HTMLDivElement>("banner");
  node.innerHTML = "";
  if (message === null) {
    node.classList.remove("visible");
    return;
  }
  node.classList.add("visible");
  node.append(message);
  if (retry) {
    const button = document.createElement("button");
    button.textContent = "refresh and retry";
    button.addEventListener("click", () => {
      banner(null);
      void retryPending();
    });
    node.append(" ", button);
  }
}

async function refresh(): Promise<void> {
  if (!state.sessionId) return;
  const payload = await getSession(state.sessionId);
  const checked = validateSession(payload);
  if (!checked.ok) {
    banner(checked.message);
    return;
  }
  draw(renderSession(checked.session));
}

async function dispatch(action: SessionAction, rationale = ""): Promise<void> {
  if (!state.sessionId) return;
  state.pendingAction = { action, rationale };
  try {
    await postAction(state.sessionId, action, rationale);
    state.pendingAction = null;
    await refresh();
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      banner(`another mutation is in flight: ${error.message}`, true);
    } else if (error instanceof ApiError && error.status === 0) {
      toast(error.message);
    } else if (error instanceof ApiError) {
      toast(`${error.code}: ${error.message}`);
      state.pendingAction = null;
      await refresh();
    } else {
      toast(String(error));
    }
  }
}

async function retryPending(): Promise<void> {
  const pending = state.pendingAction;
  state.pendingAction = null;
  await refresh();
  if (pending) await dispatch(pending.action, pending.rationale);
}

function adviceSvg(view: SolutionView): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  const width = 420;
  const height = 160;
  const pad = 24;
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.classList.add("scree");
  const n = view.advice.eigenvalues.length;
  if (n === 0) return svg;
  const top = Math.max(...view.advice.eigenvalues, ...view.advice.thresholds, 1);
  const x = (i: number) => pad + (i * (width - 2 * pad)) / Math.max(n - 1, 1);
  const y = (v: number) => height - pad - (v / top) * (height - 2 * pad);

  const line = (values: number[], cls: string) => {
    const path = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    path.setAttribute("points", values.map((v, i) => `${x(i)},${y(v)}`).join(" "));
    path.classList.add(cls);
    svg.append(path);
  };
  line(view.advice.eigenvalues, "eigen");
  if (view.advice.thresholds.length === n) line(view.advice.thresholds, "random");

  view.advice.elbows.forEach((count) => {
    const marker = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    const index = count - 1;
    if (index < 0 || index >= n) return;
    marker.setAttribute("cx", String(x(index)));
    marker.setAttribute("cy", String(y(view.advice.eigenvalues[index] ?? 0)));
    marker.setAttribute("r", "4");
    marker.classList.add("elbow");
    const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = `scree elbow candidate (advisory): keep ${count}`;
    marker.append(title);
    svg.append(marker);
  });
  return svg;
}

function draw(view: SolutionView): void {
  banner(null);
  el<HTMLDivElement>("session-meta").textContent =
    `session ${view.sessionId} · rotation ${view.rotation}` +
    (view.heywood ? " · Heywood case capped" : "");

  const gauge = el<HTMLDivElement>("variance-gauge");
  gauge.textContent = `variance explained: ${view.varianceGauge.display}`;
  gauge.classList.toggle("ok", view.varianceGauge.ok);
  el<HTMLDivElement>("stop-summary").textContent = view.stopSummary;

  const table = el<HTMLTableElement>("grid");
  table.innerHTML = "";
  const head = table.createTHead().insertRow();
  ["metric", ...view.factorNames, "h2", "problems", ""].forEach((label) => {
    const cell = document.createElement("th");
    cell.textContent = label;
    head.append(cell);
  });
  const body = table.createTBody();
  view.rows.forEach((row) => {
    const tr = body.insertRow();
    tr.dataset.metric = row.metric;
    const name = tr.insertCell();
    name.textContent = row.metric;
    name.title = `expected construct: ${row.expected}`;
    row.cells.forEach((cell) => {
      const td = tr.insertCell();
      td.textContent = cell.suppressed ? "" : cell.display;
      td.classList.toggle("suppressed", cell.suppressed);
      if (!cell.suppressed) {
        td.style.background = `rgba(31, 119, 180, ${Math.min(Math.abs(cell.value), 1) * 0.35})`;
      }
      td.title = `${cell.factor}: ${cell.display}`;
    });
    const h2 = tr.insertCell();
    h2.textContent = row.h2Display;
    const badges = tr.insertCell();
    row.badges.forEach((badge) => {
      const span = document.createElement("span");
      span.className = `badge ${badge.kind}` + (badge.retained ? " retained" : "");
      span.textContent = `#${badge.rank} ${badge.kind.replace(/_/g, " ")} (${badge.severityDisplay})`;
      span.title = badge.summary;
      badges.append(span);
    });
    const actions = tr.insertCell();
    const drop = document.createElement("button");
    drop.textContent = "drop";
    drop.addEventListener("click", () => {
      const rationale = el<HTMLInputElement>("rationale").value;
      void dispatch({ type: "drop", metric: row.metric }, rationale);
      el<HTMLInputElement>("rationale").value = "";
    });
    actions.append(drop);
  });

  const problems = el<HTMLOListElement>("problems");
  problems.innerHTML = "";
  view.problems.forEach((badge) => {
    const item = document.createElement("li");
    item.className = badge.retained ? "retained" : "";
    item.textContent = `${badge.summary} · severity ${badge.severityDisplay}`;
    problems.append(item);
  });

  const history = el<HTMLOListElement>("history");
  history.innerHTML = "";
  const initial = document.createElement("li");
  initial.textContent = "initial solution";
  history.append(initial);
  view.history.forEach((entry) => {
    const item = document.createElement("li");
    const label = document.createElement("span");
    label.textContent = entry.label;
    if (entry.struck) label.classList.add("struck");
    item.append(label);
    if (entry.rationale) item.append(` — ${entry.rationale}`);
    entry.warnings.forEach((warning) => {
      const note = document.createElement("div");
      note.className = "warning";
      note.textContent = warning;
      item.append(note);
    });
    history.append(item);
  });

  const advice = el<HTMLDivElement>("advice");
  advice.innerHTML = "";
  advice.append(adviceSvg(view));
  const summary = document.createElement("div");
  summary.textContent =
    `parallel analysis suggests ${view.advice.parallel} · ` +
    `Kaiser suggests ${view.advice.kaiser} · ` +
    `scree candidates (advisory): ${view.advice.elbows.join(", ") || "none"}`;
  advice.append(summary);

  el<HTMLDivElement>("workbench").classList.add("visible");
}

async function onCreateSession(): Promise<void> {
  const csv = el<HTMLTextAreaElement>("csv").value;
  const k = Number(el<HTMLInputElement>("k").value);
  if (!csv.trim()) {
    toast("paste a CSV first");
    return;
  }
  try {
    const summary = await uploadDataset(csv, "workbench upload");
    state.datasetId = summary.dataset_id;
    const payload = await createSession(summary.dataset_id, k);
    const checked = validateSession(payload);
    if (!checked.ok) {
      banner(checked.message);
      return;
    }
    state.sessionId = checked.session.id;
    draw(renderSession(checked.session));
  } catch (error) {
    if (error instanceof ApiError) toast(`${error.code}: ${error.message}`);
    else toast(String(error));
  }
}

async function onExport(): Promise<void> {
  if (!state.sessionId) return;
  try {
    const document_ = await exportSpec(state.sessionId);
    const blob = new Blob([JSON.stringify(document_, null, 2)], {
      type: "application/json",
    });
    const url = URL.createObjectURL(blob);
    const link = document.createElement("a");
    link.href = url;
    link.download = `cfa-spec-${state.sessionId}.json`;
    link.click();
    URL.revokeObjectURL(url);
  } catch (error) {
    if (error instanceof ApiError) toast(`${error.code}: ${error.message}`);
    else toast(String(error));
  }
}

export function main(): void {
  el<HTMLButtonElement>("create").addEventListener("click", () => void onCreateSession());
  el<HTMLButtonElement>("undo").addEventListener("click", () => void dispatch({ type: "undo" }));
  el<HTMLButtonElement>("auto").addEventListener("click", () => void dispatch({ type: "auto_refine" }));
  el<HTMLButtonElement>("export").addEventListener("click", () => void onExport());
  el<HTMLButtonElement>("set-k").addEventListener("click", () => {
    const k = Number(el<HTMLInputElement>("new-k").value);
    if (Number.isInteger(k) && k >= 1) void dispatch({ type: "set_k", k });
  });
  el<HTMLButtonElement>("set-threshold").addEventListener("click", () => {
    const name = el<HTMLSelectElement>("threshold-name").value;
    const value = Number(el<HTMLInputElement>("threshold-value").value);
    if (Number.isFinite(value)) void dispatch({ type: "set_threshold", name, value });
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  main();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", main);
}
