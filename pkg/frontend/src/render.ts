import type {
  ClassInfo, ExampleRecord, ExplanationBundle, Importance,
} from "./types.js";
import { MAX_COUNT, UiState, currentBundle } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;").replace(/'/g, "&#39;");
}

function fmt(value: number): string {
  return Number.isInteger(value) ? String(value) : String(Math.round(value * 10000) / 10000);
}

export function renderForm(state: UiState): string {
  const disabled = state.apiError !== null && state.history.length === 0;
  const options = state.classes.map((c: ClassInfo) =>
    `<option value="${c.index}"${c.index === state.hypothesis ? " selected" : ""}>` +
    `${escapeHtml(c.name)}</option>`).join("");
  return `
  <form id="request-form"${disabled ? " class=\"disabled\"" : ""}>
    <label>ID of data record (patient) under examination
      <input id="record-id" type="text" value="${escapeHtml(state.recordId)}"
             ${disabled ? "disabled" : ""}/>
    </label>
    <label>Select your hypothesis (class)
      <select id="hypothesis" ${disabled ? "disabled" : ""}>${options}</select>
    </label>
    <label>Counterexamples per alternate class (0-${MAX_COUNT})
      <input id="cf-count" type="number" min="0" max="${MAX_COUNT}"
             value="${state.cfCount}" ${disabled ? "disabled" : ""}/>
    </label>
    <label>Similar cases (0-${MAX_COUNT})
      <input id="sc-count" type="number" min="0" max="${MAX_COUNT}"
             value="${state.similarCount}" ${disabled ? "disabled" : ""}/>
    </label>
    <label class="checkbox">
      <input id="importance" type="checkbox"
             ${state.includeImportance ? "checked" : ""} ${disabled ? "disabled" : ""}/>
      Compute and display feature importance
    </label>
    <button id="proceed" type="submit"
            ${disabled || state.inFlight !== null ? "disabled" : ""}>Proceed</button>
    ${state.clampNotice ? `<p class="notice" id="clamp-notice">${escapeHtml(state.clampNotice)}</p>` : ""}
    ${state.validationError ? `<p class="error" id="validation-error">${escapeHtml(state.validationError)}</p>` : ""}
  </form>`;
}

function exampleTable(bundle: ExplanationBundle, examples: ExampleRecord[],
                      kind: string): string {
  const header = ["Feature", ...examples.map((_, i) => `${kind} ${i + 1}`)];
  const changedByExample = examples.map((ex) => {
    const changes = new Map(ex.changed_features.map((c) => [c.name, c]));
    return changes;
  });
  const rows = bundle.display_order.map((feature) => {
    const cells = examples.map((ex, i) => {
      const cell = ex.values.find((v) => v.name === feature);
      const change = changedByExample[i].get(feature);
      if (change) {
        return `<td class="changed" data-feature="${escapeHtml(feature)}" ` +
          `data-example="${i}">${fmt(change.old)} &rarr; ${fmt(change.new)}</td>`;
      }
      return `<td>${cell ? fmt(cell.value) : ""}</td>`;
    }).join("");
    return `<tr><th>${escapeHtml(feature)}</th>${cells}</tr>`;
  }).join("");
  const footer = `<tr class="meta"><th>sparsity / proximity</th>${examples.map((ex) =>
    `<td>${ex.sparsity} / ${ex.proximity.toFixed(4)}</td>`).join("")}</tr>`;
  return `<table><thead><tr>${header.map((h) => `<th>${escapeHtml(h)}</th>`).join("")}</tr></thead>` +
    `<tbody>${rows}${footer}</tbody></table>`;
}

function exhaustedNotice(requested: number, got: number, exhausted: boolean): string {
  if (!exhausted) return "";
  return `<p class="notice exhausted">fewer found than requested ` +
    `(${got} of ${requested})</p>`;
}

export function renderImportance(importance: Importance, showAll: boolean): string {
  const sorted = [...importance.weights].sort(
    (a, b) => Math.abs(b.weight) - Math.abs(a.weight));
  const shown = showAll ? sorted : sorted.slice(0, 10);
  const scale = Math.max(...sorted.map((w) => Math.abs(w.weight)), 1e-12);
  const bars = shown.map((w) => {
    const width = Math.max(1, Math.round((Math.abs(w.weight) / scale) * 100));
    const side = w.weight >= 0 ? "positive" : "negative";
    return `<div class="bar-row">
      <span class="bar-label">${escapeHtml(w.name)}</span>
      <span class="bar-value">${w.weight >= 0 ? "+" : ""}${w.weight.toFixed(4)}</span>
      <span class="bar ${side}" style="width:${width}px"></span>
    </div>`;
  }).join("");
  return `<section id="importance-section">
    <h2>Feature importance toward the hypothesis</h2>
    <p>surrogate r&sup2; = ${importance.surrogate_r2.toFixed(3)}${importance.degenerate ? " (degenerate fit)" : ""}</p>
    ${bars}
    <button id="importance-toggle" type="button">
      ${showAll ? "show top 10" : "show all 20"}</button>
  </section>`;
}

export function renderBundle(bundle: ExplanationBundle, showAllImportance: boolean): string {
  const recordRows = bundle.record_values.map((v) =>
    `<tr><th>${escapeHtml(v.name)}</th><td>${fmt(v.value)}</td></tr>`).join("");
  const similarSection = bundle.n_similar_cases === 0
    ? `<p class="notice">none requested</p>`
    : exampleTable(bundle, bundle.similar_cases, "case") +
      exhaustedNotice(bundle.n_similar_cases, bundle.similar_cases.length,
                      bundle.similar_cases_exhausted);

  const cfSections = Object.keys(bundle.counterexamples).sort().map((key) => {
    const examples = bundle.counterexamples[key];
    const body = bundle.n_counterexamples_per_class === 0
      ? `<p class="notice">none requested</p>`
      : exampleTable(bundle, examples, "counterexample") +
        exhaustedNotice(bundle.n_counterexamples_per_class, examples.length,
                        bundle.counterexamples_exhausted[key]);
    return `<section class="cf-section" id="cf-section-${key}" data-class="${key}">
      <h2>Counterexamples: ${escapeHtml(className(Number(key)))}</h2>
      ${body}
    </section>`;
  }).join("");

  return `<div id="bundle">
    <section id="record-section">
      <h2>Record ${escapeHtml(bundle.record_id)} &mdash; hypothesis:
        ${escapeHtml(bundle.hypothesis_name)}</h2>
      <table><tbody>${recordRows}</tbody></table>
    </section>
    <section id="similar-section">
      <h2>Similar cases</h2>
      ${similarSection}
    </section>
    ${cfSections}
    ${bundle.importance ? renderImportance(bundle.importance, showAllImportance) : ""}
  </div>`;
}

function className(index: number): string {
  const names = ["Negative", "Hyperthyroid", "Hypothyroid"];
  return names[index] ?? `class ${index}`;
}

export function renderPivotBar(state: UiState): string {
  const bundle = currentBundle(state);
  if (!bundle) return "";
  const buttons = state.classes.map((c) =>
    `<button type="button" class="pivot" data-class="${c.index}"
      ${state.inFlight !== null ? "disabled" : ""}>${escapeHtml(c.name)}</button>`).join("");
  const nav = `
    <button type="button" id="history-back" ${state.cursor > 0 ? "" : "disabled"}>&larr; previous</button>
    <button type="button" id="history-forward"
      ${state.cursor < state.history.length - 1 ? "" : "disabled"}>next &rarr;</button>`;
  const repeat = state.history[state.cursor]?.repeat
    ? `<span class="notice" id="repeat-flag">repeat of the previous hypothesis</span>` : "";
  return `<div id="pivot-bar">
    <span>Investigate Another Hypothesis:</span> ${buttons} ${nav} ${repeat}
  </div>`;
}

export function renderError(state: UiState): string {
  if (!state.apiError) return "";
  return `<div class="error banner" id="api-error">${escapeHtml(state.apiError)}</div>`;
}

export function renderApp(state: UiState): string {
  const bundle = currentBundle(state);
  return renderError(state) + renderForm(state) + renderPivotBar(state) +
    (bundle ? renderBundle(bundle, state.showAllImportance) : "");
}
