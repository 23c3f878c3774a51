/**
 * DOM rendering of a WorkbenchState. Pure: reads the state, rebuilds the
 * widget tree, attaches the given handlers. Every number shown comes out
 * of the state mirror (i.e. out of a server reply) unmodified except for
 * display formatting.
 */

import { Candidate } from "./api.js";
import { WorkbenchState } from "./state.js";

export interface Handlers {
  onSuggest: (strategies: string[]) => void;
  onApply: (candidateId: string) => void;
  onUndo: () => void;
  onTargetChange: (target: string) => void;
  onSnippet: (text: string, offset: number) => void;
}

const STRATEGIES = ["insert", "modify", "remove"];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pct(value: number): string {
  return `${(100 * value).toFixed(1)}%`;
}

function renderBanner(state: WorkbenchState): HTMLElement | null {
  if (state.offline) {
    const banner = el("div", "banner banner-offline",
      "service unreachable: interaction blocked until it answers again");
    return banner;
  }
  if (state.notice) {
    return el("div", "banner banner-notice", state.notice);
  }
  return null;
}

function renderHeatmapText(state: WorkbenchState): HTMLElement {
  const box = el("div", "doc-text");
  if (state.highlights.length === 0) {
    box.appendChild(el("span", "token", state.text));
    return box;
  }
  state.highlights.forEach((h, i) => {
    const span = el("span", "token", h.word);
    span.style.backgroundColor = `rgba(235, 110, 35, ${h.intensity.toFixed(3)})`;
    span.title = `score ${h.score}`;
    span.dataset.intensity = h.intensity.toFixed(3);
    box.appendChild(span);
    if (i < state.highlights.length - 1) box.appendChild(document.createTextNode(" "));
  });
  return box;
}

function renderConfidenceBars(state: WorkbenchState): HTMLElement {
  const box = el("div", "bars");
  const current = state.conf.indexOf(Math.max(...state.conf));
  // the target bar is pinned right under the current-class bar so the
  // what-if gain stays legible
  const order = state.classes
    .map((cls, i) => ({ cls, i }))
    .sort((a, b) => {
      const rank = (x: { cls: string; i: number }) =>
        x.i === current ? 0 : x.cls === state.target ? 1 : 2;
      return rank(a) - rank(b) || a.i - b.i;
    });
  for (const { cls, i } of order) {
    const row = el("div", "bar-row");
    const label = cls + (i === current ? " (current)" : cls === state.target ? " (target)" : "");
    row.appendChild(el("span", "bar-label", label));
    const track = el("div", "bar-track");
    const fill = el("div", "bar-fill" + (cls === state.target ? " bar-target" : ""));
    fill.style.width = pct(state.conf[i]);
    track.appendChild(fill);
    row.appendChild(track);
    const value = el("span", "bar-value", pct(state.conf[i]));
    value.dataset.cls = cls;
    value.dataset.conf = String(state.conf[i]);
    row.appendChild(value);
    box.appendChild(row);
  }
  return box;
}

function renderTargetSelector(state: WorkbenchState, handlers: Handlers): HTMLElement {
  const select = el("select", "target-select");
  for (const cls of state.classes) {
    const option = el("option", undefined, cls);
    option.value = cls;
    if (cls === state.target) option.selected = true;
    select.appendChild(option);
  }
  select.addEventListener("change", () => handlers.onTargetChange(select.value));
  const wrap = el("label", "target-wrap", "target class ");
  wrap.appendChild(select);
  return wrap;
}

function renderSuggestControls(handlers: Handlers): HTMLElement {
  const box = el("div", "suggest-controls");
  const checks: HTMLInputElement[] = [];
  for (const s of STRATEGIES) {
    const label = el("label", "strategy-check");
    const check = el("input") as HTMLInputElement;
    check.type = "checkbox";
    check.checked = true;
    check.value = s;
    checks.push(check);
    label.appendChild(check);
    label.appendChild(document.createTextNode(" " + s));
    box.appendChild(label);
  }
  const button = el("button", "suggest-button", "suggest");
  button.addEventListener("click", () =>
    handlers.onSuggest(checks.filter((c) => c.checked).map((c) => c.value)));
  box.appendChild(button);
  return box;
}

function renderSnippetForm(state: WorkbenchState, handlers: Handlers): HTMLElement {
  const form = el("div", "snippet-form");
  const text = el("input") as HTMLInputElement;
  text.type = "text";
  text.placeholder = "your own insertion text";
  text.className = "snippet-text";
  const offset = el("input") as HTMLInputElement;
  offset.type = "number";
  offset.min = "0";
  offset.max = String(state.text.length);
  offset.value = "0";
  offset.className = "snippet-offset";
  const button = el("button", "snippet-button", "score my snippet");
  button.addEventListener("click", () => {
    if (text.value) handlers.onSnippet(text.value, Number(offset.value));
  });
  form.appendChild(text);
  form.appendChild(offset);
  form.appendChild(button);
  return form;
}

function renderSuggestions(state: WorkbenchState, handlers: Handlers): HTMLElement {
  const box = el("div", "suggestions");
  const targetIndex = state.classes.indexOf(state.target);
  state.suggestions.forEach((candidate: Candidate, rank) => {
    const row = el("div", "suggestion");
    row.dataset.candidateId = candidate.id;
    row.dataset.rank = String(rank);
    row.appendChild(el("span", `badge badge-${candidate.perturbation.kind}`,
      candidate.perturbation.kind));
    const preview = candidate.perturbation.kind === "remove"
      ? `remove ${candidate.perturbation.original.trim()}`
      : candidate.perturbation.payload.trim();
    row.appendChild(el("span", "preview", preview));
    const after = el("span", "conf-after",
      `${state.target} -> ${pct(candidate.conf_after[targetIndex])}`);
    after.dataset.confAfter = String(candidate.conf_after[targetIndex]);
    row.appendChild(after);
    row.appendChild(el("span", "gain", `(${candidate.gain >= 0 ? "+" : ""}${pct(candidate.gain)})`));
    const apply = el("button", "apply-button", "apply");
    apply.addEventListener("click", () => handlers.onApply(candidate.id));
    row.appendChild(apply);
    box.appendChild(row);
  });
  return box;
}

function renderTimeline(state: WorkbenchState): HTMLElement {
  const box = el("ol", "timeline");
  state.steps.forEach((step, i) => {
    const item = el("li", "step");
    const p = step.perturbation;
    const what = p.kind === "remove" ? `removed ${p.original.trim()}`
      : p.kind === "insert" ? `inserted ${p.payload.trim()}`
      : `${p.original} -> ${p.payload}`;
    item.textContent = `${i + 1}. ${p.kind} via ${p.method}: ${what}`;
    const conf = el("span", "step-conf",
      ` [${step.conf_after.map(pct).join(" ")}]`);
    conf.dataset.confAfter = JSON.stringify(step.conf_after);
    item.appendChild(conf);
    box.appendChild(item);
  });
  return box;
}

export function renderWorkbench(
  root: HTMLElement,
  state: WorkbenchState,
  handlers: Handlers,
): void {
  root.textContent = "";
  const banner = renderBanner(state);
  if (banner) root.appendChild(banner);
  if (state.offline) return; // block all interaction while unreachable

  root.appendChild(el("h2", undefined, `session ${state.sessionId} on ${state.model} (${state.mode}-box)`));
  root.appendChild(renderHeatmapText(state));
  root.appendChild(renderConfidenceBars(state));
  root.appendChild(renderTargetSelector(state, handlers));
  root.appendChild(renderSuggestControls(handlers));
  root.appendChild(renderSnippetForm(state, handlers));
  root.appendChild(renderSuggestions(state, handlers));

  const undo = el("button", "undo-button", "undo");
  undo.disabled = !state.canUndo;
  undo.addEventListener("click", handlers.onUndo);
  root.appendChild(undo);

  root.appendChild(el("h3", undefined, "trace"));
  root.appendChild(renderTimeline(state));
}
