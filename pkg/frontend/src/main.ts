/**
 * Page wiring for the interactive reconcile UI.
 *
 * One in-flight mutation at a time; every view re-fetches after a mutation.
 * State changes flow only through POST /plan, /step and /sync.
 */

import { ReconcileApi } from "./api.js";
import { PlanDraft } from "./plan.js";
import { ghostFromConflict, graphSvg } from "./svg.js";
import type { ConflictJson, GraphJson, StateJson } from "./types.js";
import { actionLabel } from "./types.js";

const API_BASE =
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8642";

const api = new ReconcileApi(API_BASE);

let state: StateJson | null = null;
let conflicts: ConflictJson[] = [];
let graphs = new Map<string, GraphJson>();
let draft: PlanDraft | null = null;
let selectedOp: string | null = null;
let viewedReplica: string | null = null;
let busy = false;
let lastError: string | null = null;
let retry: (() => Promise<void>) | null = null;

function el<T extends HTMLElement = HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

async function refreshAll(): Promise<void> {
  state = await api.state();
  conflicts = await api.conflicts();
  graphs = new Map();
  for (const name of Object.keys(state.replicas)) {
    graphs.set(name, await api.graph(name));
  }
  if (!viewedReplica || !graphs.has(viewedReplica)) {
    viewedReplica = conflicts[0]?.replica ?? Object.keys(state.replicas)[0] ?? null;
  }
  const active = conflicts[0] ?? null;
  if (active && (!draft || draft.conflict.trigger !== active.trigger)) {
    const g = graphs.get(active.replica);
    draft = g ? new PlanDraft(active, g) : null;
  }
  if (!active) draft = null;
  render();
}

async function mutate(action: () => Promise<void>): Promise<void> {
  if (busy) return;
  busy = true;
  lastError = null;
  retry = null;
  render();
  try {
    await action();
    await refreshAll();
  } catch (err) {
    lastError = String(err);
    retry = action as () => Promise<void>;
  } finally {
    busy = false;
    render();
  }
}

function render(): void {
  renderStatus();
  renderState();
  renderGraph();
  renderConflict();
}

function renderStatus(): void {
  const bar = el("status");
  if (lastError) {
    bar.innerHTML =
      `<span class="error">${lastError}</span> ` +
      `<button id="retry-btn">retry</button>`;
    el("retry-btn").onclick = () => {
      const again = retry;
      if (again) void mutate(again);
    };
    return;
  }
  bar.textContent = busy
    ? "working…"
    : state
      ? `scenario ${state.scenario} — ${state.remaining_events} scripted events left, ` +
        `${conflicts.length} pending conflict(s)`
      : "connecting…";
}

function renderState(): void {
  const table = el("state-table");
  if (!state) {
    table.innerHTML = "";
    return;
  }
  const regs = state.registers;
  let html = "<tr><th>replica</th>";
  for (const r of regs) html += `<th>r${r.index} (${r.kind})</th>`;
  html += "</tr>";
  for (const [name, values] of Object.entries(state.replicas)) {
    html += `<tr><td>${name}</td>`;
    for (const r of regs) {
      html += `<td>${JSON.stringify(values[String(r.index)])}</td>`;
    }
    html += "</tr>";
  }
  table.innerHTML = html;

  const picker = el<HTMLSelectElement>("replica-picker");
  picker.innerHTML = Object.keys(state.replicas)
    .map(
      (n) =>
        `<option value="${n}"${n === viewedReplica ? " selected" : ""}>${n}</option>`,
    )
    .join("");
  picker.onchange = () => {
    viewedReplica = picker.value;
    render();
  };
  el<HTMLButtonElement>("step-btn").onclick = () =>
    void mutate(async () => {
      await api.step();
    });
}

function renderGraph(): void {
  const host = el("graph-host");
  const g = viewedReplica ? graphs.get(viewedReplica) : null;
  if (!g) {
    host.innerHTML = "<em>no graph</em>";
    return;
  }
  const active = conflicts.find((c) => c.replica === viewedReplica);
  const ghost = active ? ghostFromConflict(active, g) : null;
  host.innerHTML = graphSvg(g, {
    highlightPremises: new Set(active?.conflicting_premises ?? []),
    scope: new Set(active?.scope ?? []),
    selected: selectedOp,
    ghosts: ghost ? [ghost] : [],
  });
  for (const nodeEl of host.querySelectorAll<SVGGElement>("g.node")) {
    nodeEl.style.cursor = "pointer";
    nodeEl.addEventListener("click", () => {
      selectedOp = nodeEl.dataset.op ?? null;
      render();
    });
  }
  const detail = el("node-detail");
  const node = g.nodes.find((n) => n.id === selectedOp);
  if (!node) {
    detail.innerHTML = "<em>select an operation to inspect it</em>";
    return;
  }
  detail.innerHTML =
    `<b>${node.id}</b><br>actions: ${
      node.actions.map(actionLabel).join("; ") || "(none)"
    }<br>premises: ${node.premises.join(", ") || "(none)"}`;
}

function renderConflict(): void {
  const host = el("conflict-panel");
  const active = conflicts[0];
  if (!active || !draft) {
    host.innerHTML = "<em>no pending conflicts</em>";
    return;
  }
  const d = draft;
  let html = `<h3>conflict at ${active.trigger} (replica ${active.replica})</h3>`;
  html += `<p>conflicting premises: ${active.conflicting_premises.join(", ")}</p>`;
  html += `<table class="scope"><tr><th>operation</th><th>keep</th><th>cancel</th></tr>`;
  for (const op of [...active.scope].sort()) {
    html +=
      `<tr><td>${op}</td>` +
      `<td><input type="radio" name="disp-${op}" data-op="${op}" data-d="keep"` +
      `${d.keep.has(op) ? " checked" : ""}></td>` +
      `<td><input type="radio" name="disp-${op}" data-op="${op}" data-d="cancel"` +
      `${d.cancel.has(op) ? " checked" : ""}></td></tr>`;
  }
  html += "</table>";
  html += "<h4>merged actions (ordered)</h4><ol id='merged-list'>";
  d.merged.forEach((a, i) => {
    html +=
      `<li>${actionLabel(a)} ` +
      `<button data-move="${i}:-1">↑</button>` +
      `<button data-move="${i}:1">↓</button>` +
      `<button data-remove="${i}">✕</button></li>`;
  });
  html += "</ol>";
  const regs = [...d.participatingRegisters()].sort((a, b) => a - b);
  html +=
    `<div class="add-action">add: <select id="new-reg">` +
    regs.map((r) => `<option value="${r}">r${r}</option>`).join("") +
    `</select> <select id="new-kind"><option>mov</option><option>add</option>` +
    `<option>mul</option><option>touch</option></select>` +
    ` value <input id="new-value" size="8"> t <input id="new-t" size="3">` +
    ` <button id="add-action-btn">append</button></div>`;
  const problems = d.problems();
  if (problems.length) {
    html += `<ul class="problems">${problems
      .map((p) => `<li>${p.code}: ${p.detail}</li>`)
      .join("")}</ul>`;
  }
  html += `<button id="submit-btn"${problems.length || busy ? " disabled" : ""}>submit plan</button>`;
  host.innerHTML = html;

  for (const input of host.querySelectorAll<HTMLInputElement>("input[type=radio]")) {
    input.onchange = () => {
      d.setDisposition(input.dataset.op!, input.dataset.d as "keep" | "cancel");
      render();
    };
  }
  for (const btn of host.querySelectorAll<HTMLButtonElement>("[data-move]")) {
    btn.onclick = () => {
      const [i, delta] = btn.dataset.move!.split(":").map(Number);
      d.moveAction(i!, delta as -1 | 1);
      render();
    };
  }
  for (const btn of host.querySelectorAll<HTMLButtonElement>("[data-remove]")) {
    btn.onclick = () => {
      d.removeAction(Number(btn.dataset.remove));
      render();
    };
  }
  el<HTMLButtonElement>("add-action-btn").onclick = () => {
    const reg = Number(el<HTMLSelectElement>("new-reg").value);
    const kind = el<HTMLSelectElement>("new-kind").value;
    const rawValue = el<HTMLInputElement>("new-value").value;
    const rawT = el<HTMLInputElement>("new-t").value;
    d.addAction({
      op: kind,
      reg,
      ...(rawValue !== "" ? { value: coerce(rawValue) } : {}),
      ...(rawT !== "" ? { t: Number(rawT) } : {}),
    });
    render();
  };
  el<HTMLButtonElement>("submit-btn").onclick = () =>
    void mutate(async () => {
      const outcome = await api.submitPlan(d.toPlan());
      if (outcome.kind !== "applied") {
        throw new Error(`plan rejected: ${outcome.reason}`);
      }
    });
}

function coerce(raw: string): unknown {
  const n = Number(raw);
  return Number.isFinite(n) && raw.trim() !== "" ? n : raw;
}

void refreshAll().catch((err) => {
  lastError = String(err);
  render();
});
