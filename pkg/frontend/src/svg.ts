/**
 * Pure SVG markup for an entailment graph: solid entails arrows, dashed
 * rebase arrows, struck labels on cancelled operations.  Every drawn edge
 * corresponds to an edge in the fetched serialization.
 */

import type { ConflictJson, GraphJson, NodeJson } from "./types.js";
import { actionLabel } from "./types.js";
import { layoutGraph } from "./layout.js";

const TOMBSTONE = "@void:0";

export interface SvgOptions {
  highlightPremises?: Set<string>;
  scope?: Set<string>;
  selected?: string | null;
  /** Operations not yet integrated (suspended triggers), drawn dotted. */
  ghosts?: NodeJson[];
}

/** The pending trigger as a renderable node when the graph lacks it. */
export function ghostFromConflict(
  conflict: ConflictJson,
  graph: GraphJson,
): NodeJson | null {
  if (graph.nodes.some((n) => n.id === conflict.trigger)) return null;
  return {
    id: conflict.trigger,
    actions: conflict.trigger_actions ?? [],
    premises: conflict.trigger_premises ?? [],
  };
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function graphSvg(graph: GraphJson, options: SvgOptions = {}): string {
  const ghosts = (options.ghosts ?? []).filter(
    (g) => !graph.nodes.some((n) => n.id === g.id),
  );
  const drawn: GraphJson = ghosts.length
    ? { ...graph, nodes: [...graph.nodes, ...ghosts] }
    : graph;
  const ghostIds = new Set(ghosts.map((g) => g.id));
  const layout = layoutGraph(drawn);
  graph = drawn;
  const pad = 70;
  const minX = Math.min(...[...layout.positions.values()].map((p) => p.x));
  const maxX = Math.max(...[...layout.positions.values()].map((p) => p.x));
  const width = maxX - minX + 2 * pad;
  const height = layout.height + pad;
  const offsetX = -minX + pad;
  const cancelled = new Set(
    Object.entries(graph.rebases)
      .filter(([, targets]) => targets.includes(TOMBSTONE))
      .map(([id]) => id),
  );
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}" class="graph-svg">`,
  );
  parts.push(
    `<defs><marker id="arrow" viewBox="0 0 8 8" refX="7" refY="4" ` +
      `markerWidth="7" markerHeight="7" orient="auto-start-reverse">` +
      `<path d="M0,0 L8,4 L0,8 z" fill="#555"/></marker></defs>`,
  );
  for (const edge of layout.edges) {
    const a = layout.positions.get(edge.from);
    const b = layout.positions.get(edge.to);
    if (!a || !b) continue;
    const dash = edge.rebase ? ` stroke-dasharray="6 4"` : "";
    parts.push(
      `<line class="edge ${edge.rebase ? "rebase" : "entails"}" ` +
        `x1="${a.x + offsetX}" y1="${a.y + 46}" x2="${b.x + offsetX}" y2="${b.y + 10}" ` +
        `stroke="#555" stroke-width="1.3"${dash} marker-end="url(#arrow)"/>`,
    );
  }
  for (const node of graph.nodes) {
    const pos = layout.positions.get(node.id);
    if (!pos) continue;
    const x = pos.x + offsetX;
    const y = pos.y + 10;
    const isCancelled = cancelled.has(node.id);
    const isGhost = ghostIds.has(node.id);
    const isPremise = options.highlightPremises?.has(node.id) ?? false;
    const inScope = options.scope?.has(node.id) ?? false;
    const isSelected = options.selected === node.id;
    const classes = ["node"];
    if (isCancelled) classes.push("cancelled");
    if (isGhost) classes.push("incoming");
    if (isPremise) classes.push("conflicting-premise");
    if (inScope) classes.push("in-scope");
    if (isSelected) classes.push("selected");
    const fill = isPremise ? "#f6c2c2" : inScope ? "#cfe2ff" : "#f5e9c8";
    const stroke = isSelected ? "#1446a0" : isGhost ? "#7a7a7a" : "#444";
    const summary = node.actions.map(actionLabel).join("; ") || "(no actions)";
    parts.push(
      `<g class="${classes.join(" ")}" data-op="${esc(node.id)}">` +
        `<rect x="${x - 56}" y="${y}" width="112" height="36" rx="9" ` +
        `fill="${fill}" stroke="${stroke}" stroke-width="${isSelected ? 2.4 : 1.2}"` +
        `${isCancelled ? ` stroke-dasharray="4 3"` : isGhost ? ` stroke-dasharray="2 3"` : ""}/>` +
        `<text x="${x}" y="${y + 14}" text-anchor="middle" font-size="10" ` +
        `font-weight="bold">${esc(node.id)}</text>` +
        `<text x="${x}" y="${y + 27}" text-anchor="middle" font-size="8.5">` +
        `${esc(summary)}</text>` +
        (isCancelled
          ? `<line class="strike" x1="${x - 56}" y1="${y + 18}" x2="${x + 56}" ` +
            `y2="${y + 18}" stroke="#333" stroke-width="1.6"/>`
          : "") +
        `</g>`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}
