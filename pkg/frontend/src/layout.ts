/**
 * Layered DAG layout for the entailment graph.
 *
 * Operations sit on the layer one past their deepest predecessor, where
 * predecessors are premises plus rebase targets (a merge operation draws
 * above the operations rebased under it, matching the journal's ordering).
 */

import type { GraphJson } from "./types.js";
import { compareOpIds } from "./plan.js";

export interface NodePosition {
  id: string;
  x: number;
  y: number;
  layer: number;
}

export interface Edge {
  from: string;
  to: string;
  rebase: boolean;
}

export interface Layout {
  positions: Map<string, NodePosition>;
  edges: Edge[];
  width: number;
  height: number;
}

const TOMBSTONE = "@void:0";

export function predecessorsOf(graph: GraphJson, id: string): string[] {
  const node = graph.nodes.find((n) => n.id === id);
  const preds = new Set<string>(node ? node.premises : []);
  for (const target of graph.rebases[id] ?? []) {
    if (target !== TOMBSTONE) preds.add(target);
  }
  return [...preds];
}

export function layoutGraph(
  graph: GraphJson,
  nodeGap = 130,
  layerGap = 90,
): Layout {
  const ids = graph.nodes.map((n) => n.id);
  const layer = new Map<string, number>();
  // Longest-path layering; nodes arrive premise-sorted via repeated sweeps.
  let changed = true;
  let guard = 0;
  while (changed && guard++ < ids.length + 2) {
    changed = false;
    for (const id of ids) {
      const preds = predecessorsOf(graph, id);
      const want = preds.length
        ? 1 + Math.max(...preds.map((p) => layer.get(p) ?? 0))
        : 0;
      if (layer.get(id) !== want) {
        layer.set(id, want);
        changed = true;
      }
    }
  }
  const byLayer = new Map<number, string[]>();
  for (const id of ids) {
    const l = layer.get(id) ?? 0;
    if (!byLayer.has(l)) byLayer.set(l, []);
    byLayer.get(l)!.push(id);
  }
  const positions = new Map<string, NodePosition>();
  let maxWidth = 1;
  for (const [l, members] of byLayer) {
    members.sort(compareOpIds);
    maxWidth = Math.max(maxWidth, members.length);
    members.forEach((id, i) => {
      positions.set(id, {
        id,
        x: (i - (members.length - 1) / 2) * nodeGap,
        y: l * layerGap,
        layer: l,
      });
    });
  }
  const edges: Edge[] = [];
  for (const node of graph.nodes) {
    for (const p of node.premises) {
      edges.push({ from: p, to: node.id, rebase: false });
    }
  }
  for (const [id, targets] of Object.entries(graph.rebases)) {
    for (const target of targets) {
      if (target === TOMBSTONE) continue; // cancellation drawn as a struck node
      edges.push({ from: target, to: id, rebase: true });
    }
  }
  const layers = byLayer.size;
  return {
    positions,
    edges,
    width: maxWidth * nodeGap + nodeGap,
    height: layers * layerGap + layerGap,
  };
}
