/**
 * Plan drafting: partition the conflict scope into keep/cancel, order the
 * merge's actions, and validate everything the server would reject, before
 * the submit button ever enables.
 */

import type {
  ActionJson,
  ConflictJson,
  GraphJson,
  NodeJson,
  PlanJson,
} from "./types.js";

export interface DraftProblem {
  code:
    | "overlap"
    | "incomplete-partition"
    | "unknown-op"
    | "foreign-register"
    | "no-conflict";
  detail: string;
}

export class PlanDraft {
  keep: Set<string>;
  cancel: Set<string>;
  merged: ActionJson[];
  /** Graph nodes plus the (possibly still suspended) trigger operation. */
  private nodes: NodeJson[];

  constructor(
    readonly conflict: ConflictJson,
    readonly graph: GraphJson,
  ) {
    this.nodes = [...graph.nodes];
    if (!this.nodes.some((n) => n.id === conflict.trigger)) {
      this.nodes.push({
        id: conflict.trigger,
        actions: conflict.trigger_actions ?? [],
        premises: conflict.trigger_premises ?? [],
      });
    }
    // Default partition: keep everything, cancel nothing.
    this.keep = new Set(conflict.scope);
    this.cancel = new Set();
    this.merged = replayedActions(conflict.scope, this.keep, this.nodes);
  }

  /** Registers any scope operation acts on; merged actions must stay inside. */
  participatingRegisters(): Set<number> {
    const regs = new Set<number>();
    for (const node of this.nodes) {
      if (!this.conflict.scope.includes(node.id)) continue;
      for (const a of node.actions) regs.add(a.reg);
    }
    return regs;
  }

  setDisposition(op: string, disposition: "keep" | "cancel"): void {
    this.keep.delete(op);
    this.cancel.delete(op);
    (disposition === "keep" ? this.keep : this.cancel).add(op);
    this.merged = replayedActions(this.conflict.scope, this.keep, this.nodes);
  }

  moveAction(index: number, delta: -1 | 1): void {
    const target = index + delta;
    if (index < 0 || index >= this.merged.length) return;
    if (target < 0 || target >= this.merged.length) return;
    const a = this.merged[index]!;
    this.merged[index] = this.merged[target]!;
    this.merged[target] = a;
  }

  removeAction(index: number): void {
    this.merged.splice(index, 1);
  }

  addAction(action: ActionJson): void {
    this.merged.push(action);
  }

  problems(): DraftProblem[] {
    const out: DraftProblem[] = [];
    const scope = new Set(this.conflict.scope);
    for (const op of this.keep) {
      if (this.cancel.has(op)) {
        out.push({ code: "overlap", detail: `${op} both kept and cancelled` });
      }
    }
    for (const op of [...this.keep, ...this.cancel]) {
      if (!scope.has(op)) {
        out.push({ code: "unknown-op", detail: `${op} outside the conflict scope` });
      }
    }
    for (const op of scope) {
      if (!this.keep.has(op) && !this.cancel.has(op)) {
        out.push({
          code: "incomplete-partition",
          detail: `${op} neither kept nor cancelled`,
        });
      }
    }
    const allowed = this.participatingRegisters();
    for (const a of this.merged) {
      if (!allowed.has(a.reg)) {
        out.push({
          code: "foreign-register",
          detail: `merged action on register ${a.reg}, which no scope operation touches`,
        });
      }
    }
    return out;
  }

  valid(): boolean {
    return this.problems().length === 0;
  }

  toPlan(): PlanJson {
    return {
      trigger: this.conflict.trigger,
      keep: [...this.keep].sort(),
      cancel: [...this.cancel].sort(),
      merged: this.merged,
    };
  }
}

/**
 * Default merged sequence: kept operations' actions in operation-id order
 * (counter first, then replica), mirroring the server's replay-all default.
 */
export function replayedActions(
  scope: string[],
  keep: Set<string>,
  nodes: NodeJson[] | GraphJson,
): ActionJson[] {
  const list = Array.isArray(nodes) ? nodes : nodes.nodes;
  const byId = new Map(list.map((n) => [n.id, n]));
  const ordered = [...scope]
    .filter((id) => keep.has(id))
    .sort((a, b) => compareOpIds(a, b));
  const out: ActionJson[] = [];
  for (const id of ordered) {
    const node = byId.get(id);
    if (!node) continue;
    for (const a of node.actions) out.push({ ...a });
  }
  return out;
}

export function compareOpIds(a: string, b: string): number {
  const [ra, ca] = splitOpId(a);
  const [rb, cb] = splitOpId(b);
  if (ca !== cb) return ca - cb;
  return ra < rb ? -1 : ra > rb ? 1 : 0;
}

function splitOpId(id: string): [string, number] {
  const cut = id.lastIndexOf(":");
  return [id.slice(0, cut), Number(id.slice(cut + 1))];
}
